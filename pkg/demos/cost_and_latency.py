"""Analytic costs and the depthwise-vs-standard latency story.

Depthwise separable convolutions cut MACs by roughly 1/C_out + 1/K^2, but
on accelerator-style profiles the saved arithmetic does not translate into
saved time: low data reuse leaves the wide units idle. This script costs
two equal-MAC models and prints the per-profile latency comparison.
"""

from blockeval import (
    BlockTemplate,
    build_network,
    dwsep_reduction_factor,
    example_profiles,
    network_cost,
)

print("reduction factor for 3x3 kernels:")
for c_out in (16, 32, 72, 128, 256):
    factor = dwsep_reduction_factor(c_out, 3)
    print(f"  C_out={c_out:<4} -> {factor:.4f}  ({1 / factor:.1f}x fewer MACs)")

profiles = list(example_profiles().values())

# widen the depthwise model until the two models cost about the same MACs
standard = build_network(
    [(32, 2), (64, 3), (128, 3), (256, 2)],
    BlockTemplate(conv_kind="standard", bottleneck="none"),
)
dwsep = build_network(
    [(96, 2), (184, 3), (368, 3), (736, 2)],
    BlockTemplate(conv_kind="depthwise_separable", bottleneck="none"),
)
std_report = network_cost(standard, profiles)
dw_report = network_cost(dwsep, profiles)

print(f"\nstandard-conv model:  {std_report.macs / 1e6:8.1f} MMACs, "
      f"{std_report.params / 1e6:.2f} M params")
print(f"depthwise-sep model:  {dw_report.macs / 1e6:8.1f} MMACs, "
      f"{dw_report.params / 1e6:.2f} M params")
print(f"MAC ratio dw/std: {dw_report.macs / std_report.macs:.3f}\n")

print(f"{'profile':<14} {'standard':>12} {'depthwise':>12} {'dw/std':>8}")
for profile in profiles:
    t_std = std_report.latency[profile.name]
    t_dw = dw_report.latency[profile.name]
    print(f"{profile.name:<14} {t_std * 1e3:>10.2f}ms {t_dw * 1e3:>10.2f}ms "
          f"{t_dw / t_std:>8.2f}")

print("\nphone-CPU-style profiles run both at similar speed; the wide-SIMD")
print("profiles (vpu, embedded_gpu, server_gpu) pay a clear depthwise penalty.")
