"""From four hyperparameters to a staged network.

Shows the linear per-block width rule, quantization into stages, and
seeded random sampling of the whole space.
"""

from collections import Counter

from blockeval import (
    BlockTemplate,
    DesignSpaceParams,
    SamplingRanges,
    build_network,
    sample,
    stage_plan,
    widths_per_block,
)

params = DesignSpaceParams(depth=16, initial_width=24, slope=14.0, quantization=2.2)
widths = widths_per_block(params)
print("per-block target widths:")
print("  " + " ".join(f"{w:.0f}" for w in widths))

plan = stage_plan(params)
print(f"quantized stages (width x blocks): {plan.stages}")

net = build_network(plan, BlockTemplate(conv_kind="depthwise_separable"), input_resolution=160)
print(f"network: {net.num_blocks} blocks, {len(net.layers)} layers, "
      f"stage entries at {net.stage_boundaries}")

# sampling is reproducible per seed and rejects plans with too many stages
ranges = SamplingRanges(seed=123)
draws = sample(ranges, 130)
assert draws == sample(ranges, 130)

stage_counts = Counter(len(stage_plan(p).stages) for p in draws)
print("\n130 sampled models, stages histogram:")
for stages in sorted(stage_counts):
    print(f"  {stages} stage(s): {'#' * stage_counts[stages]} {stage_counts[stages]}")

depths = [p.depth for p in draws]
print(f"depth range over the sample: {min(depths)}..{max(depths)}")
