"""End-to-end family comparison with surrogate accuracy.

Runs the whole pipeline on three families (standard conv, depthwise
separable, depthwise + SE): sample specs, cost them on two hardware
profiles, attach deterministic surrogate errors, and emit EDF and pareto
comparisons. Outputs land in demo_output/family_comparison/.
"""

from pathlib import Path

from blockeval import BlockTemplate, get_profile
from blockeval.designspace import SamplingRanges
from blockeval.harness import (
    ExperimentConfig,
    FamilySpec,
    cmd_compare,
    cmd_cost,
    cmd_ingest_surrogate,
    cmd_sample,
)

out_root = Path("demo_output/family_comparison")
run_dir = out_root / "run"
if run_dir.exists():
    import shutil

    shutil.rmtree(out_root)

config = ExperimentConfig(
    name="three-families",
    families=(
        FamilySpec("standard", BlockTemplate(conv_kind="standard", bottleneck="none")),
        FamilySpec("dwsep", BlockTemplate(conv_kind="depthwise_separable", bottleneck="none")),
        FamilySpec(
            "dwsep-se",
            BlockTemplate(conv_kind="depthwise_separable", bottleneck="inverted", use_se=True),
        ),
    ),
    ranges=SamplingRanges(),
    sample_count=130,
    input_resolution=160,
    profiles=("vpu", "mobile_cpu"),
    seed=7,
)

run = cmd_sample(config, run_dir=run_dir)
print(f"sampled 3 x {config.sample_count} specs into {run}")
cmd_cost(run, [get_profile("vpu"), get_profile("mobile_cpu")])
result = cmd_ingest_surrogate(run, seed=7)
print(f"attached surrogate errors to {result.joined} models")

for metric in ("macs", "latency:vpu"):
    for statistic in ("pareto", "edf"):
        out = out_root / metric.replace(":", "_")
        comparison = cmd_compare([run], metric=metric, statistic=statistic, out_dir=out)
        print(f"{statistic:>7} on {metric:<12} -> {comparison.csv_path}")

summary = (out_root / "latency_vpu" / "pareto_summary.csv").read_text().splitlines()
print("\nbest family per vpu-latency band:")
for line in summary:
    print("  " + line)
print("\nopen the SVG files next to each CSV for a quick look.")
