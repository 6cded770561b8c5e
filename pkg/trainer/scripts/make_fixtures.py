"""Regenerate the trainer's test fixtures from the evaluation package.

Writes 100 random small specs covering every template variant, plus two
handpicked specs used by the shape tests, together with the analytic
parameter/MAC counts the trainer must reproduce.

Run from the repository root:  python trainer/scripts/make_fixtures.py
"""

import itertools
import json
import shutil
from pathlib import Path

from blockeval import BlockTemplate, build_network, network_cost, sample, stage_plan
from blockeval.designspace import ParamRange, SamplingRanges
from blockeval.harness import model_id

FIXTURES = Path(__file__).resolve().parent.parent / "test" / "fixtures"

TEMPLATES = [
    BlockTemplate(conv_kind="standard", bottleneck="none"),
    BlockTemplate(conv_kind="standard", bottleneck="none", use_se=True),
    BlockTemplate(conv_kind="depthwise_separable", bottleneck="none"),
    BlockTemplate(conv_kind="depthwise_separable", bottleneck="none", use_se=True),
    BlockTemplate(conv_kind="grouped", groups=2, bottleneck="none"),
    BlockTemplate(conv_kind="grouped", groups=4, bottleneck="regular", bottleneck_ratio=0.5),
    BlockTemplate(conv_kind="standard", bottleneck="regular", bottleneck_ratio=0.25),
    BlockTemplate(conv_kind="depthwise_separable", bottleneck="inverted", expansion=4.0),
    BlockTemplate(conv_kind="depthwise_separable", bottleneck="inverted", expansion=6.0, use_se=True),
    BlockTemplate(conv_kind="grouped", groups=2, bottleneck="inverted", expansion=2.0, use_se=True),
]


def main() -> None:
    specs_dir = FIXTURES / "specs"
    if specs_dir.exists():
        shutil.rmtree(specs_dir)
    specs_dir.mkdir(parents=True)

    ranges = SamplingRanges(
        depth=ParamRange(4, 10),
        initial_width=ParamRange(8, 48),
        slope=ParamRange(0, 12),
        quantization=ParamRange(1.5, 3.0),
        seed=2718,
    )
    params_list = sample(ranges, 100)
    expected = {}
    for params, template in zip(params_list, itertools.cycle(TEMPLATES)):
        net = build_network(
            stage_plan(params), template, input_resolution=32, num_classes=2, params=params
        )
        report = network_cost(net)
        mid = model_id(net)
        (specs_dir / f"{mid}.json").write_text(net.to_json())
        expected[mid] = {
            "params": report.params,
            "macs": report.macs,
            "conv_kind": template.conv_kind,
            "bottleneck": template.bottleneck,
            "use_se": template.use_se,
        }

    # handpicked specs for the shape/forward tests (model-id file names,
    # like every spec the sampling pipeline writes)
    tiny = build_network([(8, 1)] * 4, BlockTemplate(conv_kind="standard"), 32, 2)
    (FIXTURES / f"{model_id(tiny)}.json").write_text(tiny.to_json())
    se_net = build_network(
        [(8, 1)],
        BlockTemplate(conv_kind="depthwise_separable", bottleneck="inverted",
                      expansion=4.0, use_se=True),
        32,
        2,
    )
    (FIXTURES / f"{model_id(se_net)}.json").write_text(se_net.to_json())
    meta = {
        "expected": expected,
        "tiny_net": {"params": network_cost(tiny).params, "model_id": model_id(tiny)},
        "se_net": {"params": network_cost(se_net).params, "model_id": model_id(se_net)},
    }
    (FIXTURES / "expected.json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    print(f"wrote {len(expected)} specs + 2 handpicked under {FIXTURES}")


if __name__ == "__main__":
    main()
