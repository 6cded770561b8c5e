"""Acceptance suite: one test per release criterion.

Each test prints a single [PASS]/[FAIL] line (visible with ``pytest -s``)
and enforces its stated tolerance and runtime budget. The suite needs no
trained models: record pools come from the deterministic surrogate.
"""

import time
from contextlib import contextmanager

import numpy as np

from blockeval.blockir import BlockTemplate, TensorShape, build_network, conv, depthwise, pointwise
from blockeval.costmodel import dwsep_reduction_factor, get_profile, layer_cost, network_cost
from blockeval.designspace import quantize_widths, sample, stage_plan, widths_per_block
from blockeval.designspace import DesignSpaceParams, SamplingRanges
from blockeval.errors import QuantizationError
from blockeval.harness import (
    ExperimentConfig,
    FamilySpec,
    cmd_compare,
    cmd_cost,
    cmd_ingest_surrogate,
    cmd_sample,
)
from blockeval.stats import (
    SampleRecord,
    curve_noise,
    edf,
    kneedle,
    pareto_front,
    recommend_sample_size,
)
from oracles import (
    brute_force_front,
    conv_mac_count,
    conv_param_count,
    direct_edf_value,
    reference_kneedle,
)


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"[FAIL] {name}")
        raise
    print(f"[PASS] {name}")


def random_conv_layers(rng, count):
    for _ in range(count):
        h = int(rng.integers(1, 9))
        w = int(rng.integers(1, 9))
        k = int(rng.choice([1, 3, 5]))
        stride = int(rng.choice([1, 2]))
        c_in = int(rng.integers(1, 13))
        c_out = int(rng.integers(1, 13))
        divisors = [g for g in range(1, c_in + 1) if c_in % g == 0 and c_out % g == 0]
        groups = int(rng.choice(divisors))
        yield conv(k, stride, c_in, c_out, groups), TensorShape(h, w, c_in)


def test_cost_model_oracle_equivalence():
    with criterion("cost-model oracle equivalence (10,000 layers, exact, < 1 min)"):
        start = time.monotonic()
        rng = np.random.default_rng(2024)
        for layer, shape in random_conv_layers(rng, 10_000):
            cost = layer_cost(layer, shape)
            assert cost.macs == conv_mac_count(
                shape.height,
                shape.width,
                layer.kernel_size,
                layer.stride,
                layer.in_channels,
                layer.out_channels,
                layer.groups,
            )
            assert cost.params == conv_param_count(
                layer.kernel_size, layer.in_channels, layer.out_channels, layer.groups
            )
        assert time.monotonic() - start < 60


def test_depthwise_separable_reduction():
    with criterion("depthwise-separable reduction factor (1e-12; 8-9x for wide convs)"):
        shape = TensorShape(16, 16, 48)
        for c_out in (32, 64, 72, 128):
            dw = layer_cost(depthwise(3, 1, 48), shape)
            pw = layer_cost(pointwise(48, c_out), shape)
            std = layer_cost(conv(3, 1, 48, c_out), shape)
            measured = (dw.macs + pw.macs) / std.macs
            expected = dwsep_reduction_factor(c_out, 3)
            assert abs(measured - expected) < 1e-12
            if c_out >= 72:
                assert 1 / 9 < measured <= 1 / 8


def test_edf_correctness():
    with criterion("EDF matches direct recomputation exactly on 1,000 record sets"):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            n = int(rng.integers(1, 40))
            errors = np.round(rng.uniform(0, 1, n), 4)
            records = [
                SampleRecord(f"m{i:03d}", {"macs": 1.0}, float(e)) for i, e in enumerate(errors)
            ]
            curve = edf(records)
            for t in rng.uniform(-0.1, 1.1, 5):
                assert curve.evaluate(float(t)) == direct_edf_value(errors, np.ones(n), t)
            fractions = curve.fractions
            assert all(0 <= f <= 1 for f in fractions)
            assert all(a <= b for a, b in zip(fractions, fractions[1:]))
            assert fractions[-1] == 1.0


def test_pareto_oracle_equivalence():
    with criterion("pareto front equals O(n^2) dominance brute force on 1,000 sets"):
        rng = np.random.default_rng(99)
        for _ in range(1000):
            n = int(rng.integers(1, 201))
            comps = rng.integers(1, 60, n).astype(float)
            errs = np.round(rng.uniform(0, 1, n), 3)
            records = [
                SampleRecord(f"m{i:04d}", {"macs": float(c)}, float(e))
                for i, (c, e) in enumerate(zip(comps, errs))
            ]
            front = pareto_front(records, "macs")
            expected = brute_force_front([(r.metric("macs"), r.error, r.model_id) for r in records])
            assert list(zip(front.complexities, front.errors, front.model_ids)) == expected

            refront = pareto_front(
                [
                    SampleRecord(mid, {"macs": c}, e)
                    for c, e, mid in zip(front.complexities, front.errors, front.model_ids)
                ],
                "macs",
            )
            assert refront.model_ids == front.model_ids

            transformed = [
                SampleRecord(r.model_id, {"macs": np.log1p(r.metric("macs")) ** 3}, r.error)
                for r in records
            ]
            assert set(pareto_front(transformed, "macs").model_ids) == set(front.model_ids)


def test_kneedle_criteria():
    with criterion("kneedle: exact corner, no-elbow line, reference agreement"):
        assert kneedle([(1, 9), (2, 6), (3, 3), (4, 3), (5, 3)]) == 3.0
        assert kneedle([(0, 10), (1, 8), (2, 6), (3, 4), (4, 2)]) is None
        rng = np.random.default_rng(5)
        for _ in range(100):
            n = int(rng.integers(12, 80))
            xs = np.sort(rng.uniform(0, 50, n))
            xs += np.arange(n) * 1e-6  # enforce strict increase
            ys = rng.uniform(0, 4) + rng.uniform(0.5, 30) / (
                xs - xs[0] + rng.uniform(0.5, 4)
            ) ** rng.uniform(0.5, 2.5)
            pts = np.column_stack([xs, ys])
            ours, ref = kneedle(pts), reference_kneedle(pts)
            assert ours is not None and ref is not None
            assert abs(int(np.searchsorted(xs, ours)) - int(np.searchsorted(xs, ref))) <= 1


def test_sample_size_methodology(synthetic_pool):
    with criterion(
        "sample-size methodology: decaying noise, zero at full pool, stable elbow (< 5 min)"
    ):
        start = time.monotonic()
        sizes = [50, 100, 200, 400]
        reps = 100
        noise = [curve_noise(synthetic_pool, "macs", n, repetitions=reps, seed=31) for n in sizes]
        # one Monte-Carlo standard error of a std estimate per comparison
        for a, b in zip(range(len(sizes) - 1), range(1, len(sizes))):
            tolerance = (noise[a] + noise[b]) / np.sqrt(2 * (reps - 1))
            assert noise[b] <= noise[a] + tolerance

        sub = synthetic_pool[:600]
        assert curve_noise(sub, "macs", len(sub), repetitions=5, seed=3) == 0.0

        elbows = [
            recommend_sample_size(synthetic_pool, "macs", repetitions=40, seed=s)
            for s in range(5)
        ]
        spread = (max(elbows) - min(elbows)) / max(elbows)
        assert spread <= 0.20
        assert time.monotonic() - start < 300


def test_latency_model_qualitative_reproduction():
    with criterion(
        "latency model: depthwise penalty > 1.5x on vpu, parity on mobile_cpu"
    ):
        vpu, cpu = get_profile("vpu"), get_profile("mobile_cpu")
        dwsep = BlockTemplate(conv_kind="depthwise_separable", bottleneck="none")
        standard = BlockTemplate(conv_kind="standard", bottleneck="none")
        params_list = sample(SamplingRanges(seed=11), 60)

        def family(template):
            out = []
            for params in params_list:
                net = build_network(stage_plan(params), template, 160, 2, params=params)
                report = network_cost(net, [vpu, cpu])
                out.append((report.macs, report.latency["vpu"], report.latency["mobile_cpu"]))
            return sorted(out)

        dw_models, std_models = family(dwsep), family(standard)
        pairs = []
        for macs, dw_vpu, dw_cpu in dw_models:
            closest = min(std_models, key=lambda s: abs(s[0] - macs) / macs)
            if abs(closest[0] - macs) / macs <= 0.05:
                pairs.append(((dw_vpu, dw_cpu), (closest[1], closest[2])))
        assert len(pairs) >= 10, "need enough equal-MAC pairs to compare"
        vpu_ratios = [dw[0] / std[0] for dw, std in pairs]
        cpu_ratios = [dw[1] / std[1] for dw, std in pairs]
        assert min(vpu_ratios) > 1.5
        assert all(0.8 <= r <= 1.2 for r in cpu_ratios)


def test_width_quantization():
    with criterion("width quantization invariants on 10,000 draws + worked example"):
        params = DesignSpaceParams(depth=6, initial_width=24, slope=8, quantization=2)
        assert stage_plan(params).stages == ((24, 2), (48, 4))

        rng = np.random.default_rng(17)
        accepted = 0
        for _ in range(10_000):
            params = DesignSpaceParams(
                depth=int(rng.integers(4, 25)),
                initial_width=int(rng.integers(1, 13)) * 8,
                slope=float(rng.uniform(0, 48)),
                quantization=float(rng.uniform(1.2, 3.5)),
            )
            try:
                plan = quantize_widths(
                    widths_per_block(params), params.initial_width, params.quantization
                )
            except QuantizationError:
                continue
            accepted += 1
            widths = plan.widths
            assert 1 <= len(widths) <= 4
            assert all(w % 8 == 0 for w in widths)
            assert all(a < b for a, b in zip(widths, widths[1:]))
            assert plan.total_depth == params.depth
        assert accepted > 3000, "acceptance rate suspiciously low"


def test_end_to_end_determinism(tmp_path):
    with criterion("end-to-end determinism: byte-identical CSVs across reruns (< 2 min)"):
        start = time.monotonic()
        config = ExperimentConfig(
            name="accept",
            families=(
                FamilySpec("dw", BlockTemplate(conv_kind="depthwise_separable")),
                FamilySpec("std", BlockTemplate(conv_kind="standard")),
            ),
            sample_count=130,
            input_resolution=160,
            profiles=("vpu", "mobile_cpu"),
            seed=20_24,
        )

        def pipeline(tag):
            run = cmd_sample(config, run_dir=tmp_path / tag / "run")
            cmd_cost(run, [get_profile("vpu"), get_profile("mobile_cpu")])
            cmd_ingest_surrogate(run, seed=6)
            for statistic in ("pareto", "edf", "samplesize"):
                cmd_compare(
                    [run],
                    metric="macs",
                    statistic=statistic,
                    out_dir=tmp_path / tag / "cmp",
                    seed=1,
                    repetitions=20,
                )
            return tmp_path / tag

        first, second = pipeline("a"), pipeline("b")
        compared = 0
        for csv_a in sorted(first.rglob("*.csv")):
            csv_b = second / csv_a.relative_to(first)
            assert csv_b.exists(), csv_b
            assert csv_a.read_bytes() == csv_b.read_bytes(), csv_a.name
            compared += 1
        assert compared >= 6
        records_a = (first / "run" / "records.jsonl").read_bytes()
        records_b = (second / "run" / "records.jsonl").read_bytes()
        assert records_a == records_b
        assert time.monotonic() - start < 120
