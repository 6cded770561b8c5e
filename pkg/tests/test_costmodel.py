from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockeval.blockir import (
    BlockTemplate,
    TensorShape,
    build_network,
    conv,
    depthwise,
    fully_connected,
    global_avg_pool,
    pointwise,
    residual_add,
    squeeze_excite,
)
from blockeval.costmodel import (
    CORE_LAYER_CLASSES,
    HardwareProfile,
    canonical_signature,
    dwsep_reduction_factor,
    estimate_latency,
    example_profiles,
    get_profile,
    layer_class,
    layer_cost,
    network_cost,
    read_kernel_table,
)
from blockeval.errors import ConfigError
from oracles import conv_mac_count, conv_param_count, fc_mac_count, gap_mac_count, se_mac_count


def random_conv_layers(rng, count):
    """Random small conv layers paired with matching input shapes."""
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


class TestConvCounting:
    def test_frozen_standard_conv(self):
        cost = layer_cost(conv(3, 1, 16, 32), TensorShape(32, 32, 16))
        assert cost.macs == 4_718_592
        assert cost.params == 4_608
        assert cost.output_activations == 32_768
        assert cost.bytes_moved == 53_760

    def test_frozen_dwsep_pair_and_ratio(self):
        shape = TensorShape(32, 32, 16)
        dw = layer_cost(depthwise(3, 1, 16), shape)
        pw = layer_cost(pointwise(16, 32), shape)
        std = layer_cost(conv(3, 1, 16, 32), shape)
        assert dw.macs == 147_456
        assert pw.macs == 524_288
        ratio = (dw.macs + pw.macs) / std.macs
        assert ratio == pytest.approx(1 / 32 + 1 / 9, abs=1e-15)

    def test_frozen_se_cost(self):
        cost = layer_cost(squeeze_excite(32, 4), TensorShape(16, 16, 32))
        assert cost.macs == 2 * 32 * 32 // 4 + 2 * 16 * 16 * 32 == 16_896
        assert cost.params == 512

    def test_small_oracle_sweep(self):
        rng = np.random.default_rng(0)
        for layer, shape in random_conv_layers(rng, 300):
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

    def test_head_layer_oracles(self):
        assert layer_cost(global_avg_pool(), TensorShape(7, 5, 9)).macs == gap_mac_count(7, 5, 9)
        assert layer_cost(fully_connected(48, 10), TensorShape(1, 1, 48)).macs == fc_mac_count(48, 10)
        for h, w, c, r in [(6, 6, 8, 4), (3, 7, 12, 2), (1, 1, 16, 8)]:
            assert layer_cost(squeeze_excite(c, r), TensorShape(h, w, c)).macs == se_mac_count(
                h, w, c, r
            )

    def test_add_is_free_compute_but_moves_memory(self):
        cost = layer_cost(residual_add(16), TensorShape(8, 8, 16))
        assert cost.macs == 0 and cost.params == 0
        assert cost.bytes_moved == 3 * 8 * 8 * 16


class TestReductionFactor:
    def test_paper_figures(self):
        assert dwsep_reduction_factor(72, 3) == 0.125
        assert dwsep_reduction_factor(32, 3) == pytest.approx(0.14236111, abs=1e-8)
        assert dwsep_reduction_factor(1, 1) == 2.0

    @given(c_steps=st.integers(1, 64), c_in=st.integers(1, 64))
    @settings(max_examples=100, deadline=None)
    def test_matches_measured_mac_ratio(self, c_steps, c_in):
        c_out = c_steps  # any positive width
        shape = TensorShape(16, 16, c_in)
        dw = layer_cost(depthwise(3, 1, c_in), shape)
        pw = layer_cost(pointwise(c_in, c_out), shape)
        std = layer_cost(conv(3, 1, c_in, c_out), shape)
        assert (dw.macs + pw.macs) / std.macs == pytest.approx(
            dwsep_reduction_factor(c_out, 3), rel=1e-12
        )

    def test_grouped_macs_non_increasing_in_groups(self):
        shape = TensorShape(16, 16, 24)
        macs = [
            layer_cost(conv(3, 1, 24, 24, groups=g), shape).macs for g in (1, 2, 3, 4, 6, 12, 24)
        ]
        assert all(a >= b for a, b in zip(macs, macs[1:]))


def flat_profile(peak=1e9, bandwidth=1e9, bytes_per_element=4, **overrides):
    utilization = {cls: 1.0 for cls in CORE_LAYER_CLASSES}
    utilization.update(overrides)
    return HardwareProfile(
        name="test",
        peak_macs_per_second=peak,
        memory_bandwidth=bandwidth,
        bytes_per_element=bytes_per_element,
        utilization=utilization,
    )


class TestLatency:
    def test_compute_bound_conv(self):
        net = _single_layer_net(conv(3, 1, 16, 32), TensorShape(32, 32, 16))
        assert estimate_latency(net, flat_profile()) == pytest.approx(4.718592e-3, rel=1e-9)

    def test_derated_depthwise(self):
        net = _single_layer_net(depthwise(3, 1, 16), TensorShape(32, 32, 16))
        profile = flat_profile(depthwise_conv=0.1)
        assert estimate_latency(net, profile) == pytest.approx(1.47456e-3, rel=1e-9)

    def test_memory_bound_when_bandwidth_is_small(self):
        net = _single_layer_net(conv(3, 1, 16, 32), TensorShape(32, 32, 16))
        profile = flat_profile(bandwidth=1e6)
        assert estimate_latency(net, profile) == pytest.approx(53760 * 4 / 1e6, rel=1e-9)

    def test_kernel_table_short_circuits(self, tmp_path):
        net = _single_layer_net(conv(3, 1, 16, 32), TensorShape(32, 32, 16))
        sig = canonical_signature(net.layers[0], net.shapes[0][0])
        table = {sig: 123.0}
        profile = replace(flat_profile(), kernel_table=table)
        base = estimate_latency(net, flat_profile())
        with_table = estimate_latency(net, profile)
        # only the one matching layer switches to the measured value
        assert with_table == pytest.approx(base - 4.718592e-3 + 123.0, rel=1e-9)

    def test_latency_additive_and_monotone(self):
        template = BlockTemplate(conv_kind="depthwise_separable", bottleneck="inverted")
        small = build_network([(16, 1), (32, 1)], template, 64)
        deeper = build_network([(16, 2), (32, 2)], template, 64)
        wider = build_network([(16, 1), (64, 1)], template, 64)
        for profile in example_profiles().values():
            base = estimate_latency(small, profile)
            assert estimate_latency(deeper, profile) > base
            assert estimate_latency(wider, profile) > base

    def test_missing_core_class_errors(self):
        utilization = {cls: 1.0 for cls in CORE_LAYER_CLASSES if cls != "depthwise_conv"}
        profile = HardwareProfile(
            name="partial",
            peak_macs_per_second=1e9,
            memory_bandwidth=1e9,
            bytes_per_element=4,
            utilization=utilization,
        )
        net = _single_layer_net(depthwise(3, 1, 16), TensorShape(8, 8, 16))
        with pytest.raises(ConfigError, match="depthwise_conv"):
            estimate_latency(net, profile)


def _single_layer_net(layer, input_shape):
    """Wrap one layer in a minimal network for latency tests."""
    from blockeval.blockir import NetworkSpec, propagate_shapes

    layers = (layer,)
    shapes = tuple(propagate_shapes(layers, input_shape))
    return NetworkSpec(
        layers=layers,
        shapes=shapes,
        input_shape=input_shape,
        num_classes=2,
        stage_boundaries=(0,),
        block_boundaries=(0,),
    )


class TestNetworkCost:
    def test_additivity_over_depth_doubling(self):
        # single-stage plans make every block identical (stride 1, same width)
        template = BlockTemplate(conv_kind="standard", bottleneck="none")
        base = build_network([(16, 3)], template, 64)
        doubled = build_network([(16, 6)], template, 64)
        rb = network_cost(base)
        rd = network_cost(doubled)
        stem_head = _stem_head_cost(template, 64, base)
        assert rd.macs - stem_head["macs"] == 2 * (rb.macs - stem_head["macs"])

    def test_stem_plus_head_only(self):
        # a one-block minimal network: total equals the exact sum of parts
        net = build_network([(8, 1)], BlockTemplate(conv_kind="standard"), 32)
        report = network_cost(net)
        parts = [layer_cost(l, s[0]).macs for l, s in zip(net.layers, net.shapes)]
        assert report.macs == sum(parts)
        assert len(parts) == 5  # stem, block conv, residual add, pool, classifier

    def test_total_equals_layer_sum(self):
        net = build_network(
            [(24, 2), (48, 4), (96, 4), (192, 2)],
            BlockTemplate(conv_kind="depthwise_separable", bottleneck="inverted", use_se=True),
        )
        report = network_cost(net)
        total = sum(layer_cost(l, s[0]).macs for l, s in zip(net.layers, net.shapes))
        assert report.macs == total

    def test_metric_lookup(self):
        net = build_network([(8, 1)], BlockTemplate(), input_resolution=32)
        report = network_cost(net, [get_profile("vpu")])
        assert report.metric("macs") == float(report.macs)
        assert report.metric("latency:vpu") == report.latency["vpu"]
        with pytest.raises(ConfigError):
            report.metric("latency:nope")
        with pytest.raises(ConfigError):
            report.metric("flops")


def _stem_head_cost(template, resolution, net):
    from blockeval.blockir import propagate_shapes

    stem = net.layers[0]
    gap = net.layers[-2]
    fc = net.layers[-1]
    stem_cost = layer_cost(stem, net.shapes[0][0])
    gap_cost = layer_cost(gap, net.shapes[-2][0])
    fc_cost = layer_cost(fc, net.shapes[-1][0])
    return {"macs": stem_cost.macs + gap_cost.macs + fc_cost.macs}


class TestProfiles:
    def test_bundled_profiles_cover_core_classes(self):
        for profile in example_profiles().values():
            for cls in CORE_LAYER_CLASSES:
                assert 0 < profile.utilization_for(cls) <= 1

    def test_unknown_profile_name(self):
        with pytest.raises(ConfigError, match="bundled"):
            get_profile("tpu")

    def test_profile_json_round_trip(self, tmp_path):
        profile = get_profile("vpu")
        path = tmp_path / "vpu.json"
        import json

        path.write_text(json.dumps(profile.to_dict()))
        from blockeval.costmodel import load_profile

        loaded = load_profile(path)
        assert loaded == profile

    def test_kernel_table_csv_round_trip(self, tmp_path):
        path = tmp_path / "table.csv"
        path.write_text(
            "layer_class,kernel_size,stride,in_channels,out_channels,groups,"
            "input_height,input_width,latency_seconds\n"
            "standard_conv,3,1,16,32,1,32,32,0.0042\n"
        )
        table = read_kernel_table(path)
        assert table[("standard_conv", 3, 1, 16, 32, 1, 32, 32)] == 0.0042

    def test_kernel_table_missing_column(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("layer_class,latency_seconds\nstandard_conv,1\n")
        with pytest.raises(ConfigError, match="missing columns"):
            read_kernel_table(path)

    def test_layer_classification(self):
        assert layer_class(conv(3, 1, 16, 32)) == "standard_conv"
        assert layer_class(pointwise(16, 32)) == "pointwise_conv"
        assert layer_class(depthwise(3, 1, 16)) == "depthwise_conv"
        assert layer_class(conv(3, 1, 16, 32, groups=4)) == "grouped_conv"
        assert layer_class(squeeze_excite(16, 4)) == "se_unit"
        assert layer_class(fully_connected(16, 2)) == "fully_connected"
