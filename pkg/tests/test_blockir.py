import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockeval.blockir import (
    ADD,
    CONV,
    BlockTemplate,
    NetworkSpec,
    TensorShape,
    build_network,
    conv,
    depthwise,
    fully_connected,
    global_avg_pool,
    instantiate_block,
    pointwise,
    propagate_shapes,
    squeeze_excite,
)
from blockeval.errors import ConfigError, LayerConfigError, ShapeError


def describe(layer):
    if layer.kind == CONV:
        return (CONV, layer.kernel_size, layer.in_channels, layer.out_channels, layer.groups)
    return (layer.kind,)


class TestInstantiateBlock:
    def test_inverted_dwsep_expansion_6(self):
        template = BlockTemplate(
            conv_kind="depthwise_separable", bottleneck="inverted", expansion=6
        )
        layers = instantiate_block(template, 16, 16, 1, TensorShape(32, 32, 16))
        assert [describe(l) for l in layers] == [
            (CONV, 1, 16, 96, 1),
            (CONV, 3, 96, 96, 96),
            (CONV, 1, 96, 16, 1),
            (ADD,),
        ]
        assert layers[0].activation == "relu"
        assert layers[2].activation == "none"

    def test_plain_conv_block(self):
        template = BlockTemplate(conv_kind="standard", bottleneck="none")
        layers = instantiate_block(template, 40, 40, 1)
        assert [describe(l) for l in layers] == [(CONV, 3, 40, 40, 1), (ADD,)]
        assert layers[0].activation == "relu"

    def test_regular_bottleneck_quarter(self):
        template = BlockTemplate(
            conv_kind="standard", bottleneck="regular", bottleneck_ratio=0.25
        )
        layers = instantiate_block(template, 64, 64, 1)
        assert [describe(l) for l in layers] == [
            (CONV, 1, 64, 16, 1),
            (CONV, 3, 16, 16, 1),
            (CONV, 1, 16, 64, 1),
            (ADD,),
        ]

    def test_se_position_follows_spatial_conv(self):
        template = BlockTemplate(
            conv_kind="depthwise_separable", bottleneck="inverted", expansion=4, use_se=True
        )
        layers = instantiate_block(template, 16, 16, 1)
        kinds = [l.kind for l in layers]
        assert kinds == [CONV, CONV, "squeeze_excite", CONV, ADD]
        assert layers[2].channels == layers[1].out_channels

    def test_no_residual_on_stride_or_width_change(self):
        template = BlockTemplate(conv_kind="standard")
        assert all(l.kind != ADD for l in instantiate_block(template, 16, 16, 2))
        assert all(l.kind != ADD for l in instantiate_block(template, 16, 32, 1))

    def test_grouped_divisibility_error_names_layer(self):
        template = BlockTemplate(conv_kind="grouped", groups=3)
        with pytest.raises(LayerConfigError, match="groups=3"):
            instantiate_block(template, 16, 16, 1)

    def test_bad_stride_rejected(self):
        with pytest.raises(LayerConfigError):
            instantiate_block(BlockTemplate(), 16, 16, 3)


conv_kinds = st.sampled_from(
    [
        ("standard", 1),
        ("depthwise_separable", 1),
        ("grouped", 2),
        ("grouped", 4),
    ]
)
bottlenecks = st.sampled_from(
    [
        ("none", {}),
        ("regular", {"bottleneck_ratio": 0.25}),
        ("regular", {"bottleneck_ratio": 1.0}),
        ("inverted", {"expansion": 2.0}),
        ("inverted", {"expansion": 6.0}),
    ]
)


@st.composite
def templates(draw):
    kind, groups = draw(conv_kinds)
    bottleneck, extra = draw(bottlenecks)
    use_se = draw(st.booleans())
    return BlockTemplate(
        conv_kind=kind,
        groups=groups,
        bottleneck=bottleneck,
        use_se=use_se,
        se_ratio=4,
        **extra,
    )


@given(
    template=templates(),
    in_steps=st.integers(1, 24),
    out_steps=st.integers(1, 24),
    stride=st.sampled_from([1, 2]),
)
@settings(max_examples=300, deadline=None)
def test_every_block_propagates_and_residual_rule_holds(template, in_steps, out_steps, stride):
    in_ch, out_ch = in_steps * 8, out_steps * 8
    layers = instantiate_block(template, in_ch, out_ch, stride)
    shapes = propagate_shapes(layers, TensorShape(32, 32, in_ch))
    assert shapes[-1][1].channels == out_ch
    assert shapes[-1][1].height == (32 if stride == 1 else 16)
    has_add = any(l.kind == ADD for l in layers)
    assert has_add == (stride == 1 and in_ch == out_ch)


@given(in_steps=st.integers(1, 24), out_steps=st.integers(1, 24), use_se=st.booleans())
@settings(max_examples=60, deadline=None)
def test_dwsep_without_bottleneck_is_one_dw_one_pw(in_steps, out_steps, use_se):
    template = BlockTemplate(
        conv_kind="depthwise_separable", bottleneck="none", use_se=use_se, se_ratio=4
    )
    layers = instantiate_block(template, in_steps * 8, out_steps * 8, 1)
    convs = [l for l in layers if l.kind == CONV]
    assert sum(l.is_depthwise for l in convs) == 1
    assert sum(l.is_pointwise for l in convs) == 1
    assert len(convs) == 2


class TestPropagateShapes:
    def test_stride_two_ceil(self):
        shapes = propagate_shapes([conv(3, 2, 16, 24)], TensorShape(32, 32, 16))
        assert shapes[0][1] == TensorShape(16, 16, 24)
        shapes = propagate_shapes([conv(3, 2, 16, 24)], TensorShape(33, 33, 16))
        assert shapes[0][1] == TensorShape(17, 17, 24)

    def test_gap_collapses_spatial(self):
        shapes = propagate_shapes([global_avg_pool()], TensorShape(7, 7, 128))
        assert shapes[0][1] == TensorShape(1, 1, 128)

    def test_pointwise_preserves_spatial(self):
        shapes = propagate_shapes([pointwise(16, 32)], TensorShape(32, 32, 16))
        assert shapes[0][1] == TensorShape(32, 32, 32)

    def test_channel_mismatch_names_index(self):
        layers = [conv(3, 1, 16, 16), conv(3, 1, 32, 32)]
        with pytest.raises(ShapeError, match="layer 1"):
            propagate_shapes(layers, TensorShape(8, 8, 16))

    def test_fc_needs_pooled_input(self):
        with pytest.raises(ShapeError, match="fully_connected"):
            propagate_shapes([fully_connected(16, 2)], TensorShape(4, 4, 16))


class TestBuildNetwork:
    def test_twelve_block_plan_and_feature_map(self):
        net = build_network(
            [(24, 2), (48, 4), (96, 4), (192, 2)],
            BlockTemplate(conv_kind="depthwise_separable", bottleneck="none"),
            input_resolution=160,
            num_classes=2,
        )
        assert net.num_blocks == 12
        # shape right before the pooling head
        gap_index = next(i for i, l in enumerate(net.layers) if l.kind == "global_avg_pool")
        assert net.shapes[gap_index][0] == TensorShape(10, 10, 192)
        assert net.output_shape == TensorShape(1, 1, 2)
        assert len(net.stage_boundaries) == 4

    def test_minimal_plan(self):
        net = build_network([(8, 1)] * 4, BlockTemplate(conv_kind="standard"))
        assert net.num_blocks == 4
        widths = {l.out_channels for l in net.layers if l.kind == CONV}
        assert widths == {8}

    def test_tiny_resolution_rejected(self):
        with pytest.raises(ShapeError, match="halvings"):
            build_network([(8, 1)] * 4, BlockTemplate(), input_resolution=8)

    def test_stage_entries_downsample(self):
        net = build_network(
            [(16, 1), (32, 1), (64, 1)], BlockTemplate(conv_kind="standard"), 160
        )
        entry_resolutions = [net.shapes[i][0].height for i in net.stage_boundaries]
        assert entry_resolutions == [80, 80, 40]
        assert net.shapes[-1][0].channels == 64


class TestSerialization:
    def test_round_trip_is_structural_identity(self):
        net = build_network(
            [(24, 2), (48, 2)],
            BlockTemplate(conv_kind="grouped", groups=4, bottleneck="inverted", use_se=True),
            input_resolution=64,
            num_classes=4,
        )
        clone = NetworkSpec.from_json(net.to_json())
        assert clone == net

    def test_schema_version_checked(self):
        net = build_network([(8, 1)], BlockTemplate(), input_resolution=32)
        data = net.to_dict()
        data["schema_version"] = 99
        with pytest.raises(ConfigError, match="schema_version"):
            NetworkSpec.from_dict(data)

    def test_serialized_layers_carry_shapes(self):
        net = build_network([(8, 1)], BlockTemplate(), input_resolution=32)
        data = json.loads(net.to_json())
        first = data["layers"][0]
        assert first["input"] == {"height": 32, "width": 32, "channels": 3}
        assert first["output"]["channels"] == 8


class TestValidation:
    def test_se_divisibility(self):
        with pytest.raises(LayerConfigError, match="reduction_ratio"):
            squeeze_excite(30, 4)

    def test_depthwise_constructor(self):
        layer = depthwise(3, 1, 32)
        assert layer.is_depthwise and layer.groups == 32

    def test_even_kernel_rejected(self):
        with pytest.raises(LayerConfigError, match="odd"):
            conv(4, 1, 8, 8)

    def test_template_validation(self):
        with pytest.raises(ConfigError):
            BlockTemplate(conv_kind="grouped", groups=1)
        with pytest.raises(ConfigError):
            BlockTemplate(bottleneck="regular", bottleneck_ratio=1.5)
        with pytest.raises(ConfigError):
            BlockTemplate(bottleneck="inverted", expansion=0.5)
