"""Tour of the building-block templates.

Instantiates each template variant for the same (in, out, stride) slot and
prints the resulting layer sequences with resolved shapes.
"""

from blockeval import BlockTemplate, TensorShape, instantiate_block, propagate_shapes

VARIANTS = {
    "plain conv": BlockTemplate(conv_kind="standard", bottleneck="none"),
    "depthwise separable": BlockTemplate(conv_kind="depthwise_separable", bottleneck="none"),
    "grouped (g=4)": BlockTemplate(conv_kind="grouped", groups=4, bottleneck="none"),
    "regular bottleneck": BlockTemplate(
        conv_kind="standard", bottleneck="regular", bottleneck_ratio=0.25
    ),
    "inverted bottleneck": BlockTemplate(
        conv_kind="depthwise_separable", bottleneck="inverted", expansion=6
    ),
    "inverted + SE": BlockTemplate(
        conv_kind="depthwise_separable", bottleneck="inverted", expansion=6, use_se=True
    ),
}


def describe(layer):
    if layer.kind == "conv":
        tag = "dw" if layer.is_depthwise else ("pw" if layer.is_pointwise else f"g={layer.groups}")
        return (
            f"conv {layer.kernel_size}x{layer.kernel_size}/{layer.stride} "
            f"{layer.in_channels:>3} -> {layer.out_channels:<3} [{tag}] {layer.activation}"
        )
    if layer.kind == "squeeze_excite":
        return f"squeeze-excite C={layer.channels} r={layer.reduction_ratio}"
    if layer.kind == "add":
        return f"residual add ({layer.channels} ch)"
    return layer.kind


input_shape = TensorShape(32, 32, 64)
for name, template in VARIANTS.items():
    layers = instantiate_block(template, 64, 64, stride=1)
    shapes = propagate_shapes(layers, input_shape)
    print(f"\n{name}")
    for layer, (i, o) in zip(layers, shapes):
        print(f"  {describe(layer):<44} {i.height}x{i.width}x{i.channels} -> "
              f"{o.height}x{o.width}x{o.channels}")

# stride-2 / width-changing slots drop the residual connection
layers = instantiate_block(VARIANTS["inverted bottleneck"], 64, 96, stride=2)
print("\ninverted bottleneck, stride 2, 64 -> 96 (no residual):")
for layer in layers:
    print(f"  {describe(layer)}")
