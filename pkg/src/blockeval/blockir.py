"""Layer-level network representation and building-block instantiation.

Networks are flat, ordered lists of layer specs with fully resolved tensor
shapes. A :class:`BlockTemplate` captures the repeated multi-layer unit a
model family is built from (convolution kind, bottleneck structure, and an
optional squeeze-excite gate); instantiating it yields concrete layers.

Everything here is an immutable value: specs can be shared between threads
and hashed for content addressing. There is no tensor arithmetic in this
module; numeric execution belongs to external trainers consuming the JSON
serialization.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .designspace import DesignSpaceParams, StagePlan
from .errors import ConfigError, LayerConfigError, ShapeError

SCHEMA_VERSION = 1

CONV = "conv"
SQUEEZE_EXCITE = "squeeze_excite"
GLOBAL_AVG_POOL = "global_avg_pool"
FULLY_CONNECTED = "fully_connected"
ADD = "add"

LAYER_KINDS = (CONV, SQUEEZE_EXCITE, GLOBAL_AVG_POOL, FULLY_CONNECTED, ADD)
ACTIVATIONS = ("none", "relu", "sigmoid")

STANDARD = "standard"
DEPTHWISE_SEPARABLE = "depthwise_separable"
GROUPED = "grouped"

NO_BOTTLENECK = "none"
REGULAR_BOTTLENECK = "regular"
INVERTED_BOTTLENECK = "inverted"


@dataclass(frozen=True)
class TensorShape:
    """Spatial extent and channel count of one activation tensor."""

    height: int
    width: int
    channels: int

    def __post_init__(self) -> None:
        if self.height < 1 or self.width < 1 or self.channels < 1:
            raise ShapeError(f"tensor dimensions must be >= 1, got {self}")

    @property
    def elements(self) -> int:
        return self.height * self.width * self.channels

    def to_dict(self) -> dict:
        return {"height": self.height, "width": self.width, "channels": self.channels}

    @classmethod
    def from_dict(cls, data: dict) -> "TensorShape":
        return cls(int(data["height"]), int(data["width"]), int(data["channels"]))


@dataclass(frozen=True)
class LayerSpec:
    """One layer of a network.

    Only the fields relevant to ``kind`` are meaningful; use the module
    constructors (:func:`conv`, :func:`squeeze_excite`, ...) instead of
    building instances by hand.

    Conv fields follow the grouped-convolution convention: ``groups == 1``
    is a standard (or, with ``kernel_size == 1``, pointwise) convolution
    and ``groups == in_channels`` is a depthwise convolution. ``add``
    denotes a residual connection from the enclosing block's input.
    """

    kind: str
    kernel_size: int = 1
    stride: int = 1
    in_channels: int = 0
    out_channels: int = 0
    groups: int = 1
    channels: int = 0
    reduction_ratio: int = 1
    activation: str = "none"

    def __post_init__(self) -> None:
        if self.kind not in LAYER_KINDS:
            raise LayerConfigError(f"unknown layer kind {self.kind!r}")
        if self.activation not in ACTIVATIONS:
            raise LayerConfigError(f"unknown activation {self.activation!r}")
        if self.kind == CONV:
            if self.kernel_size < 1 or self.kernel_size % 2 == 0:
                raise LayerConfigError(
                    f"conv kernel_size must be an odd positive integer, got {self.kernel_size}"
                )
            if self.stride not in (1, 2):
                raise LayerConfigError(f"conv stride must be 1 or 2, got {self.stride}")
            if self.in_channels < 1 or self.out_channels < 1 or self.groups < 1:
                raise LayerConfigError(f"conv channel/group counts must be >= 1: {self}")
            if self.in_channels % self.groups or self.out_channels % self.groups:
                raise LayerConfigError(
                    f"conv {self.in_channels}->{self.out_channels} with groups="
                    f"{self.groups}: channels must divide evenly by groups"
                )
        elif self.kind == SQUEEZE_EXCITE:
            if self.channels < 1 or self.reduction_ratio < 1:
                raise LayerConfigError(f"squeeze_excite needs positive sizes: {self}")
            if self.channels % self.reduction_ratio:
                raise LayerConfigError(
                    f"squeeze_excite channels={self.channels} not divisible by "
                    f"reduction_ratio={self.reduction_ratio}"
                )
        elif self.kind == FULLY_CONNECTED:
            if self.in_channels < 1 or self.out_channels < 1:
                raise LayerConfigError(f"fully_connected needs positive sizes: {self}")
        elif self.kind == ADD:
            if self.channels < 1:
                raise LayerConfigError(f"add needs positive channels: {self}")

    @property
    def is_depthwise(self) -> bool:
        return self.kind == CONV and self.groups > 1 and self.groups == self.in_channels

    @property
    def is_pointwise(self) -> bool:
        return self.kind == CONV and self.kernel_size == 1 and self.groups == 1

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.kind == CONV:
            d.update(
                kernel_size=self.kernel_size,
                stride=self.stride,
                in_channels=self.in_channels,
                out_channels=self.out_channels,
                groups=self.groups,
                activation=self.activation,
            )
        elif self.kind == SQUEEZE_EXCITE:
            d.update(channels=self.channels, reduction_ratio=self.reduction_ratio)
        elif self.kind == FULLY_CONNECTED:
            d.update(in_channels=self.in_channels, out_channels=self.out_channels)
        elif self.kind == ADD:
            d.update(channels=self.channels)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "LayerSpec":
        kind = data["kind"]
        if kind == CONV:
            return cls(
                kind=CONV,
                kernel_size=int(data["kernel_size"]),
                stride=int(data["stride"]),
                in_channels=int(data["in_channels"]),
                out_channels=int(data["out_channels"]),
                groups=int(data["groups"]),
                activation=str(data["activation"]),
            )
        if kind == SQUEEZE_EXCITE:
            return cls(
                kind=SQUEEZE_EXCITE,
                channels=int(data["channels"]),
                reduction_ratio=int(data["reduction_ratio"]),
            )
        if kind == GLOBAL_AVG_POOL:
            return cls(kind=GLOBAL_AVG_POOL)
        if kind == FULLY_CONNECTED:
            return cls(
                kind=FULLY_CONNECTED,
                in_channels=int(data["in_channels"]),
                out_channels=int(data["out_channels"]),
            )
        if kind == ADD:
            return cls(kind=ADD, channels=int(data["channels"]))
        raise LayerConfigError(f"unknown layer kind {kind!r}")


def conv(
    kernel_size: int,
    stride: int,
    in_channels: int,
    out_channels: int,
    groups: int = 1,
    activation: str = "relu",
) -> LayerSpec:
    return LayerSpec(
        kind=CONV,
        kernel_size=kernel_size,
        stride=stride,
        in_channels=in_channels,
        out_channels=out_channels,
        groups=groups,
        activation=activation,
    )


def pointwise(in_channels: int, out_channels: int, activation: str = "relu") -> LayerSpec:
    return conv(1, 1, in_channels, out_channels, 1, activation)


def depthwise(kernel_size: int, stride: int, channels: int, activation: str = "relu") -> LayerSpec:
    return conv(kernel_size, stride, channels, channels, groups=channels, activation=activation)


def squeeze_excite(channels: int, reduction_ratio: int) -> LayerSpec:
    return LayerSpec(kind=SQUEEZE_EXCITE, channels=channels, reduction_ratio=reduction_ratio)


def global_avg_pool() -> LayerSpec:
    return LayerSpec(kind=GLOBAL_AVG_POOL)


def fully_connected(in_features: int, out_features: int) -> LayerSpec:
    return LayerSpec(kind=FULLY_CONNECTED, in_channels=in_features, out_channels=out_features)


def residual_add(channels: int) -> LayerSpec:
    return LayerSpec(kind=ADD, channels=channels)


@dataclass(frozen=True)
class BlockTemplate:
    """Layer structure of the repeated building block of a model family.

    ``conv_kind`` selects the spatial convolution (standard, depthwise
    separable, or grouped with ``groups`` >= 2). ``bottleneck`` selects the
    surrounding channel structure:

    * ``none``: a single spatial convolution; no restoring pointwise conv.
    * ``regular``: pointwise reduce to ``bottleneck_ratio * out_channels``
      (ratio <= 1), spatial conv, pointwise restore.
    * ``inverted``: pointwise expand to ``expansion * in_channels``
      (expansion >= 1), spatial conv, pointwise project back down.

    With ``use_se`` a squeeze-excite gate follows the spatial convolution.
    Defaults (expansion 6, ratio 0.25, se_ratio 4) are common mobile-model
    conventions and remain plain fields.
    """

    conv_kind: str = DEPTHWISE_SEPARABLE
    groups: int = 1
    bottleneck: str = NO_BOTTLENECK
    bottleneck_ratio: float = 0.25
    expansion: float = 6.0
    use_se: bool = False
    se_ratio: int = 4

    def __post_init__(self) -> None:
        if self.conv_kind not in (STANDARD, DEPTHWISE_SEPARABLE, GROUPED):
            raise ConfigError(f"unknown conv_kind {self.conv_kind!r}")
        if self.conv_kind == GROUPED and self.groups < 2:
            raise ConfigError("grouped convolutions need groups >= 2")
        if self.conv_kind != GROUPED and self.groups != 1:
            raise ConfigError(f"groups={self.groups} only makes sense with conv_kind='grouped'")
        if self.bottleneck not in (NO_BOTTLENECK, REGULAR_BOTTLENECK, INVERTED_BOTTLENECK):
            raise ConfigError(f"unknown bottleneck {self.bottleneck!r}")
        if self.bottleneck == REGULAR_BOTTLENECK and not 0 < self.bottleneck_ratio <= 1:
            raise ConfigError(f"bottleneck_ratio must be in (0, 1], got {self.bottleneck_ratio}")
        if self.bottleneck == INVERTED_BOTTLENECK and self.expansion < 1:
            raise ConfigError(f"expansion must be >= 1, got {self.expansion}")
        if self.se_ratio < 1:
            raise ConfigError(f"se_ratio must be >= 1, got {self.se_ratio}")

    def to_dict(self) -> dict:
        return {
            "conv_kind": self.conv_kind,
            "groups": self.groups,
            "bottleneck": self.bottleneck,
            "bottleneck_ratio": self.bottleneck_ratio,
            "expansion": self.expansion,
            "use_se": self.use_se,
            "se_ratio": self.se_ratio,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BlockTemplate":
        return cls(
            conv_kind=str(data["conv_kind"]),
            groups=int(data.get("groups", 1)),
            bottleneck=str(data.get("bottleneck", NO_BOTTLENECK)),
            bottleneck_ratio=float(data.get("bottleneck_ratio", 0.25)),
            expansion=float(data.get("expansion", 6.0)),
            use_se=bool(data.get("use_se", False)),
            se_ratio=int(data.get("se_ratio", 4)),
        )


def _mid_channels(template: BlockTemplate, in_ch: int, out_ch: int) -> int:
    """Inner width of a bottleneck block, rounded for divisibility.

    The raw value is ratio * out_channels (regular) or expansion *
    in_channels (inverted), snapped to the smallest grid compatible with
    the grouped-conv group count and, when squeeze-excite is enabled, its
    reduction ratio.
    """
    if template.bottleneck == REGULAR_BOTTLENECK:
        raw = template.bottleneck_ratio * out_ch
    else:
        raw = template.expansion * in_ch
    divisor = template.groups if template.conv_kind == GROUPED else 1
    if template.use_se:
        divisor = math.lcm(divisor, template.se_ratio)
    return max(divisor, round(raw / divisor) * divisor)


def instantiate_block(
    template: BlockTemplate,
    in_ch: int,
    out_ch: int,
    stride: int,
    input_shape: TensorShape | None = None,
) -> list[LayerSpec]:
    """Expand a template into concrete layers for one block.

    A residual add is emitted exactly when ``stride == 1`` and the block
    preserves its channel count. When ``input_shape`` is given the result
    is shape-checked immediately.
    """
    if in_ch < 1 or out_ch < 1:
        raise LayerConfigError(f"channel counts must be >= 1, got {in_ch}->{out_ch}")
    if stride not in (1, 2):
        raise LayerConfigError(f"stride must be 1 or 2, got {stride}")

    layers: list[LayerSpec] = []
    if template.bottleneck == NO_BOTTLENECK:
        if template.conv_kind == DEPTHWISE_SEPARABLE:
            layers.append(depthwise(3, stride, in_ch))
            if template.use_se:
                layers.append(squeeze_excite(in_ch, template.se_ratio))
            layers.append(pointwise(in_ch, out_ch))
        else:
            layers.append(conv(3, stride, in_ch, out_ch, template.groups))
            if template.use_se:
                layers.append(squeeze_excite(out_ch, template.se_ratio))
    else:
        mid = _mid_channels(template, in_ch, out_ch)
        layers.append(pointwise(in_ch, mid))
        if template.conv_kind == DEPTHWISE_SEPARABLE:
            layers.append(depthwise(3, stride, mid))
        else:
            layers.append(conv(3, stride, mid, mid, template.groups))
        if template.use_se:
            layers.append(squeeze_excite(mid, template.se_ratio))
        layers.append(pointwise(mid, out_ch, activation="none"))

    if stride == 1 and in_ch == out_ch:
        layers.append(residual_add(out_ch))
    if input_shape is not None:
        propagate_shapes(layers, input_shape)
    return layers


def _infer_output(layer: LayerSpec, shape: TensorShape, index: int) -> TensorShape:
    if layer.kind == CONV:
        if shape.channels != layer.in_channels:
            raise ShapeError(
                f"layer {index} (conv) expects {layer.in_channels} input channels, "
                f"got {shape.channels}"
            )
        return TensorShape(
            math.ceil(shape.height / layer.stride),
            math.ceil(shape.width / layer.stride),
            layer.out_channels,
        )
    if layer.kind == SQUEEZE_EXCITE:
        if shape.channels != layer.channels:
            raise ShapeError(
                f"layer {index} (squeeze_excite) expects {layer.channels} channels, "
                f"got {shape.channels}"
            )
        return shape
    if layer.kind == GLOBAL_AVG_POOL:
        return TensorShape(1, 1, shape.channels)
    if layer.kind == FULLY_CONNECTED:
        if shape.height != 1 or shape.width != 1:
            raise ShapeError(f"layer {index} (fully_connected) needs a 1x1 spatial input")
        if shape.channels != layer.in_channels:
            raise ShapeError(
                f"layer {index} (fully_connected) expects {layer.in_channels} features, "
                f"got {shape.channels}"
            )
        return TensorShape(1, 1, layer.out_channels)
    if layer.kind == ADD:
        if shape.channels != layer.channels:
            raise ShapeError(
                f"layer {index} (add) expects {layer.channels} channels, got {shape.channels}"
            )
        return shape
    raise ShapeError(f"layer {index}: unknown kind {layer.kind!r}")


def propagate_shapes(
    layers: Sequence[LayerSpec], input_shape: TensorShape
) -> list[tuple[TensorShape, TensorShape]]:
    """Resolve (input, output) shapes for every layer.

    Stride-2 convolutions use "same" padding semantics: a spatial dim n
    maps to ceil(n / 2). Channel mismatches raise ``ShapeError`` naming the
    layer index.
    """
    shapes: list[tuple[TensorShape, TensorShape]] = []
    current = input_shape
    for index, layer in enumerate(layers):
        out = _infer_output(layer, current, index)
        shapes.append((current, out))
        current = out
    return shapes


@dataclass(frozen=True)
class NetworkSpec:
    """A full network: flat layer list with resolved shapes.

    ``stage_boundaries`` and ``block_boundaries`` index into ``layers`` at
    the first layer of each stage / block; a residual ``add`` layer sums
    the running tensor with the input of its enclosing block.
    """

    layers: tuple[LayerSpec, ...]
    shapes: tuple[tuple[TensorShape, TensorShape], ...]
    input_shape: TensorShape
    num_classes: int
    stage_boundaries: tuple[int, ...]
    block_boundaries: tuple[int, ...]
    template: BlockTemplate | None = None
    params: DesignSpaceParams | None = None
    family: str | None = None

    @property
    def output_shape(self) -> TensorShape:
        return self.shapes[-1][1]

    @property
    def num_blocks(self) -> int:
        return len(self.block_boundaries)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "network_spec",
            "input": self.input_shape.to_dict(),
            "num_classes": self.num_classes,
            "layers": [
                dict(layer.to_dict(), input=i.to_dict(), output=o.to_dict())
                for layer, (i, o) in zip(self.layers, self.shapes)
            ],
            "stage_boundaries": list(self.stage_boundaries),
            "block_boundaries": list(self.block_boundaries),
            "metadata": {
                "template": self.template.to_dict() if self.template else None,
                "design_params": self.params.to_dict() if self.params else None,
                "family": self.family,
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NetworkSpec":
        version = data.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported network spec schema_version {version!r}")
        layers = tuple(LayerSpec.from_dict(entry) for entry in data["layers"])
        input_shape = TensorShape.from_dict(data["input"])
        shapes = tuple(propagate_shapes(layers, input_shape))
        meta = data.get("metadata") or {}
        template = meta.get("template")
        params = meta.get("design_params")
        return cls(
            layers=layers,
            shapes=shapes,
            input_shape=input_shape,
            num_classes=int(data["num_classes"]),
            stage_boundaries=tuple(int(i) for i in data["stage_boundaries"]),
            block_boundaries=tuple(int(i) for i in data["block_boundaries"]),
            template=BlockTemplate.from_dict(template) if template else None,
            params=DesignSpaceParams.from_dict(params) if params else None,
            family=meta.get("family"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "NetworkSpec":
        return cls.from_dict(json.loads(text))


def save_network(net: NetworkSpec, path: str | Path) -> None:
    Path(path).write_text(net.to_json())


def load_network(path: str | Path) -> NetworkSpec:
    return NetworkSpec.from_json(Path(path).read_text())


def build_network(
    plan: StagePlan | Sequence[tuple[int, int]],
    template: BlockTemplate,
    input_resolution: int = 160,
    num_classes: int = 2,
    input_channels: int = 3,
    params: DesignSpaceParams | None = None,
    family: str | None = None,
) -> NetworkSpec:
    """Assemble stem + staged blocks + classification head.

    The stem is a 3x3 stride-2 standard convolution onto the first stage
    width. Every stage after the first begins with a stride-2 block that
    also carries the width change; the first stage keeps the stem's
    resolution, so an s-stage network downsamples the input by 2**s
    overall. The head is global average pooling plus one fully connected
    layer.
    """
    stages = list(plan.stages if isinstance(plan, StagePlan) else (tuple(p) for p in plan))
    if not 1 <= len(stages) <= 4:
        raise ConfigError(f"a network needs 1..4 stages, got {len(stages)}")
    for width, depth in stages:
        if width < 1 or depth < 1:
            raise ConfigError(f"stage widths and depths must be >= 1: {(width, depth)}")

    halvings = len(stages)  # stem plus one per stage entry after the first
    if input_resolution < 2**halvings:
        raise ShapeError(
            f"input resolution {input_resolution} cannot survive {halvings} halvings"
        )

    first_width = stages[0][0]
    layers: list[LayerSpec] = [conv(3, 2, input_channels, first_width)]
    stage_bounds: list[int] = []
    block_bounds: list[int] = []
    prev_width = first_width
    for stage_index, (width, depth) in enumerate(stages):
        stage_bounds.append(len(layers))
        for block_index in range(depth):
            stride = 2 if (block_index == 0 and stage_index > 0) else 1
            in_ch = prev_width if block_index == 0 else width
            block_bounds.append(len(layers))
            layers.extend(instantiate_block(template, in_ch, width, stride))
        prev_width = width
    layers.append(global_avg_pool())
    layers.append(fully_connected(prev_width, num_classes))

    input_shape = TensorShape(input_resolution, input_resolution, input_channels)
    shapes = propagate_shapes(layers, input_shape)
    return NetworkSpec(
        layers=tuple(layers),
        shapes=tuple(shapes),
        input_shape=input_shape,
        num_classes=num_classes,
        stage_boundaries=tuple(stage_bounds),
        block_boundaries=tuple(block_bounds),
        template=template,
        params=params,
        family=family,
    )
