"""Analytic complexity metrics and roofline-style latency estimation.

Counting conventions (documented once, used everywhere):

* 1 FLOP = 1 multiply-accumulate; the reported field is named ``macs`` to
  avoid ambiguity. Elementwise adds, ReLU and sigmoid evaluations are not
  counted.
* Convolutions are bias free and batch norm is folded (zero cost).
* ``bytes_moved`` is counted in tensor *elements* (weights + input +
  output, each once, no cache model); hardware profiles supply the element
  width. A residual add moves its two inputs and its output.
* A squeeze-excite unit costs one global average pool (H*W*C), two
  fully-connected passes (2*C^2/r) and one channel-wise rescale (H*W*C);
  its gate nonlinearities are free like all activations.

Latency per layer is ``max(compute, memory)`` where compute divides MACs
by utilization-derated peak throughput and memory divides the moved bytes
by bandwidth. A profile may carry a measured kernel table; matching layers
use the table value and everything else falls back to the roofline.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .blockir import (
    ADD,
    CONV,
    FULLY_CONNECTED,
    GLOBAL_AVG_POOL,
    SQUEEZE_EXCITE,
    LayerSpec,
    NetworkSpec,
    TensorShape,
)
from .errors import ConfigError, ShapeError

STANDARD_CONV = "standard_conv"
POINTWISE_CONV = "pointwise_conv"
DEPTHWISE_CONV = "depthwise_conv"
GROUPED_CONV = "grouped_conv"
SE_UNIT = "se_unit"
FC_CLASS = "fully_connected"

# Classes a profile must provide utilization factors for.
CORE_LAYER_CLASSES = (
    STANDARD_CONV,
    POINTWISE_CONV,
    DEPTHWISE_CONV,
    GROUPED_CONV,
    SE_UNIT,
    FC_CLASS,
)

# Pooling and residual adds perform no MACs worth derating; they default to
# full utilization unless a profile lists them explicitly.
AUX_LAYER_CLASSES = (GLOBAL_AVG_POOL, ADD)


def layer_class(layer: LayerSpec) -> str:
    """Hardware-relevant class of a layer (utilization map key)."""
    if layer.kind == CONV:
        if layer.groups == 1:
            return POINTWISE_CONV if layer.kernel_size == 1 else STANDARD_CONV
        if layer.groups == layer.in_channels:
            return DEPTHWISE_CONV
        return GROUPED_CONV
    if layer.kind == SQUEEZE_EXCITE:
        return SE_UNIT
    if layer.kind == FULLY_CONNECTED:
        return FC_CLASS
    return layer.kind  # global_avg_pool, add


@dataclass(frozen=True)
class LayerCost:
    """Cost of one layer; ``bytes_moved`` counts elements (see module doc)."""

    macs: int
    params: int
    output_activations: int
    bytes_moved: int


@dataclass(frozen=True)
class CostReport:
    """Network-level complexity metrics plus per-profile latency seconds."""

    macs: int
    params: int
    activations: int
    latency: Mapping[str, float] = field(default_factory=dict)

    def metric(self, name: str) -> float:
        """Look up a metric by name; latency metrics use 'latency:<profile>'."""
        if name in ("macs", "params", "activations"):
            return float(getattr(self, name))
        if name.startswith("latency:"):
            profile = name.split(":", 1)[1]
            if profile not in self.latency:
                raise ConfigError(f"no latency estimate for profile {profile!r}")
            return self.latency[profile]
        raise ConfigError(f"unknown complexity metric {name!r}")


def layer_cost(layer: LayerSpec, input_shape: TensorShape) -> LayerCost:
    """Analytic cost of a single layer given its input shape."""
    h, w, c = input_shape.height, input_shape.width, input_shape.channels
    if layer.kind == CONV:
        if c != layer.in_channels:
            raise ShapeError(f"conv expects {layer.in_channels} channels, got {c}")
        h_out = math.ceil(h / layer.stride)
        w_out = math.ceil(w / layer.stride)
        k2 = layer.kernel_size * layer.kernel_size
        params = k2 * (layer.in_channels // layer.groups) * layer.out_channels
        macs = h_out * w_out * params
        out_acts = h_out * w_out * layer.out_channels
        return LayerCost(macs, params, out_acts, params + h * w * c + out_acts)
    if layer.kind == SQUEEZE_EXCITE:
        if c != layer.channels:
            raise ShapeError(f"squeeze_excite expects {layer.channels} channels, got {c}")
        squeeze = layer.channels // layer.reduction_ratio
        params = 2 * layer.channels * squeeze
        macs = params + 2 * h * w * c  # two FC passes + pool + rescale
        return LayerCost(macs, params, h * w * c, params + 2 * h * w * c)
    if layer.kind == GLOBAL_AVG_POOL:
        return LayerCost(h * w * c, 0, c, h * w * c + c)
    if layer.kind == FULLY_CONNECTED:
        if h != 1 or w != 1 or c != layer.in_channels:
            raise ShapeError(
                f"fully_connected expects 1x1x{layer.in_channels}, got {h}x{w}x{c}"
            )
        params = layer.in_channels * layer.out_channels
        return LayerCost(params, params, layer.out_channels, params + c + layer.out_channels)
    if layer.kind == ADD:
        if c != layer.channels:
            raise ShapeError(f"add expects {layer.channels} channels, got {c}")
        return LayerCost(0, 0, h * w * c, 3 * h * w * c)
    raise ShapeError(f"unknown layer kind {layer.kind!r}")


def dwsep_reduction_factor(c_out: int, kernel_size: int) -> float:
    """MAC ratio of a depthwise-separable pair to one standard convolution.

    Equals 1/c_out + 1/kernel_size^2; around 1/8 for 3x3 kernels at mobile
    channel counts, which is the usual "8 to 9 times cheaper" figure.
    """
    if c_out < 1 or kernel_size < 1:
        raise ConfigError("c_out and kernel_size must be >= 1")
    return 1.0 / c_out + 1.0 / (kernel_size * kernel_size)


# A kernel-table key: one entry per distinct layer instantiation.
KernelSignature = tuple[str, int, int, int, int, int, int, int]

KERNEL_TABLE_COLUMNS = (
    "layer_class",
    "kernel_size",
    "stride",
    "in_channels",
    "out_channels",
    "groups",
    "input_height",
    "input_width",
    "latency_seconds",
)


def canonical_signature(layer: LayerSpec, input_shape: TensorShape) -> KernelSignature:
    """Lookup key for measured kernel latencies."""
    h, w = input_shape.height, input_shape.width
    if layer.kind == CONV:
        return (
            layer_class(layer),
            layer.kernel_size,
            layer.stride,
            layer.in_channels,
            layer.out_channels,
            layer.groups,
            h,
            w,
        )
    if layer.kind == SQUEEZE_EXCITE:
        return (SE_UNIT, 1, 1, layer.channels, layer.channels, layer.reduction_ratio, h, w)
    if layer.kind == FULLY_CONNECTED:
        return (FC_CLASS, 1, 1, layer.in_channels, layer.out_channels, 1, 1, 1)
    if layer.kind == ADD:
        return (ADD, 1, 1, layer.channels, layer.channels, 1, h, w)
    return (GLOBAL_AVG_POOL, 1, 1, input_shape.channels, input_shape.channels, 1, h, w)


def read_kernel_table(path: str | Path) -> dict[KernelSignature, float]:
    """Load measured per-kernel latencies from CSV.

    Expected columns: layer_class, kernel_size, stride, in_channels,
    out_channels, groups, input_height, input_width, latency_seconds.
    """
    table: dict[KernelSignature, float] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(KERNEL_TABLE_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ConfigError(f"kernel table {path} missing columns: {sorted(missing)}")
        for row in reader:
            sig = (
                row["layer_class"],
                int(row["kernel_size"]),
                int(row["stride"]),
                int(row["in_channels"]),
                int(row["out_channels"]),
                int(row["groups"]),
                int(row["input_height"]),
                int(row["input_width"]),
            )
            table[sig] = float(row["latency_seconds"])
    return table


@dataclass(frozen=True)
class HardwareProfile:
    """Named platform description for latency estimation.

    ``utilization`` maps layer classes to the achievable fraction of peak
    throughput for that class in (0, 1]. ``kernel_table`` optionally maps
    canonical layer signatures to measured seconds, which take precedence
    over the roofline estimate.
    """

    name: str
    peak_macs_per_second: float
    memory_bandwidth: float  # bytes per second
    bytes_per_element: int
    utilization: Mapping[str, float]
    kernel_table: Mapping[KernelSignature, float] | None = None
    description: str = ""

    def __post_init__(self) -> None:
        if self.peak_macs_per_second <= 0 or self.memory_bandwidth <= 0:
            raise ConfigError(f"profile {self.name!r}: rates must be positive")
        if self.bytes_per_element < 1:
            raise ConfigError(f"profile {self.name!r}: bytes_per_element must be >= 1")
        for cls, factor in self.utilization.items():
            if not 0 < factor <= 1:
                raise ConfigError(
                    f"profile {self.name!r}: utilization[{cls}]={factor} outside (0, 1]"
                )

    def utilization_for(self, cls: str) -> float:
        if cls in self.utilization:
            return self.utilization[cls]
        if cls in AUX_LAYER_CLASSES:
            return 1.0
        raise ConfigError(f"profile {self.name!r} has no utilization for layer class {cls!r}")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "peak_macs_per_second": self.peak_macs_per_second,
            "memory_bandwidth_bytes_per_second": self.memory_bandwidth,
            "bytes_per_element": self.bytes_per_element,
            "utilization": dict(self.utilization),
            "description": self.description,
        }

    @classmethod
    def from_dict(cls, data: dict, kernel_table=None) -> "HardwareProfile":
        return cls(
            name=str(data["name"]),
            peak_macs_per_second=float(data["peak_macs_per_second"]),
            memory_bandwidth=float(data["memory_bandwidth_bytes_per_second"]),
            bytes_per_element=int(data["bytes_per_element"]),
            utilization=dict(data["utilization"]),
            kernel_table=kernel_table,
            description=str(data.get("description", "")),
        )


def load_profile(path: str | Path, kernel_table_path: str | Path | None = None) -> HardwareProfile:
    """Read a profile from a JSON file, optionally attaching a kernel table."""
    data = json.loads(Path(path).read_text())
    table = read_kernel_table(kernel_table_path) if kernel_table_path else None
    return HardwareProfile.from_dict(data, kernel_table=table)


@dataclass(frozen=True)
class LayerLatency:
    """Per-layer latency with its provenance ('table' or 'roofline')."""

    index: int
    layer_class: str
    seconds: float
    source: str


def latency_breakdown(net: NetworkSpec, profile: HardwareProfile) -> list[LayerLatency]:
    """Per-layer latency contributions for one profile (batch size 1)."""
    out: list[LayerLatency] = []
    for index, (layer, (in_shape, _)) in enumerate(zip(net.layers, net.shapes)):
        cls = layer_class(layer)
        if profile.kernel_table is not None:
            sig = canonical_signature(layer, in_shape)
            if sig in profile.kernel_table:
                out.append(LayerLatency(index, cls, profile.kernel_table[sig], "table"))
                continue
        cost = layer_cost(layer, in_shape)
        compute = 0.0
        if cost.macs:
            compute = cost.macs / (profile.peak_macs_per_second * profile.utilization_for(cls))
        memory = cost.bytes_moved * profile.bytes_per_element / profile.memory_bandwidth
        out.append(LayerLatency(index, cls, max(compute, memory), "roofline"))
    return out


def estimate_latency(net: NetworkSpec, profile: HardwareProfile) -> float:
    """Network latency in seconds: sum of per-layer roofline/table times."""
    return sum(entry.seconds for entry in latency_breakdown(net, profile))


def network_cost(
    net: NetworkSpec, profiles: Sequence[HardwareProfile] = ()
) -> CostReport:
    """Sum layer costs over a network and estimate latency per profile."""
    macs = params = acts = 0
    for layer, (in_shape, _) in zip(net.layers, net.shapes):
        cost = layer_cost(layer, in_shape)
        macs += cost.macs
        params += cost.params
        acts += cost.output_activations
    latency = {p.name: estimate_latency(net, p) for p in profiles}
    return CostReport(macs=macs, params=params, activations=acts, latency=latency)


def example_profiles() -> dict[str, HardwareProfile]:
    """Bundled illustrative hardware profiles.

    The five entries mirror common deployment targets (a phone CPU and
    GPU, a USB vision accelerator, an embedded GPU board, a server GPU).
    The numbers are illustrative order-of-magnitude choices tuned to
    exhibit the compute- versus memory-bound contrasts between those
    platform classes; they are not measurements of any device.
    """
    profiles = [
        HardwareProfile(
            name="mobile_cpu",
            peak_macs_per_second=8e9,
            memory_bandwidth=1.2e10,
            bytes_per_element=4,
            utilization={
                STANDARD_CONV: 0.65,
                POINTWISE_CONV: 0.70,
                DEPTHWISE_CONV: 0.55,
                GROUPED_CONV: 0.60,
                SE_UNIT: 0.50,
                FC_CLASS: 0.70,
            },
            description="Phone big-core CPU running an fp32 interpreter; "
            "compute bound on nearly everything.",
        ),
        HardwareProfile(
            name="mobile_gpu",
            peak_macs_per_second=6e10,
            memory_bandwidth=1.4e10,
            bytes_per_element=2,
            utilization={
                STANDARD_CONV: 0.60,
                POINTWISE_CONV: 0.65,
                DEPTHWISE_CONV: 0.45,
                GROUPED_CONV: 0.50,
                SE_UNIT: 0.35,
                FC_CLASS: 0.50,
            },
            description="Phone GPU with fp16 kernels; good pointwise throughput.",
        ),
        HardwareProfile(
            name="vpu",
            peak_macs_per_second=4.5e11,
            memory_bandwidth=1.6e10,
            bytes_per_element=2,
            utilization={
                STANDARD_CONV: 0.75,
                POINTWISE_CONV: 0.42,
                DEPTHWISE_CONV: 0.22,
                GROUPED_CONV: 0.45,
                SE_UNIT: 0.20,
                FC_CLASS: 0.50,
            },
            description="Wide-SIMD vision accelerator: standard convolutions "
            "reuse data well, depthwise and pointwise kernels starve the "
            "arrays and hit the memory wall.",
        ),
        HardwareProfile(
            name="embedded_gpu",
            peak_macs_per_second=2.35e11,
            memory_bandwidth=2.55e10,
            bytes_per_element=2,
            utilization={
                STANDARD_CONV: 0.70,
                POINTWISE_CONV: 0.50,
                DEPTHWISE_CONV: 0.30,
                GROUPED_CONV: 0.45,
                SE_UNIT: 0.25,
                FC_CLASS: 0.50,
            },
            description="Small-board GPU with fused fp16 conv kernels; "
            "depthwise and squeeze-excite stages underutilize it.",
        ),
        HardwareProfile(
            name="server_gpu",
            peak_macs_per_second=1.4e13,
            memory_bandwidth=9.0e11,
            bytes_per_element=4,
            utilization={
                STANDARD_CONV: 0.75,
                POINTWISE_CONV: 0.60,
                DEPTHWISE_CONV: 0.15,
                GROUPED_CONV: 0.40,
                SE_UNIT: 0.30,
                FC_CLASS: 0.60,
            },
            description="Datacenter GPU at batch size 1: tiny mobile kernels "
            "leave most of the chip idle, depthwise most of all.",
        ),
    ]
    return {p.name: p for p in profiles}


def get_profile(name: str) -> HardwareProfile:
    """Look up a bundled profile by name."""
    profiles = example_profiles()
    if name not in profiles:
        raise ConfigError(
            f"unknown profile {name!r}; bundled profiles: {sorted(profiles)}"
        )
    return profiles[name]
