"""Width-parameterized design spaces and seeded random sampling.

A design space is described by four hyperparameters: total block count
``depth``, ``initial_width``, a per-block width ``slope``, and a
``quantization`` base. Per-block target widths grow linearly with block
index and are then snapped onto a small number of width stages, so a
network only changes width a few times along its depth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, QuantizationError, SamplingError

# Widths are kept on this grid so channel counts stay vectorization friendly.
WIDTH_MULTIPLE = 8

# Networks have at most this many width stages.
MAX_STAGES = 4

# Identifier of the random source, recorded in run metadata. Sampling is a
# pure function of (ranges, seed, n) as long as this generator is used.
GENERATOR_ID = f"numpy.random.PCG64 (numpy {np.__version__})"


@dataclass(frozen=True)
class DesignSpaceParams:
    """One point in the design space: (d, w_0, w_a, w_m)."""

    depth: int
    initial_width: int
    slope: float
    quantization: float

    def __post_init__(self) -> None:
        if self.depth < 1:
            raise ConfigError(f"depth must be >= 1, got {self.depth}")
        if self.initial_width < WIDTH_MULTIPLE:
            raise ConfigError(
                f"initial_width must be >= {WIDTH_MULTIPLE}, got {self.initial_width}"
            )
        if self.slope < 0:
            raise ConfigError(f"slope must be >= 0, got {self.slope}")
        if self.quantization <= 1:
            raise ConfigError(f"quantization must be > 1, got {self.quantization}")

    def to_dict(self) -> dict:
        return {
            "depth": self.depth,
            "initial_width": self.initial_width,
            "slope": self.slope,
            "quantization": self.quantization,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DesignSpaceParams":
        return cls(
            depth=int(data["depth"]),
            initial_width=int(data["initial_width"]),
            slope=float(data["slope"]),
            quantization=float(data["quantization"]),
        )


@dataclass(frozen=True)
class StagePlan:
    """Quantized per-stage (width, depth) pairs, in network order."""

    stages: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        if not 1 <= len(self.stages) <= MAX_STAGES:
            raise QuantizationError(
                f"a plan must have 1..{MAX_STAGES} stages, got {len(self.stages)}"
            )
        widths = [w for w, _ in self.stages]
        if any(w % WIDTH_MULTIPLE for w in widths):
            raise QuantizationError(f"stage widths must be multiples of {WIDTH_MULTIPLE}: {widths}")
        if any(a >= b for a, b in zip(widths, widths[1:])):
            raise QuantizationError(f"stage widths must be strictly increasing: {widths}")
        if any(d < 1 for _, d in self.stages):
            raise QuantizationError("every stage needs at least one block")

    @property
    def widths(self) -> tuple[int, ...]:
        return tuple(w for w, _ in self.stages)

    @property
    def depths(self) -> tuple[int, ...]:
        return tuple(d for _, d in self.stages)

    @property
    def total_depth(self) -> int:
        return sum(self.depths)


@dataclass(frozen=True)
class ParamRange:
    """Inclusive [low, high] range with a draw distribution."""

    low: float
    high: float
    distribution: str = "uniform"  # or "log_uniform"

    def __post_init__(self) -> None:
        if self.low > self.high:
            raise ConfigError(f"range low {self.low} exceeds high {self.high}")
        if self.distribution not in ("uniform", "log_uniform"):
            raise ConfigError(f"unknown distribution {self.distribution!r}")
        if self.distribution == "log_uniform" and self.low <= 0:
            raise ConfigError("log_uniform requires a positive lower bound")


@dataclass(frozen=True)
class SamplingRanges:
    """Allowed parameter ranges plus the sampling seed.

    Defaults produce mobile-scale models; they are configuration, not
    constants, and belong in the experiment config file.
    """

    depth: ParamRange = ParamRange(6, 20)
    initial_width: ParamRange = ParamRange(8, 96)
    slope: ParamRange = ParamRange(0.0, 32.0)
    quantization: ParamRange = ParamRange(1.5, 3.0)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.depth.low < 1:
            raise ConfigError("depth range must stay >= 1")
        if self.initial_width.low < WIDTH_MULTIPLE:
            raise ConfigError(f"initial_width range must stay >= {WIDTH_MULTIPLE}")
        if self.slope.low < 0:
            raise ConfigError("slope range must stay >= 0")
        if self.quantization.low <= 1:
            raise ConfigError("quantization range must stay > 1")
        if _ceil_multiple(self.initial_width.low) > _floor_multiple(self.initial_width.high):
            raise ConfigError(
                f"initial_width range contains no multiple of {WIDTH_MULTIPLE}"
            )

    def with_seed(self, seed: int) -> "SamplingRanges":
        return replace(self, seed=seed)


def widths_per_block(params: DesignSpaceParams) -> list[float]:
    """Per-block target widths: initial_width + slope * block_index."""
    return [params.initial_width + params.slope * j for j in range(params.depth)]


def _round_to_multiple(value: float, multiple: int) -> int:
    return int(round(value / multiple)) * multiple


def quantize_widths(widths: list[float], initial_width: int, quantization: float) -> StagePlan:
    """Snap per-block widths onto at most four stages.

    Each width is mapped to the nearest integer power of ``quantization``
    relative to ``initial_width`` and rounded to a multiple of 8; runs of
    equal quantized width merge into one stage. More than four distinct
    widths raise ``QuantizationError`` (callers resample instead of
    clamping, which would distort the sampling distribution).
    """
    if not widths:
        raise QuantizationError("cannot quantize an empty width list")
    if any(u < initial_width for u in widths):
        raise QuantizationError("all widths must be >= initial_width")

    log_q = math.log(quantization)
    stages: list[tuple[int, int]] = []
    for u in widths:
        exponent = round(math.log(u / initial_width) / log_q)
        w = _round_to_multiple(initial_width * quantization**exponent, WIDTH_MULTIPLE)
        if stages and stages[-1][0] == w:
            stages[-1] = (w, stages[-1][1] + 1)
        else:
            stages.append((w, 1))
    if len(stages) > MAX_STAGES:
        raise QuantizationError(
            f"quantization produced {len(stages)} stages (> {MAX_STAGES}); resample"
        )
    return StagePlan(tuple(stages))


def stage_plan(params: DesignSpaceParams) -> StagePlan:
    """Quantized stage plan for one parameter set."""
    return quantize_widths(widths_per_block(params), params.initial_width, params.quantization)


def _draw(rng: np.random.Generator, r: ParamRange) -> float:
    if r.low == r.high:
        return r.low
    if r.distribution == "log_uniform":
        return math.exp(rng.uniform(math.log(r.low), math.log(r.high)))
    return rng.uniform(r.low, r.high)


def _draw_params(rng: np.random.Generator, ranges: SamplingRanges) -> DesignSpaceParams:
    # depth is an integer and initial_width lives on the width grid, so both
    # are drawn directly from their discrete supports (no endpoint bias).
    if ranges.depth.distribution == "uniform":
        depth = int(rng.integers(int(ranges.depth.low), int(ranges.depth.high) + 1))
    else:
        depth = int(round(_draw(rng, ranges.depth)))
        depth = min(max(depth, int(math.ceil(ranges.depth.low))), int(ranges.depth.high))
    lo_step = _ceil_multiple(ranges.initial_width.low) // WIDTH_MULTIPLE
    hi_step = _floor_multiple(ranges.initial_width.high) // WIDTH_MULTIPLE
    if ranges.initial_width.distribution == "uniform":
        w0 = int(rng.integers(lo_step, hi_step + 1)) * WIDTH_MULTIPLE
    else:
        w0 = _round_to_multiple(_draw(rng, ranges.initial_width), WIDTH_MULTIPLE)
        w0 = min(max(w0, lo_step * WIDTH_MULTIPLE), hi_step * WIDTH_MULTIPLE)
    return DesignSpaceParams(
        depth=depth,
        initial_width=w0,
        slope=_draw(rng, ranges.slope),
        quantization=_draw(rng, ranges.quantization),
    )


def _ceil_multiple(value: float) -> int:
    return int(math.ceil(value / WIDTH_MULTIPLE)) * WIDTH_MULTIPLE


def _floor_multiple(value: float) -> int:
    return int(math.floor(value / WIDTH_MULTIPLE)) * WIDTH_MULTIPLE


# Rejection-rate watchdog: inspected once per this many attempts.
_WINDOW = 1_000


def sample(ranges: SamplingRanges, n: int) -> list[DesignSpaceParams]:
    """Draw ``n`` parameter sets whose quantization succeeds.

    Draws are rejected (and redrawn) when quantization would exceed four
    stages. The result is deterministic for a given (ranges, seed, n); a
    window with under 1% acceptance aborts with ``SamplingError``.
    """
    if n < 1:
        raise SamplingError(f"sample count must be >= 1, got {n}")
    rng = np.random.Generator(np.random.PCG64(ranges.seed))
    out: list[DesignSpaceParams] = []
    attempts = 0
    accepted_at_window_start = 0
    while len(out) < n:
        attempts += 1
        params = _draw_params(rng, ranges)
        try:
            stage_plan(params)
        except QuantizationError:
            pass
        else:
            out.append(params)
        if attempts % _WINDOW == 0:
            if len(out) - accepted_at_window_start < _WINDOW // 100:
                raise SamplingError(
                    "under 1% of draws quantize to <= 4 stages; "
                    "check slope/quantization ranges"
                )
            accepted_at_window_start = len(out)
    return out
