"""Exception hierarchy with machine-readable categories.

Every error raised by this package carries a short ``category`` string so
that command-line callers can map failures to exit codes without parsing
messages.
"""

from __future__ import annotations


class BlockEvalError(Exception):
    """Base class for all errors raised by this package."""

    category = "error"


class ConfigError(BlockEvalError):
    """Invalid experiment or profile configuration; message names the field."""

    category = "config"


class LayerConfigError(BlockEvalError):
    """A layer violates its own structural constraints (divisibility etc.)."""

    category = "layer"


class ShapeError(BlockEvalError):
    """Shape propagation failed; message includes the layer index."""

    category = "shape"


class QuantizationError(BlockEvalError):
    """Width quantization produced more stages than a network may have."""

    category = "quantization"


class SamplingError(BlockEvalError):
    """Design-space sampling cannot make progress with the given ranges."""

    category = "sampling"


class StatsError(BlockEvalError):
    """A statistics operation received unusable inputs."""

    category = "stats"


class NoElbowError(StatsError):
    """No elbow found; the noise trendline has no detectable knee."""

    category = "no-elbow"


class StoreError(BlockEvalError):
    """Record-store invariant violated (conflicting duplicate, bad schema)."""

    category = "store"
