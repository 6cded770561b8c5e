"""blockeval: hardware-aware comparison of CNN building-block design spaces.

The package splits into five layers:

* :mod:`blockeval.blockir` - layer-level network specs and block templates
* :mod:`blockeval.designspace` - width parameterization, quantization, sampling
* :mod:`blockeval.costmodel` - analytic MACs/params/activations and latency
* :mod:`blockeval.stats` - error EDFs, pareto curves, sample-size analysis
* :mod:`blockeval.harness` - runs, record store, surrogate errors, CLI
"""

__version__ = "0.1.0"

from .blockir import (
    BlockTemplate,
    LayerSpec,
    NetworkSpec,
    TensorShape,
    build_network,
    instantiate_block,
    load_network,
    propagate_shapes,
    save_network,
)
from .costmodel import (
    CostReport,
    HardwareProfile,
    LayerCost,
    dwsep_reduction_factor,
    estimate_latency,
    example_profiles,
    get_profile,
    layer_cost,
    network_cost,
)
from .designspace import (
    DesignSpaceParams,
    ParamRange,
    SamplingRanges,
    StagePlan,
    quantize_widths,
    sample,
    stage_plan,
    widths_per_block,
)
from .errors import BlockEvalError
from .stats import (
    ComplexityBand,
    EDFCurve,
    NoiseTrend,
    ParetoCurve,
    SampleRecord,
    curve_noise,
    edf,
    kneedle,
    pareto_front,
    recommend_sample_size,
    sample_size_trend,
)

__all__ = [
    "__version__",
    "BlockEvalError",
    "BlockTemplate",
    "ComplexityBand",
    "CostReport",
    "DesignSpaceParams",
    "EDFCurve",
    "HardwareProfile",
    "LayerCost",
    "LayerSpec",
    "NetworkSpec",
    "NoiseTrend",
    "ParamRange",
    "ParetoCurve",
    "SampleRecord",
    "SamplingRanges",
    "StagePlan",
    "TensorShape",
    "build_network",
    "curve_noise",
    "dwsep_reduction_factor",
    "edf",
    "estimate_latency",
    "example_profiles",
    "get_profile",
    "instantiate_block",
    "kneedle",
    "layer_cost",
    "load_network",
    "network_cost",
    "pareto_front",
    "propagate_shapes",
    "quantize_widths",
    "recommend_sample_size",
    "sample",
    "sample_size_trend",
    "save_network",
    "stage_plan",
    "widths_per_block",
]
