"""Deterministic stand-in for trained accuracy.

Training hundreds of models is the expensive step of a family comparison;
this surrogate makes the whole statistics pipeline exercisable at desk
scale. Error decreases logarithmically with model cost plus a seeded noise
term whose amplitude shrinks for larger models (big models train more
consistently). It imitates the *shape* of sampled-family results, not any
dataset's truth.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import log

import numpy as np

from ..costmodel import CostReport


@dataclass(frozen=True)
class SurrogateCoefficients:
    """Parameters of the surrogate error model.

    error = base - macs_gain * ln(macs) + params_gain * ln(params),
    clamped to [floor, ceiling], plus centered noise of amplitude
    noise_scale * (1e5 / max(macs, 1e5)) ** 0.25. The default params_gain
    is negative so that growing either complexity axis lowers error and
    the zero-noise surrogate is monotone by construction.
    """

    base: float = 1.58
    macs_gain: float = 0.062
    params_gain: float = -0.012
    noise_scale: float = 0.05
    floor: float = 0.02
    ceiling: float = 0.98


DEFAULT_COEFFICIENTS = SurrogateCoefficients()


def _noise_amplitude(macs: float, coeffs: SurrogateCoefficients) -> float:
    return coeffs.noise_scale * (1e5 / max(macs, 1e5)) ** 0.25


def surrogate_accuracy(
    cost: CostReport,
    model_id: str,
    seed: int = 0,
    coeffs: SurrogateCoefficients = DEFAULT_COEFFICIENTS,
) -> float:
    """Deterministic surrogate top-1 error for one costed model.

    The noise stream is derived from (seed, model_id), so the same model
    under the same seed always gets the same error, independent of
    evaluation order.
    """
    macs = max(float(cost.macs), 1.0)
    params = max(float(cost.params), 1.0)
    error = coeffs.base - coeffs.macs_gain * log(macs) + coeffs.params_gain * log(params)
    if coeffs.noise_scale > 0:
        rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence([seed, int(model_id, 16)]))
        )
        error += rng.normal(0.0, _noise_amplitude(macs, coeffs))
    return float(min(max(error, coeffs.floor), coeffs.ceiling))
