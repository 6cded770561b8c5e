"""Comparison statistics over sampled-model records.

Two complementary views of a model family live here: weighted empirical
distribution functions of model error, and random-sampling error/complexity
pareto curves. On top of the pareto view sit the sample-size tools: the
curve-noise measurement (average standard deviation of the sampled pareto
curve across repetitions), a hyperbolic trendline fit, and knee-point
detection on that trendline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import NoElbowError, StatsError

# Fallback recommendation when no record pool is available to analyze.
DEFAULT_RECOMMENDED_SAMPLE_SIZE = 130

# Repetitions used by the noise measurement unless configured otherwise.
DEFAULT_REPETITIONS = 100


@dataclass(frozen=True)
class SampleRecord:
    """One sampled model: complexity metrics joined with its error."""

    model_id: str
    complexity: Mapping[str, float]
    error: float
    weight: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.error <= 1.0:
            raise StatsError(f"record {self.model_id}: error {self.error} outside [0, 1]")
        if self.weight < 0:
            raise StatsError(f"record {self.model_id}: negative weight {self.weight}")

    def metric(self, name: str) -> float:
        if name not in self.complexity:
            raise StatsError(f"record {self.model_id} has no metric {name!r}")
        return float(self.complexity[name])


@dataclass(frozen=True)
class ComplexityBand:
    """EDF weighting that keeps only records inside [low, high] on a metric."""

    metric: str
    low: float
    high: float

    def __post_init__(self) -> None:
        if self.low > self.high:
            raise StatsError(f"band low {self.low} exceeds high {self.high}")

    @property
    def name(self) -> str:
        return f"band:{self.metric}[{self.low},{self.high}]"


@dataclass(frozen=True)
class EDFCurve:
    """Weighted empirical distribution of model errors.

    ``thresholds`` are the distinct error values; ``fractions[i]`` is the
    weighted fraction of models with error <= thresholds[i] (the value of
    the step function just right of the jump), so the final fraction is
    exactly 1. :meth:`evaluate` uses the strict form: the fraction of
    models with error strictly below a query threshold.
    """

    thresholds: tuple[float, ...]
    fractions: tuple[float, ...]
    weight_scheme: str
    n: int

    def evaluate(self, error_threshold: float) -> float:
        below = np.searchsorted(self.thresholds, error_threshold, side="left")
        return 0.0 if below == 0 else self.fractions[below - 1]


def _scheme_weights(
    records: Sequence[SampleRecord], weights: str | ComplexityBand
) -> tuple[np.ndarray, str]:
    base = np.array([r.weight for r in records], dtype=float)
    if weights == "uniform":
        return base, "uniform"
    if isinstance(weights, ComplexityBand):
        inside = np.array(
            [weights.low <= r.metric(weights.metric) <= weights.high for r in records]
        )
        return base * inside, weights.name
    raise StatsError(f"unknown weight scheme {weights!r}")


def edf(records: Sequence[SampleRecord], weights: str | ComplexityBand = "uniform") -> EDFCurve:
    """Weighted error EDF of a record set.

    The scheme weight is multiplied by each record's own weight (1 by
    default) and the result is renormalized to sum to the record count,
    which pins the terminal value at exactly 1. An all-zero weighting
    (e.g. an empty complexity band) is an error.
    """
    if not records:
        raise StatsError("edf needs at least one record")
    w, scheme = _scheme_weights(records, weights)
    total = w.sum()
    if total == 0:
        raise StatsError(f"weight scheme {scheme} zeroes out every record")
    n = len(records)

    errors = np.array([r.error for r in records])
    order = np.argsort(errors, kind="stable")
    sorted_err = errors[order]
    sorted_w = w[order]
    thresholds, starts = np.unique(sorted_err, return_index=True)
    cumulative = np.cumsum(sorted_w)
    # weight accumulated through the end of each threshold's run of ties;
    # dividing by the total (rather than scaling weights up front) keeps
    # the terminal fraction exactly 1
    ends = np.append(starts[1:], len(sorted_err)) - 1
    fractions = cumulative[ends] / total
    return EDFCurve(
        thresholds=tuple(float(t) for t in thresholds),
        fractions=tuple(float(f) for f in fractions),
        weight_scheme=scheme,
        n=n,
    )


@dataclass(frozen=True)
class ParetoCurve:
    """Non-dominated (complexity, error) points, both objectives minimized.

    Complexities are strictly increasing and errors strictly decreasing;
    ``model_ids`` names the record behind each point.
    """

    metric: str
    complexities: tuple[float, ...]
    errors: tuple[float, ...]
    model_ids: tuple[str, ...]

    def step_errors(self, grid: np.ndarray) -> np.ndarray:
        """Best achieved error at complexity <= x for each grid value x.

        Grid points below the curve's cheapest model have no value and
        come back as NaN.
        """
        comps = np.asarray(self.complexities)
        errs = np.asarray(self.errors)
        idx = np.searchsorted(comps, np.asarray(grid, dtype=float), side="right")
        out = np.full(len(grid), np.nan)
        has_value = idx > 0
        out[has_value] = errs[idx[has_value] - 1]
        return out


def pareto_front(records: Sequence[SampleRecord], metric: str) -> ParetoCurve:
    """Extract the non-dominated front of a record set for one metric.

    A record is dominated when another record is at most as complex and
    strictly better on error, or equally good on error but strictly
    cheaper. Exact (complexity, error) ties collapse to the record with
    the smallest model_id.
    """
    if not records:
        raise StatsError("pareto_front needs at least one record")
    entries = sorted((r.metric(metric), r.error, r.model_id) for r in records)
    comps: list[float] = []
    errs: list[float] = []
    ids: list[str] = []
    best = math.inf
    for comp, err, model_id in entries:
        if err < best:
            comps.append(comp)
            errs.append(err)
            ids.append(model_id)
            best = err
    return ParetoCurve(
        metric=metric,
        complexities=tuple(comps),
        errors=tuple(errs),
        model_ids=tuple(ids),
    )


def log_complexity_grid(
    records: Sequence[SampleRecord], metric: str, points: int = 64
) -> np.ndarray:
    """Log-spaced evaluation grid spanning a pool's complexity range."""
    values = np.array([r.metric(metric) for r in records])
    lo, hi = values.min(), values.max()
    if lo <= 0:
        raise StatsError(f"metric {metric!r} must be positive for a log grid")
    if lo == hi:
        return np.array([lo])
    return np.geomspace(lo, hi, points)


def _derived_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, index])))


def curve_noise_points(
    pool: Sequence[SampleRecord],
    metric: str,
    n: int,
    repetitions: int = DEFAULT_REPETITIONS,
    grid: np.ndarray | None = None,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-grid-point standard deviation of sampled pareto curves.

    Each repetition draws ``n`` records without replacement (seeded per
    repetition, so repetitions are independent and order free), extracts
    the pareto front, and evaluates it as a step function on the grid.
    Grid points that fall below any repetition's cheapest model are
    excluded. Returns (kept grid points, per-point std across repetitions).
    """
    if n > len(pool):
        raise StatsError(f"sample size {n} exceeds pool size {len(pool)}")
    if n < 1:
        raise StatsError("sample size must be >= 1")
    if repetitions < 2:
        raise StatsError("need at least 2 repetitions to measure a standard deviation")
    if grid is None:
        grid = log_complexity_grid(pool, metric)

    pool = list(pool)
    values = np.empty((repetitions, len(grid)))
    for rep in range(repetitions):
        rng = _derived_rng(seed, rep)
        picks = rng.choice(len(pool), size=n, replace=False)
        front = pareto_front([pool[i] for i in picks], metric)
        values[rep] = front.step_errors(grid)
    covered = ~np.isnan(values).any(axis=0)
    if not covered.any():
        raise StatsError("no grid point is covered by every repetition; widen the grid")
    # shift by the first repetition before the moment computation so that
    # identical repetitions give an exact zero (no cancellation residue)
    kept = values[:, covered]
    stds = (kept - kept[0]).std(axis=0, ddof=1)
    return np.asarray(grid)[covered], stds


def curve_noise(
    pool: Sequence[SampleRecord],
    metric: str,
    n: int,
    repetitions: int = DEFAULT_REPETITIONS,
    grid: np.ndarray | None = None,
    seed: int = 0,
) -> float:
    """Average pareto-curve standard deviation at one sample size."""
    _, stds = curve_noise_points(pool, metric, n, repetitions, grid, seed)
    return float(stds.mean())


def kneedle(
    points: Sequence[tuple[float, float]] | np.ndarray,
    sensitivity: float = 1.0,
) -> float | None:
    """Knee/elbow detection via the maximum of the normalized difference curve.

    Both axes are min-max normalized; the difference between the curve and
    the straight chord joining its endpoints is maximized, with curve
    orientation (increasing/decreasing, convex/concave) detected
    automatically. Returns the x of the knee, or None when the largest
    difference stays below the sensitivity threshold (e.g. for a straight
    line); callers must treat None as "no elbow", not as a value.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise StatsError("kneedle needs >= 3 (x, y) points")
    x, y = pts[:, 0], pts[:, 1]
    if not np.all(np.diff(x) > 0):
        raise StatsError("kneedle needs strictly increasing x values")
    if y.max() == y.min():
        return None  # flat line has no knee

    x_n = (x - x.min()) / (x.max() - x.min())
    y_n = (y - y.min()) / (y.max() - y.min())
    chord = y_n[0] + (y_n[-1] - y_n[0]) * x_n
    gap = y_n - chord
    # below the chord on balance = convex; the knee is the farthest point
    difference = -gap if gap.sum() < 0 else gap
    idx = int(np.argmax(difference))
    threshold = sensitivity * np.diff(x_n).mean()
    if difference[idx] < threshold:
        return None
    return float(x[idx])


@dataclass(frozen=True)
class NoiseTrend:
    """Curve noise versus sample size with a fitted trendline and elbow.

    The trendline is intercept + inverse_gain / n, least-squares fitted;
    ``elbow`` is the knee of the fitted trendline, or None when the trend
    has no detectable knee (e.g. noise that does not decay).
    """

    sample_sizes: tuple[int, ...]
    noise: tuple[float, ...]
    intercept: float
    inverse_gain: float
    residuals: tuple[float, ...]
    elbow: float | None

    def trendline(self, n: np.ndarray) -> np.ndarray:
        return self.intercept + self.inverse_gain / np.asarray(n, dtype=float)


DEFAULT_SIZE_GRID = tuple(range(40, 401, 40))

# Resolution of the dense trendline evaluation handed to kneedle.
_TREND_POINTS = 256


def sample_size_trend(
    pool: Sequence[SampleRecord],
    metric: str,
    size_grid: Sequence[int] | None = None,
    repetitions: int = DEFAULT_REPETITIONS,
    seed: int = 0,
    sensitivity: float = 1.0,
) -> NoiseTrend:
    """Measure curve noise over a grid of sample sizes and fit its trend."""
    sizes = tuple(sorted(size_grid if size_grid is not None else DEFAULT_SIZE_GRID))
    if len(sizes) < 3:
        raise StatsError("need at least 3 sample sizes to fit a trend")
    if any(a >= b for a, b in zip(sizes, sizes[1:])):
        raise StatsError("sample sizes must be strictly increasing")
    if sizes[-1] > len(pool):
        raise StatsError(
            f"largest sample size {sizes[-1]} exceeds pool size {len(pool)}"
        )

    grid = log_complexity_grid(pool, metric)
    noise = [
        curve_noise(pool, metric, n, repetitions=repetitions, grid=grid, seed=seed + i)
        for i, n in enumerate(sizes)
    ]

    design = np.column_stack([np.ones(len(sizes)), 1.0 / np.asarray(sizes, dtype=float)])
    coeffs, *_ = np.linalg.lstsq(design, np.asarray(noise), rcond=None)
    intercept, inverse_gain = float(coeffs[0]), float(coeffs[1])
    fitted = design @ coeffs
    residuals = tuple(float(r) for r in (np.asarray(noise) - fitted))

    elbow = None
    if inverse_gain > 0:
        dense = np.linspace(sizes[0], sizes[-1], _TREND_POINTS)
        trend = intercept + inverse_gain / dense
        elbow = kneedle(np.column_stack([dense, trend]), sensitivity=sensitivity)
    return NoiseTrend(
        sample_sizes=sizes,
        noise=tuple(float(v) for v in noise),
        intercept=intercept,
        inverse_gain=inverse_gain,
        residuals=residuals,
        elbow=elbow,
    )


def recommend_sample_size(
    pool: Sequence[SampleRecord],
    metric: str,
    size_grid: Sequence[int] | None = None,
    repetitions: int = DEFAULT_REPETITIONS,
    seed: int = 0,
) -> int:
    """Smallest worthwhile sample size: the elbow of the noise trendline."""
    trend = sample_size_trend(pool, metric, size_grid, repetitions, seed)
    if trend.elbow is None:
        raise NoElbowError(
            "noise trendline has no elbow; widen the sample-size grid or "
            "check that the pool has sampling variance at all"
        )
    return int(round(trend.elbow))
