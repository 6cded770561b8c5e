"""Orchestration: sampling runs, costing, ingestion, comparison, emission.

Every command is a plain function over paths and config values; the CLI in
:mod:`blockeval.harness.cli` is a thin argument-parsing layer above them.
All outputs except manifest timestamps are fully determined by (config,
seed), which is what makes reruns byte-comparable.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .. import __version__
from ..blockir import build_network
from ..costmodel import (
    CostReport,
    HardwareProfile,
    get_profile,
    load_profile,
    network_cost,
)
from ..designspace import sample, stage_plan
from ..errors import BlockEvalError, ConfigError, StoreError
from ..stats import (
    SampleRecord,
    edf,
    log_complexity_grid,
    pareto_front,
    sample_size_trend,
)
from .config import ExperimentConfig
from .plots import Series, svg_plot, write_csv
from .store import RECORD_SCHEMA_VERSION, AccuracyRecord, RunStore, model_id
from .surrogate import DEFAULT_COEFFICIENTS, SurrogateCoefficients, surrogate_accuracy

_BASE_COLUMNS = ("family", "model_id", "status", "macs", "params", "activations")


def _family_seed(seed: int, index: int) -> int:
    seq = np.random.SeedSequence([seed, index])
    return int(seq.generate_state(1, np.uint64)[0])


def cmd_sample(config: ExperimentConfig, run_dir: str | Path | None = None) -> Path:
    """Sample every family of a config into a fresh run directory."""
    run_path = Path(run_dir) if run_dir else Path(config.output) / config.name
    store = RunStore(run_path)
    store.initialize(config.to_dict(), tool_version=__version__)
    for index, family in enumerate(config.families):
        ranges = config.ranges.with_seed(_family_seed(config.seed, index))
        nets = []
        for params in sample(ranges, config.sample_count):
            nets.append(
                build_network(
                    stage_plan(params),
                    family.template,
                    input_resolution=config.input_resolution,
                    num_classes=config.num_classes,
                    input_channels=config.input_channels,
                    params=params,
                    family=family.name,
                )
            )
        store.write_specs(family.name, nets)
    return run_path


def resolve_profiles(
    names: Sequence[str], kernel_tables: Mapping[str, str] | None = None
) -> list[HardwareProfile]:
    """Map profile references to profiles.

    A reference is either a bundled profile name or a path to a profile
    JSON file. ``kernel_tables`` optionally maps profile names to CSV
    files of measured kernel latencies.
    """
    from dataclasses import replace

    from ..costmodel import read_kernel_table

    profiles = []
    for ref in names:
        if ref.endswith(".json") or "/" in ref:
            profile = load_profile(ref)
        else:
            profile = get_profile(ref)
        table_path = (kernel_tables or {}).get(profile.name)
        if table_path:
            profile = replace(profile, kernel_table=read_kernel_table(table_path))
        profiles.append(profile)
    return profiles


def cmd_cost(
    run_dir: str | Path,
    profiles: Sequence[HardwareProfile],
) -> Path:
    """Cost every sampled spec; writes one CSV row per model.

    Models whose specs fail validation are flagged in the status column
    and skipped, without aborting the run. Profile columns follow the
    given profile order, so re-running with extra profiles appended leaves
    the existing columns byte-identical.
    """
    from ..costmodel import latency_breakdown

    store = RunStore(run_dir)
    header = list(_BASE_COLUMNS) + [f"latency:{p.name}" for p in profiles]
    rows: list[list] = []
    table_profiles = [p for p in profiles if p.kernel_table]
    coverage = {p.name: {"table_layers": 0, "roofline_layers": 0} for p in table_profiles}
    for family, ids in sorted(store.families().items()):
        for mid in ids:
            try:
                net = store.load_spec(family, mid)
                report = network_cost(net, profiles)
            except BlockEvalError as exc:
                rows.append(
                    [family, mid, f"invalid:{exc.category}"] + [""] * (len(header) - 3)
                )
                continue
            for profile in table_profiles:
                for entry in latency_breakdown(net, profile):
                    key = "table_layers" if entry.source == "table" else "roofline_layers"
                    coverage[profile.name][key] += 1
            rows.append(
                [family, mid, "ok", report.macs, report.params, report.activations]
                + [repr(report.latency[p.name]) for p in profiles]
            )
    rows.sort(key=lambda r: (r[0], r[1]))
    write_csv(store.costs_path, header, rows)
    if coverage:
        store.annotate("kernel_table_coverage", coverage)
    return store.costs_path


def read_cost_table(run_dir: str | Path) -> dict[str, dict]:
    """costs.csv rows keyed by model_id (valid rows only)."""
    store = RunStore(run_dir)
    if not store.costs_path.exists():
        raise StoreError(f"{run_dir} has no costs.csv; run the cost command first")
    out: dict[str, dict] = {}
    with open(store.costs_path, newline="") as fh:
        for row in csv.DictReader(fh):
            if row["status"] != "ok":
                continue
            complexity = {
                "macs": float(row["macs"]),
                "params": float(row["params"]),
                "activations": float(row["activations"]),
            }
            for key, value in row.items():
                if key.startswith("latency:"):
                    complexity[key] = float(value)
            out[row["model_id"]] = {"family": row["family"], "complexity": complexity}
    return out


@dataclass(frozen=True)
class IngestResult:
    joined: int
    skipped_duplicates: int
    unmatched_ids: tuple[str, ...]


def cmd_ingest(
    run_dir: str | Path,
    accuracy: Sequence[AccuracyRecord],
) -> IngestResult:
    """Join accuracy records with the run's cost table into sample records.

    Accuracy records whose model_id does not exist in the run are reported
    back (never silently dropped); re-ingesting identical data is a no-op.
    """
    store = RunStore(run_dir)
    costs = read_cost_table(run_dir)
    rows = []
    unmatched = []
    for record in accuracy:
        if record.model_id not in costs:
            unmatched.append(record.model_id)
            continue
        entry = costs[record.model_id]
        rows.append(
            {
                "schema_version": RECORD_SCHEMA_VERSION,
                "model_id": record.model_id,
                "family": entry["family"],
                "complexity": entry["complexity"],
                "error": record.top1_error,
                "weight": 1.0,
                "source": {
                    "dataset": record.dataset,
                    "epochs": record.epochs,
                    "trainer": dict(record.trainer),
                },
            }
        )
    written = store.append_records(rows)
    return IngestResult(
        joined=written,
        skipped_duplicates=len(rows) - written,
        unmatched_ids=tuple(unmatched),
    )


def cmd_ingest_surrogate(
    run_dir: str | Path,
    seed: int = 0,
    coeffs: SurrogateCoefficients = DEFAULT_COEFFICIENTS,
) -> IngestResult:
    """Ingest surrogate errors for every costed model (no training needed)."""
    costs = read_cost_table(run_dir)
    accuracy = []
    for mid, entry in sorted(costs.items()):
        report = CostReport(
            macs=int(entry["complexity"]["macs"]),
            params=int(entry["complexity"]["params"]),
            activations=int(entry["complexity"]["activations"]),
        )
        accuracy.append(
            AccuracyRecord(
                model_id=mid,
                dataset="surrogate",
                epochs=0,
                top1_error=surrogate_accuracy(report, mid, seed=seed, coeffs=coeffs),
                trainer={"kind": "surrogate", "seed": seed},
            )
        )
    return cmd_ingest(run_dir, accuracy)


def load_family_records(run_dirs: Sequence[str | Path]) -> dict[str, list[SampleRecord]]:
    """Collect joined records from one or more runs, grouped by family."""
    grouped: dict[str, dict[str, SampleRecord]] = {}
    for run_dir in run_dirs:
        for family, records in RunStore(run_dir).sample_records().items():
            bucket = grouped.setdefault(family, {})
            for record in records:
                bucket.setdefault(record.model_id, record)
    if not grouped:
        raise StoreError("no joined records found; run the ingest command first")
    return {family: list(records.values()) for family, records in sorted(grouped.items())}


@dataclass(frozen=True)
class ComparisonResult:
    statistic: str
    metric: str
    csv_path: Path
    svg_path: Path
    summary_path: Path
    summary_rows: tuple[tuple, ...]


def _require_metric(families: Mapping[str, list[SampleRecord]], metric: str) -> None:
    for family, records in families.items():
        for record in records:
            if metric not in record.complexity:
                raise ConfigError(
                    f"family {family!r}: record {record.model_id} lacks metric {metric!r}"
                )


def _compare_edf(families, metric, out_dir: Path):
    thresholds = np.array(
        sorted({r.error for records in families.values() for r in records})
    )
    curves = {name: edf(records) for name, records in families.items()}
    names = list(curves)

    def inclusive(curve, ts):
        idx = np.searchsorted(np.asarray(curve.thresholds), ts, side="right")
        fractions = np.concatenate([[0.0], np.asarray(curve.fractions)])
        return fractions[idx]

    columns = {name: inclusive(curve, thresholds) for name, curve in curves.items()}
    csv_path = out_dir / "edf.csv"
    write_csv(
        csv_path,
        ["error_threshold"] + names,
        [
            [repr(float(t))] + [repr(float(columns[name][i])) for name in names]
            for i, t in enumerate(thresholds)
        ],
    )
    svg_path = out_dir / "edf.svg"
    svg_plot(
        svg_path,
        [Series(name, thresholds, columns[name], step=True) for name in names],
        title="Error EDF by family (uniform weights)",
        x_label="top-1 error",
        y_label="fraction of models",
    )
    # summary: error at which each family reaches the median of its curve
    summary_rows = []
    for name in names:
        curve = curves[name]
        median_idx = int(np.searchsorted(np.asarray(curve.fractions), 0.5, side="left"))
        median_idx = min(median_idx, len(curve.thresholds) - 1)
        summary_rows.append((name, repr(float(curve.thresholds[median_idx])), curve.weight_scheme))
    summary_path = out_dir / "edf_summary.csv"
    write_csv(summary_path, ["family", "median_error", "weight_scheme"], summary_rows)
    return csv_path, svg_path, summary_path, tuple(summary_rows)


_BANDS = 8


def _compare_pareto(families, metric, out_dir: Path):
    all_records = [r for records in families.values() for r in records]
    grid = log_complexity_grid(all_records, metric, points=96)
    names = list(families)
    fronts = {name: pareto_front(records, metric) for name, records in families.items()}
    values = {name: fronts[name].step_errors(grid) for name in names}

    csv_path = out_dir / "pareto.csv"
    write_csv(
        csv_path,
        [metric] + names,
        [
            [repr(float(g))]
            + ["" if np.isnan(values[n][i]) else repr(float(values[n][i])) for n in names]
            for i, g in enumerate(grid)
        ],
    )
    svg_path = out_dir / "pareto.svg"
    svg_plot(
        svg_path,
        [Series(name, grid, values[name], step=True) for name in names],
        title=f"Random-sampling pareto curves ({metric})",
        x_label=metric,
        y_label="best top-1 error",
        log_x=True,
    )

    # leader per log-width complexity band: the crossover summary
    edges = np.geomspace(grid[0], grid[-1], _BANDS + 1)
    summary_rows = []
    for b in range(_BANDS):
        in_band = (grid >= edges[b]) & (grid <= edges[b + 1])
        best_family, best_error = "", np.inf
        for name in names:
            band_values = values[name][in_band]
            band_values = band_values[~np.isnan(band_values)]
            if len(band_values) and band_values.min() < best_error:
                best_error = float(band_values.min())
                best_family = name
        if best_family:
            summary_rows.append(
                (repr(float(edges[b])), repr(float(edges[b + 1])), best_family, repr(best_error))
            )
    summary_path = out_dir / "pareto_summary.csv"
    write_csv(
        summary_path,
        [f"{metric}_band_low", f"{metric}_band_high", "best_family", "best_error"],
        summary_rows,
    )
    return csv_path, svg_path, summary_path, tuple(summary_rows)


def _compare_samplesize(families, metric, out_dir: Path, seed: int, repetitions: int):
    names = list(families)
    trends = {}
    for name in names:
        pool = families[name]
        grid = tuple(n for n in range(40, 401, 40) if n <= len(pool))
        if len(grid) < 3:
            raise ConfigError(
                f"family {name!r} has only {len(pool)} records; too few for a noise trend"
            )
        trends[name] = sample_size_trend(
            pool, metric, size_grid=grid, repetitions=repetitions, seed=seed
        )

    csv_path = out_dir / "samplesize.csv"
    rows = []
    for name in names:
        trend = trends[name]
        fitted = trend.trendline(np.asarray(trend.sample_sizes))
        for n, noise, fit in zip(trend.sample_sizes, trend.noise, fitted):
            rows.append([name, n, repr(float(noise)), repr(float(fit))])
    write_csv(csv_path, ["family", "sample_size", "noise", "trendline"], rows)

    svg_path = out_dir / "samplesize.svg"
    series = []
    for name in names:
        trend = trends[name]
        series.append(Series(f"{name} (measured)", trend.sample_sizes, trend.noise))
        dense = np.linspace(trend.sample_sizes[0], trend.sample_sizes[-1], 64)
        series.append(Series(f"{name} (trend)", dense, trend.trendline(dense)))
    svg_plot(
        svg_path,
        series,
        title=f"Pareto-curve noise vs sample size ({metric})",
        x_label="sample size",
        y_label="average standard deviation",
    )

    summary_rows = tuple(
        (
            name,
            "" if trends[name].elbow is None else repr(float(trends[name].elbow)),
            repr(trends[name].intercept),
            repr(trends[name].inverse_gain),
        )
        for name in names
    )
    summary_path = out_dir / "samplesize_summary.csv"
    write_csv(summary_path, ["family", "elbow", "intercept", "inverse_gain"], summary_rows)
    return csv_path, svg_path, summary_path, summary_rows


def cmd_compare(
    run_dirs: Sequence[str | Path],
    metric: str,
    statistic: str,
    out_dir: str | Path,
    seed: int = 0,
    repetitions: int = 100,
) -> ComparisonResult:
    """Compare families across runs with one statistic.

    All families are evaluated on one shared grid (error thresholds for
    EDFs, log-spaced complexity for pareto curves), so the emitted curves
    are directly comparable. The summary table names the best family per
    complexity band, which is where crossovers show up.
    """
    families = load_family_records(run_dirs)
    _require_metric(families, metric)
    out_path = Path(out_dir)
    out_path.mkdir(parents=True, exist_ok=True)
    if statistic == "edf":
        paths = _compare_edf(families, metric, out_path)
    elif statistic == "pareto":
        paths = _compare_pareto(families, metric, out_path)
    elif statistic == "samplesize":
        paths = _compare_samplesize(families, metric, out_path, seed, repetitions)
    else:
        raise ConfigError(
            f"unknown statistic {statistic!r}; expected edf, pareto or samplesize"
        )
    csv_path, svg_path, summary_path, summary_rows = paths
    return ComparisonResult(
        statistic=statistic,
        metric=metric,
        csv_path=csv_path,
        svg_path=svg_path,
        summary_path=summary_path,
        summary_rows=summary_rows,
    )


def cmd_emit_profiles(out_dir: str | Path) -> list[Path]:
    """Write the bundled illustrative hardware profiles as JSON files."""
    from ..costmodel import example_profiles

    out_path = Path(out_dir)
    out_path.mkdir(parents=True, exist_ok=True)
    written = []
    for name, profile in sorted(example_profiles().items()):
        path = out_path / f"{name}.json"
        path.write_text(json.dumps(profile.to_dict(), indent=2, sort_keys=True) + "\n")
        written.append(path)
    return written


_SYNTHETIC_TEMPLATE_FAMILY = "dwsep"


def build_synthetic_pool(
    size: int = 5000,
    seed: int = 7,
    metrics_profiles: Sequence[HardwareProfile] = (),
) -> list[SampleRecord]:
    """Deterministic surrogate record pool for statistics work.

    Samples the default design space with the depthwise-separable
    template, costs every model analytically and attaches surrogate
    errors. Used by the sample-size tooling when no trained records exist.
    """
    from ..designspace import SamplingRanges

    ranges = SamplingRanges(seed=seed)
    template_config = ExperimentConfig(
        name="synthetic",
        families=(_default_synthetic_family(),),
        ranges=ranges,
        sample_count=size,
        seed=seed,
    )
    family = template_config.families[0]
    records = []
    for params in sample(ranges, size):
        net = build_network(
            stage_plan(params),
            family.template,
            input_resolution=template_config.input_resolution,
            num_classes=template_config.num_classes,
            params=params,
            family=family.name,
        )
        report = network_cost(net, metrics_profiles)
        mid = model_id(net)
        complexity = {
            "macs": float(report.macs),
            "params": float(report.params),
            "activations": float(report.activations),
        }
        complexity.update({f"latency:{k}": v for k, v in report.latency.items()})
        records.append(
            SampleRecord(
                model_id=mid,
                complexity=complexity,
                error=surrogate_accuracy(report, mid, seed=seed),
            )
        )
    return records


def _default_synthetic_family():
    from ..blockir import BlockTemplate
    from .config import FamilySpec

    return FamilySpec(
        name=_SYNTHETIC_TEMPLATE_FAMILY,
        template=BlockTemplate(conv_kind="depthwise_separable", bottleneck="none"),
    )
