"""Experiment orchestration: configs, run store, surrogate errors, CLI."""

from .commands import (
    ComparisonResult,
    IngestResult,
    build_synthetic_pool,
    cmd_compare,
    cmd_cost,
    cmd_emit_profiles,
    cmd_ingest,
    cmd_ingest_surrogate,
    cmd_sample,
    load_family_records,
    resolve_profiles,
)
from .config import ExperimentConfig, FamilySpec, load_config
from .store import AccuracyRecord, RunStore, model_id, read_accuracy_file
from .surrogate import SurrogateCoefficients, surrogate_accuracy

__all__ = [
    "AccuracyRecord",
    "ComparisonResult",
    "ExperimentConfig",
    "FamilySpec",
    "IngestResult",
    "RunStore",
    "SurrogateCoefficients",
    "build_synthetic_pool",
    "cmd_compare",
    "cmd_cost",
    "cmd_emit_profiles",
    "cmd_ingest",
    "cmd_ingest_surrogate",
    "cmd_sample",
    "load_family_records",
    "load_config",
    "model_id",
    "read_accuracy_file",
    "resolve_profiles",
    "surrogate_accuracy",
]
