"""Content-addressed run storage: spec files, manifest, record log.

A run directory is laid out as::

    run/
      manifest.json          run metadata (config snapshot, versions, ids)
      specs/<family>/<model_id>.json
      costs.csv              written by the cost command
      records.jsonl          append-only joined sample records

Model ids are the first 16 hex chars of the SHA-256 of the canonicalized
spec JSON (sorted keys, compact separators), so identical specs collide to
one entry regardless of field order. Records are immutable once written:
re-ingesting the same data is a no-op, conflicting data is an error.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from ..blockir import NetworkSpec
from ..designspace import GENERATOR_ID
from ..errors import StoreError
from ..stats import SampleRecord

RECORD_SCHEMA_VERSION = 1
MODEL_ID_HEX_CHARS = 16


def canonical_json(data: Mapping) -> str:
    """Deterministic JSON text: sorted keys, no whitespace."""
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def model_id(net: NetworkSpec) -> str:
    """Content hash of a network spec (SHA-256, truncated to 16 hex chars)."""
    digest = hashlib.sha256(canonical_json(net.to_dict()).encode()).hexdigest()
    return digest[:MODEL_ID_HEX_CHARS]


@dataclass(frozen=True)
class AccuracyRecord:
    """One trained model's result, as emitted by a trainer."""

    model_id: str
    dataset: str
    epochs: int
    top1_error: float
    trainer: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not 0.0 <= self.top1_error <= 1.0:
            raise StoreError(
                f"accuracy record {self.model_id}: top1_error {self.top1_error} outside [0, 1]"
            )


def read_accuracy_file(path: str | Path) -> list[AccuracyRecord]:
    """Parse a JSON-lines accuracy record file, validating each line."""
    records: list[AccuracyRecord] = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise StoreError(f"{path}:{lineno}: invalid JSON ({exc})") from None
            try:
                records.append(
                    AccuracyRecord(
                        model_id=str(data["model_id"]),
                        dataset=str(data["dataset"]),
                        epochs=int(data["epochs"]),
                        top1_error=float(data["top1_error"]),
                        trainer=data.get("trainer", {}),
                    )
                )
            except KeyError as exc:
                raise StoreError(f"{path}:{lineno}: missing field {exc.args[0]!r}") from None
    return records


class RunStore:
    """Filesystem-backed store for one sampling run."""

    def __init__(self, run_dir: str | Path):
        self.run_dir = Path(run_dir)
        self.specs_dir = self.run_dir / "specs"
        self.manifest_path = self.run_dir / "manifest.json"
        self.records_path = self.run_dir / "records.jsonl"
        self.costs_path = self.run_dir / "costs.csv"

    # -- manifest -----------------------------------------------------------

    def initialize(self, config_snapshot: Mapping, tool_version: str) -> None:
        if self.manifest_path.exists():
            raise StoreError(f"run directory {self.run_dir} already has a manifest")
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self.specs_dir.mkdir(exist_ok=True)
        manifest = {
            "schema_version": RECORD_SCHEMA_VERSION,
            "run_id": self.run_dir.name,
            "created_unix": time.time(),
            "tool_version": tool_version,
            "generator": GENERATOR_ID,
            "config": dict(config_snapshot),
            "families": {},
        }
        self._write_manifest(manifest)

    def manifest(self) -> dict:
        if not self.manifest_path.exists():
            raise StoreError(f"{self.run_dir} is not a run directory (no manifest.json)")
        return json.loads(self.manifest_path.read_text())

    def _write_manifest(self, manifest: Mapping) -> None:
        self.manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True))

    def annotate(self, key: str, value) -> None:
        """Attach provenance metadata (e.g. kernel-table coverage) to the run."""
        manifest = self.manifest()
        manifest.setdefault("notes", {})[key] = value
        self._write_manifest(manifest)

    # -- specs ----------------------------------------------------------------

    def write_specs(self, family: str, nets: Iterable[NetworkSpec]) -> list[str]:
        """Persist sampled specs for one family; returns their model ids."""
        family_dir = self.specs_dir / family
        family_dir.mkdir(parents=True, exist_ok=True)
        ids: list[str] = []
        for net in nets:
            mid = model_id(net)
            (family_dir / f"{mid}.json").write_text(net.to_json())
            ids.append(mid)
        manifest = self.manifest()
        manifest["families"][family] = ids
        self._write_manifest(manifest)
        return ids

    def families(self) -> dict[str, list[str]]:
        return dict(self.manifest()["families"])

    def load_spec(self, family: str, mid: str) -> NetworkSpec:
        path = self.specs_dir / family / f"{mid}.json"
        if not path.exists():
            raise StoreError(f"no spec {mid} for family {family} in {self.run_dir}")
        return NetworkSpec.from_json(path.read_text())

    def iter_specs(self) -> Iterable[tuple[str, str, NetworkSpec]]:
        """Yield (family, model_id, spec) in deterministic order."""
        for family, ids in sorted(self.families().items()):
            for mid in ids:
                yield family, mid, self.load_spec(family, mid)

    # -- records --------------------------------------------------------------

    def read_raw_records(self) -> list[dict]:
        if not self.records_path.exists():
            return []
        out = []
        with open(self.records_path) as fh:
            for line in fh:
                line = line.strip()
                if line:
                    out.append(json.loads(line))
        return out

    def append_records(self, rows: Iterable[dict]) -> int:
        """Append records, skipping exact duplicates.

        A row with a model_id already present and a *different* error is a
        conflict: records are immutable, so this raises instead of
        overwriting. Returns the number of rows actually written.
        """
        existing = {row["model_id"]: row for row in self.read_raw_records()}
        written = 0
        with open(self.records_path, "a") as fh:
            for row in rows:
                mid = row["model_id"]
                if mid in existing:
                    if existing[mid]["error"] != row["error"]:
                        raise StoreError(
                            f"conflicting record for model {mid}: "
                            f"{existing[mid]['error']} vs {row['error']}"
                        )
                    continue
                fh.write(canonical_json(row) + "\n")
                existing[mid] = row
                written += 1
        return written

    def sample_records(self) -> dict[str, list[SampleRecord]]:
        """Joined records grouped by family name."""
        grouped: dict[str, list[SampleRecord]] = {}
        for row in self.read_raw_records():
            record = SampleRecord(
                model_id=row["model_id"],
                complexity=row["complexity"],
                error=float(row["error"]),
                weight=float(row.get("weight", 1.0)),
            )
            grouped.setdefault(row["family"], []).append(record)
        return grouped
