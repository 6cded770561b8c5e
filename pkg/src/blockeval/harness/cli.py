"""Command-line interface.

Subcommands: sample, cost, ingest, compare, samplesize, emit-profiles.
Failures print a machine-readable JSON error object to stderr and exit
with a category-specific code (see ``EXIT_CODES``); success exits 0.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .. import __version__
from ..errors import BlockEvalError
from ..stats import DEFAULT_RECOMMENDED_SAMPLE_SIZE, recommend_sample_size
from .commands import (
    build_synthetic_pool,
    cmd_compare,
    cmd_cost,
    cmd_emit_profiles,
    cmd_ingest,
    cmd_ingest_surrogate,
    cmd_sample,
    resolve_profiles,
)
from .config import load_config
from .store import read_accuracy_file

EXIT_CODES = {
    "config": 2,
    "layer": 3,
    "shape": 3,
    "quantization": 3,
    "sampling": 3,
    "stats": 4,
    "no-elbow": 4,
    "store": 5,
    "io": 6,
    "error": 1,
}


def _fail(exc: BlockEvalError) -> int:
    print(json.dumps({"error": exc.category, "message": str(exc)}), file=sys.stderr)
    return EXIT_CODES.get(exc.category, 1)


def _parse_kernel_tables(pairs: list[str]) -> dict[str, str]:
    tables = {}
    for pair in pairs:
        if "=" not in pair:
            raise SystemExit(f"--kernel-table expects profile=path, got {pair!r}")
        name, _, path = pair.partition("=")
        tables[name] = path
    return tables


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blockeval",
        description="Sample building-block design spaces, cost them per hardware "
        "profile, and compare families with EDF / pareto / sample-size statistics.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="sample model specs for every family in a config")
    p.add_argument("--config", required=True, help="experiment config (.json or .toml)")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", default=None, help="run directory (default: <output>/<name>)")

    p = sub.add_parser("cost", help="compute complexity metrics and latency estimates")
    p.add_argument("run", help="run directory produced by sample")
    p.add_argument(
        "--profiles",
        default="",
        help="comma-separated bundled profile names or profile JSON paths",
    )
    p.add_argument(
        "--kernel-table",
        action="append",
        default=[],
        metavar="PROFILE=CSV",
        help="attach a measured kernel latency table to a profile",
    )

    p = sub.add_parser("ingest", help="join accuracy records into the run store")
    p.add_argument("run")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--records", help="accuracy record file (JSON lines)")
    group.add_argument(
        "--surrogate",
        action="store_true",
        help="generate deterministic surrogate errors instead of trained ones",
    )
    p.add_argument("--seed", type=int, default=0, help="surrogate noise seed")

    p = sub.add_parser("compare", help="compare families with one statistic")
    p.add_argument("runs", nargs="+", help="one or more run directories")
    p.add_argument("--metric", default="macs")
    p.add_argument("--statistic", choices=("edf", "pareto", "samplesize"), default="pareto")
    p.add_argument("--out", required=True, help="output directory for curves and summary")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repetitions", type=int, default=100)

    p = sub.add_parser("samplesize", help="recommend a sampling budget from a record pool")
    p.add_argument("runs", nargs="*", help="run directories with joined records")
    p.add_argument(
        "--synthetic",
        type=int,
        default=None,
        metavar="N",
        help="analyze an N-record bundled synthetic pool instead of runs",
    )
    p.add_argument("--metric", default="macs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repetitions", type=int, default=100)

    p = sub.add_parser("emit-profiles", help="write the bundled hardware profiles as JSON")
    p.add_argument("--out", required=True)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except BlockEvalError as exc:
        return _fail(exc)
    except OSError as exc:
        print(json.dumps({"error": "io", "message": str(exc)}), file=sys.stderr)
        return EXIT_CODES["io"]


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "sample":
        config = load_config(args.config).with_overrides(seed=args.seed)
        run_path = cmd_sample(config, run_dir=args.out)
        print(f"sampled {sum(len(v) for v in _manifest_families(run_path).values())} "
              f"specs into {run_path}")
        return 0

    if args.command == "cost":
        names = [s for s in args.profiles.split(",") if s]
        profiles = resolve_profiles(names, _parse_kernel_tables(args.kernel_table))
        path = cmd_cost(args.run, profiles)
        print(f"wrote {path}")
        return 0

    if args.command == "ingest":
        if args.surrogate:
            result = cmd_ingest_surrogate(args.run, seed=args.seed)
        else:
            result = cmd_ingest(args.run, read_accuracy_file(args.records))
        print(
            f"joined {result.joined} records "
            f"({result.skipped_duplicates} duplicates skipped)"
        )
        if result.unmatched_ids:
            print(
                f"warning: {len(result.unmatched_ids)} unmatched model ids: "
                + ", ".join(result.unmatched_ids),
                file=sys.stderr,
            )
        return 0

    if args.command == "compare":
        result = cmd_compare(
            args.runs,
            metric=args.metric,
            statistic=args.statistic,
            out_dir=args.out,
            seed=args.seed,
            repetitions=args.repetitions,
        )
        print(f"wrote {result.csv_path}, {result.svg_path}, {result.summary_path}")
        return 0

    if args.command == "samplesize":
        if args.synthetic is not None:
            pool = build_synthetic_pool(size=args.synthetic, seed=args.seed)
        elif args.runs:
            from .commands import load_family_records

            families = load_family_records(args.runs)
            pool = [r for records in families.values() for r in records]
        else:
            print(
                f"no pool given; default recommendation is "
                f"{DEFAULT_RECOMMENDED_SAMPLE_SIZE} samples per family"
            )
            return 0
        grid = tuple(n for n in range(40, 401, 40) if n <= len(pool))
        recommended = recommend_sample_size(
            pool, args.metric, size_grid=grid, repetitions=args.repetitions, seed=args.seed
        )
        print(f"recommended sample size: {recommended}")
        return 0

    if args.command == "emit-profiles":
        paths = cmd_emit_profiles(args.out)
        print(f"wrote {len(paths)} profiles to {args.out}")
        return 0

    raise AssertionError(f"unhandled command {args.command}")


def _manifest_families(run_path: Path) -> dict:
    return json.loads((Path(run_path) / "manifest.json").read_text())["families"]


if __name__ == "__main__":
    raise SystemExit(main())
