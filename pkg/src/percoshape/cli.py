"""Command-line interface.

Subcommands map one-to-one onto the experiment runners plus two utility
verbs: ``sample`` writes a raw bond configuration, ``report`` re-emits
artifacts from stored JSON records.  Exit codes: 0 success, 2 invalid
configuration or geometry, 3 conditioning/rejection exhausted, 4
resource capacity exceeded.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .config import (
    EXPERIMENT_KINDS,
    ExperimentConfig,
    default_config,
    parse_config,
    schema_text,
)
from .errors import (
    CapacityError,
    ConditioningError,
    ConfigError,
)
from .experiments import run_experiment
from .lattice import BoxSpec, sample_configuration
from .report import FORMATS, emit_record, load_record

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONDITIONING = 3
EXIT_CAPACITY = 4

_RUN_KINDS = {
    "theta": "theta",
    "beta": "beta",
    "wulff": "wulff",
    "phi": "phi",
    "shape": "shape",
    "converge": "convergence",
}


def _add_common_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", metavar="PATH", help="experiment config file")
    sub.add_argument(
        "--seed", type=int, metavar="U64", help="override the master seed"
    )
    sub.add_argument("--out", metavar="DIR", help="override the output directory")
    sub.add_argument(
        "--threads",
        type=int,
        default=1,
        metavar="N",
        help="worker threads for replicate fan-out (default 1)",
    )
    sub.add_argument(
        "--format",
        action="append",
        choices=FORMATS,
        metavar="{csv,json,svg}",
        help="artifact formats (repeatable; default all)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="percoshape",
        description=(
            "Supercritical bond-percolation laboratory: flow constants, "
            "Wulff crystals, anchored isoperimetric profiles, and cluster "
            "limit shapes."
        ),
        epilog="Run 'percoshape schema' to print the config file schema.",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    subs = parser.add_subparsers(dest="command", required=True)

    sample = subs.add_parser(
        "sample", help="sample one bond configuration and write it to disk"
    )
    _add_common_flags(sample)
    sample.add_argument("--d", type=int, help="lattice dimension")
    sample.add_argument("--p", type=float, help="bond probability")
    sample.add_argument(
        "--half-width", type=int, metavar="L", help="box half-width"
    )

    for name, kind in _RUN_KINDS.items():
        sub = subs.add_parser(name, help=f"run a {kind} experiment")
        _add_common_flags(sub)

    report = subs.add_parser(
        "report", help="re-emit CSV/SVG artifacts from stored JSON records"
    )
    _add_common_flags(report)
    report.add_argument(
        "records", nargs="+", metavar="RECORD.json", help="stored run records"
    )

    subs.add_parser("schema", help="print the config file schema")

    return parser


def _load_config(args, kind: str) -> ExperimentConfig:
    if args.config:
        cfg = parse_config(args.config)
        if cfg.kind != kind:
            cfg = cfg.replace(kind=kind)
    else:
        cfg = default_config(kind)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out"] = args.out
    if overrides:
        cfg = cfg.replace(**overrides)
    return cfg


def _formats(args) -> tuple[str, ...]:
    return tuple(args.format) if args.format else FORMATS


def _cmd_sample(args) -> int:
    cfg = _load_config(args, "phi")
    d = args.d if args.d is not None else cfg.d
    p = args.p if args.p is not None else cfg.p
    hw = args.half_width
    if hw is None:
        hw = cfg.box_half_width if cfg.box_half_width > 0 else 20
    box = BoxSpec(d, hw)
    config = sample_configuration(box, p, cfg.seed)
    os.makedirs(cfg.out, exist_ok=True)
    path = os.path.join(cfg.out, f"sample_d{d}_p{p:g}_s{cfg.seed}.bond")
    with open(path, "wb") as fh:
        fh.write(config.to_bytes())
    print(
        json.dumps(
            {
                "path": path,
                "d": d,
                "p": p,
                "half_width": hw,
                "edges": box.n_edges,
                "open_edges": config.n_open,
                "content_hash": config.content_hash(),
            },
            indent=2,
        )
    )
    return EXIT_OK


def _cmd_run(args, kind: str) -> int:
    cfg = _load_config(args, kind)
    record = run_experiment(cfg, threads=max(1, args.threads))
    paths = emit_record(record, cfg.out, _formats(args))
    print(
        json.dumps(
            {
                "kind": record.kind,
                "config_hash": record.config_hash,
                "summary_columns": list(record.summary_columns),
                "summary_rows": [list(r) for r in record.summary_rows],
                "artifacts": paths,
            },
            indent=2,
        )
    )
    return EXIT_OK


def _cmd_report(args) -> int:
    outdir = args.out if args.out else "runs"
    records = [load_record(path) for path in args.records]
    paths = []
    for record in records:
        paths.extend(emit_record(record, outdir, _formats(args)))
    print(json.dumps({"records": len(records), "artifacts": paths}, indent=2))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "sample":
            return _cmd_sample(args)
        if args.command == "report":
            return _cmd_report(args)
        if args.command == "schema":
            print(schema_text(), end="")
            return EXIT_OK
        return _cmd_run(args, _RUN_KINDS[args.command])
    except ConditioningError as exc:
        print(f"error (conditioning): {exc}", file=sys.stderr)
        return EXIT_CONDITIONING
    except CapacityError as exc:
        print(f"error (capacity): {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except ConfigError as exc:
        print(f"error (config): {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
