"""Command-line entry points.

Subcommands: the four model runners (``ssep``, ``brownian``, ``spde``,
``dk``), a config-driven ``sweep``, the ``validate`` oracle battery, and
``report`` for convergence-rate summaries. Exit codes: 0 success, 2 config
error, 3 oracle failure, 4 simulator blow-up beyond the abort threshold.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .harness import ConfigError, build_config, parse_config_text, report, run
from .validate import run_all

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ORACLE = 3
EXIT_BLOWUP = 4

_FLAG_KEYS = (
    "d",
    "n",
    "grid_m",
    "t",
    "h",
    "eps",
    "delta",
    "reg_n",
    "jump_weight",
    "bm_variance",
    "rho0",
    "phi",
    "replicas",
    "seed",
    "workers",
    "out",
    "manifest",
)


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value configuration file")
    for key in _FLAG_KEYS:
        parser.add_argument(f"--{key.replace('_', '-')}", dest=key, help=f"override config key {key}")


def _run_model(args: argparse.Namespace, model: str | None) -> int:
    raw: dict[str, tuple[str, str]] = {}
    if args.config:
        path = Path(args.config)
        if not path.exists():
            print(f"config error: file not found: {path}", file=sys.stderr)
            return EXIT_CONFIG
        raw = parse_config_text(path.read_text())
    overrides = {key: getattr(args, key) for key in _FLAG_KEYS}
    if model is not None:
        overrides["model"] = model
    try:
        config = build_config(raw, overrides)
        records, _, _ = run(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    invalid = [r for r in records if r.status != "ok"]
    for record in records:
        print(
            f"{record.model} h={record.h:g}"
            + (f" eps={record.eps:g}" if record.eps is not None else "")
            + f": q_hat={record.q_hat:.6g} +- {record.q_se:.3g}"
            f" ref={record.mobility_ref:.6g} err={record.abs_error:.4g} [{record.status}]"
        )
    print(f"wrote {config.out} and {config.manifest_path()}")
    if invalid:
        print(f"{len(invalid)} record(s) invalid: aborted replicas exceeded 1%", file=sys.stderr)
        return EXIT_BLOWUP
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="fluctmob",
        description="Mobility recovery from fluctuation quadratic variation: simulators, estimator, and oracles.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for model in ("ssep", "brownian", "spde", "dk"):
        p = sub.add_parser(model, help=f"run {model} quadratic-variation experiments")
        _add_run_flags(p)
    p_sweep = sub.add_parser("sweep", help="run the experiment grid from a config file")
    _add_run_flags(p_sweep)
    p_val = sub.add_parser("validate", help="run every oracle check; nonzero exit on failure")
    p_val.add_argument("--quiet", action="store_true")
    p_rep = sub.add_parser("report", help="summarize CSVs: rate fits and plot data")
    p_rep.add_argument("csv", nargs="+", help="CSV files produced by run/sweep")
    p_rep.add_argument("--out-dir", default=None, help="directory for summary.txt and *.dat plot files")

    args = parser.parse_args(argv)
    if args.command in ("ssep", "brownian", "spde", "dk"):
        return _run_model(args, args.command)
    if args.command == "sweep":
        return _run_model(args, None)
    if args.command == "validate":
        results = run_all(verbose=not args.quiet)
        failed = [r for r in results if not r.ok]
        print(f"{len(results) - len(failed)}/{len(results)} oracle checks passed")
        return EXIT_ORACLE if failed else EXIT_OK
    if args.command == "report":
        try:
            summary = report(args.csv, args.out_dir)
        except ValueError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(summary, end="")
        return EXIT_OK
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
