"""Command line entry point: ``schauderlab {solve,verify,study,echo}``."""
from __future__ import annotations

import argparse
import sys

from .config import ConfigError, load_scenario
from .errors import InvalidArgument, SolverFailure
from . import runner

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="schauderlab", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="scenario file")
    common.add_argument("--out", default=None,
                        help=f"output directory (default ${runner.OUT_ENV} or ./{runner.DEFAULT_OUT})")
    common.add_argument("--format", choices=("csv", "json", "both"), default="both")
    common.add_argument("--seed", type=int, default=0, help="seed for random pair sampling in fits")
    sub.add_parser("solve", parents=[common], help="solve only and export fields")
    sub.add_parser("verify", parents=[common], help="solve and run the listed checkers")
    st = sub.add_parser("study", parents=[common], help="refinement study")
    st.add_argument("--levels", type=int, default=None, help="override study.levels")
    ec = sub.add_parser("echo", help="print the normalized scenario")
    ec.add_argument("--config", required=True)
    return ap


def _summary(result, out) -> None:
    for r, lvl in zip(result.reports, result.levels):
        c = r.implied_constant
        print(f"{r.name:<28} level {lvl}  {r.status:<18} C={c:.4g}", file=out)
    for r in result.not_met:
        print(f"hypothesis not met: {r.name}", file=out)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    sc = None
    try:
        sc = load_scenario(args.config)
        if args.command == "echo":
            sys.stdout.write(sc.to_text())
            return EXIT_OK
        if args.command == "study":
            result = runner.study(sc, args.levels, args.seed)
        else:
            result = runner.run(sc, args.seed, checks=args.command == "verify")
        if args.command == "solve" and not sc["output.fields"]:
            sc = sc.with_values(output__fields=True)
            result.scenario = sc
        out_dir = args.out or runner.default_out_dir()
        for path in runner.write_outputs(result, out_dir, args.format):
            print(f"wrote {path}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvalidArgument as exc:
        where = sc.source if sc is not None else args.config
        print(f"error: {where}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverFailure as exc:
        print(f"solver failure in scenario {sc.id}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    _summary(result, sys.stdout)
    if result.failed:
        print(f"{len(result.failed)} gated check(s) failed", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
