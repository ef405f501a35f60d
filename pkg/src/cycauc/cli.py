"""Command-line entry point.

Subcommands: ``run`` executes one experiment, ``sweep`` expands a parameter
grid, ``report`` renders round logs into figures plus a CSV table.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
failure (non-finite parameters).
"""

from __future__ import annotations

import argparse
import sys

from .config import ALGORITHMS, ConfigError, load_config
from .data import DataError
from .metrics import NumericError
from .report import write_report
from .runner import run_experiment, sweep

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cycauc",
        description="Federated AUC maximization simulator with cyclic client participation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute one experiment")
    _add_config_flags(run_p)

    sweep_p = sub.add_parser("sweep", help="run a Cartesian grid of experiments")
    _add_config_flags(sweep_p)
    sweep_p.add_argument(
        "--grid", action="append", default=[], metavar="KEY=V1,V2,...",
        help="grid dimension as a dotted config path with comma-separated values (repeatable)",
    )

    report_p = sub.add_parser("report", help="render round logs to figures and CSV")
    report_p.add_argument("logs", nargs="+", help="rounds.jsonl files")
    report_p.add_argument("--out", required=True, help="output directory")
    return parser


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file (defaults apply when omitted)")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--out", help="output directory (default: $CYCAUC_OUT_ROOT/<name>)")
    p.add_argument("--algorithm", choices=ALGORITHMS, help="training algorithm")
    p.add_argument(
        "--set", action="append", default=[], dest="overrides", metavar="KEY.PATH=VALUE",
        help="dotted-path config override (repeatable)",
    )


def _parse_grid(items: list[str]) -> dict[str, list]:
    grid: dict[str, list] = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"--grid {item!r} must look like key.path=v1,v2")
        key, values = item.split("=", 1)
        from .config import _coerce

        grid[key] = [_coerce(v) for v in values.split(",") if v != ""]
    return grid


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            config = load_config(args.config, args.overrides, args.algorithm,
                                 args.seed, args.out)
            summary = run_experiment(config)
            print(f"final test AUC {summary['final_test_auc']:.4f} "
                  f"after {summary['total_rounds']} rounds")
            return 0
        if args.command == "sweep":
            config = load_config(args.config, args.overrides, args.algorithm, args.seed)
            grid = _parse_grid(args.grid)
            if args.out is None:
                raise ConfigError("sweep requires --out")
            results = sweep(config, grid, args.out)
            print(f"sweep finished: {len(results)} runs executed")
            return 0
        write_report(args.logs, args.out)
        print(f"report written to {args.out}")
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
