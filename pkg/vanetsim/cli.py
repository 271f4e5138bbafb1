"""
Command Line Interface

    vanetsim run      --scenario <cfg> [--seed N] [--out DIR] [--trace] [--control-port P]
    vanetsim compare  --scenario <cfg> [--seed N] [--out DIR]
    vanetsim plot     --metrics <csv> --column pdf|avg_pkts_s --out <svg>
    vanetsim validate --scenario <cfg>
    vanetsim sweep    --scenario <cfg> --nodes 10,20,30 [--seed N] [--out DIR]
    vanetsim api      [--host H] [--port P]

Results are printed to standard output as JSON; logs and errors go to
standard error. Exit status is 2 for invalid input and 3 for I/O failures.
"""

import argparse
import json
import sys
from typing import List, Optional

from vanetsim import __version__
from vanetsim.config import API_HOST, API_PORT, APP_LOG_FILE, LOG_LEVEL
from vanetsim.exceptions import (
    AllocationError,
    ConfigurationError,
    ControlServerError,
    MetricsError,
    OutputError,
    PlotError,
    ScenarioError,
)
from vanetsim.logger import setup_logger
from vanetsim.services.reporting import PLOT_COLUMNS, plot
from vanetsim.services.runner import get_runner

logger = setup_logger(__name__, level=LOG_LEVEL, log_file=APP_LOG_FILE)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_IO = 3

INVALID_INPUT_ERRORS = (ScenarioError, PlotError, AllocationError, ConfigurationError, MetricsError)
IO_ERRORS = (OutputError, ControlServerError, OSError)


def _node_list(raw: str) -> List[int]:
    try:
        values = [int(part) for part in raw.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{raw}'")
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError(f"node counts must be positive integers, got '{raw}'")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vanetsim",
        description="Traffic and V2V co-simulator with adaptive signal control",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_args(p: argparse.ArgumentParser, out: bool = True) -> None:
        p.add_argument("--scenario", required=True, help="Scenario configuration file")
        if out:
            p.add_argument("--seed", type=int, help="Override the scenario seed")
            p.add_argument("--end", type=float, help="Override the scenario end time (s)")
            p.add_argument("--out", help="Output directory")

    run = sub.add_parser("run", help="Run a scenario and write its result files")
    scenario_args(run)
    run.add_argument("--trace", action="store_true", help="Write the per-step vehicle trace CSV")
    run.add_argument("--control-port", type=int, help="Serve the control protocol on this port")
    run.add_argument("--mode", choices=("auto", "static", "adaptive"), default="auto")

    compare = sub.add_parser("compare", help="Compare static and adaptive signal control")
    scenario_args(compare)
    compare.add_argument(
        "--parallel",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="Run both controllers in worker processes",
    )

    plot_p = sub.add_parser("plot", help="Bar chart of a metrics CSV as SVG")
    plot_p.add_argument("--metrics", required=True, help="Metrics CSV")
    plot_p.add_argument("--column", choices=PLOT_COLUMNS, default="pdf")
    plot_p.add_argument("--out", required=True, help="SVG output path")

    validate = sub.add_parser("validate", help="Load and cross-check a scenario")
    scenario_args(validate, out=False)

    sweep = sub.add_parser("sweep", help="Run once per radio node count")
    scenario_args(sweep)
    sweep.add_argument("--nodes", type=_node_list, required=True, help="e.g. 10,20,30,40,50")

    api = sub.add_parser("api", help="Serve the HTTP API")
    api.add_argument("--host", default=API_HOST)
    api.add_argument("--port", type=int, default=API_PORT)
    return parser


def _emit(payload) -> None:
    if hasattr(payload, "model_dump"):
        payload = payload.model_dump(mode="json")
    sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _dispatch(args: argparse.Namespace) -> int:
    runner = get_runner()
    if args.command == "run":
        _emit(
            runner.run(
                args.scenario,
                seed=args.seed,
                end=args.end,
                mode=args.mode,
                out_dir=args.out,
                trace=args.trace,
                control_port=args.control_port,
            )
        )
    elif args.command == "compare":
        _emit(
            runner.compare(
                args.scenario, seed=args.seed, end=args.end, out_dir=args.out, parallel=args.parallel
            )
        )
    elif args.command == "plot":
        path = plot(args.metrics, args.out, args.column)
        _emit({"svg": str(path), "column": args.column})
    elif args.command == "validate":
        _emit(runner.validate(args.scenario))
    elif args.command == "sweep":
        rows, path = runner.sweep(
            args.scenario, args.nodes, seed=args.seed, end=args.end, out_dir=args.out
        )
        _emit({"metrics": str(path), "rows": [{"nodes": n, **m.model_dump()} for n, m in rows]})
    elif args.command == "api":
        import uvicorn

        uvicorn.run("vanetsim.main:app", host=args.host, port=args.port)
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except INVALID_INPUT_ERRORS as exc:
        logger.error(str(exc))
        return EXIT_INVALID
    except IO_ERRORS as exc:
        logger.error(str(exc))
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
