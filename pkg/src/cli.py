"""
Command line interface: rate, sweep and selftest.
"""
import argparse
import asyncio
import logging
import sys
from typing import List, Optional

from src.exceptions import NumericalError
from src.logging_config import configure_logging
from src.models.config import Protocol, SpecOverride, SweepKind, SweepSpec
from src.models.network import CombiningMode, KnowledgeMode
from src.rate_agent import create_agent

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relay-rates", description="Half-duplex Gaussian relay network rates")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--log-json", action="store_true", help="Emit logs as JSON objects")
    commands = parser.add_subparsers(dest="command", required=True)

    rate = commands.add_parser("rate", help="Optimize one protocol at one network point")
    rate.add_argument("protocol", help=f"One of: {', '.join(p.value for p in Protocol)}")
    rate.add_argument("--config", help="Key/value config file")
    add_point_options(rate)

    sweep = commands.add_parser("sweep", help="Run an experiment sweep and write rates.csv")
    sweep.add_argument("kind", choices=[k.value for k in SweepKind])
    sweep.add_argument("--config", required=True, help="Key/value config file")
    sweep.add_argument("--out", required=True, help="Output directory")
    sweep.add_argument("--plot", action="store_true", help="Also write rates.svg")
    sweep.add_argument("--workers", type=int, help="Worker processes")
    add_point_options(sweep)

    commands.add_parser("selftest", help="Run the invariant suite")
    return parser


def add_point_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--r", type=float, help="Relay position")
    parser.add_argument("--snr-db", type=float, help="Source-destination SNR in dB")
    parser.add_argument("--theta", type=float, help="Path loss exponent")
    parser.add_argument("--n-relays", type=int, help="Number of relays")
    parser.add_argument("--schedule", choices=[m.value for m in KnowledgeMode])
    parser.add_argument("--combining", choices=[m.value for m in CombiningMode])
    parser.add_argument("--seed", type=int)
    parser.add_argument("--budget", type=int, help="Optimizer evaluations per branch")


def override_from(args: argparse.Namespace) -> SpecOverride:
    return SpecOverride(
        r=args.r,
        n_relays=args.n_relays,
        snr_db=args.snr_db,
        theta=args.theta,
        schedule=KnowledgeMode(args.schedule) if args.schedule else None,
        combining=CombiningMode(args.combining) if args.combining else None,
        seed=args.seed,
        budget=args.budget,
        workers=getattr(args, "workers", None),
        kind=SweepKind(args.kind) if getattr(args, "kind", None) else None,
    )


async def run_rate(args: argparse.Namespace) -> int:
    protocol = Protocol.parse(args.protocol)
    agent = create_agent()
    override = override_from(args)
    if args.config:
        spec = await agent.load_config(args.config, override)
    else:
        spec = override.apply(SweepSpec())

    result = await agent.compute_rate(protocol, spec)
    print(f"protocol={result.protocol} rate_bpcu={result.rate:.5f} binding={result.binding_label} evals={result.evaluations}")
    print(result.model_dump_json(indent=2, exclude={"breakdown"}))
    return EXIT_OK


async def run_sweep(args: argparse.Namespace) -> int:
    agent = create_agent()
    spec = await agent.load_config(args.config, override_from(args))
    table = await agent.run_sweep(spec, out_dir=args.out, plot=args.plot)
    print(f"{len(table.rows)} rows written to {args.out} ({len(table.failed_rows)} failed)")
    return EXIT_OK


async def run_selftest(args: argparse.Namespace) -> int:
    report = await create_agent().run_selftest()
    for check in report.checks:
        print(f"{'PASS' if check.passed else 'FAIL'} {check.name}: {check.detail}")
    print(f"{report.passed} passed, {report.failed} failed")
    return EXIT_OK if report.ok else EXIT_NUMERICAL


HANDLERS = {"rate": run_rate, "sweep": run_sweep, "selftest": run_selftest}


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments, run the command and map failures to exit codes.

    Returns:
        0 on success, 2 for invalid input, 3 for numerical failures
    """
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level, json_format=args.log_json)
    try:
        return asyncio.run(HANDLERS[args.command](args))
    except NumericalError as e:
        logger.error(f"Numerical failure: {e}", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as e:
        logger.error(f"Invalid input: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
