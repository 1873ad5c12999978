import argparse
import logging
import sys
from typing import Callable, Dict, List, Optional, Sequence

from rshelab.cli.output import write_artifacts
from rshelab.config.grammar import load_config
from rshelab.config.run_config import OUTPUT_ENV_VAR, RunConfig
from rshelab.errors import ConfigError, NumericalError
from rshelab.experiments.campaigns import (
    bridge_experiment,
    contraction_experiment,
    convergence_experiment,
    derivative_bound_experiment,
    energy_experiment,
    orthogonality_experiment,
    reflection_experiment,
    simulate_experiment,
    smoothing_experiment,
)
from rshelab.experiments.properties import properties_suite
from rshelab.experiments.report import ExperimentReport, Status
from rshelab.types import ConfigMapping

logger = logging.getLogger("rshelab")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

Command = Callable[[RunConfig], List[ExperimentReport]]

COMMANDS: Dict[str, Command] = {
    "properties": lambda cfg: [properties_suite(cfg)],
    "simulate": lambda cfg: [simulate_experiment(cfg)],
    "contraction": lambda cfg: [contraction_experiment(cfg)],
    "reflection": lambda cfg: [
        reflection_experiment(cfg),
        orthogonality_experiment(cfg),
    ],
    "energy": lambda cfg: [energy_experiment(cfg)],
    "smoothing": lambda cfg: [smoothing_experiment(cfg)],
    "derivative": lambda cfg: [derivative_bound_experiment(cfg)],
    "convergence": lambda cfg: [convergence_experiment(cfg)],
    "bridge": lambda cfg: [bridge_experiment(cfg)],
}

DESCRIPTIONS = {
    "properties": "rearrangement, heat semigroup and noise law invariant suites",
    "simulate": "dump a single trajectory",
    "contraction": "pathwise contraction of coupled runs",
    "reflection": "monotonicity of eta and the orthogonality defect",
    "energy": "energy balance residual",
    "smoothing": "Lipschitz smoothing exponent of the semigroup",
    "derivative": "decay of the initial condition in E||DX_t||^2",
    "convergence": "strong differences between dyadic step sizes",
    "bridge": "W2 isometry and sample ingestion",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rshelab",
        description="Simulate and verify the rearranged stochastic heat equation.",
    )
    parser.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="log progress (-v) or debug details (-vv) to standard error",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")
    for name in COMMANDS:
        p = sub.add_parser(name, help=DESCRIPTIONS[name])
        p.add_argument("--config", help="key = value or JSON configuration file")
        p.add_argument(
            "--out",
            help=f"output directory (default: output.dir, ${OUTPUT_ENV_VAR}, rshe-out)",
        )
        p.add_argument("--threads", type=int, help="worker threads (default: cores)")
        p.add_argument("--seed", type=int, help="master seed, overrides noise.seed")
        p.add_argument("--svg", action="store_true", help="also write SVG line plots")
    return parser


def load_run_config(args: argparse.Namespace) -> RunConfig:
    mapping: ConfigMapping = load_config(args.config) if args.config else {}
    return RunConfig.from_mapping(
        mapping, seed=args.seed, threads=args.threads, out_dir=args.out
    )


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity > 1:
        level = logging.DEBUG
    logging.basicConfig(
        stream=sys.stderr,
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def run(command: str, run_config: RunConfig, svg: bool = False) -> int:
    """Run one subcommand, write its artifacts and return the exit status."""
    reports = COMMANDS[command](run_config)
    status = EXIT_OK
    for report in reports:
        write_artifacts(report, run_config.out_dir, svg)
        for verdict in report.verdicts:
            if verdict.status is Status.WARN:
                logger.warning(
                    "%s: soft check %s outside [%g, %g] (observed %g)",
                    report.name,
                    verdict.name,
                    verdict.low,
                    verdict.high,
                    verdict.observed,
                )
        for verdict in report.hard_failures:
            logger.error(
                "%s: check %s failed: observed %g, allowed [%g, %g]",
                report.name,
                verdict.name,
                verdict.observed,
                verdict.low,
                verdict.high,
            )
            status = EXIT_NUMERICAL
        logger.info(
            "%s: %s in %.1fs", report.name, report.status.value, report.wall_clock
        )
    return status


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    try:
        run_config = load_run_config(args)
        return run(args.command, run_config, args.svg)
    except ConfigError as e:
        logger.error("configuration error: %s", e)
        return EXIT_CONFIG
    except NumericalError as e:
        logger.error("numerical failure: %s", e)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
