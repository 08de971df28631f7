"""
Command line entry point: ``inhomog-ssa <simulate|couple|sensitivity|mlmc> --config <file>``.

Flags override the corresponding configuration fields. Exit codes: 0 on
success, 2 on configuration or model errors found before the run, 3 on errors
raised while simulating.
"""
import argparse
import logging
import sys
from typing import List, Optional

from .catalog import model_names
from .config_manager import Config
from .exceptions import ConfigError, CouplingContractError, ModelDefinitionError, SimulationError
from .experiment import ExperimentSpec, run_experiment

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SIMULATION = 3


def _channel_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.replace(" ", "").split(",") if part]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated channel numbers, got {text!r}") from None


def _level_pair(text: str) -> List[int]:
    try:
        levels = [int(part) for part in text.replace(" ", "").split(",")]
    except ValueError:
        levels = []
    if len(levels) != 2:
        raise argparse.ArgumentTypeError(f"expected ell0,L such as 2,3; got {text!r}")
    return levels


def _perturbation(text: str):
    name, sep, value = text.partition("=")
    try:
        return name, float(value) if sep else None
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected <param>=<h>, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="inhomog-ssa",
        description="Exact simulation, coupled paths, sensitivities and multilevel estimates "
                    "for reaction networks with time-dependent propensities.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML experiment configuration")
    common.add_argument("--model", help=f"built-in model ({', '.join(model_names())})")
    common.add_argument("--model-file", help="YAML model definition")
    common.add_argument("--T", help="horizon, optionally with a unit suffix (e.g. 20h, 10y)")
    common.add_argument("--seed", type=int, help="master seed (64-bit unsigned)")
    common.add_argument("--workers", type=int, help="worker threads")
    common.add_argument("--bound-window", type=float, help="bound certification window")
    common.add_argument("--out", help="output directory, or the report CSV path when it ends in .csv")
    common.add_argument("--prefix", help="artifact file prefix")
    common.add_argument("--record-timing", action="store_true", default=None,
                        help="add wall_seconds to the report CSV")
    common.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate", parents=[common], help="direct Monte Carlo over exact paths")
    simulate.add_argument("--n", type=int, help="number of paths")
    simulate.add_argument("--target-sd", type=float, help="grow n until the estimate's SD is below this")
    simulate.add_argument("--method", choices=["extrande", "hitting-time", "tau-leap"])
    simulate.add_argument("--tau-step", type=float, help="tau-leap step")
    simulate.add_argument("--exact-channels", type=_channel_list, help="channels kept exact in tau-leap")
    simulate.add_argument("--species", action="append", help="species to report (repeatable)")

    couple = commands.add_parser("couple", parents=[common], help="coupled pairs and variance curves")
    couple.add_argument("--perturb", type=_perturbation, help="<param>=<h>")
    couple.add_argument("--coupling", choices=["independent", "crn", "thinning", "stacked"])
    couple.add_argument("--n", type=int, help="number of pairs")
    couple.add_argument("--species", help="species of the variance curve")

    sensitivity = commands.add_parser("sensitivity", parents=[common], help="finite-difference sensitivity")
    sensitivity.add_argument("--param", help="parameter to perturb")
    sensitivity.add_argument("--h", type=float, help="perturbation size")
    sensitivity.add_argument("--coupling", choices=["independent", "crn", "thinning", "stacked"])
    sensitivity.add_argument("--n", type=int, help="number of pairs")
    sensitivity.add_argument("--target-sd", type=float, help="add pairs until the estimate's SD is below this")
    sensitivity.add_argument("--functional", choices=["endpoint", "grid", "extinction"])
    sensitivity.add_argument("--species", help="species the functional reads")

    mlmc = commands.add_parser("mlmc", parents=[common], help="multilevel Monte Carlo expectation")
    mlmc.add_argument("--M", type=int, help="refinement factor")
    mlmc.add_argument("--levels", type=_level_pair, help="ell0,L")
    mlmc.add_argument("--target-sd", type=float, help="target estimator SD")
    mlmc.add_argument("--exact-channels", type=_channel_list, help="channels kept exact (e.g. 6)")
    mlmc.add_argument("--species", action="append", help="species to estimate (repeatable)")
    mlmc.add_argument("--compare-direct", action="store_true", default=None,
                      help="also run direct Extrande to the same target SD")
    return parser


def apply_overrides(config: Config, args: argparse.Namespace) -> None:
    """Copy the given flags into ``config``."""
    command = args.command
    config.set('experiment.command', command)
    common = {
        'model': 'experiment.model', 'model_file': 'experiment.model_file', 'T': 'experiment.T',
        'seed': 'experiment.seed', 'workers': 'experiment.workers', 'bound_window': 'experiment.bound_window',
        'prefix': 'output.prefix', 'record_timing': 'output.record_timing',
    }
    out = getattr(args, 'out', None)
    if out is not None:
        if out.lower().endswith(".csv"):
            config.set('output.report', out)
        else:
            config.set('output.directory', out)
            config.set('output.report', None)
    if getattr(args, 'model', None):
        # an explicit built-in replaces a model file named in the config
        config.set('experiment.model_file', None)
    per_command = {
        'n': 'n', 'target_sd': 'target_sd', 'method': 'method', 'tau_step': 'tau_step',
        'exact_channels': 'exact_channels', 'species': 'species', 'coupling': 'coupling',
        'param': 'param', 'h': 'h', 'functional': 'functional', 'M': 'M', 'levels': 'levels',
        'compare_direct': 'compare_direct',
    }
    for attribute, key in common.items():
        value = getattr(args, attribute, None)
        if value is not None:
            config.set(key, value)
    for attribute, field in per_command.items():
        value = getattr(args, attribute, None)
        if value is not None:
            config.set(f"{command}.{field}", value)
    perturb = getattr(args, 'perturb', None)
    if perturb is not None:
        config.set('couple.param', perturb[0])
        if perturb[1] is not None:
            config.set('couple.h', perturb[1])


def main(argv: Optional[List[str]] = None) -> int:
    """Run one command; returns the process exit code."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        config = Config(args.config) if args.config else Config()
        apply_overrides(config, args)
        spec = ExperimentSpec.from_config(config)
    except (ConfigError, ModelDefinitionError, CouplingContractError) as e:
        logger.error("Configuration error: %s", e)
        return EXIT_CONFIG
    try:
        result = run_experiment(spec)
    except (ConfigError, CouplingContractError) as e:
        logger.error("Configuration error: %s", e)
        return EXIT_CONFIG
    except (SimulationError, ModelDefinitionError) as e:
        # a model that loads cleanly can still fail on a reachable state
        logger.error("Simulation failed: %s", e)
        return EXIT_SIMULATION
    for path in result.files:
        print(path)
    if not all(report.converged for report in result.reports):
        logger.warning("Some estimates did not reach their target; see the run manifest")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
