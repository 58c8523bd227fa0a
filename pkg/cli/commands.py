"""`dephasim simulate|fit|budget|allan|scenarios`."""
import argparse
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from colorama import Fore, Style

from analysis.fitting import MODELS, Dataset, EchoModel, fit_model
from analysis.noise_budget import NoiseBudget, TimeSeries, allan_curve
from analysis.report import print_summary, write_budget
from cli import console
from cli.config import load_config, resolve_seed
from cli.io import write_allan, write_fit, write_signal
from core.constants import MILLISECOND, hz_to_rad
from core.errors import ConfigurationError, ConvergenceError, InputDataError
from sim.scenarios import ScenarioConfig, get_scenario, list_scenarios

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CONVERGENCE = 3

MIN_ALLAN_SAMPLES = 4

# --init suffixes and the factor that converts them to internal units.
_INIT_UNITS = {
    "_hz": hz_to_rad,
    "_ms": lambda value: value * MILLISECOND,
}


def _load_scenario(args: argparse.Namespace) -> ScenarioConfig:
    if args.config:
        return load_config(args.config)
    return get_scenario(args.scenario)


def parse_init(items: Optional[Sequence[str]]) -> Dict[str, float]:
    """`detuning_hz=2100` -> {'detuning': 2pi * 2100}; unsuffixed keys are taken as is."""
    init: Dict[str, float] = {}
    for item in items or []:
        key, sep, raw = item.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigurationError(f"expected key=value, got {item!r}", field="--init")
        try:
            value = float(raw)
        except ValueError:
            raise ConfigurationError(f"not a number: {raw!r}", field="--init") from None
        for suffix, convert in _INIT_UNITS.items():
            if key.endswith(suffix):
                key, value = key[: -len(suffix)], convert(value)
                break
        init[key] = value
    return init


def cmd_simulate(args: argparse.Namespace) -> int:
    scenario = _load_scenario(args)
    if not scenario.has_sequence:
        raise ConfigurationError(f"scenario '{scenario.name}' has no [sequence] section", field="sequence")
    file_seed = scenario.ensemble.rng_seed if scenario.ensemble else None
    scenario = scenario.with_seed(resolve_seed(args.seed, file_seed))
    if args.workers is not None:
        scenario.workers = args.workers

    console.info(f"Simulating {scenario.kind.value} sequence: {scenario.name}")
    model = scenario.build_model()
    result = model.run(scenario.times)
    logger.debug("model state: %s", model.get_state())
    path = write_signal(result, args.out)
    console.note(f"{result.times.size} points, {result.atom_count} atom(s), seed {model.seed} -> {path}")
    return EXIT_OK


def cmd_fit(args: argparse.Namespace) -> int:
    path = Path(args.data)
    if not path.is_file():
        raise InputDataError(f"data file not found: {path}")
    data = Dataset.from_csv(str(path))
    if args.model == "echo":
        if args.tau_pi_ms is None:
            raise ConfigurationError("echo fits need --tau-pi-ms", field="--tau-pi-ms")
        model = EchoModel(args.tau_pi_ms * MILLISECOND)
    else:
        model = MODELS[args.model]()

    result = fit_model(model, data, parse_init(args.init), weighted=args.weighted)
    print()
    print(Fore.CYAN + result.summary() + Style.RESET_ALL)
    print()
    out = args.out or f"fit_{args.model}.csv"
    csv_path, summary_path = write_fit(result, out)
    console.note(f"Results written to {csv_path} and {summary_path}")
    return EXIT_OK


def cmd_budget(args: argparse.Namespace) -> int:
    scenario = _load_scenario(args)
    if not scenario.has_budget:
        raise ConfigurationError(f"scenario '{scenario.name}' has no budget sections", field="budget")
    budget = NoiseBudget.from_inputs(scenario.trap, scenario.budget)
    print_summary(budget, title=scenario.name.upper())
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    paths = write_budget(budget, args.out)
    console.note("Report written to " + ", ".join(paths))
    return EXIT_OK


def cmd_allan(args: argparse.Namespace) -> int:
    path = Path(args.series)
    if not path.is_file():
        raise InputDataError(f"series file not found: {path}")
    series = TimeSeries.from_csv(str(path))
    if len(series) < MIN_ALLAN_SAMPLES:
        raise InputDataError(f"Allan deviation needs at least {MIN_ALLAN_SAMPLES} samples, got {len(series)}")
    taus = None if not args.tau_ms else [tau * MILLISECOND for tau in args.tau_ms]
    try:
        curve: List[Tuple[float, float]] = allan_curve(series, taus, normalize=not args.raw)
    except ValueError as exc:
        raise InputDataError(str(exc)) from exc
    out = write_allan(curve, args.out)
    console.note(f"{len(curve)} averaging times -> {out}")
    return EXIT_OK


def cmd_scenarios(args: argparse.Namespace) -> int:
    print("\n" + "=" * 60)
    print("BUNDLED SCENARIOS")
    print("=" * 60)
    for meta in list_scenarios():
        print(Fore.GREEN + f"{meta['id']}" + Style.RESET_ALL + f"  {meta['name']}")
        print(f"  {meta['expected_outcome']}")
    print("=" * 60 + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="Debug logging.")

    parser = argparse.ArgumentParser(
        prog="dephasim",
        description="Dephasing of hyperfine qubits in optical dipole traps: simulate, fit, budget.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_source(p: argparse.ArgumentParser):
        group = p.add_mutually_exclusive_group(required=True)
        group.add_argument("--config", help="Scenario file (INI).")
        group.add_argument("--scenario", help="Bundled scenario name, see `dephasim scenarios`.")

    simulate = sub.add_parser("simulate", parents=[common], help="Closed-form and Monte Carlo P3 time series.")
    scenario_source(simulate)
    simulate.add_argument("--seed", type=int, default=None, help="Overrides DEPHASIM_SEED and the file seed.")
    simulate.add_argument("--workers", type=int, default=None, help="Threads over atom blocks.")
    simulate.add_argument("--out", default="signal.csv", help="Output CSV.")
    simulate.set_defaults(handler=cmd_simulate)

    fit = sub.add_parser("fit", parents=[common], help="Least-squares fit of a dataset.")
    fit.add_argument("data", help="CSV with t_s,p3[,weight] (or tau_pi_s,visibility).")
    fit.add_argument("--model", required=True, choices=sorted(MODELS))
    fit.add_argument("--tau-pi-ms", type=float, default=None, help="pi-pulse time of echo data.")
    fit.add_argument("--init", action="append", metavar="KEY=VALUE",
                     help="Initial guess, e.g. detuning_hz=2100 or t2star_ms=4.")
    fit.add_argument("--weighted", action="store_true", help="Use the weight column.")
    fit.add_argument("--seed", type=int, default=None, help=argparse.SUPPRESS)
    fit.add_argument("--out", default=None, help="Output CSV (default fit_<model>.csv).")
    fit.set_defaults(handler=cmd_fit)

    budget = sub.add_parser("budget", parents=[common], help="Dephasing budget report.")
    scenario_source(budget)
    budget.add_argument("--seed", type=int, default=None, help=argparse.SUPPRESS)
    budget.add_argument("--out", default="budget", help="Output base name.")
    budget.set_defaults(handler=cmd_budget)

    allan = sub.add_parser("allan", parents=[common], help="Allan deviation of a time series.")
    allan.add_argument("series", help="CSV with time_s,value.")
    allan.add_argument("--tau-ms", type=float, nargs="+", default=None, help="Averaging times.")
    allan.add_argument("--raw", action="store_true", help="Do not normalize by the mean.")
    allan.add_argument("--seed", type=int, default=None, help=argparse.SUPPRESS)
    allan.add_argument("--out", default="allan.csv", help="Output CSV.")
    allan.set_defaults(handler=cmd_allan)

    scenarios = sub.add_parser("scenarios", parents=[common], help="List bundled scenarios.")
    scenarios.set_defaults(handler=cmd_scenarios)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand and return its exit code."""
    args = build_parser().parse_args(argv)
    console.setup_logging(args.verbose)
    try:
        return args.handler(args)
    except ConvergenceError as exc:
        console.error(f"error: {exc}")
        console.error(exc.diagnostics())
        return EXIT_CONVERGENCE
    except ValueError as exc:
        console.error(f"error: {exc}")
        return EXIT_INPUT
    except OSError as exc:
        console.error(f"error: {exc}")
        return EXIT_INPUT
