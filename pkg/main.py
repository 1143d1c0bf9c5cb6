"""Main entry point for the heavy-ball convex benchmark."""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv
from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape
from rich.markdown import Markdown
from rich.panel import Panel
from rich.table import Table

from harness.config import ConfigError, RunConfig, Settings, load_config_file, validate_run
from harness.experiment import RunOutcome, compare, execute
from harness.messages import (
    COMPARE_EPILOG,
    RUN_EPILOG,
    VERIFY_EPILOG,
    WELCOME_MESSAGE,
    format_check,
    format_value,
)
from harness.suites import ALL_SUITES, SuiteScale, run_suite
from storage.libsvm import make_synthetic_dataset, write_libsvm

# Load environment variables
load_dotenv()

console = Console()
logger = logging.getLogger("heavyball")

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2

QUICK_SCALE = SuiteScale(
    projection_instances=50,
    inequality_samples=200,
    identity_problems=5,
    identity_steps=200,
    ema_steps=200,
    beta_horizon=10_000,
    rate_steps=2_000,
)


def configure_logging(level: str) -> None:
    logging.basicConfig(
        level=level.upper(),
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=console, rich_tracebacks=True, show_path=False)],
        force=True,
    )


def _add_problem_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("problem")
    group.add_argument("--problem", choices=["hard", "hinge", "maxlinear"], default="hard")
    group.add_argument("--T", type=int, default=1000, help="horizon / dimension of the hard function")
    group.add_argument("--c", type=float, default=2.0, help="scale c of the hard function")
    group.add_argument("--dataset", help="LibSVM file for the hinge problem")
    group.add_argument("--tau", type=float, help="ℓ₁ radius (defaults to the dataset preset)")
    group.add_argument("--dim", type=int, default=10, help="dimension of the max-of-linear problem")
    group.add_argument("--pieces", type=int, default=20, help="linear pieces of the max-of-linear problem")
    group.add_argument("--instance-seed", type=int, default=0, help="seed of the max-of-linear instance")
    group.add_argument("--shape", choices=["random", "valley"], default="random",
                       help="max-of-linear instance: Gaussian pieces or the power valley")


def _add_shared_run_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("optimizer")
    group.add_argument("--gamma", type=float, default=0.1, help="EMA parameter γ ∈ (0, 1]")
    group.add_argument("--delta", type=float, default=1e-8, help="EMA regularizer δ > 0")
    group.add_argument("--iters", type=int, default=1000, help="number of steps T")
    group.add_argument("--batch", type=int, default=0, help="mini-batch size, 0 = exact subgradients")
    group.add_argument("--seed", type=int, default=0)
    group.add_argument("--repeats", type=int, default=5,
                       help="seeds averaged by mini-batch runs (exact runs use one)")
    group.add_argument("--checks", default="", help="comma list of reformulation, lemma3, rate, floor")
    group.add_argument("--schedule-epoch-size", type=int, default=1)
    group.add_argument("--fixed-horizon", action="store_true", help="use α/√T for every step")
    group.add_argument("--fstar", type=float, help="reference optimum (skips estimation)")
    group.add_argument("--fstar-budget", type=int, default=10_000)
    group.add_argument("--config", help="JSON run manifest; replaces the flags above")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="heavyball-bench",
        description=WELCOME_MESSAGE,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run_parser = commands.add_parser(
        "run", help="run one optimizer", epilog=RUN_EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    _add_problem_options(run_parser)
    _add_shared_run_options(run_parser)
    run_parser.add_argument("--optimizer", choices=["psg", "hb_tv", "hb_const", "adahb_tv", "adahb_const"])
    run_parser.add_argument("--alpha", type=float)
    run_parser.add_argument("--beta", type=float, default=0.0)
    run_parser.add_argument("--trace", help="trace CSV path (default under OPT_TRACE_DIR)")
    run_parser.add_argument("--label")

    compare_parser = commands.add_parser(
        "compare", help="run several optimizers on one problem", epilog=COMPARE_EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    _add_problem_options(compare_parser)
    _add_shared_run_options(compare_parser)
    compare_parser.add_argument("--run", action="append", default=[], metavar="OPT:ALPHA[:BETA]")
    compare_parser.add_argument("--output", help="wide CSV path (default OPT_TRACE_DIR/compare.csv)")
    compare_parser.add_argument("--workers", type=int, default=1)

    verify_parser = commands.add_parser(
        "verify", help="run invariant suites", epilog=VERIFY_EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    verify_parser.add_argument("suite", choices=sorted(ALL_SUITES) + ["all"])
    verify_parser.add_argument("--seed", type=int, default=0)
    verify_parser.add_argument("--quick", action="store_true", help="smaller suite sizes")

    dataset_parser = commands.add_parser("make-dataset", help="write a synthetic LibSVM file")
    dataset_parser.add_argument("--output", required=True)
    dataset_parser.add_argument("--n", type=int, default=10_000)
    dataset_parser.add_argument("--d", type=int, default=300)
    dataset_parser.add_argument("--density", type=float, default=0.05)
    dataset_parser.add_argument("--noise", type=float, default=0.05)
    dataset_parser.add_argument("--seed", type=int, default=0)
    return parser


def _problem_from_args(args: argparse.Namespace) -> dict:
    if args.problem == "hard":
        return {"kind": "hard", "T": args.T, "c": args.c}
    if args.problem == "maxlinear":
        return {"kind": "maxlinear", "shape": args.shape, "dimension": args.dim,
                "pieces": args.pieces, "instance_seed": args.instance_seed}
    if not args.dataset:
        raise ConfigError("--problem hinge needs --dataset")
    return {"kind": "hinge", "dataset_path": args.dataset, "tau": args.tau}


def _checks_from_args(text: str) -> List[str]:
    return [name.strip() for name in text.split(",") if name.strip()]


def config_from_args(
    args: argparse.Namespace,
    optimizer: Optional[str],
    alpha: Optional[float],
    beta: float = 0.0,
    label: Optional[str] = None,
    trace: Optional[str] = None,
) -> RunConfig:
    if optimizer is None:
        raise ConfigError("--optimizer is required without --config")
    if alpha is None:
        raise ConfigError("--alpha is required without --config")
    data = {
        "problem": _problem_from_args(args),
        "optimizer": optimizer,
        "alpha": alpha,
        "beta": beta,
        "gamma": args.gamma,
        "delta": args.delta,
        "iterations": args.iters,
        "batch": args.batch,
        "seed": args.seed,
        "repeats": args.repeats,
        "trace": trace,
        "checks": _checks_from_args(args.checks),
        "schedule_epoch_size": args.schedule_epoch_size,
        "fixed_horizon": args.fixed_horizon,
        "fstar": args.fstar,
        "fstar_budget": args.fstar_budget,
        "label": label,
    }
    return validate_run(data)


def parse_run_spec(spec: str):
    """``OPT:ALPHA[:BETA]`` → (optimizer, alpha, beta)."""
    parts = spec.split(":")
    if len(parts) not in (2, 3):
        raise ConfigError(f"--run expects OPTIMIZER:ALPHA[:BETA], got {spec!r}")
    try:
        alpha = float(parts[1])
        beta = float(parts[2]) if len(parts) == 3 else 0.0
    except ValueError:
        raise ConfigError(f"--run {spec!r}: alpha and beta must be numbers") from None
    return parts[0], alpha, beta


def print_outcome(outcome: RunOutcome) -> None:
    summary = outcome.summary
    table = Table(title=f"{outcome.config.display_label} on {outcome.config.problem.kind}")
    table.add_column("quantity")
    table.add_column("value", justify="right")
    table.add_row("f*", f"{format_value(summary['fstar']['value'])} ({summary['fstar']['source']})")
    for key, value in summary["final"].items():
        table.add_row(key, format_value(value))
    for quantity, fit in summary["rate_fits"].items():
        table.add_row(f"slope {quantity}", format_value(fit["slope"]) if fit else "-")
    if summary["lower_bound"] is not None:
        table.add_row("lower bound", format_value(summary["lower_bound"]))
    console.print(table)
    for check in outcome.checks:
        console.print(format_check(check.name, check.passed, check.value, check.detail))
    console.print(f"[dim]trace: {outcome.trace_path}  summary: {outcome.summary_path}[/dim]")


def cmd_run(args: argparse.Namespace, settings: Settings) -> int:
    if args.config:
        configs = load_config_file(args.config)
        if len(configs) != 1:
            raise ConfigError(f"{args.config} holds {len(configs)} runs; use compare")
        config = configs[0]
    else:
        config = config_from_args(args, args.optimizer, args.alpha, args.beta, args.label, args.trace)

    outcome = execute(config, settings)
    print_outcome(outcome)
    if outcome.failed:
        names = ", ".join(check.name for check in outcome.failed)
        console.print(f"[red bold]Check failed: {names}[/red bold]")
        return EXIT_CHECK_FAILED
    return EXIT_OK


def cmd_compare(args: argparse.Namespace, settings: Settings) -> int:
    if args.config:
        configs = load_config_file(args.config)
    else:
        configs = []
        for spec in args.run:
            optimizer, alpha, beta = parse_run_spec(spec)
            configs.append(config_from_args(args, optimizer, alpha, beta))
    output = Path(args.output) if args.output else Path(settings.trace_dir) / "compare.csv"

    result = compare(configs, output, settings, workers=args.workers)
    table = Table(title=f"final gaps (f* = {format_value(result.summary['fstar']['value'])})")
    table.add_column("run")
    table.add_column("gap individual", justify="right")
    table.add_column("gap averaged", justify="right")
    for label, outcome in zip(result.labels, result.outcomes):
        final = outcome.summary["final"]
        table.add_row(label, format_value(final["gap_individual"]), format_value(final["gap_averaged"]))
    console.print(table)
    for label, check in result.failed:
        console.print(format_check(f"{label}/{check.name}", check.passed, check.value, check.detail))
    console.print(f"[dim]comparison: {output}[/dim]")
    return EXIT_CHECK_FAILED if result.failed else EXIT_OK


def cmd_verify(args: argparse.Namespace, settings: Settings) -> int:
    scale = QUICK_SCALE if args.quick else SuiteScale()
    results = run_suite(args.suite, args.seed, scale)
    for item in results:
        console.print(format_check(item.name, item.passed, item.value, item.detail))
    failed = [item for item in results if not item.passed]
    console.print(f"\n[bold]{len(results) - len(failed)}/{len(results)} invariants hold[/bold]")
    return EXIT_CHECK_FAILED if failed else EXIT_OK


def cmd_make_dataset(args: argparse.Namespace, settings: Settings) -> int:
    try:
        dataset = make_synthetic_dataset(args.n, args.d, args.density, args.seed, args.noise)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    output = Path(args.output)
    output.parent.mkdir(parents=True, exist_ok=True)
    with output.open("w", encoding="utf-8") as handle:
        count = write_libsvm(dataset, handle)
    console.print(f"Wrote {count} samples ({dataset.positives} positive) to {output}")
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "compare": cmd_compare,
    "verify": cmd_verify,
    "make-dataset": cmd_make_dataset,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    settings = Settings()
    configure_logging(settings.log_level)
    console.print(Panel(Markdown(WELCOME_MESSAGE), title="heavyball-bench", border_style="blue"))

    try:
        return COMMANDS[args.command](args, settings)
    except (ConfigError, ValidationError) as exc:
        console.print(f"[red bold]Usage error:[/red bold] {escape(str(exc))}")
        return EXIT_USAGE
    except ValueError as exc:
        # Problem, schedule and diagnostics failures during a valid run
        console.print(f"[red bold]Run error:[/red bold] {escape(str(exc))}")
        return EXIT_CHECK_FAILED
    except Exception as exc:
        console.print(f"\n[red bold]Fatal error: {escape(str(exc))}[/red bold]")
        import traceback
        console.print(escape(traceback.format_exc()))
        return EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
