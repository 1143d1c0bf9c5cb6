"""
Single runs and optimizer comparisons behind the ``run`` and ``compare`` commands.

A run builds its problem and schedule from a RunConfig, resolves the
reference f*, streams its trace to CSV, evaluates the requested checks and
saves a JSON summary. A comparison shares one problem instance and one f*
across its member runs and writes a wide gap table aligned on t.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from diagnostics.monitors import DiagnosticsError
from diagnostics.rates import EXPECTED_SLOPE, MIN_R_SQUARED, fit_rate
from diagnostics.reference import estimate_fstar
from diagnostics.trace import TraceRecord, average_traces
from geometry.projections import FeasibleSet
from harness.config import CheckName, ConfigError, RunConfig, Settings
from problems.base import ProblemError, ProblemOracle
from problems.hard import HardFunctionProblem, gd_lower_bound
from problems.hinge import HingeLossProblem
from problems.max_linear import MaxOfLinearProblem
from solvers.runner import OptimizerKind, RunResult, run
from solvers.schedules import EmaConfig, Schedule, ScheduleKind
from storage.libsvm import LibSVMParseError, load_libsvm, tau_for
from storage.results import ResultStore
from storage.traces import CsvTraceSink, write_comparison_csv

logger = logging.getLogger(__name__)

IDENTITY_TOL = 1e-9
LEMMA3_TOL = 1e-9
MONOTONICITY_TOL = 1e-12
NEGATIVE_GAP_TOL = 1e-9


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: Optional[float] = None
    detail: str = ""

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "value": self.value, "detail": self.detail}


@dataclass
class RunOutcome:
    config: RunConfig
    result: RunResult
    summary: dict
    checks: List[CheckResult] = field(default_factory=list)
    trace_path: Optional[Path] = None
    summary_path: Optional[Path] = None

    @property
    def failed(self) -> List[CheckResult]:
        return [check for check in self.checks if not check.passed]


@dataclass
class CompareOutcome:
    summary: dict
    outcomes: List[RunOutcome]
    labels: List[str]

    @property
    def failed(self) -> List[Tuple[str, CheckResult]]:
        return [(label, check) for label, outcome in zip(self.labels, self.outcomes)
                for check in outcome.failed]


def build_problem(config: RunConfig) -> ProblemOracle:
    """
    Instantiate the objective named by ``config.problem``.

    Raises:
        ConfigError: For unreadable or malformed datasets or a missing τ
    """
    problem = config.problem
    if problem.kind == "hard":
        return HardFunctionProblem(problem.T, problem.c)
    if problem.kind == "maxlinear":
        rng = np.random.default_rng(problem.instance_seed)
        ball = FeasibleSet.l2_ball(problem.dimension, problem.radius)
        if problem.shape == "valley":
            try:
                return MaxOfLinearProblem.power_valley(problem.dimension, rng, ball)
            except ProblemError as exc:
                raise ConfigError(f"valley instance: {exc}") from None
        return MaxOfLinearProblem.random(problem.dimension, problem.pieces, rng, ball)
    tau = problem.tau if problem.tau is not None else tau_for(problem.dataset_path)
    if tau is None:
        raise ConfigError(
            f"no tau preset for {problem.dataset_path}; pass --tau explicitly"
        )
    try:
        dataset = load_libsvm(problem.dataset_path)
    except OSError as exc:
        raise ConfigError(f"cannot read dataset {problem.dataset_path}: {exc}") from None
    except LibSVMParseError as exc:
        raise ConfigError(f"dataset {problem.dataset_path}: {exc}") from None
    return HingeLossProblem.from_dataset(dataset, tau)


def build_schedule(config: RunConfig) -> Schedule:
    kind = config.optimizer
    horizon = config.iterations if config.fixed_horizon else None
    if kind.schedule_kind is ScheduleKind.TIME_VARYING:
        return Schedule.time_varying(config.alpha, epoch_size=config.schedule_epoch_size)
    return Schedule.constant_beta(
        config.alpha,
        beta=config.beta,
        horizon=horizon,
        epoch_size=config.schedule_epoch_size,
    )


def resolve_fstar(config: RunConfig, oracle: ProblemOracle) -> Tuple[float, str]:
    """Override from the config, a solver reference, or an empirical estimate."""
    if config.fstar is not None:
        return config.fstar, "override"
    reference = oracle.reference_optimum()
    if reference is not None:
        return reference, "solver"
    return estimate_fstar(oracle, config.fstar_budget, seed=config.seed), "estimated"


def default_trace_path(config: RunConfig, settings: Settings) -> Path:
    return Path(settings.trace_dir) / f"{config.display_label}-{config.problem.kind}-seed{config.seed}.csv"


def _rate_fits(result: RunResult) -> Dict[str, Optional[dict]]:
    fits = {}
    for quantity in ("individual", "averaged"):
        try:
            fits[quantity] = fit_rate(result.trace, quantity).as_dict()
        except DiagnosticsError as exc:
            logger.debug("No %s rate fit: %s", quantity, exc)
            fits[quantity] = None
    return fits


def evaluate_checks(config: RunConfig, oracle: ProblemOracle, result: RunResult) -> List[CheckResult]:
    checks = []
    requested = set(config.checks)

    if CheckName.REFORMULATION in requested:
        residual = result.max_identity_residual
        checks.append(CheckResult(
            "reformulation", residual <= IDENTITY_TOL, residual,
            f"max ∞-norm residual over {len(result.trace)} steps; "
            f"{result.literal_steps} steps also matched P_Q directly",
        ))

    if CheckName.LEMMA3 in requested:
        slack = result.min_lemma3_slack
        checks.append(CheckResult("lemma3", slack >= -LEMMA3_TOL, slack, "min RHS − LHS over all steps"))
        increment = result.min_ema_increment
        checks.append(CheckResult(
            "ema_monotonicity", increment >= -MONOTONICITY_TOL, increment,
            "min per-coordinate increment of √t·v̂ₜ",
        ))

    if CheckName.RATE in requested:
        # Time-varying schedules are judged on the last iterate, the rest on the average
        quantity = "individual" if config.optimizer.schedule_kind is ScheduleKind.TIME_VARYING else "averaged"
        low, high = EXPECTED_SLOPE
        try:
            fit = fit_rate(result.trace, quantity)
            checks.append(CheckResult(
                f"rate_{quantity}", fit.within(low, high, MIN_R_SQUARED), fit.slope,
                f"slope over t∈[{fit.window[0]}, {fit.window[1]}], r²={fit.r_squared:.4f} "
                f"(≥ {MIN_R_SQUARED}), band [{low}, {high}]",
            ))
        except DiagnosticsError as exc:
            checks.append(CheckResult(f"rate_{quantity}", False, None, str(exc)))

    floor_applies = (
        isinstance(oracle, HardFunctionProblem)
        and config.optimizer is OptimizerKind.PSG
        and config.alpha == oracle.c
    )
    if CheckName.FLOOR in requested or floor_applies:
        bound = gd_lower_bound(oracle.T, oracle.c)
        final = result.trace[-1].f_individual
        checks.append(CheckResult(
            "floor", final >= bound, final,
            f"f(w_T) against ln T/(32c√T) = {bound:.6g}",
        ))
    return checks


def _worst(values: Sequence[Optional[float]], reducer) -> Optional[float]:
    present = [value for value in values if value is not None]
    return reducer(present) if present else None


def combine_repeats(results: Sequence[RunResult]) -> RunResult:
    """
    One RunResult for runs repeated over seeds.

    The trace is the step-wise mean; monitors keep their worst value and the
    final state is the first seed's.
    """
    first = results[0]
    if len(results) == 1:
        return first
    return RunResult(
        final_state=first.final_state,
        trace=average_traces([result.trace for result in results]),
        max_identity_residual=_worst([r.max_identity_residual for r in results], max),
        max_literal_residual=_worst([r.max_literal_residual for r in results], max),
        literal_steps=sum(result.literal_steps for result in results),
        min_lemma3_slack=_worst([r.min_lemma3_slack for r in results], min),
        min_ema_increment=_worst([r.min_ema_increment for r in results], min),
    )


def count_negative_gaps(trace: Sequence[TraceRecord], tolerance: float = NEGATIVE_GAP_TOL) -> int:
    """Steps where a gap column fell below −tolerance, meaning f* sits above an attained value."""
    return sum(
        1 for record in trace
        if (record.gap_individual is not None and record.gap_individual < -tolerance)
        or (record.gap_averaged is not None and record.gap_averaged < -tolerance)
    )


def execute(
    config: RunConfig,
    settings: Settings,
    oracle: Optional[ProblemOracle] = None,
    fstar: Optional[Tuple[float, str]] = None,
    store: Optional[ResultStore] = None,
) -> RunOutcome:
    """
    Run one configuration end to end and persist its trace and summary.

    ``oracle`` and ``fstar`` may be supplied to share them across a comparison.
    Mini-batch runs repeat over ``config.seeds`` and write the mean trace.
    """
    oracle = oracle if oracle is not None else build_problem(config)
    if config.batch > oracle.sample_count:
        raise ConfigError(f"batch {config.batch} exceeds the {oracle.sample_count} samples")
    fstar_value, fstar_source = fstar if fstar is not None else resolve_fstar(config, oracle)
    schedule = build_schedule(config)
    ema = EmaConfig(config.gamma, config.delta) if config.optimizer.adaptive else None
    seeds = config.seeds

    def run_seed(seed: int, sink: Optional[CsvTraceSink]) -> RunResult:
        return run(
            config.optimizer,
            oracle,
            schedule,
            config.iterations,
            ema=ema,
            seed=seed,
            trace_sink=sink,
            batch=config.batch,
            fstar=fstar_value,
            monitor_identity=CheckName.REFORMULATION in config.checks,
        )

    trace_path = Path(config.trace) if config.trace else default_trace_path(config, settings)
    trace_path.parent.mkdir(parents=True, exist_ok=True)
    with trace_path.open("w", encoding="utf-8", newline="") as handle:
        if len(seeds) == 1:
            result = run_seed(seeds[0], CsvTraceSink(handle))
            repeats = [result]
        else:
            repeats = [run_seed(seed, None) for seed in seeds]
            result = combine_repeats(repeats)
            sink = CsvTraceSink(handle)
            for record in result.trace:
                sink.write(record)
    if len(seeds) > 1:
        logger.info("%s: averaged %d seeds %s", config.display_label, len(seeds), seeds)

    negative_gaps = count_negative_gaps(result.trace)
    if negative_gaps:
        logger.warning(
            "%s: %d steps have a negative gap; f* = %.10g (%s) is above an attained value",
            config.display_label, negative_gaps, fstar_value, fstar_source,
        )

    checks = evaluate_checks(config, oracle, result)
    last = result.trace[-1]
    lower_bound = gd_lower_bound(oracle.T, oracle.c) if isinstance(oracle, HardFunctionProblem) else None
    summary = {
        "config": config.model_dump(mode="json"),
        "fstar": {"value": fstar_value, "source": fstar_source},
        "final": {
            "t": last.t,
            "f_individual": last.f_individual,
            "f_averaged": last.f_averaged,
            "gap_individual": last.gap_individual,
            "gap_averaged": last.gap_averaged,
        },
        "repeats": {
            "seeds": seeds,
            "final_gaps": [run_result.trace[-1].gap_individual for run_result in repeats],
        },
        "negative_gaps": negative_gaps,
        "rate_fits": _rate_fits(result),
        "checks": [check.as_dict() for check in checks],
        "lower_bound": lower_bound,
        "trace_path": str(trace_path),
    }

    store = store if store is not None else ResultStore(trace_path.parent)
    summary_path = store.save_summary(trace_path.stem, summary)
    return RunOutcome(config, result, summary, checks, trace_path, summary_path)


def _labels(configs: Sequence[RunConfig]) -> List[str]:
    labels, seen = [], {}
    for config in configs:
        label = config.display_label
        seen[label] = seen.get(label, 0) + 1
        labels.append(label if seen[label] == 1 else f"{label}-{seen[label]}")
    return labels


def compare(
    configs: Sequence[RunConfig],
    output: Path,
    settings: Settings,
    workers: int = 1,
) -> CompareOutcome:
    """
    Run several optimizers on one problem and write a wide gap CSV.

    Member runs share the problem instance and the reference f* and may
    run on a thread pool; each run writes its own trace file.

    Raises:
        ConfigError: For an empty list or configs naming different problems
    """
    if not configs:
        raise ConfigError("compare needs at least one run configuration")
    problem = configs[0].problem.model_dump()
    for config in configs[1:]:
        if config.problem.model_dump() != problem:
            raise ConfigError("all compared runs must share the same problem")

    labels = _labels(configs)
    configs = [
        config if config.label == label else config.model_copy(update={"label": label})
        for config, label in zip(configs, labels)
    ]
    oracle = build_problem(configs[0])
    overrides = [config.fstar for config in configs if config.fstar is not None]
    if overrides:
        fstar = (min(overrides), "override")
    else:
        fstar = resolve_fstar(configs[0], oracle)
    logger.info("Comparing %d runs against f* = %.10g (%s)", len(configs), *fstar)

    store = ResultStore(settings.trace_dir)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        outcomes = list(pool.map(
            lambda config: execute(config, settings, oracle=oracle, fstar=fstar, store=store),
            configs,
        ))

    output.parent.mkdir(parents=True, exist_ok=True)
    with output.open("w", encoding="utf-8", newline="") as handle:
        rows = write_comparison_csv(
            {label: outcome.result.trace for label, outcome in zip(labels, outcomes)}, handle
        )

    summary = {
        "fstar": {"value": fstar[0], "source": fstar[1]},
        "comparison_path": str(output),
        "rows": rows,
        "final_gaps": {
            label: outcome.summary["final"]["gap_individual"]
            for label, outcome in zip(labels, outcomes)
        },
        "runs": [outcome.summary for outcome in outcomes],
    }
    return CompareOutcome(summary=summary, outcomes=outcomes, labels=labels)
