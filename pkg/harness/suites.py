"""
Property suites run by ``verify``.

Each suite is registered with ``@suite`` and returns one InvariantResult per
invariant it checks. ``SuiteScale`` sizes the suites: the defaults are the
full acceptance sizes, tests pass smaller ones.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List

import numpy as np

from diagnostics.checks import (
    IdentityMode,
    IdentityVariant,
    check_ema_monotonicity,
    check_lemma3,
    check_reformulation,
    projection_inequality_for,
)
from diagnostics.rates import EXPECTED_SLOPE, MIN_R_SQUARED, fit_power_law, fit_rate
from diagnostics.trace import TraceRecord
from geometry.projections import FeasibleSet, project_array, project_bruteforce
from problems.max_linear import MaxOfLinearProblem
from solvers.runner import OptimizerKind, run
from solvers.schedules import EmaConfig, Schedule

logger = logging.getLogger(__name__)

IDENTITY_TOL = 1e-9
ORACLE_TOL = 1e-8
INEQUALITY_TOL = 1e-10
LEMMA3_TOL = 1e-9
MONOTONICITY_TOL = 1e-12


@dataclass
class InvariantResult:
    name: str
    passed: bool
    value: float
    detail: str = ""


@dataclass(frozen=True)
class SuiteScale:
    projection_instances: int = 500
    projection_max_dimension: int = 6
    inequality_samples: int = 1000
    identity_problems: int = 50
    identity_steps: int = 1000
    identity_max_dimension: int = 20
    ema_steps: int = 1000
    beta_horizon: int = 10**6
    rate_steps: int = 10_000
    include_rate_runs: bool = True


SuiteFn = Callable[[int, SuiteScale], List[InvariantResult]]
ALL_SUITES: Dict[str, SuiteFn] = {}


def suite(name: str) -> Callable[[SuiteFn], SuiteFn]:
    def register(fn: SuiteFn) -> SuiteFn:
        ALL_SUITES[name] = fn
        return fn
    return register


def run_suite(name: str, seed: int, scale: SuiteScale = SuiteScale()) -> List[InvariantResult]:
    """Run one suite, or every registered suite for ``all``."""
    if name == "all":
        results = []
        for member in ALL_SUITES:
            results.extend(ALL_SUITES[member](seed, scale))
        return results
    if name not in ALL_SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {sorted(ALL_SUITES)} or all")
    return ALL_SUITES[name](seed, scale)


def _at_most(name: str, value: float, bound: float, detail: str) -> InvariantResult:
    return InvariantResult(name, value <= bound, value, detail)


def _at_least(name: str, value: float, bound: float, detail: str) -> InvariantResult:
    return InvariantResult(name, value >= bound, value, detail)


@suite("projections")
def projections_suite(seed: int, scale: SuiteScale) -> List[InvariantResult]:
    rng = np.random.default_rng(seed)
    worst = {"l1_ball": 0.0, "l2_ball": 0.0, "box": 0.0}
    inequality = -math.inf
    for instance in range(scale.projection_instances):
        d = int(rng.integers(1, scale.projection_max_dimension + 1))
        radius = float(rng.uniform(0.1, 3.0))
        x = rng.standard_normal(d) * float(rng.uniform(0.1, 5.0))
        lower = -rng.uniform(0.1, 2.0, size=d)
        sets = (
            FeasibleSet.l1_ball(d, radius),
            FeasibleSet.l2_ball(d, radius),
            FeasibleSet.box(lower, lower + rng.uniform(0.1, 3.0, size=d)),
        )
        for feasible_set in sets:
            fast = project_array(feasible_set, x)
            oracle = project_bruteforce(feasible_set, x).to_dense()
            key = feasible_set.kind.value
            worst[key] = max(worst[key], float(np.max(np.abs(fast - oracle))))
            if feasible_set.kind.value != "box":
                inequality = max(
                    inequality,
                    projection_inequality_for(feasible_set, x, scale.inequality_samples, rng),
                )

    results = [
        _at_most(f"projection_matches_oracle_{key}", value, ORACLE_TOL,
                 f"{scale.projection_instances} instances, d ≤ {scale.projection_max_dimension}")
        for key, value in worst.items()
    ]
    results.append(_at_most(
        "projection_variational_inequality", inequality, INEQUALITY_TOL,
        f"{scale.inequality_samples} feasible samples per instance",
    ))
    return results


def _random_problem(rng: np.random.Generator, scale: SuiteScale, set_kind: str) -> MaxOfLinearProblem:
    d = int(rng.integers(1, scale.identity_max_dimension + 1))
    pieces = int(rng.integers(2, 3 * d + 3))
    if set_kind == "box":
        lower = -rng.uniform(0.5, 2.0, size=d)
        feasible_set = FeasibleSet.box(lower, lower + rng.uniform(0.5, 3.0, size=d))
    elif set_kind == "l2_ball":
        feasible_set = FeasibleSet.l2_ball(d, float(rng.uniform(0.5, 2.0)))
    else:
        feasible_set = FeasibleSet.l1_ball(d, float(rng.uniform(0.5, 2.0)))
    return MaxOfLinearProblem.random(d, pieces, rng, feasible_set)


def _identity_residual(
    problem: MaxOfLinearProblem,
    kind: OptimizerKind,
    variant: IdentityVariant,
    schedule: Schedule,
    steps: int,
    ema: EmaConfig = None,
) -> float:
    result = run(kind, problem, schedule, steps, ema=ema, keep_logs=True)
    check = check_reformulation(
        result.logs.trajectory, variant, problem.feasible_set, result.logs.directions, schedule,
    )
    return check.max_residual


@suite("identities")
def identities_suite(seed: int, scale: SuiteScale) -> List[InvariantResult]:
    rng = np.random.default_rng(seed)
    steps = scale.identity_steps
    count = scale.identity_problems
    worst = {}

    def record(name: str, value: float) -> None:
        worst[name] = max(worst.get(name, 0.0), value)

    literal_steps = 0
    for _ in range(count):
        problem = _random_problem(rng, scale, "box")
        alpha = float(rng.uniform(0.1, 2.0))
        schedule = Schedule.time_varying(alpha)
        result = run(OptimizerKind.HB_TV, problem, schedule, steps, keep_logs=True)
        logs = result.logs
        record("identity_timevarying_box", check_reformulation(
            logs.trajectory, IdentityVariant.TIME_VARYING, problem.feasible_set,
            logs.directions, schedule).max_residual)
        literal = check_reformulation(
            logs.trajectory, IdentityVariant.TIME_VARYING, problem.feasible_set,
            logs.directions, schedule, mode=IdentityMode.LITERAL)
        literal_steps += literal.steps_checked
        record("identity_timevarying_box_literal", literal.max_residual)

        for beta in (0.0, 0.5, 0.9):
            schedule = Schedule.constant_beta(alpha, beta)
            record("identity_constbeta_box", _identity_residual(
                problem, OptimizerKind.HB_CONST, IdentityVariant.CONSTANT_BETA, schedule, steps))

        for gamma in (0.1, 0.5, 1.0):
            schedule = Schedule.time_varying(alpha)
            record("identity_adaptive_box", _identity_residual(
                problem, OptimizerKind.ADAHB_TV, IdentityVariant.ADAPTIVE, schedule, steps,
                EmaConfig(gamma=gamma, delta=1e-8)))

    # Curved sets: the scaled-set form of the identity
    for set_kind in ("l2_ball", "l1_ball"):
        for _ in range(max(1, count // 5)):
            problem = _random_problem(rng, scale, set_kind)
            alpha = float(rng.uniform(0.1, 2.0))
            record(f"identity_timevarying_{set_kind}", _identity_residual(
                problem, OptimizerKind.HB_TV, IdentityVariant.TIME_VARYING,
                Schedule.time_varying(alpha), steps))
            record(f"identity_constbeta_{set_kind}", _identity_residual(
                problem, OptimizerKind.HB_CONST, IdentityVariant.CONSTANT_BETA,
                Schedule.constant_beta(alpha, 0.9), steps))
            record(f"identity_adaptive_constbeta_{set_kind}", _identity_residual(
                problem, OptimizerKind.ADAHB_CONST, IdentityVariant.ADAPTIVE_CONSTANT_BETA,
                Schedule.constant_beta(alpha, 0.5), steps, EmaConfig()))

    details = {name: f"{count} problems × {steps} steps" for name in worst}
    details["identity_timevarying_box_literal"] = f"{literal_steps} steps with the z-step inside Q"
    return [_at_most(name, value, IDENTITY_TOL, details[name]) for name, value in worst.items()]


@suite("ema")
def ema_suite(seed: int, scale: SuiteScale) -> List[InvariantResult]:
    rng = np.random.default_rng(seed)
    slack = math.inf
    increment = math.inf
    runs = 0
    for gamma in (0.1, 0.5, 1.0):
        for kind, schedule in (
            (OptimizerKind.ADAHB_TV, Schedule.time_varying(float(rng.uniform(0.05, 1.0)))),
            (OptimizerKind.ADAHB_CONST, Schedule.constant_beta(float(rng.uniform(0.05, 1.0)), 0.9)),
        ):
            problem = _random_problem(rng, scale, "box")
            ema = EmaConfig(gamma=gamma, delta=1e-8)
            result = run(kind, problem, schedule, scale.ema_steps, ema=ema, keep_logs=True)
            slack = min(slack, check_lemma3(result.logs.gradients, result.logs.v_log, gamma, ema.delta))
            increment = min(increment, check_ema_monotonicity(result.logs.v_log, ema.delta))
            runs += 1

    schedule = Schedule.time_varying(1.0)
    betas = np.array([schedule.beta_t(t) for t in range(1, scale.beta_horizon + 1)])
    steps = float(np.min(np.diff(betas))) if betas.size > 1 else 0.0
    return [
        _at_least("lemma3_slack", slack, -LEMMA3_TOL, f"{runs} adaptive runs × {scale.ema_steps} steps"),
        _at_least("ema_monotonicity", increment, -MONOTONICITY_TOL, "min increment of √t·v̂ₜ"),
        InvariantResult(
            "beta1_schedule_increasing", steps > 0.0 and betas[-1] < 1.0, steps,
            f"t/(t+2) for t ≤ {scale.beta_horizon}",
        ),
    ]


def _synthetic_trace(gaps: np.ndarray, start: int = 1) -> List[TraceRecord]:
    return [
        TraceRecord(t=start + i, f_individual=float(g), f_averaged=float(g),
                    gap_individual=float(g), gap_averaged=float(g))
        for i, g in enumerate(gaps)
    ]


# Rate instance: a flat power valley on the unit ℓ₂ ball in R^10
RATE_DIMENSION = 10
VALLEY_DEPTH = 0.5
VALLEY_POWER = 16
RATE_BETA = 0.9
RATE_GAMMA = 0.01


def valley_step_sizes(
    dimension: int, depth: float, power: int, beta: float, gamma: float
) -> Dict[str, float]:
    """
    Base α per optimizer on the power valley.

    With η = depth²/(2p(p − 2)) the PSG recursion on ρ gives
    ρₜ^-(p-2) ≈ √t, so the gap ρₜ^p decays like t^(−p/(2(p−2))). The
    time-varying schedule reaches the same power law for
    α = q(1 − q)·depth²/p with q = 1/(2(p − 2)). Constant β multiplies
    the effective step by 1/(1 − β). The adaptive run divides each
    coordinate by √V ≈ √(1.5γ)·|gᵢ|, which rescales the step by
    p·√(1.5γ)/(depth·√d).
    """
    eta = depth ** 2 / (2.0 * power * (power - 2))
    q = 1.0 / (2.0 * (power - 2))
    return {
        "psg": eta,
        "hb_tv": q * (1.0 - q) * depth ** 2 / power,
        "hb_const": (1.0 - beta) * eta,
        "adahb_const": (1.0 - beta) * eta * power * math.sqrt(1.5 * gamma) / (depth * math.sqrt(dimension)),
    }

@suite("rates")
def rates_suite(seed: int, scale: SuiteScale) -> List[InvariantResult]:
    results = []
    t = np.arange(1, 1001, dtype=np.float64)
    for power in (-1.0, -0.5, 0.0):
        fit = fit_rate(_synthetic_trace(3.0 * t ** power))
        results.append(_at_most(
            f"rate_recovers_power_{power:g}", abs(fit.slope - power), 1e-6,
            f"slope {fit.slope:.9f} on c·t^{power:g}",
        ))
    t_log = np.arange(100, 10_001, dtype=np.float64)
    slope, _, _ = fit_power_law(t_log, np.log(t_log) / np.sqrt(t_log))
    results.append(InvariantResult(
        "rate_log_factor_flattens", slope > -0.5, slope, "log(t)/√t over t∈[100, 10⁴]",
    ))

    if scale.include_rate_runs:
        problem = MaxOfLinearProblem.power_valley(
            RATE_DIMENSION, np.random.default_rng(seed), FeasibleSet.l2_ball(RATE_DIMENSION, 1.0),
            depth=VALLEY_DEPTH, power=VALLEY_POWER,
        )
        alphas = valley_step_sizes(RATE_DIMENSION, VALLEY_DEPTH, VALLEY_POWER, RATE_BETA, RATE_GAMMA)
        window = (100, scale.rate_steps)
        low, high = EXPECTED_SLOPE
        for name, kind, schedule, quantity in (
            ("rate_hb_timevarying_individual", OptimizerKind.HB_TV,
             Schedule.time_varying(alphas["hb_tv"]), "individual"),
            ("rate_hb_constbeta_averaged", OptimizerKind.HB_CONST,
             Schedule.constant_beta(alphas["hb_const"], RATE_BETA), "averaged"),
            ("rate_adahb_constbeta_averaged", OptimizerKind.ADAHB_CONST,
             Schedule.constant_beta(alphas["adahb_const"], RATE_BETA), "averaged"),
        ):
            result = run(kind, problem, schedule, scale.rate_steps, fstar=problem.reference_optimum(),
                         ema=EmaConfig(gamma=RATE_GAMMA))
            try:
                fit = fit_rate(result.trace, quantity, window=window)
            except ValueError as exc:
                results.append(InvariantResult(name, False, math.nan, str(exc)))
                continue
            results.append(InvariantResult(
                name, fit.within(low, high, MIN_R_SQUARED), fit.slope,
                f"t∈[{window[0]}, {window[1]}], r²={fit.r_squared:.4f} (≥ {MIN_R_SQUARED}), "
                f"band [{low}, {high}]",
            ))
            if kind.adaptive:
                results.append(_at_least(
                    f"{name}_lemma3", result.min_lemma3_slack, -LEMMA3_TOL, "min RHS − LHS",
                ))
                results.append(_at_least(
                    f"{name}_ema_monotonicity", result.min_ema_increment, -MONOTONICITY_TOL,
                    "min increment of √t·v̂ₜ",
                ))
    return results
