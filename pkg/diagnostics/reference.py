"""Empirical reference optimum for gap columns when no closed form exists."""
from __future__ import annotations

import logging
import math
from typing import Tuple

import numpy as np

from diagnostics.monitors import DiagnosticsError
from problems.base import ProblemOracle
from solvers.runner import OptimizerKind, run
from solvers.schedules import EmaConfig, Schedule

logger = logging.getLogger(__name__)

MIN_BUDGET = 10_000


def default_step_sizes(oracle: ProblemOracle) -> Tuple[float, float]:
    """
    Step scales (α_psg, α_adaptive) for the reference runs.

    PSG uses α = D/M with D the diameter of Q and M the subgradient bound
    (falling back to ‖g(0)‖). The adaptive run normalizes each coordinate by
    its own gradient scale, so its α is the per-coordinate width D/(2√d).
    Unbounded sets fall back to α = 1 for both.
    """
    diameter = oracle.feasible_set.diameter()
    if not math.isfinite(diameter):
        return 1.0, 1.0
    bound = oracle.subgradient_bound
    if bound is None or bound <= 0.0:
        bound = float(np.linalg.norm(oracle.subgradient_array(np.zeros(oracle.dimension))))
    psg_alpha = diameter / bound if bound > 0.0 else 1.0
    adaptive_alpha = diameter / (2.0 * math.sqrt(oracle.dimension))
    return psg_alpha, adaptive_alpha


def estimate_fstar(
    oracle: ProblemOracle,
    budget: int = MIN_BUDGET,
    seed: int = 0,
) -> float:
    """
    Smallest objective value seen by an adaptive HB run and a PSG run.

    Both runs take ``budget`` steps from w = 0 with exact subgradients.
    Every iterate, every running average and the start point are candidates.
    The result is an upper bound on f*, reported without a safety margin.

    Raises:
        DiagnosticsError: If ``budget`` is below 10⁴
    """
    if budget < MIN_BUDGET:
        raise DiagnosticsError(f"f* estimation needs a budget of at least {MIN_BUDGET}, got {budget}")

    psg_alpha, adaptive_alpha = default_step_sizes(oracle)
    best = oracle.value_array(np.zeros(oracle.dimension))
    candidates = (
        (OptimizerKind.PSG, Schedule.constant_beta(psg_alpha)),
        (OptimizerKind.ADAHB_TV, Schedule.time_varying(adaptive_alpha)),
    )
    for kind, schedule in candidates:
        result = run(kind, oracle, schedule, budget, ema=EmaConfig(), seed=seed)
        for record in result.trace:
            best = min(best, record.f_individual, record.f_averaged)
        logger.debug("f* candidate after %s: %.10g", kind.value, best)
    logger.info("Estimated f* = %.10g from %d steps per optimizer", best, budget)
    return float(best)
