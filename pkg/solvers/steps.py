"""
One-step update rules.

All variants share the projected momentum form
    w' = P_Q[w − step · d + β (w − w_prev)]
where d is the raw subgradient (PSG, HB) or V̂⁻¹ĝ (adaptive HB).
"""
from __future__ import annotations

import math
from typing import Optional

import numpy as np

from geometry.projections import project_array
from geometry.vecmath import DiagonalMetric, Vector, metric_apply_inverse
from problems.base import ProblemOracle
from solvers.schedules import EmaConfig, Schedule, ScheduleError, ScheduleKind
from solvers.state import OptimizerState


def _gradient(
    state: OptimizerState,
    oracle: ProblemOracle,
    batch: int,
    rng: Optional[np.random.Generator],
) -> np.ndarray:
    if batch:
        if rng is None:
            raise ValueError("stochastic subgradients need a seeded generator")
        return oracle.stochastic_subgradient_array(state.w_curr, batch, rng)
    return oracle.subgradient_array(state.w_curr)


def _momentum_update(
    state: OptimizerState,
    oracle: ProblemOracle,
    direction: np.ndarray,
    step: float,
    beta: float,
) -> np.ndarray:
    w = state.w_curr
    return project_array(oracle.feasible_set, w - step * direction + beta * (w - state.w_prev))


def _require(schedule: Schedule, kind: ScheduleKind, name: str) -> None:
    if schedule.kind is not kind:
        raise ScheduleError(f"{name} needs a {kind.value} schedule, got {schedule.kind.value}")


def psg_step(
    state: OptimizerState,
    oracle: ProblemOracle,
    schedule: Schedule,
    batch: int = 0,
    rng: Optional[np.random.Generator] = None,
) -> OptimizerState:
    """w' = P_Q[w − (α/√t) g(w)]."""
    gradient = _gradient(state, oracle, batch, rng)
    alpha_t = schedule.base_step(state.t)
    w_next = _momentum_update(state, oracle, gradient, alpha_t, 0.0)
    return state.advance(w_next, gradient, gradient, alpha_t, 0.0)


def hb_step_timevarying(
    state: OptimizerState,
    oracle: ProblemOracle,
    schedule: Schedule,
    batch: int = 0,
    rng: Optional[np.random.Generator] = None,
) -> OptimizerState:
    """w' = P_Q[w − αₜ g(w) + βₜ(w − w_prev)] with βₜ = t/(t+2), αₜ = α/((t+2)√t)."""
    _require(schedule, ScheduleKind.TIME_VARYING, "hb_step_timevarying")
    gradient = _gradient(state, oracle, batch, rng)
    alpha_t = schedule.alpha_t(state.t)
    beta_t = schedule.beta_t(state.t)
    w_next = _momentum_update(state, oracle, gradient, alpha_t, beta_t)
    return state.advance(w_next, gradient, gradient, alpha_t, beta_t)


def hb_step_constbeta(
    state: OptimizerState,
    oracle: ProblemOracle,
    schedule: Schedule,
    batch: int = 0,
    rng: Optional[np.random.Generator] = None,
) -> OptimizerState:
    """w' = P_Q[w − (α/√t) g(w) + β(w − w_prev)]."""
    _require(schedule, ScheduleKind.CONSTANT_BETA, "hb_step_constbeta")
    gradient = _gradient(state, oracle, batch, rng)
    alpha_t = schedule.alpha_t(state.t)
    w_next = _momentum_update(state, oracle, gradient, alpha_t, schedule.beta)
    return state.advance(w_next, gradient, gradient, alpha_t, schedule.beta)


def _ema_direction(
    state: OptimizerState,
    gradient: np.ndarray,
    ema: EmaConfig,
    clock: int,
):
    if state.V is None:
        raise ValueError("adaptive steps need a state created with adaptive=True")
    beta2 = ema.beta2(clock)
    V = beta2 * state.V + (1.0 - beta2) * gradient * gradient
    # DiagonalMetric rejects a V̂ₜ that lost positivity
    v_hat = DiagonalMetric(np.sqrt(V) + ema.delta / math.sqrt(clock))
    direction = metric_apply_inverse(v_hat, Vector.dense(gradient))
    return V, v_hat.diag, direction.values, beta2


def adahb_step_timevarying(
    state: OptimizerState,
    oracle: ProblemOracle,
    schedule: Schedule,
    ema: EmaConfig,
    rng: Optional[np.random.Generator] = None,
    batch: int = 0,
) -> OptimizerState:
    """
    Adaptive HB with the time-varying schedule.

    Vₜ = β₂ₜVₜ₋₁ + (1−β₂ₜ)ĝ², V̂ₜ = √Vₜ + δ/√t and
    w' = P_Q[w − (αβ₁ₜ/(t√t)) V̂ₜ⁻¹ĝ + β₁ₜ(w − w_prev)].
    """
    _require(schedule, ScheduleKind.TIME_VARYING, "adahb_step_timevarying")
    gradient = _gradient(state, oracle, batch, rng)
    clock = schedule.clock(state.t)
    V, v_hat, direction, beta2 = _ema_direction(state, gradient, ema, clock)
    beta1 = schedule.beta_t(state.t)
    # αβ₁ₜ/(t√t) == α/((t+2)√t)
    alpha_t = schedule.alpha_t(state.t)
    w_next = _momentum_update(state, oracle, direction, alpha_t, beta1)
    return state.advance(w_next, gradient, direction, alpha_t, beta1,
                         V=V, v_hat=v_hat, beta2=beta2)


def adahb_step_constbeta(
    state: OptimizerState,
    oracle: ProblemOracle,
    schedule: Schedule,
    ema: EmaConfig,
    rng: Optional[np.random.Generator] = None,
    batch: int = 0,
) -> OptimizerState:
    """w' = P_Q[w − (α/√t) V̂ₜ⁻¹ĝ + β(w − w_prev)]."""
    _require(schedule, ScheduleKind.CONSTANT_BETA, "adahb_step_constbeta")
    gradient = _gradient(state, oracle, batch, rng)
    clock = schedule.clock(state.t)
    V, v_hat, direction, beta2 = _ema_direction(state, gradient, ema, clock)
    alpha_t = schedule.alpha_t(state.t)
    w_next = _momentum_update(state, oracle, direction, alpha_t, schedule.beta)
    return state.advance(w_next, gradient, direction, alpha_t, schedule.beta,
                         V=V, v_hat=v_hat, beta2=beta2)
