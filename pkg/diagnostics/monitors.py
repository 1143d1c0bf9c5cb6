"""
Incremental monitors evaluated while a run is in progress.

The reformulation residual rebuilds zₜ = wₜ + cₜ(wₜ − wₜ₋₁) from the iterates
and compares z_{t+1} with the projected z-space step
    r = zₜ − ηₜ dₜ,   z_{t+1} = λₜ · P_Q[wₜ + (r − wₜ)/λₜ] − (λₜ − 1) wₜ,
which is the projection of r onto the scaled set λₜQ − (λₜ − 1)wₜ.
Time-varying momentum uses cₜ = t, λₜ = t + 2, ηₜ = α/√t; constant β uses
cₜ = β/(1−β), λₜ = 1/(1−β), ηₜ = αₜ/(1−β). When r already lies in Q the
right-hand side reduces to P_Q[r].
"""
from __future__ import annotations

import math
from typing import Optional, Tuple

import numpy as np

from geometry.projections import FeasibleSet, membership, project_array
from solvers.schedules import Schedule, ScheduleKind

LITERAL_MEMBERSHIP_TOL = 1e-12


class DiagnosticsError(ValueError):
    """Raised for misaligned logs or checks that cannot be evaluated."""


def momentum_coefficient(schedule: Schedule, t: int) -> float:
    if schedule.kind is ScheduleKind.TIME_VARYING:
        return float(t)
    return schedule.beta / (1.0 - schedule.beta)


def z_point(schedule: Schedule, t: int, w: np.ndarray, w_prev: np.ndarray) -> np.ndarray:
    return w + momentum_coefficient(schedule, t) * (w - w_prev)


def z_step(schedule: Schedule, t: int) -> float:
    if schedule.kind is ScheduleKind.TIME_VARYING:
        return schedule.alpha / math.sqrt(t)
    return schedule.base_step(t) / (1.0 - schedule.beta)


def z_scale(schedule: Schedule, t: int) -> float:
    if schedule.kind is ScheduleKind.TIME_VARYING:
        return t + 2.0
    return 1.0 / (1.0 - schedule.beta)


def reformulation_residuals(
    feasible_set: FeasibleSet,
    schedule: Schedule,
    t: int,
    w_prev: np.ndarray,
    w: np.ndarray,
    w_next: np.ndarray,
    direction: np.ndarray,
) -> Tuple[float, Optional[float]]:
    """
    Residuals of the z-space identity for the step t → t+1.

    Returns:
        (scaled residual, literal residual or None when r ∉ Q), both ∞-norms
    """
    if schedule.epoch_size != 1:
        raise DiagnosticsError("reformulation identities assume a per-step schedule")
    z_now = z_point(schedule, t, w, w_prev)
    z_next = z_point(schedule, t + 1, w_next, w)
    r = z_now - z_step(schedule, t) * direction
    scale = z_scale(schedule, t)
    predicted = scale * project_array(feasible_set, w + (r - w) / scale) - (scale - 1.0) * w
    scaled = float(np.max(np.abs(z_next - predicted)))

    literal = None
    if membership(feasible_set, r, LITERAL_MEMBERSHIP_TOL):
        literal = float(np.max(np.abs(z_next - project_array(feasible_set, r))))
    return scaled, literal


def _safe_ratio(numerator: np.ndarray, denominator: np.ndarray) -> np.ndarray:
    out = np.zeros_like(numerator)
    np.divide(numerator, denominator, out=out, where=numerator > 0.0)
    return out


class SumBoundMonitor:
    """
    Tracks RHS − LHS of the EMA sum bound

        Σᵢ Σ_{k≤t} g²ₖᵢ / (√(k vₖᵢ) + δ) ≤ Σᵢ (2(2−γ)/γ)(√(t vₜᵢ) + δ).
    """

    def __init__(self, gamma: float, delta: float, dimension: int):
        if not 0.0 < gamma <= 1.0:
            raise DiagnosticsError(f"gamma must be in (0, 1], got {gamma}")
        if delta < 0.0:
            raise DiagnosticsError(f"delta must be >= 0, got {delta}")
        self.gamma = gamma
        self.delta = delta
        self.k = 0
        self.lhs = np.zeros(dimension)
        self.min_slack = math.inf

    def observe(self, gradient: np.ndarray, V: np.ndarray) -> float:
        self.k += 1
        root = np.sqrt(self.k * V)
        self.lhs += _safe_ratio(gradient * gradient, root + self.delta)
        rhs = (2.0 * (2.0 - self.gamma) / self.gamma) * (root + self.delta)
        slack = float(np.sum(rhs) - np.sum(self.lhs))
        self.min_slack = min(self.min_slack, slack)
        return slack


class EmaMonotonicityMonitor:
    """Minimum per-coordinate increment of √k·v̂ₖ = √(k vₖ) + δ across steps."""

    def __init__(self, delta: float, dimension: int):
        self.delta = delta
        self.k = 0
        self.previous = np.zeros(dimension)
        self.min_increment = math.inf

    def observe(self, V: np.ndarray) -> float:
        self.k += 1
        current = np.sqrt(self.k * V) + self.delta
        increment = float(np.min(current - self.previous))
        self.previous = current
        self.min_increment = min(self.min_increment, increment)
        return increment
