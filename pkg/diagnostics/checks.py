"""Offline checks over logged trajectories, EMA accumulators and projections."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from geometry.projections import FeasibleSet, SetKind, project_array
from diagnostics.monitors import (
    DiagnosticsError,
    EmaMonotonicityMonitor,
    SumBoundMonitor,
    reformulation_residuals,
)
from solvers.schedules import Schedule, ScheduleKind

IDENTITY_TOL = 1e-9
INEQUALITY_TOL = 1e-10
MONOTONICITY_TOL = 1e-12


class IdentityVariant(str, Enum):
    TIME_VARYING = "timevarying"
    CONSTANT_BETA = "constbeta"
    ADAPTIVE = "adaptive"
    ADAPTIVE_CONSTANT_BETA = "adaptive_constbeta"

    @property
    def schedule_kind(self) -> ScheduleKind:
        if self in (IdentityVariant.TIME_VARYING, IdentityVariant.ADAPTIVE):
            return ScheduleKind.TIME_VARYING
        return ScheduleKind.CONSTANT_BETA


class IdentityMode(str, Enum):
    SCALED = "scaled"
    LITERAL = "literal"


@dataclass(frozen=True)
class IdentityCheck:
    max_residual: float
    steps_checked: int
    steps_total: int

    @property
    def passed(self) -> bool:
        return self.max_residual <= IDENTITY_TOL


def check_reformulation(
    trajectory: Sequence[np.ndarray],
    variant: IdentityVariant,
    feasible_set: FeasibleSet,
    directions: Sequence[np.ndarray],
    schedule: Schedule,
    mode: IdentityMode = IdentityMode.SCALED,
) -> IdentityCheck:
    """
    Verify the z-space form of a logged momentum run.

    Args:
        trajectory: [w_prev at start, w₁, w₂, ...]; the first two entries are equal
            for runs started with zero momentum
        variant: Which update produced the trajectory
        feasible_set: Q used by the run
        directions: Per-step directions, gᵗ for plain HB and V̂ₜ⁻¹ĝₜ for adaptive runs
        schedule: The schedule of the run
        mode: ``scaled`` checks every step; ``literal`` only steps whose z-step stays in Q

    Returns:
        IdentityCheck with the largest ∞-norm residual (0.0 when nothing was checked)

    Raises:
        DiagnosticsError: If the logs are misaligned or the schedule does not match
    """
    variant = IdentityVariant(variant)
    mode = IdentityMode(mode)
    if schedule.kind is not variant.schedule_kind:
        raise DiagnosticsError(
            f"variant {variant.value} needs a {variant.schedule_kind.value} schedule"
        )
    if len(trajectory) != len(directions) + 2:
        raise DiagnosticsError(
            f"trajectory of length {len(trajectory)} does not align with "
            f"{len(directions)} directions"
        )

    worst = 0.0
    checked = 0
    for index, direction in enumerate(directions):
        t = index + 1
        scaled, literal = reformulation_residuals(
            feasible_set,
            schedule,
            t,
            np.asarray(trajectory[index], dtype=np.float64),
            np.asarray(trajectory[index + 1], dtype=np.float64),
            np.asarray(trajectory[index + 2], dtype=np.float64),
            np.asarray(direction, dtype=np.float64),
        )
        residual = scaled if mode is IdentityMode.SCALED else literal
        if residual is None:
            continue
        checked += 1
        worst = max(worst, residual)
    return IdentityCheck(max_residual=worst, steps_checked=checked, steps_total=len(directions))


def _aligned_logs(name: str, *logs: Sequence[np.ndarray]) -> None:
    lengths = {len(log) for log in logs}
    if 0 in lengths:
        raise DiagnosticsError(f"{name} needs at least one logged step")
    if len(lengths) != 1:
        raise DiagnosticsError(f"{name} logs have different lengths: {sorted(lengths)}")


def check_lemma3(
    grad_log: Sequence[np.ndarray],
    v_log: Sequence[np.ndarray],
    gamma: float,
    delta: float,
) -> float:
    """
    Minimum slack of the EMA sum bound over the logged steps.

    ``delta`` may be 0; zero-gradient coordinates then contribute 0/0 := 0.
    """
    _aligned_logs("check_lemma3", grad_log, v_log)
    dimension = np.asarray(grad_log[0]).size
    monitor = SumBoundMonitor(gamma, delta, dimension)
    for gradient, V in zip(grad_log, v_log):
        monitor.observe(np.asarray(gradient, dtype=np.float64), np.asarray(V, dtype=np.float64))
    return monitor.min_slack


def check_ema_monotonicity(v_log: Sequence[np.ndarray], delta: float) -> float:
    """Smallest coordinate increment of √t·v̂ₜ; non-negative up to rounding."""
    _aligned_logs("check_ema_monotonicity", v_log)
    monitor = EmaMonotonicityMonitor(delta, np.asarray(v_log[0]).size)
    for V in v_log:
        monitor.observe(np.asarray(V, dtype=np.float64))
    return monitor.min_increment


def sample_feasible(feasible_set: FeasibleSet, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` points of Q, spread from the center out to the boundary."""
    d = feasible_set.dimension
    if feasible_set.kind is SetKind.BOX:
        return rng.uniform(feasible_set.lower, feasible_set.upper, size=(count, d))
    raw = rng.standard_normal((count, d))
    if feasible_set.kind is SetKind.FULL_SPACE:
        return 10.0 * raw
    if feasible_set.kind is SetKind.L1_BALL:
        norms = np.sum(np.abs(raw), axis=1)
    else:
        norms = np.linalg.norm(raw, axis=1)
    norms = np.where(norms > 0.0, norms, 1.0)
    radii = feasible_set.radius * rng.uniform(0.0, 1.0, size=count)
    points = raw * (radii / norms)[:, None]
    # Boundary points are where the inequality is tight
    points[0] = raw[0] * (feasible_set.radius / norms[0])
    return points


def check_projection_inequality(
    point: np.ndarray,
    projected: np.ndarray,
    feasible_set: FeasibleSet,
    samples: int,
    rng: np.random.Generator,
) -> float:
    """
    Largest ⟨x − P(x), u − P(x)⟩ over sampled u ∈ Q.

    A correct projection gives a value ≤ 0 up to rounding.
    """
    if samples < 1:
        raise DiagnosticsError(f"samples must be >= 1, got {samples}")
    x = np.asarray(point, dtype=np.float64).reshape(-1)
    p = np.asarray(projected, dtype=np.float64).reshape(-1)
    if x.size != feasible_set.dimension or p.size != feasible_set.dimension:
        raise DiagnosticsError("point, projection and set dimensions differ")
    candidates = sample_feasible(feasible_set, samples, rng)
    return float(np.max((candidates - p) @ (x - p)))


def projection_inequality_for(
    feasible_set: FeasibleSet,
    points: np.ndarray,
    samples: int,
    rng: np.random.Generator,
) -> float:
    """Worst variational-inequality value over a batch of projected points."""
    worst = -math.inf
    for x in np.atleast_2d(points):
        worst = max(
            worst,
            check_projection_inequality(x, project_array(feasible_set, x), feasible_set, samples, rng),
        )
    return worst
