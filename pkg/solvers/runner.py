"""Drives an optimizer for T steps and emits one trace record per step."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

import numpy as np

from diagnostics.monitors import (
    DiagnosticsError,
    EmaMonotonicityMonitor,
    SumBoundMonitor,
    reformulation_residuals,
)
from diagnostics.trace import TraceRecord
from geometry.vecmath import Vector
from problems.base import ProblemOracle
from solvers.schedules import EmaConfig, Schedule, ScheduleError, ScheduleKind
from solvers.state import OptimizerState
from solvers.steps import (
    adahb_step_constbeta,
    adahb_step_timevarying,
    hb_step_constbeta,
    hb_step_timevarying,
    psg_step,
)
from storage.traces import TraceSink

logger = logging.getLogger(__name__)


class OptimizerKind(str, Enum):
    PSG = "psg"
    HB_TV = "hb_tv"
    HB_CONST = "hb_const"
    ADAHB_TV = "adahb_tv"
    ADAHB_CONST = "adahb_const"

    @property
    def adaptive(self) -> bool:
        return self in (OptimizerKind.ADAHB_TV, OptimizerKind.ADAHB_CONST)

    @property
    def schedule_kind(self) -> ScheduleKind:
        if self in (OptimizerKind.HB_TV, OptimizerKind.ADAHB_TV):
            return ScheduleKind.TIME_VARYING
        return ScheduleKind.CONSTANT_BETA


@dataclass
class RunLogs:
    """Per-step arrays kept for offline checks; ``trajectory`` starts with [w_prev, w₀]."""

    trajectory: List[np.ndarray] = field(default_factory=list)
    gradients: List[np.ndarray] = field(default_factory=list)
    directions: List[np.ndarray] = field(default_factory=list)
    v_log: List[np.ndarray] = field(default_factory=list)


@dataclass
class RunResult:
    final_state: OptimizerState
    trace: List[TraceRecord]
    logs: Optional[RunLogs] = None
    max_identity_residual: Optional[float] = None
    max_literal_residual: Optional[float] = None
    literal_steps: int = 0
    min_lemma3_slack: Optional[float] = None
    min_ema_increment: Optional[float] = None

    @property
    def last_iterate(self) -> Vector:
        return self.final_state.iterate

    @property
    def averaged_iterate(self) -> Vector:
        return self.final_state.averaged


def validate_schedule(kind: OptimizerKind, schedule: Schedule) -> None:
    if schedule.kind is not kind.schedule_kind:
        raise ScheduleError(
            f"{kind.value} needs a {kind.schedule_kind.value} schedule, got {schedule.kind.value}"
        )
    if kind is OptimizerKind.PSG and schedule.beta != 0.0:
        raise ScheduleError("psg takes no momentum; build its schedule with beta=0")


def step_once(
    kind: OptimizerKind,
    state: OptimizerState,
    oracle: ProblemOracle,
    schedule: Schedule,
    ema: Optional[EmaConfig],
    batch: int,
    rng: np.random.Generator,
) -> OptimizerState:
    if kind is OptimizerKind.PSG:
        return psg_step(state, oracle, schedule, batch=batch, rng=rng)
    if kind is OptimizerKind.HB_TV:
        return hb_step_timevarying(state, oracle, schedule, batch=batch, rng=rng)
    if kind is OptimizerKind.HB_CONST:
        return hb_step_constbeta(state, oracle, schedule, batch=batch, rng=rng)
    if kind is OptimizerKind.ADAHB_TV:
        return adahb_step_timevarying(state, oracle, schedule, ema, rng=rng, batch=batch)
    return adahb_step_constbeta(state, oracle, schedule, ema, rng=rng, batch=batch)


def run(
    kind: OptimizerKind,
    oracle: ProblemOracle,
    schedule: Schedule,
    iterations: int,
    *,
    ema: Optional[EmaConfig] = None,
    seed: int = 0,
    trace_sink: Optional[TraceSink] = None,
    batch: int = 0,
    w0: Optional[np.ndarray] = None,
    fstar: Optional[float] = None,
    monitor_identity: bool = False,
    keep_logs: bool = False,
) -> RunResult:
    """
    Execute ``iterations`` steps of one optimizer.

    The record for step t holds f(wₜ₊₁) and f(w̄ₜ₊₁), the objective after the
    step, plus the step size and momentum that produced it. Adaptive runs with
    a per-step schedule also report the EMA sum-bound slack; ``monitor_identity``
    adds the z-space reformulation residual.

    Args:
        kind: Which update rule to run
        oracle: Objective and feasible set
        schedule: Step-size / momentum schedule matching ``kind``
        iterations: Number of steps T ≥ 1
        ema: Second-moment settings for adaptive kinds (defaults to γ=0.1, δ=1e-8)
        seed: Seed of the generator used for stochastic batches
        trace_sink: Receives each record as soon as it is produced
        batch: Mini-batch size, 0 for exact subgradients
        w0: Feasible start point (default 0)
        fstar: Reference optimum; fills the gap columns when given
        monitor_identity: Compute the reformulation residual at every step
        keep_logs: Keep iterates, gradients, directions and V for offline checks

    Returns:
        RunResult with the final state and the in-memory trace

    Raises:
        ValueError: For T < 1, a mismatched schedule or an infeasible start
        TraceSinkError: If the sink fails; rows already written stay flushed
    """
    kind = OptimizerKind(kind)
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    validate_schedule(kind, schedule)
    if kind.adaptive and ema is None:
        ema = EmaConfig()
    if batch and not oracle.supports_batches:
        raise ValueError(f"{oracle.name} problem does not support mini-batches")
    per_step = schedule.epoch_size == 1
    if monitor_identity and not per_step:
        raise DiagnosticsError("identity monitoring needs a schedule epoch size of 1")

    rng = np.random.default_rng(seed)
    state = OptimizerState.initial(oracle, w0, adaptive=kind.adaptive)
    state = state.with_objective(oracle.value_array(state.w_curr))

    lemma3 = SumBoundMonitor(ema.gamma, ema.delta, oracle.dimension) if kind.adaptive and per_step else None
    monotone = EmaMonotonicityMonitor(ema.delta, oracle.dimension) if lemma3 is not None else None
    logs = RunLogs(trajectory=[state.w_prev, state.w_curr]) if keep_logs else None

    result = RunResult(final_state=state, trace=[])
    identity_worst = 0.0 if monitor_identity else None
    literal_worst = None

    logger.info("Running %s for %d steps on %s (dimension %d)",
                kind.value, iterations, oracle.name, oracle.dimension)
    for _ in range(iterations):
        previous = state
        state = step_once(kind, previous, oracle, schedule, ema, batch, rng)
        f_individual = oracle.value_array(state.w_curr)
        f_averaged = oracle.value_array(state.avg)
        state = state.with_objective(f_individual)

        residual = None
        if monitor_identity:
            residual, literal = reformulation_residuals(
                oracle.feasible_set, schedule, previous.t,
                previous.w_prev, previous.w_curr, state.w_curr, state.last_direction,
            )
            identity_worst = max(identity_worst, residual)
            if literal is not None:
                result.literal_steps += 1
                literal_worst = literal if literal_worst is None else max(literal_worst, literal)

        slack = None
        if lemma3 is not None:
            slack = lemma3.observe(state.last_gradient, state.V)
            monotone.observe(state.V)

        record = TraceRecord(
            t=previous.t,
            f_individual=f_individual,
            f_averaged=f_averaged,
            gap_individual=None if fstar is None else f_individual - fstar,
            gap_averaged=None if fstar is None else f_averaged - fstar,
            alpha_t=state.last_alpha,
            beta1_t=state.last_beta1,
            beta2_t=state.last_beta2,
            identity_residual=residual,
            lemma3_slack=slack,
        )
        result.trace.append(record)
        if trace_sink is not None:
            trace_sink.write(record)

        if logs is not None:
            logs.trajectory.append(state.w_curr)
            logs.gradients.append(state.last_gradient)
            logs.directions.append(state.last_direction)
            if state.V is not None:
                logs.v_log.append(state.V)

    if trace_sink is not None:
        trace_sink.flush()

    result.final_state = state
    result.logs = logs
    result.max_identity_residual = identity_worst
    result.max_literal_residual = literal_worst
    if lemma3 is not None:
        result.min_lemma3_slack = lemma3.min_slack
        result.min_ema_increment = monotone.min_increment
    last = result.trace[-1]
    logger.info("%s finished: f(w_T)=%.6g, f(w̄_T)=%.6g", kind.value, last.f_individual, last.f_averaged)
    return result
