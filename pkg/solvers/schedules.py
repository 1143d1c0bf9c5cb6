"""Step-size, momentum and EMA schedules."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional


class ScheduleError(ValueError):
    """Raised for parameters outside the schedule's domain."""


class ScheduleKind(str, Enum):
    TIME_VARYING = "time_varying"
    CONSTANT_BETA = "constant_beta"


@dataclass(frozen=True)
class Schedule:
    """
    Step-size / momentum schedule.

    TimeVarying: β₁ₜ = t/(t+2), αₜ = α/((t+2)√t).
    ConstantBeta: β fixed in [0, 1), αₜ = α/√t, or α/√T when ``horizon`` is set.

    ``epoch_size`` > 1 holds the schedule clock s = ⌈t/epoch_size⌉ constant
    within each epoch.
    """

    kind: ScheduleKind
    alpha: float
    beta: float = 0.0
    horizon: Optional[int] = None
    epoch_size: int = 1

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ScheduleError(f"alpha must be positive, got {self.alpha}")
        if not 0.0 <= self.beta < 1.0:
            raise ScheduleError(f"beta must be in [0, 1), got {self.beta}")
        if self.epoch_size < 1:
            raise ScheduleError(f"epoch size must be >= 1, got {self.epoch_size}")
        if self.horizon is not None:
            if self.kind is ScheduleKind.TIME_VARYING:
                raise ScheduleError("fixed-horizon step sizes apply to constant-beta schedules only")
            if self.horizon < 1:
                raise ScheduleError(f"horizon must be >= 1, got {self.horizon}")

    @classmethod
    def time_varying(cls, alpha: float, epoch_size: int = 1) -> "Schedule":
        return cls(ScheduleKind.TIME_VARYING, alpha, epoch_size=epoch_size)

    @classmethod
    def constant_beta(
        cls,
        alpha: float,
        beta: float = 0.0,
        horizon: Optional[int] = None,
        epoch_size: int = 1,
    ) -> "Schedule":
        return cls(ScheduleKind.CONSTANT_BETA, alpha, beta=beta, horizon=horizon,
                   epoch_size=epoch_size)

    def clock(self, t: int) -> int:
        if t < 1:
            raise ScheduleError(f"step counter starts at 1, got {t}")
        return (t - 1) // self.epoch_size + 1

    def base_step(self, t: int) -> float:
        """α/√s (or α/√T with a horizon): the step size of the z-space recursion."""
        if self.horizon is not None:
            return self.alpha / math.sqrt(self.horizon)
        return self.alpha / math.sqrt(self.clock(t))

    def alpha_t(self, t: int) -> float:
        if self.kind is ScheduleKind.TIME_VARYING:
            s = self.clock(t)
            return self.alpha / ((s + 2) * math.sqrt(s))
        return self.base_step(t)

    def beta_t(self, t: int) -> float:
        if self.kind is ScheduleKind.TIME_VARYING:
            s = self.clock(t)
            return s / (s + 2.0)
        return self.beta


@dataclass(frozen=True)
class EmaConfig:
    """Second-moment EMA: β₂ₜ = 1 − γ/t clamped into [1 − 1/t, 1 − γ/t]."""

    gamma: float = 0.1
    delta: float = 1e-8

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ScheduleError(f"gamma must be in (0, 1], got {self.gamma}")
        if not (self.delta > 0 and math.isfinite(self.delta)):
            raise ScheduleError(f"delta must be positive, got {self.delta}")

    def beta2(self, t: int) -> float:
        if t < 1:
            raise ScheduleError(f"step counter starts at 1, got {t}")
        upper = 1.0 - self.gamma / t
        lower = 1.0 - 1.0 / t
        return min(max(upper, lower), upper)
