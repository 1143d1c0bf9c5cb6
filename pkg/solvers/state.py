"""Iterate bundle carried between optimizer steps."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from geometry.projections import membership
from geometry.vecmath import Vector
from problems.base import ProblemOracle

FEASIBILITY_TOL = 1e-10


def _readonly(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=np.float64, copy=True)
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class OptimizerState:
    """
    State before step ``t``: w_curr = wₜ, w_prev = wₜ₋₁.

    ``avg`` is the mean of w₁..wₜ, ``V`` the EMA accumulator (adaptive
    variants only). The ``last_*`` fields describe the step that produced
    this state and are None on the initial state.
    """

    t: int
    w_curr: np.ndarray
    w_prev: np.ndarray
    avg: np.ndarray
    V: Optional[np.ndarray] = None
    f_best: float = math.inf
    last_gradient: Optional[np.ndarray] = None
    last_direction: Optional[np.ndarray] = None
    last_v_hat: Optional[np.ndarray] = None
    last_alpha: Optional[float] = None
    last_beta1: Optional[float] = None
    last_beta2: Optional[float] = None

    @classmethod
    def initial(
        cls,
        oracle: ProblemOracle,
        w0: Optional[np.ndarray] = None,
        adaptive: bool = False,
    ) -> "OptimizerState":
        """
        Start at ``w0`` (default 0) with w_prev = w0, so the first momentum is zero.

        Raises:
            ValueError: If ``w0`` is not feasible
        """
        start = np.zeros(oracle.dimension) if w0 is None else _readonly(w0)
        if start.size != oracle.dimension:
            raise ValueError(
                f"start point has dimension {start.size}, problem has {oracle.dimension}"
            )
        if not membership(oracle.feasible_set, start, FEASIBILITY_TOL):
            raise ValueError("start point must be feasible")
        start = _readonly(start)
        return cls(
            t=1,
            w_curr=start,
            w_prev=start,
            avg=start,
            V=_readonly(np.zeros(oracle.dimension)) if adaptive else None,
        )

    def advance(
        self,
        w_next: np.ndarray,
        gradient: np.ndarray,
        direction: np.ndarray,
        alpha: float,
        beta1: float,
        V: Optional[np.ndarray] = None,
        v_hat: Optional[np.ndarray] = None,
        beta2: Optional[float] = None,
    ) -> "OptimizerState":
        w_next = _readonly(w_next)
        t_next = self.t + 1
        avg = _readonly(self.avg + (w_next - self.avg) / t_next)
        return replace(
            self,
            t=t_next,
            w_curr=w_next,
            w_prev=self.w_curr,
            avg=avg,
            V=None if V is None else _readonly(V),
            last_gradient=_readonly(gradient),
            last_direction=_readonly(direction),
            last_v_hat=None if v_hat is None else _readonly(v_hat),
            last_alpha=alpha,
            last_beta1=beta1,
            last_beta2=beta2,
        )

    def with_objective(self, value: float) -> "OptimizerState":
        if value < self.f_best:
            return replace(self, f_best=value)
        return self

    @property
    def iterate(self) -> Vector:
        return Vector.dense(self.w_curr)

    @property
    def averaged(self) -> Vector:
        return Vector.dense(self.avg)
