"""
Adversarial max-of-linear function on the unit ball.

Rows hᵢ (i = 1..T+1) carry the prefix aⱼ for j < i, then −bᵢ on the diagonal
(i ≤ T), then zeros. The diagonal entry at i = j = T is −b_T as well, so the
last constrained row follows the same pattern as the others.
"""
from __future__ import annotations

import math
from functools import cached_property

import numpy as np

from geometry.projections import FeasibleSet
from problems.base import ProblemError, ProblemOracle


def gd_lower_bound(T: int, c: float) -> float:
    """Floor ln(T)/(32c√T) on the last PSG iterate for stepsize c/√t."""
    if T < 2:
        raise ProblemError(f"lower bound needs T >= 2, got {T}")
    return math.log(T) / (32.0 * c * math.sqrt(T))


class HardFunctionProblem(ProblemOracle):
    """f(w) = max_{i∈[T+1]} ⟨hᵢ, w⟩ over the unit ℓ₂ ball in R^T."""

    name = "hard"

    def __init__(self, T: int, c: float = 1.0):
        if T < 1:
            raise ProblemError(f"horizon T must be positive, got {T}")
        if c < 1.0:
            raise ProblemError(f"scale c must be >= 1, got {c}")
        super().__init__(T, FeasibleSet.l2_ball(T, 1.0))
        self.T = int(T)
        self.c = float(c)
        i = np.arange(1, T + 1, dtype=np.float64)
        self.a = 1.0 / (8.0 * self.c * (T - i + 1.0))
        self.b = np.sqrt(i) / (2.0 * self.c * math.sqrt(T))

    def row(self, index: int) -> np.ndarray:
        """h_{index+1} as a dense array, ``index`` in [0, T]."""
        if not 0 <= index <= self.T:
            raise ProblemError(f"row index must be in [0, {self.T}], got {index}")
        h = np.zeros(self.T)
        h[:index] = self.a[:index]
        if index < self.T:
            h[index] = -self.b[index]
        return h

    def inner_products(self, w: np.ndarray) -> np.ndarray:
        """⟨hᵢ, w⟩ for all T+1 rows through one prefix sum."""
        self._check(w)
        prefix = np.concatenate(([0.0], np.cumsum(self.a * w)))
        values = np.empty(self.T + 1)
        values[: self.T] = prefix[: self.T] - self.b * w
        values[self.T] = prefix[self.T]
        return values

    def active_row(self, w: np.ndarray) -> int:
        # argmax returns the first maximiser: smallest index wins ties
        return int(np.argmax(self.inner_products(w)))

    def value_array(self, w: np.ndarray) -> float:
        return float(np.max(self.inner_products(w)))

    def subgradient_array(self, w: np.ndarray) -> np.ndarray:
        return self.row(self.active_row(w))

    @cached_property
    def subgradient_bound(self) -> float:
        return max(float(np.linalg.norm(self.row(index))) for index in range(self.T + 1))

    def lower_bound(self) -> float:
        return gd_lower_bound(self.T, self.c)
