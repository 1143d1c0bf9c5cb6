"""Common interface of the objective oracles."""
from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Optional

import numpy as np

from geometry.projections import FeasibleSet
from geometry.vecmath import DimensionMismatchError, Vector


class ProblemError(ValueError):
    """Raised for malformed problem data or out-of-range oracle requests."""


class ProblemOracle(ABC):
    """
    Convex objective f over a feasible set Q.

    Subclasses implement ``value_array`` and ``subgradient_array`` on dense
    float64 arrays; the ``Vector`` methods wrap them for the public API.
    The optimizers call the array methods directly.
    """

    name: str = "problem"

    def __init__(self, dimension: int, feasible_set: FeasibleSet):
        if feasible_set.dimension != dimension:
            raise DimensionMismatchError(
                f"feasible set dimension {feasible_set.dimension} != problem dimension {dimension}"
            )
        self.dimension = dimension
        self.feasible_set = feasible_set

    @property
    def subgradient_bound(self) -> Optional[float]:
        """Declared bound M on ‖g(w)‖, or None when unknown."""
        return None

    def reference_optimum(self) -> Optional[float]:
        """min_Q f from a conventional solver, or None when no solver applies."""
        return None

    @property
    def supports_batches(self) -> bool:
        return False

    @property
    def sample_count(self) -> int:
        return 1

    def _check(self, w: np.ndarray) -> np.ndarray:
        if w.size != self.dimension:
            raise DimensionMismatchError(
                f"dimension mismatch: point has {w.size}, problem has {self.dimension}"
            )
        return w

    @abstractmethod
    def value_array(self, w: np.ndarray) -> float:
        """f(w) for a dense array."""

    @abstractmethod
    def subgradient_array(self, w: np.ndarray) -> np.ndarray:
        """A subgradient g(w) for a dense array."""

    def stochastic_subgradient_array(
        self, w: np.ndarray, batch: int, rng: np.random.Generator
    ) -> np.ndarray:
        """Unbiased estimate of g(w); deterministic oracles return the exact subgradient."""
        return self.subgradient_array(w)

    def value(self, w: Vector) -> float:
        return self.value_array(self._check(w.to_dense()))

    def subgradient(self, w: Vector) -> Vector:
        return Vector.dense(self.subgradient_array(self._check(w.to_dense())))

    def stochastic_subgradient(self, w: Vector, batch: int, rng: np.random.Generator) -> Vector:
        return Vector.dense(
            self.stochastic_subgradient_array(self._check(w.to_dense()), batch, rng)
        )
