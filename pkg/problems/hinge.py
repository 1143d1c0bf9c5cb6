"""ℓ₁-constrained hinge loss over sparse samples."""
from __future__ import annotations

import logging
from typing import Sequence, Tuple

import numpy as np
import scipy.optimize as scopt
from scipy import sparse

from geometry.projections import FeasibleSet, project_array
from geometry.vecmath import Vector
from problems.base import ProblemError, ProblemOracle

logger = logging.getLogger(__name__)


class HingeLossProblem(ProblemOracle):
    """
    f(w) = (1/n) Σᵢ max(0, 1 − yᵢ⟨xᵢ, w⟩) over {w : ‖w‖₁ ≤ τ}.

    A sample with margin exactly 1 contributes a zero subgradient.
    """

    name = "hinge"

    def __init__(self, samples: Sequence[Tuple[Vector, float]], tau: float):
        """
        Initialize the hinge problem.

        Args:
            samples: Sequence of (feature vector, label) with labels in {-1, +1}
            tau: Radius of the ℓ₁ feasible ball
        """
        if not samples:
            raise ProblemError("hinge loss needs at least one sample")

        dimension = samples[0][0].dimension
        rows, cols, data, labels = [], [], [], []
        for row, (features, label) in enumerate(samples):
            if features.dimension != dimension:
                raise ProblemError(
                    f"sample {row} has dimension {features.dimension}, expected {dimension}"
                )
            if label not in (-1, 1):
                raise ProblemError(f"sample {row} has label {label}, expected -1 or +1")
            if features.is_sparse:
                cols.extend(features.indices.tolist())
                data.extend(features.values.tolist())
                rows.extend([row] * features.values.size)
            else:
                nonzero = np.nonzero(features.values)[0]
                cols.extend(nonzero.tolist())
                data.extend(features.values[nonzero].tolist())
                rows.extend([row] * nonzero.size)
            labels.append(float(label))

        super().__init__(dimension, FeasibleSet.l1_ball(dimension, tau))
        self.tau = float(tau)
        self.features = sparse.csr_matrix(
            (np.asarray(data, dtype=np.float64), (rows, cols)),
            shape=(len(samples), dimension),
        )
        self.features.sort_indices()
        self.labels = np.asarray(labels, dtype=np.float64)
        self._row_norms = np.sqrt(np.asarray(self.features.multiply(self.features).sum(axis=1)).ravel())
        logger.debug("Hinge problem: %d samples, dimension %d, tau=%g",
                     self.sample_count, dimension, self.tau)

    @classmethod
    def from_dataset(cls, dataset, tau: float) -> "HingeLossProblem":
        """Build from any object exposing ``samples`` as (Vector, label) pairs."""
        return cls(dataset.samples, tau)

    @property
    def sample_count(self) -> int:
        return int(self.labels.size)

    @property
    def supports_batches(self) -> bool:
        return True

    @property
    def subgradient_bound(self) -> float:
        # ‖(1/|B|) Σ yᵢxᵢ‖ ≤ maxᵢ ‖xᵢ‖ for every batch B
        return float(np.max(self._row_norms))

    def margins(self, w: np.ndarray) -> np.ndarray:
        return self.labels * (self.features @ self._check(w))

    def value_array(self, w: np.ndarray) -> float:
        return float(np.mean(np.maximum(0.0, 1.0 - self.margins(w))))

    def _subgradient_rows(self, rows: np.ndarray, w: np.ndarray) -> np.ndarray:
        block = self.features[rows]
        labels = self.labels[rows]
        active = labels * (block @ w) < 1.0
        coefficients = np.where(active, -labels, 0.0) / rows.size
        return np.asarray(block.T @ coefficients).ravel()

    def subgradient_array(self, w: np.ndarray) -> np.ndarray:
        self._check(w)
        active = self.margins(w) < 1.0
        coefficients = np.where(active, -self.labels, 0.0) / self.sample_count
        return np.asarray(self.features.T @ coefficients).ravel()

    def stochastic_subgradient_array(
        self, w: np.ndarray, batch: int, rng: np.random.Generator
    ) -> np.ndarray:
        """
        Subgradient of the loss restricted to a uniformly drawn batch.

        Args:
            w: Current point
            batch: Batch size in [1, n]; n returns the full subgradient
            rng: Seeded generator owned by the caller

        Returns:
            Dense subgradient estimate
        """
        if not 1 <= batch <= self.sample_count:
            raise ProblemError(f"batch must be in [1, {self.sample_count}], got {batch}")
        self._check(w)
        if batch == self.sample_count:
            return self.subgradient_array(w)
        rows = np.sort(rng.choice(self.sample_count, size=batch, replace=False))
        return self._subgradient_rows(rows, w)

    def reference_optimum(self) -> float:
        """
        min_Q f as a sparse linear program solved by HiGHS.

        Variables are (w⁺, w⁻, ξ) ≥ 0 with w = w⁺ − w⁻, slack rows
        ξᵢ ≥ 1 − yᵢ⟨xᵢ, w⁺ − w⁻⟩ and Σ(w⁺ + w⁻) ≤ τ; the cost is mean(ξ).
        The result is the smaller of the LP objective and f at the projected
        solution, so run values can only dip below it by solver tolerance.

        Raises:
            ProblemError: When the solver does not report an optimum
        """
        n, d = self.features.shape
        signed = sparse.diags(self.labels) @ self.features
        margin_rows = sparse.hstack([-signed, signed, -sparse.identity(n)])
        budget_row = sparse.csr_matrix(
            np.concatenate([np.ones(2 * d), np.zeros(n)])[None, :]
        )
        A_ub = sparse.vstack([margin_rows, budget_row], format="csr")
        b_ub = np.concatenate([-np.ones(n), [self.tau]])
        cost = np.concatenate([np.zeros(2 * d), np.full(n, 1.0 / n)])
        solution = scopt.linprog(cost, A_ub=A_ub, b_ub=b_ub, bounds=(0.0, None), method="highs")
        if not solution.success:
            raise ProblemError(f"hinge reference LP failed: {solution.message}")
        w = project_array(self.feasible_set, solution.x[:d] - solution.x[d:2 * d])
        attained = self.value_array(w)
        logger.info("Hinge reference optimum %.10g (LP objective %.10g)", attained, solution.fun)
        return float(min(attained, solution.fun))
