"""Random max-of-linear objectives used by the identity and rate suites."""
from __future__ import annotations

from typing import Optional

import numpy as np
import scipy.optimize as scopt

from geometry.projections import FeasibleSet, SetKind, project_array
from problems.base import ProblemError, ProblemOracle


class MaxOfLinearProblem(ProblemOracle):
    """f(w) = maxₖ (⟨aₖ, w⟩ + bₖ), subgradient a_{k*} with the smallest maximising k."""

    name = "max_linear"

    def __init__(
        self,
        slopes: np.ndarray,
        offsets: np.ndarray,
        feasible_set: FeasibleSet,
        optimum: Optional[float] = None,
    ):
        slopes = np.asarray(slopes, dtype=np.float64)
        offsets = np.asarray(offsets, dtype=np.float64).reshape(-1)
        if slopes.ndim != 2 or slopes.shape[0] != offsets.size or offsets.size == 0:
            raise ProblemError("slopes must be (m, d) with m matching the offsets")
        super().__init__(slopes.shape[1], feasible_set)
        self.slopes = slopes
        self.offsets = offsets
        self.optimum = optimum

    @classmethod
    def random(
        cls,
        dimension: int,
        pieces: int,
        rng: np.random.Generator,
        feasible_set: FeasibleSet,
    ) -> "MaxOfLinearProblem":
        """Gaussian slopes and offsets."""
        return cls(
            rng.standard_normal((pieces, dimension)),
            rng.standard_normal(pieces),
            feasible_set,
        )

    @classmethod
    def power_valley(
        cls,
        dimension: int,
        rng: np.random.Generator,
        feasible_set: FeasibleSet,
        depth: float = 0.5,
        power: int = 16,
        reach: float = 1.2,
        resolution: float = 1e-3,
    ) -> "MaxOfLinearProblem":
        """
        Tangent-line model of |ρ|^p along a random sign direction u.

        With ρ(w) = (depth − ⟨u, w⟩)/depth and ‖u‖ = 1, each piece is the
        tangent of |ρ|^p at a grid point ρₖ ∈ [−reach, reach]. The tangent at
        ρ = 0 is the zero function, so f* = 0, attained at w = depth·u, and
        f(0) = 1. Near the valley floor the objective is flat enough that
        subgradient methods stay in their O(1/√t) regime for a long time.
        """
        if depth <= 0.0 or power < 2:
            raise ProblemError(f"valley needs depth > 0 and power >= 2, got {depth}, {power}")
        u = rng.choice([-1.0, 1.0], size=dimension) / np.sqrt(dimension)
        if feasible_set.constraint_excess(depth * u) > 0:
            raise ProblemError("the valley floor depth·u must lie in the feasible set")
        grid = np.linspace(-reach, reach, 2 * int(round(reach / resolution)) + 1)
        coefficients = power * np.sign(grid) * np.abs(grid) ** (power - 1)
        slopes = -np.outer(coefficients / depth, u)
        offsets = np.abs(grid) ** power - coefficients * grid + coefficients
        return cls(slopes, offsets, feasible_set, optimum=0.0)

    @classmethod
    def linf_distance(cls, center: np.ndarray, feasible_set: FeasibleSet) -> "MaxOfLinearProblem":
        """f(w) = ‖w − c‖∞ written as max over ±eᵢ; the minimum 0 is attained at c ∈ Q."""
        center = np.asarray(center, dtype=np.float64).reshape(-1)
        if feasible_set.constraint_excess(center) > 0:
            raise ProblemError("center must lie in the feasible set")
        identity = np.eye(center.size)
        slopes = np.vstack([identity, -identity])
        offsets = np.concatenate([-center, center])
        return cls(slopes, offsets, feasible_set, optimum=0.0)

    @property
    def subgradient_bound(self) -> float:
        return float(np.max(np.linalg.norm(self.slopes, axis=1)))

    def value_array(self, w: np.ndarray) -> float:
        return float(np.max(self.slopes @ self._check(w) + self.offsets))

    def subgradient_array(self, w: np.ndarray) -> np.ndarray:
        index = int(np.argmax(self.slopes @ self._check(w) + self.offsets))
        return self.slopes[index].copy()

    def reference_optimum(self) -> float:
        """
        min_Q f from a conventional solver, for exact gap columns.

        Boxes and ℓ₁ balls are solved as linear programs in epigraph form,
        the ℓ₂ ball with SLSQP. The value is f at the (projected) solution,
        so it never undercuts an attainable objective value.

        Raises:
            ProblemError: For the full space or when the solver fails
        """
        if self.optimum is not None:
            return self.optimum
        kind = self.feasible_set.kind
        if kind is SetKind.FULL_SPACE:
            raise ProblemError("max-of-linear reference needs a bounded feasible set")
        if kind is SetKind.L2_BALL:
            w = self._solve_l2()
        else:
            w = self._solve_lp()
        return self.value_array(project_array(self.feasible_set, w))

    def _solve_lp(self) -> np.ndarray:
        m, d = self.slopes.shape
        s_column = -np.ones((m, 1))
        if self.feasible_set.kind is SetKind.BOX:
            # variables (w, s)
            cost = np.zeros(d + 1)
            cost[-1] = 1.0
            A_ub = np.hstack([self.slopes, s_column])
            bounds = list(zip(self.feasible_set.lower, self.feasible_set.upper)) + [(None, None)]
            solution = scopt.linprog(cost, A_ub=A_ub, b_ub=-self.offsets, bounds=bounds, method="highs")
        else:
            # variables (w, u, s) with |w| ≤ u and Σu ≤ τ
            identity = np.eye(d)
            cost = np.zeros(2 * d + 1)
            cost[-1] = 1.0
            A_ub = np.vstack([
                np.hstack([self.slopes, np.zeros((m, d)), s_column]),
                np.hstack([identity, -identity, np.zeros((d, 1))]),
                np.hstack([-identity, -identity, np.zeros((d, 1))]),
                np.concatenate([np.zeros(d), np.ones(d), [0.0]])[None, :],
            ])
            b_ub = np.concatenate([-self.offsets, np.zeros(2 * d), [self.feasible_set.radius]])
            bounds = [(None, None)] * d + [(0.0, None)] * d + [(None, None)]
            solution = scopt.linprog(cost, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
        if not solution.success:
            raise ProblemError(f"reference LP failed: {solution.message}")
        return np.asarray(solution.x[:d])

    def _solve_l2(self) -> np.ndarray:
        d = self.dimension
        radius = self.feasible_set.radius
        start = np.concatenate([np.zeros(d), [float(np.max(self.offsets)) + 1.0]])
        constraints = [
            {
                "type": "ineq",
                "fun": lambda x: x[-1] - (self.slopes @ x[:d] + self.offsets),
                "jac": lambda x: np.hstack([-self.slopes, np.ones((self.slopes.shape[0], 1))]),
            },
            {
                "type": "ineq",
                "fun": lambda x: np.array([radius ** 2 - x[:d] @ x[:d]]),
                "jac": lambda x: np.concatenate([-2.0 * x[:d], [0.0]])[None, :],
            },
        ]
        solution = scopt.minimize(
            lambda x: x[-1],
            start,
            jac=lambda x: np.concatenate([np.zeros(d), [1.0]]),
            constraints=constraints,
            method="SLSQP",
            options={"ftol": 1e-13, "maxiter": 1000},
        )
        if not solution.success:
            raise ProblemError(f"reference SLSQP failed: {solution.message}")
        return np.asarray(solution.x[:d])
