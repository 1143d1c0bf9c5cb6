"""
Euclidean projections onto the feasible sets of the convex experiments.

``project`` is the production path (sort-based soft threshold for the ℓ₁ ball,
radial scaling for the ℓ₂ ball, clamping for boxes). ``project_bruteforce``
solves the same problem by enumerating KKT candidates and is only meant as a
test oracle for small dimensions.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np

from geometry.vecmath import DimensionMismatchError, Vector

BRUTEFORCE_MAX_DIMENSION = 8


class ProjectionError(ValueError):
    """Raised for invalid feasible sets or unsupported projection requests."""


class SetKind(str, Enum):
    L1_BALL = "l1_ball"
    L2_BALL = "l2_ball"
    BOX = "box"
    FULL_SPACE = "full_space"


@dataclass(frozen=True, eq=False)
class FeasibleSet:
    """
    Closed convex set Q with its Euclidean projection.

    Build instances through the ``l1_ball``, ``l2_ball``, ``box`` and
    ``full_space`` constructors rather than directly.
    """

    kind: SetKind
    dimension: int
    radius: Optional[float] = None
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.dimension < 1:
            raise ProjectionError(f"dimension must be positive, got {self.dimension}")
        if self.kind in (SetKind.L1_BALL, SetKind.L2_BALL):
            if self.radius is None or not np.isfinite(self.radius) or self.radius <= 0:
                raise ProjectionError(f"{self.kind.value} radius must be positive, got {self.radius}")
        if self.kind is SetKind.BOX:
            lower = np.array(self.lower, dtype=np.float64).reshape(-1)
            upper = np.array(self.upper, dtype=np.float64).reshape(-1)
            if lower.size != self.dimension or upper.size != self.dimension:
                raise ProjectionError("box bounds must match the set dimension")
            if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
                raise ProjectionError("box bounds must be finite")
            if np.any(lower > upper):
                raise ProjectionError("box requires lower <= upper component-wise")
            lower.flags.writeable = False
            upper.flags.writeable = False
            object.__setattr__(self, "lower", lower)
            object.__setattr__(self, "upper", upper)

    @classmethod
    def l1_ball(cls, dimension: int, radius: float) -> "FeasibleSet":
        return cls(SetKind.L1_BALL, dimension, radius=float(radius))

    @classmethod
    def l2_ball(cls, dimension: int, radius: float = 1.0) -> "FeasibleSet":
        return cls(SetKind.L2_BALL, dimension, radius=float(radius))

    @classmethod
    def box(cls, lower, upper, dimension: Optional[int] = None) -> "FeasibleSet":
        """Box [lower, upper]; scalar bounds are broadcast to ``dimension``."""
        if dimension is None:
            dimension = int(np.size(lower)) if np.ndim(lower) else int(np.size(upper))
        lower = np.broadcast_to(np.asarray(lower, dtype=np.float64), (dimension,))
        upper = np.broadcast_to(np.asarray(upper, dtype=np.float64), (dimension,))
        return cls(SetKind.BOX, dimension, lower=lower, upper=upper)

    @classmethod
    def full_space(cls, dimension: int) -> "FeasibleSet":
        return cls(SetKind.FULL_SPACE, dimension)

    @property
    def bounded(self) -> bool:
        return self.kind is not SetKind.FULL_SPACE

    def diameter(self) -> float:
        """Diameter bound: 2τ, 2r, ‖upper − lower‖, or ``inf`` for the full space."""
        if self.kind in (SetKind.L1_BALL, SetKind.L2_BALL):
            return 2.0 * self.radius
        if self.kind is SetKind.BOX:
            return float(np.linalg.norm(self.upper - self.lower))
        return float("inf")

    def constraint_excess(self, x: np.ndarray) -> float:
        """How far ``x`` violates the constraint (≤ 0 means feasible)."""
        if self.kind is SetKind.L1_BALL:
            return float(np.sum(np.abs(x))) - self.radius
        if self.kind is SetKind.L2_BALL:
            return float(np.linalg.norm(x)) - self.radius
        if self.kind is SetKind.BOX:
            return float(max(np.max(self.lower - x), np.max(x - self.upper)))
        return float("-inf")

    def __repr__(self) -> str:
        if self.kind is SetKind.BOX:
            return f"FeasibleSet(box, dimension={self.dimension})"
        if self.kind is SetKind.FULL_SPACE:
            return f"FeasibleSet(full_space, dimension={self.dimension})"
        return f"FeasibleSet({self.kind.value}, dimension={self.dimension}, radius={self.radius})"


ArrayOrVector = Union[Vector, np.ndarray]


def _as_array(set_: FeasibleSet, x: ArrayOrVector) -> np.ndarray:
    array = x.to_dense() if isinstance(x, Vector) else np.asarray(x, dtype=np.float64).reshape(-1)
    if array.size != set_.dimension:
        raise DimensionMismatchError(
            f"dimension mismatch: point has {array.size}, set has {set_.dimension}"
        )
    return array


def _project_l1(x: np.ndarray, radius: float) -> np.ndarray:
    magnitudes = np.abs(x)
    if np.sum(magnitudes) <= radius:
        return x.copy()

    ordered = np.sort(magnitudes)[::-1]
    cumulative = np.cumsum(ordered)
    ranks = np.arange(1, x.size + 1)
    # Largest valid prefix; equality keeps the coordinate in the support
    valid = np.nonzero(ordered * ranks >= cumulative - radius)[0]
    rho = int(valid[-1])
    theta = (cumulative[rho] - radius) / (rho + 1.0)
    return np.sign(x) * np.maximum(magnitudes - theta, 0.0)


def _project_l2(x: np.ndarray, radius: float) -> np.ndarray:
    norm = float(np.linalg.norm(x))
    if norm <= radius:
        return x.copy()
    return x * (radius / norm)


def project_array(set_: FeasibleSet, x: np.ndarray) -> np.ndarray:
    """Projection on raw float64 arrays; used by the optimizer hot loop."""
    if x.size != set_.dimension:
        raise DimensionMismatchError(
            f"dimension mismatch: point has {x.size}, set has {set_.dimension}"
        )
    if set_.kind is SetKind.L1_BALL:
        return _project_l1(x, set_.radius)
    if set_.kind is SetKind.L2_BALL:
        return _project_l2(x, set_.radius)
    if set_.kind is SetKind.BOX:
        return np.minimum(np.maximum(x, set_.lower), set_.upper)
    return np.array(x, dtype=np.float64, copy=True)


def project(set_: FeasibleSet, x: ArrayOrVector) -> Vector:
    """
    Euclidean projection argmin_{y∈Q} ‖y − x‖².

    Args:
        set_: Feasible set Q
        x: Point to project (dense or sparse)

    Returns:
        Dense vector holding the projection
    """
    return Vector.dense(project_array(set_, _as_array(set_, x)))


def _l1_candidates(x: np.ndarray, radius: float) -> np.ndarray:
    # One candidate per sign pattern s ∈ {−1, 0, +1}^d on the boundary ‖y‖₁ = τ
    patterns = np.array(list(itertools.product((-1.0, 0.0, 1.0), repeat=x.size)))
    support = np.sum(patterns != 0.0, axis=1)
    patterns = patterns[support > 0]
    support = support[support > 0]
    theta = (patterns @ x - radius) / support
    return np.where(patterns != 0.0, x - theta[:, None] * patterns, 0.0)


def _box_candidates(x: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    choices = np.stack([lower, upper, x], axis=1)
    picks = np.array(list(itertools.product(range(3), repeat=x.size)))
    return choices[np.arange(x.size), picks]


def project_bruteforce(set_: FeasibleSet, x: ArrayOrVector) -> Vector:
    """
    Projection by exhaustive KKT enumeration, for dimensions up to 8.

    Every active-set / sign pattern yields a stationary candidate; the
    feasible candidate closest to ``x`` is the projection.

    Raises:
        ProjectionError: If the set dimension exceeds the enumeration guard
    """
    if set_.dimension > BRUTEFORCE_MAX_DIMENSION:
        raise ProjectionError(
            f"brute-force projection limited to dimension {BRUTEFORCE_MAX_DIMENSION}, "
            f"got {set_.dimension}"
        )
    point = _as_array(set_, x)

    if set_.kind is SetKind.FULL_SPACE:
        return Vector.dense(point)

    candidates = [point[None, :]]
    if set_.kind is SetKind.L1_BALL:
        candidates.append(_l1_candidates(point, set_.radius))
    elif set_.kind is SetKind.L2_BALL:
        norm = float(np.linalg.norm(point))
        if norm > 0.0:
            candidates.append((point * (set_.radius / norm))[None, :])
    else:
        candidates.append(_box_candidates(point, set_.lower, set_.upper))
    stacked = np.concatenate(candidates, axis=0)

    slack = 1e-12 * max(1.0, set_.radius or 1.0)
    feasible = np.array([set_.constraint_excess(row) <= slack for row in stacked])
    distances = np.sum((stacked[feasible] - point) ** 2, axis=1)
    return Vector.dense(stacked[feasible][int(np.argmin(distances))])


def membership(set_: FeasibleSet, x: ArrayOrVector, tol: float = 0.0) -> bool:
    """True iff the constraint value is within ``tol`` of its bound."""
    if set_.kind is SetKind.FULL_SPACE:
        return True
    return set_.constraint_excess(_as_array(set_, x)) <= tol
