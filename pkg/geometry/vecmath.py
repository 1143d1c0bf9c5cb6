"""Dense and sparse real vectors plus diagonal-metric arithmetic."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np


class VectorError(ValueError):
    """Raised when a vector or metric would violate its invariants."""


class DimensionMismatchError(VectorError):
    """Raised when two operands do not share a dimension."""


def _frozen(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class Vector:
    """
    Real coordinate vector with dense or sorted-sparse storage.

    Dense vectors keep ``values`` of length ``dimension`` and ``indices=None``.
    Sparse vectors keep strictly increasing ``indices`` and the matching
    nonzero ``values``. Both arrays are read-only after construction.
    """

    dimension: int
    values: np.ndarray
    indices: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        if self.dimension < 1:
            raise VectorError(f"dimension must be positive, got {self.dimension}")

        values = np.array(self.values, dtype=np.float64, copy=True).reshape(-1)
        if not np.all(np.isfinite(values)):
            raise VectorError("vector values must be finite")

        if self.indices is None:
            if values.size != self.dimension:
                raise VectorError(
                    f"dense storage has {values.size} entries for dimension {self.dimension}"
                )
            object.__setattr__(self, "values", _frozen(values))
            return

        indices = np.array(self.indices, dtype=np.int64, copy=True).reshape(-1)
        if indices.size != values.size:
            raise VectorError("sparse indices and values differ in length")
        if indices.size:
            if indices[0] < 0 or indices[-1] >= self.dimension:
                raise VectorError(f"sparse index out of range for dimension {self.dimension}")
            if np.any(np.diff(indices) <= 0):
                raise VectorError("sparse indices must be strictly increasing")

        # No explicit zeros in sparse storage
        keep = values != 0.0
        object.__setattr__(self, "indices", _frozen(indices[keep]))
        object.__setattr__(self, "values", _frozen(values[keep]))

    @classmethod
    def dense(cls, values: Union[Sequence[float], np.ndarray]) -> "Vector":
        """Build a dense vector from any 1-D sequence."""
        array = np.asarray(values, dtype=np.float64).reshape(-1)
        return cls(dimension=int(array.size), values=array)

    @classmethod
    def sparse(
        cls,
        dimension: int,
        entries: Union[dict, Iterable[Tuple[int, float]]],
    ) -> "Vector":
        """Build a sparse vector from ``{index: value}`` or ``(index, value)`` pairs."""
        pairs = sorted(entries.items() if isinstance(entries, dict) else entries)
        indices = [index for index, _ in pairs]
        values = [value for _, value in pairs]
        return cls(dimension=dimension, values=np.asarray(values, dtype=np.float64),
                   indices=np.asarray(indices, dtype=np.int64))

    @classmethod
    def zeros(cls, dimension: int) -> "Vector":
        return cls(dimension=dimension, values=np.zeros(dimension))

    @property
    def is_sparse(self) -> bool:
        return self.indices is not None

    @property
    def nnz(self) -> int:
        if self.is_sparse:
            return int(self.values.size)
        return int(np.count_nonzero(self.values))

    def to_dense(self) -> np.ndarray:
        """Return a fresh writable dense copy."""
        if not self.is_sparse:
            return self.values.copy()
        dense = np.zeros(self.dimension)
        dense[self.indices] = self.values
        return dense

    def norm(self) -> float:
        return float(np.sqrt(dot(self, self)))

    def norm1(self) -> float:
        return float(np.sum(np.abs(self.values)))

    def norm_inf(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def __len__(self) -> int:
        return self.dimension

    def __repr__(self) -> str:
        kind = "sparse" if self.is_sparse else "dense"
        return f"Vector({kind}, dimension={self.dimension}, nnz={self.nnz})"


@dataclass(frozen=True, eq=False)
class DiagonalMetric:
    """Positive diagonal matrix H used for weighted norms and V̂⁻¹ products."""

    diag: np.ndarray

    def __post_init__(self):
        diag = np.array(self.diag, dtype=np.float64, copy=True).reshape(-1)
        if diag.size == 0:
            raise VectorError("metric must have at least one entry")
        if not np.all(np.isfinite(diag)):
            raise VectorError("metric entries must be finite")
        if np.any(diag <= 0.0):
            raise VectorError("metric entries must be strictly positive")
        object.__setattr__(self, "diag", _frozen(diag))

    @classmethod
    def identity(cls, dimension: int) -> "DiagonalMetric":
        return cls(np.ones(dimension))

    @property
    def dimension(self) -> int:
        return int(self.diag.size)

    def apply(self, x: Vector) -> Vector:
        """Return H·x, keeping sparse inputs sparse."""
        _require_same_dimension(self.dimension, x.dimension)
        if x.is_sparse:
            return Vector(x.dimension, x.values * self.diag[x.indices], x.indices)
        return Vector(x.dimension, x.values * self.diag)


def _require_same_dimension(left: int, right: int) -> None:
    if left != right:
        raise DimensionMismatchError(f"dimension mismatch: {left} != {right}")


def _checked(vector: Vector) -> Vector:
    if not np.all(np.isfinite(vector.values)):
        raise VectorError("operation produced non-finite values")
    return vector


def axpy(a: float, x: Vector, y: Vector) -> Vector:
    """
    Compute a·x + y component-wise.

    Args:
        a: Scalar multiplier
        x: Scaled operand
        y: Added operand

    Returns:
        Sparse result when both operands are sparse, dense otherwise
    """
    _require_same_dimension(x.dimension, y.dimension)

    if x.is_sparse and y.is_sparse:
        indices = np.union1d(x.indices, y.indices)
        result = np.zeros(indices.size)
        result[np.searchsorted(indices, y.indices)] = y.values
        positions = np.searchsorted(indices, x.indices)
        result[positions] = a * x.values + result[positions]
        return _checked(Vector(x.dimension, result, indices))

    if x.is_sparse:
        result = y.to_dense()
        result[x.indices] = a * x.values + result[x.indices]
        return _checked(Vector(x.dimension, result))

    return _checked(Vector(x.dimension, a * x.values + y.to_dense()))


def dot(x: Vector, y: Vector) -> float:
    """
    Σᵢ xᵢyᵢ, correctly rounded.

    The products are summed with ``math.fsum``, so the result is independent
    of the accumulation order and identical for every storage pairing.
    """
    _require_same_dimension(x.dimension, y.dimension)

    if x.is_sparse and y.is_sparse:
        _, left, right = np.intersect1d(
            x.indices, y.indices, assume_unique=True, return_indices=True
        )
        products = x.values[left] * y.values[right]
    elif x.is_sparse:
        products = x.values * y.values[x.indices]
    elif y.is_sparse:
        products = x.values[y.indices] * y.values
    else:
        products = x.values * y.values
    return math.fsum(products.tolist())


def weighted_norm_sq(x: Vector, H: DiagonalMetric) -> float:
    """Return ‖x‖²_H = Σᵢ Hᵢᵢ xᵢ²."""
    _require_same_dimension(x.dimension, H.dimension)
    if x.is_sparse:
        return float(np.dot(H.diag[x.indices], x.values * x.values))
    return float(np.dot(H.diag, x.values * x.values))


def metric_apply_inverse(H: DiagonalMetric, x: Vector) -> Vector:
    """Return H⁻¹x component-wise; ``H`` is strictly positive by construction."""
    _require_same_dimension(H.dimension, x.dimension)
    if x.is_sparse:
        return _checked(Vector(x.dimension, x.values / H.diag[x.indices], x.indices))
    return _checked(Vector(x.dimension, x.values / H.diag))
