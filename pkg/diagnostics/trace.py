"""Per-iteration telemetry rows and rate-fit results."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

TRACE_COLUMNS: Tuple[str, ...] = (
    "t",
    "f_individual",
    "f_averaged",
    "gap_individual",
    "gap_averaged",
    "alpha_t",
    "beta1_t",
    "beta2_t",
    "identity_residual",
    "lemma3_slack",
)

OPTIONAL_COLUMNS: Tuple[str, ...] = (
    "gap_individual",
    "gap_averaged",
    "beta2_t",
    "identity_residual",
    "lemma3_slack",
)


@dataclass(frozen=True)
class TraceRecord:
    """One row of a run trace; optional columns are None when not computed."""

    t: int
    f_individual: float
    f_averaged: float
    gap_individual: Optional[float] = None
    gap_averaged: Optional[float] = None
    alpha_t: float = 0.0
    beta1_t: float = 0.0
    beta2_t: Optional[float] = None
    identity_residual: Optional[float] = None
    lemma3_slack: Optional[float] = None

    def __post_init__(self):
        if self.t < 1:
            raise ValueError(f"trace step must be >= 1, got {self.t}")
        for item in fields(self):
            value = getattr(self, item.name)
            if item.name != "t" and value is not None and not math.isfinite(value):
                raise ValueError(f"trace column {item.name} is not finite at t={self.t}")

    def present_optionals(self) -> frozenset:
        return frozenset(name for name in OPTIONAL_COLUMNS if getattr(self, name) is not None)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class RateFit:
    """Least-squares line through (log t, log gap)."""

    slope: float
    intercept: float
    window: Tuple[int, int]
    r_squared: float
    points: int

    def within(self, low: float, high: float, min_r_squared: float = 0.0) -> bool:
        return low <= self.slope <= high and self.r_squared >= min_r_squared

    def as_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "window": list(self.window),
            "r_squared": self.r_squared,
            "points": self.points,
        }


def _reduce_column(rows: Sequence[TraceRecord], name: str, reducer: Callable) -> Optional[float]:
    values = [getattr(row, name) for row in rows]
    if any(value is None for value in values):
        return None
    return float(reducer(values))


def average_traces(traces: Sequence[Sequence[TraceRecord]]) -> List[TraceRecord]:
    """
    Step-wise mean of traces from repeated seeds.

    Objective and gap columns are averaged. Schedule columns come from the
    first trace, while the identity residual keeps its largest and the EMA
    slack its smallest value across the repeats.

    Raises:
        ValueError: For an empty list or traces of different lengths
    """
    if not traces:
        raise ValueError("no traces to average")
    length = len(traces[0])
    if any(len(trace) != length for trace in traces):
        raise ValueError("repeated traces differ in length")

    averaged = []
    for rows in zip(*traces):
        averaged.append(replace(
            rows[0],
            f_individual=_reduce_column(rows, "f_individual", np.mean),
            f_averaged=_reduce_column(rows, "f_averaged", np.mean),
            gap_individual=_reduce_column(rows, "gap_individual", np.mean),
            gap_averaged=_reduce_column(rows, "gap_averaged", np.mean),
            identity_residual=_reduce_column(rows, "identity_residual", max),
            lemma3_slack=_reduce_column(rows, "lemma3_slack", min),
        ))
    return averaged
