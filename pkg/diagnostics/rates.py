"""Empirical convergence rates from log–log regressions of the optimality gap."""
from __future__ import annotations

import math
from typing import Optional, Sequence, Tuple

import numpy as np

from diagnostics.monitors import DiagnosticsError
from diagnostics.trace import RateFit, TraceRecord

MIN_FIT_POINTS = 20
EXPECTED_SLOPE = (-0.65, -0.35)
# A slope only counts as a rate when the log-log line explains the data
MIN_R_SQUARED = 0.95

_GAP_COLUMNS = {
    "individual": "gap_individual",
    "averaged": "gap_averaged",
}


def default_window(T: int) -> Tuple[int, int]:
    """[⌈0.01T⌉, ⌊0.95T⌋]: skip the transient and the last 5% of the run."""
    return max(1, math.ceil(0.01 * T)), math.floor(0.95 * T)


def fit_power_law(ts: Sequence[float], gaps: Sequence[float]) -> Tuple[float, float, float]:
    """Slope, intercept and r² of log gap = intercept + slope · log t."""
    x = np.log(np.asarray(ts, dtype=np.float64))
    y = np.log(np.asarray(gaps, dtype=np.float64))
    slope, intercept = np.polyfit(x, y, 1)
    residual = y - (intercept + slope * x)
    total = float(np.sum((y - np.mean(y)) ** 2))
    r_squared = 1.0 if total == 0.0 else 1.0 - float(np.sum(residual ** 2)) / total
    return float(slope), float(intercept), r_squared


def fit_rate(
    trace: Sequence[TraceRecord],
    quantity: str = "individual",
    window: Optional[Tuple[int, int]] = None,
) -> RateFit:
    """
    Fit gapₜ ≈ C·t^slope over the window.

    Args:
        trace: Run trace with gap columns filled in
        quantity: ``individual`` (last iterate) or ``averaged``
        window: Inclusive (t_lo, t_hi); defaults to ``default_window`` of the trace length

    Raises:
        DiagnosticsError: If gaps are missing or non-positive, or fewer than 20 points remain
    """
    if quantity not in _GAP_COLUMNS:
        raise DiagnosticsError(f"unknown gap quantity {quantity!r}; use individual or averaged")
    if not trace:
        raise DiagnosticsError("cannot fit a rate to an empty trace")
    column = _GAP_COLUMNS[quantity]
    low, high = window if window is not None else default_window(trace[-1].t)

    ts, gaps = [], []
    for record in trace:
        if not low <= record.t <= high:
            continue
        gap = getattr(record, column)
        if gap is None:
            raise DiagnosticsError(f"trace has no {column} at t={record.t}; run with a known f*")
        if gap <= 0.0:
            raise DiagnosticsError(f"{column} is {gap!r} at t={record.t}; log-fit needs positive gaps")
        ts.append(record.t)
        gaps.append(gap)

    if len(ts) < MIN_FIT_POINTS:
        raise DiagnosticsError(
            f"rate fit needs at least {MIN_FIT_POINTS} points in window [{low}, {high}], got {len(ts)}"
        )
    slope, intercept, r_squared = fit_power_law(ts, gaps)
    return RateFit(
        slope=slope,
        intercept=intercept,
        window=(low, high),
        r_squared=r_squared,
        points=len(ts),
    )
