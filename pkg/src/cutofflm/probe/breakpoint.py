"""Trend-reversal detection by two-segment piecewise-linear least squares.

Every admissible breakpoint (at least two points on each side) gets two
independently fitted lines; the breakpoint minimizing total squared error
wins, ties broken toward the earliest candidate. The argmin is invariant
under positive scaling and constant shifts of the series, so it does not
depend on how relative perplexity was normalized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .series import PerplexitySeries, quarter_label

MIN_POINTS = 6


@dataclass(frozen=True)
class CutoffEstimate:
    """Fitted reversal point: the last index of the descending/pre segment."""

    breakpoint_index: int | None
    breakpoint_label: str | None
    pre_slope: float | None
    post_slope: float | None
    sse: float | None
    relative_gap: float | None  # mean(post) - mean(pre)
    degenerate: bool = False

    def to_json(self) -> dict:
        return {
            "breakpoint_index": self.breakpoint_index,
            "breakpoint_quarter": self.breakpoint_label,
            "pre_slope": self.pre_slope,
            "post_slope": self.post_slope,
            "sse": self.sse,
            "relative_gap": self.relative_gap,
            "degenerate": self.degenerate,
        }


def _line_sse(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """(slope, SSE) of the least-squares line through (x, y)."""
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return float(slope), float(resid @ resid)


def fit_breakpoint(x: np.ndarray, y: np.ndarray) -> CutoffEstimate:
    """Core fit on (position, value) arrays; positions may have calendar gaps."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = len(x)
    if n != len(y):
        raise ValueError("x and y must have equal length")
    if n < MIN_POINTS:
        raise ValueError(f"need at least {MIN_POINTS} points, got {n}")
    if float(y.max() - y.min()) < 1e-12:
        return CutoffEstimate(None, None, None, None, None, None, degenerate=True)

    candidates: list[tuple[float, int, float, float]] = []  # (sse, split, pre/post slopes)
    for split in range(1, n - 2):
        pre_slope, pre_sse = _line_sse(x[: split + 1], y[: split + 1])
        post_slope, post_sse = _line_sse(x[split + 1 :], y[split + 1 :])
        candidates.append((pre_sse + post_sse, split, pre_slope, post_slope))

    # Ties break toward the earliest split. "Tie" is judged at a relative
    # epsilon so exact decompositions are not ranked by rounding noise; the
    # epsilon scales with the data, keeping the argmin invariant under
    # positive scaling and constant shifts.
    _, single_sse = _line_sse(x, y)
    eps = 1e-9 * single_sse + 1e-24 * n
    best_sse = min(c[0] for c in candidates)
    sse, split, pre_slope, post_slope = next(
        c for c in candidates if c[0] <= best_sse + eps
    )
    gap = float(y[split + 1 :].mean() - y[: split + 1].mean())
    index = int(round(x[split]))
    return CutoffEstimate(
        breakpoint_index=index,
        breakpoint_label=quarter_label(index),
        pre_slope=pre_slope,
        post_slope=post_slope,
        sse=sse,
        relative_gap=gap,
    )


def detect_cutoff(series: PerplexitySeries) -> CutoffEstimate:
    """Detect the effective knowledge cutoff of a relative-perplexity series.

    Absent buckets are skipped while indices remain calendar-true, so fitted
    slopes stay in per-quarter units.
    """
    points = series.present_points()
    if len(points) < MIN_POINTS:
        raise ValueError(
            f"series has {len(points)} present buckets; need at least {MIN_POINTS}"
        )
    x = np.array([p[0] for p in points], dtype=np.float64)
    y = np.array([p[1] for p in points], dtype=np.float64)
    return fit_breakpoint(x, y)
