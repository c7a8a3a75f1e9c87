"""Temporal aggregation: ten raw predictions in, one trimmed estimate out.

The regressors predict per sample (every 50 ms); a tumbling window of ten
predictions is reduced to a single stabilised output every 500 ms. The
reduction is a quantile-trimmed mean: values outside the empirical
[q_low, q_high] quantiles are discarded, which keeps one wild prediction
from reaching whatever consumes the estimate.
"""

from __future__ import annotations

import math

import numpy as np

from .core import InputError


class EmptyInput(InputError):
    pass


class InvalidBounds(InputError):
    pass


class NonFinitePrediction(InputError):
    pass


def trimmed_mean(values, q_low: float, q_high: float) -> float:
    """Mean of the values inside the interpolated quantile bounds.

    Values exactly on a bound are retained, so the survivor set is never
    empty and bounds (0, 1) reduce to the plain mean.
    """
    vals = np.asarray(values, dtype=np.float64)
    if vals.size == 0:
        raise EmptyInput("trimmed_mean of zero values")
    if not 0.0 <= q_low < q_high <= 1.0:
        raise InvalidBounds(f"need 0 <= q_low < q_high <= 1, got ({q_low}, {q_high})")
    lo = np.quantile(vals, q_low)
    hi = np.quantile(vals, q_high)
    kept = vals[(vals >= lo) & (vals <= hi)]
    if kept.size == 0:
        # Narrow bounds can land both quantiles strictly inside one gap
        # between adjacent order statistics; fall back to those two flanks.
        ordered = np.sort(vals)
        k = int(np.searchsorted(ordered, lo))
        kept = ordered[max(0, k - 1) : k + 1]
    return float(kept.mean())


class Aggregator:
    """Tumbling-window trimmed-mean reducer.

    push() buffers predictions and emits exactly when the buffer reaches
    capacity, then clears; partial buffers never emit.
    """

    def __init__(self, capacity: int = 10, q_low: float = 0.1, q_high: float = 0.9):
        if capacity < 1:
            raise InvalidBounds(f"capacity must be >= 1, got {capacity}")
        if not 0.0 <= q_low < q_high <= 1.0:
            raise InvalidBounds(f"need 0 <= q_low < q_high <= 1, got ({q_low}, {q_high})")
        self.capacity = capacity
        self.q_low = q_low
        self.q_high = q_high
        self._buffer: list[float] = []

    def __len__(self) -> int:
        return len(self._buffer)

    def push(self, pred: float) -> float | None:
        """Add one prediction; returns the window estimate on the filling push."""
        pred = float(pred)
        if not math.isfinite(pred):
            raise NonFinitePrediction(f"prediction is not finite: {pred}")
        self._buffer.append(pred)
        if len(self._buffer) < self.capacity:
            return None
        window = self._buffer
        self._buffer = []
        return trimmed_mean(window, self.q_low, self.q_high)

    def push_with_stats(self, pred: float) -> tuple[float, float, float] | None:
        """Like push(), but also returns the pre-trim window min and max."""
        window = list(self._buffer)
        estimate = self.push(pred)
        if estimate is None:
            return None
        window.append(float(pred))
        return estimate, min(window), max(window)

    def reset(self) -> None:
        self._buffer = []
