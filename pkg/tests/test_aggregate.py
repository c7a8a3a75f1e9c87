import numpy as np
import pytest

from insole_load.aggregate import (
    Aggregator,
    EmptyInput,
    InvalidBounds,
    NonFinitePrediction,
    trimmed_mean,
)


def oracle_trimmed_mean(values, q_low, q_high):
    """Sort, drop values outside the interpolated quantiles, average.

    Mirrors the flank rule for the corner where both quantiles fall in one
    gap and the survivor set would be empty.
    """
    vals = np.sort(np.asarray(values, dtype=float))
    lo = np.quantile(vals, q_low, method="linear")
    hi = np.quantile(vals, q_high, method="linear")
    kept = [v for v in vals if lo <= v <= hi]
    if not kept:
        k = int(np.searchsorted(vals, lo))
        kept = list(vals[max(0, k - 1) : k + 1])
    return sum(kept) / len(kept)


class TestTrimmedMean:
    def test_full_bounds_is_plain_mean(self, rng):
        vals = rng.normal(size=17)
        assert trimmed_mean(vals, 0.0, 1.0) == pytest.approx(vals.mean(), abs=1e-12)

    def test_one_to_ten_example(self):
        # interpolated quantiles: q0.1 = 1.9, q0.9 = 9.1 -> keep 2..9
        assert trimmed_mean(range(1, 11), 0.1, 0.9) == pytest.approx(5.5)

    def test_single_value(self):
        assert trimmed_mean([7.25], 0.1, 0.9) == 7.25

    def test_outlier_window_example(self):
        window = [4.0] * 9 + [400.0]
        assert trimmed_mean(window, 0.1, 0.9) == pytest.approx(4.0)

    def test_matches_oracle_on_random_windows(self, rng):
        for _ in range(300):
            n = int(rng.integers(1, 30))
            vals = rng.normal(size=n) * 10
            lo = float(rng.uniform(0.0, 0.45))
            hi = float(rng.uniform(0.55, 1.0))
            assert trimmed_mean(vals, lo, hi) == pytest.approx(
                oracle_trimmed_mean(vals, lo, hi), abs=1e-10
            )

    def test_errors(self):
        with pytest.raises(EmptyInput):
            trimmed_mean([], 0.1, 0.9)
        with pytest.raises(InvalidBounds):
            trimmed_mean([1.0], 0.9, 0.1)
        with pytest.raises(InvalidBounds):
            trimmed_mean([1.0], -0.1, 0.9)


class TestAggregator:
    def test_emits_exactly_on_capacity(self):
        agg = Aggregator(10, 0.1, 0.9)
        for _ in range(9):
            assert agg.push(5.0) is None
        assert agg.push(5.0) == pytest.approx(5.0)
        assert len(agg) == 0  # buffer cleared after emit

    def test_nine_pushes_never_emit(self):
        agg = Aggregator(10, 0.1, 0.9)
        results = [agg.push(float(i)) for i in range(9)]
        assert results == [None] * 9

    def test_outlier_trimmed_window(self):
        agg = Aggregator(10, 0.1, 0.9)
        out = [agg.push(v) for v in [4.0] * 9 + [400.0]]
        assert out[:-1] == [None] * 9
        assert out[-1] == pytest.approx(4.0)

    def test_non_finite_rejected(self):
        agg = Aggregator(10, 0.1, 0.9)
        with pytest.raises(NonFinitePrediction):
            agg.push(float("nan"))

    def test_invalid_construction(self):
        with pytest.raises(InvalidBounds):
            Aggregator(0, 0.1, 0.9)
        with pytest.raises(InvalidBounds):
            Aggregator(10, 0.5, 0.5)

    def test_push_with_stats_reports_pretrim_extremes(self):
        agg = Aggregator(10, 0.1, 0.9)
        window = [4.0] * 9 + [400.0]
        result = None
        for v in window:
            result = agg.push_with_stats(v)
        estimate, w_min, w_max = result
        assert estimate == pytest.approx(4.0)
        assert w_min == 4.0 and w_max == 400.0


class TestWindowProperties:
    def test_permutation_invariance_bounds_and_shift(self, rng):
        for _ in range(1000):
            window = rng.normal(loc=5.0, scale=2.0, size=10)
            lo, hi = 0.1, 0.9
            base = trimmed_mean(window, lo, hi)
            shuffled = rng.permutation(window)
            assert trimmed_mean(shuffled, lo, hi) == pytest.approx(base, abs=1e-10)
            assert window.min() - 1e-12 <= base <= window.max() + 1e-12
            delta = float(rng.normal())
            assert trimmed_mean(window + delta, lo, hi) == pytest.approx(
                base + delta, abs=1e-9
            )
