"""Low-pass filtering and baseline-differential feature extraction.

Lifting is quasi-static at 20 Hz, so everything above a fraction of a
hertz is noise or transient motion. A second-order Butterworth low-pass
(default 0.3 Hz cutoff) keeps the slow pressure component. Filtering is
causal (forward-only) so the exact same filter can run on a live stream;
the state is primed with the first sample so a constant input produces
that constant from sample 0 instead of a start-up transient.

Features are differential: per-channel lift-phase pressure minus the mean
of the same cycle's no-load baseline window. That cancels body weight and
shoe fit, leaving the load-induced redistribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .core import InputError


class InvalidCutoff(InputError):
    pass


class EmptyWindow(InputError):
    pass


@dataclass(frozen=True)
class BiquadCoefficients:
    """Second-order section, a0 normalised to 1.

    y[n] = b0 x[n] + b1 x[n-1] + b2 x[n-2] - a1 y[n-1] - a2 y[n-2]
    """

    b0: float
    b1: float
    b2: float
    a1: float
    a2: float

    @property
    def b(self) -> np.ndarray:
        return np.array([self.b0, self.b1, self.b2])

    @property
    def a(self) -> np.ndarray:
        return np.array([1.0, self.a1, self.a2])

    def dc_gain(self) -> float:
        return (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2)

    def poles(self) -> np.ndarray:
        return np.roots([1.0, self.a1, self.a2])

    def is_stable(self) -> bool:
        return bool(np.all(np.abs(self.poles()) < 1.0))


def design_butterworth(cutoff_hz: float, sample_rate_hz: float) -> BiquadCoefficients:
    """Second-order Butterworth low-pass via the bilinear transform.

    The analog prototype H(s) = 1 / (s^2 + sqrt(2) s + 1) is mapped with
    s = (1/K)(z-1)/(z+1), K = tan(pi fc / fs), which prewarps the cutoff
    so the digital -3 dB point lands exactly on cutoff_hz.
    """
    if not 0.0 < cutoff_hz < sample_rate_hz / 2.0:
        raise InvalidCutoff(
            f"cutoff must lie strictly between 0 and Nyquist "
            f"({sample_rate_hz / 2.0} Hz), got {cutoff_hz}"
        )
    k = math.tan(math.pi * cutoff_hz / sample_rate_hz)
    k2 = k * k
    norm = 1.0 / (1.0 + math.sqrt(2.0) * k + k2)
    b0 = k2 * norm
    return BiquadCoefficients(
        b0=b0,
        b1=2.0 * b0,
        b2=b0,
        a1=2.0 * (k2 - 1.0) * norm,
        a2=(1.0 - math.sqrt(2.0) * k + k2) * norm,
    )


def frequency_response(coeffs: BiquadCoefficients, freq_hz, sample_rate_hz: float):
    """Complex response H(e^{j 2 pi f / fs}) at the given frequencies."""
    w = 2.0 * np.pi * np.asarray(freq_hz, dtype=np.float64) / sample_rate_hz
    z = np.exp(1j * w)
    num = coeffs.b0 + coeffs.b1 / z + coeffs.b2 / z**2
    den = 1.0 + coeffs.a1 / z + coeffs.a2 / z**2
    return num / den


def _primed_state(coeffs: BiquadCoefficients, x0) -> np.ndarray:
    """Direct-form-II-transposed state for which input x0 is a fixed point.

    Steady state with x = y = c: z2 = (b2 - a2) c, z1 = (b1 + b2 - a1 - a2) c.
    """
    c = np.asarray(x0, dtype=np.float64)
    z1 = (coeffs.b1 + coeffs.b2 - coeffs.a1 - coeffs.a2) * c
    z2 = (coeffs.b2 - coeffs.a2) * c
    return np.stack([z1, z2])


def filter_channel(signal, coeffs: BiquadCoefficients) -> np.ndarray:
    """Causal low-pass of one channel; output length equals input length."""
    x = np.asarray(signal, dtype=np.float64)
    if x.size == 0:
        return x.copy()
    y, _ = lfilter(coeffs.b, coeffs.a, x, zi=_primed_state(coeffs, x[0]))
    return y


def filter_frames(channels: np.ndarray, coeffs: BiquadCoefficients) -> np.ndarray:
    """Filter an (n, 36) frame block, each channel independently."""
    x = np.asarray(channels, dtype=np.float64)
    if x.shape[0] == 0:
        return x.copy()
    zi = _primed_state(coeffs, x[0])  # (2, 36)
    y, _ = lfilter(coeffs.b, coeffs.a, x, axis=0, zi=zi)
    return y


def baseline_mean(baseline_frames: np.ndarray) -> np.ndarray:
    """Per-channel arithmetic mean over the baseline window."""
    frames = np.asarray(baseline_frames, dtype=np.float64)
    if frames.size == 0:
        raise EmptyWindow("baseline window is empty")
    return frames.mean(axis=0)


def differential_features(lift_frames: np.ndarray, baseline: np.ndarray) -> np.ndarray:
    """Lift-phase channels minus the cycle's baseline mean, one row per frame.

    Values may be negative: lifting redistributes pressure, it does not just
    add it.
    """
    lift = np.asarray(lift_frames, dtype=np.float64)
    base = np.asarray(baseline, dtype=np.float64)
    return lift - base[np.newaxis, :]
