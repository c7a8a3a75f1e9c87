"""Frame-at-a-time load estimation over a recorded or live stream.

The estimator consumes one frame every 50 ms and emits one estimate per
ten frames (500 ms): causal low-pass, baseline differencing, per-sample
prediction, quantile-trimmed aggregation. The same object backs both the
offline sequence (estimate_sequence) and the real-time CLI replay, so
batch and stream outputs are identical by construction of the arithmetic,
not by luck.

Baseline policy: during each cycle the reference is the mean of the most
recent completed baseline window (the stand phase of the same cycle, per
the timer schedule). Until the first baseline window completes, a running
mean of everything seen so far stands in, so early estimates stay near
zero instead of swallowing body weight.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dsp
from .aggregate import Aggregator
from .core import CHANNEL_COUNT, PHASE_BASELINE, PhaseSchedule, PipelineConfig, SessionRecording


@dataclass(frozen=True)
class Estimate:
    t_ms: int
    load_kg: float
    window_min: float
    window_max: float
    phase: str

    def to_dict(self) -> dict:
        return {
            "t_ms": self.t_ms,
            "load_kg": self.load_kg,
            "window_min": self.window_min,
            "window_max": self.window_max,
            "phase": self.phase,
        }


class StreamEstimator:
    """Causal per-frame estimator; feed frames in time order."""

    def __init__(self, model, schedule: PhaseSchedule, cfg: PipelineConfig, skip_filter: bool = False):
        cfg.validate()
        self.model = model
        self.schedule = schedule
        self.cfg = cfg
        self.skip_filter = skip_filter
        self.coeffs = dsp.design_butterworth(cfg.cutoff_hz, cfg.sample_rate_hz)
        self._state: np.ndarray | None = None
        low, high = cfg.trim_quantiles
        self._agg = Aggregator(cfg.aggregation_count, low, high)
        self._running_sum = np.zeros(CHANNEL_COUNT)
        self._running_count = 0
        self._baseline: np.ndarray | None = None
        self._bw_window_ms = self._baseline_window_span()
        self._bw_phase: int | None = None
        self._bw_sum = np.zeros(CHANNEL_COUNT)
        self._bw_count = 0

    def _baseline_window_span(self) -> tuple[float, float]:
        phase_ms = self.schedule.phase_duration_ms
        w_ms = self.cfg.baseline_window_s * 1000.0
        start = (phase_ms - w_ms) / 2.0
        return start, start + w_ms

    def _filter_step(self, x: np.ndarray) -> np.ndarray:
        if self.skip_filter:
            return x
        c = self.coeffs
        if self._state is None:
            self._state = dsp._primed_state(c, x)
        s1, s2 = self._state
        y = c.b0 * x + s1
        self._state = np.stack([c.b1 * x - c.a1 * y + s2, c.b2 * x - c.a2 * y])
        return y

    def process_frame(self, t_ms: int, channels) -> Estimate | None:
        x = np.asarray(channels, dtype=np.float64)
        y = self._filter_step(x)

        phase_ms = self.schedule.phase_duration_ms
        phase_index = int(t_ms) // phase_ms
        kind = self.schedule.phases[phase_index % len(self.schedule.phases)]

        self._running_sum += y
        self._running_count += 1

        if kind == PHASE_BASELINE:
            offset = int(t_ms) - phase_index * phase_ms
            w0, w1 = self._bw_window_ms
            if w0 <= offset < w1:
                if self._bw_phase != phase_index:
                    self._bw_phase = phase_index
                    self._bw_sum = np.zeros_like(y)
                    self._bw_count = 0
                self._bw_sum = self._bw_sum + y
                self._bw_count += 1
            elif self._bw_phase == phase_index and offset >= w1 and self._bw_count > 0:
                self._baseline = self._bw_sum / self._bw_count
                self._bw_phase = None
        elif self._bw_phase is not None and self._bw_count > 0:
            # The beep arrived mid-window (jittered stream); close it out.
            self._baseline = self._bw_sum / self._bw_count
            self._bw_phase = None

        baseline = self._baseline
        if baseline is None:
            baseline = self._running_sum / self._running_count
        features = y - baseline
        pred = float(self.model.predict(features.reshape(1, -1))[0])
        emitted = self._agg.push_with_stats(pred)
        if emitted is None:
            return None
        estimate, w_min, w_max = emitted
        return Estimate(
            t_ms=int(t_ms), load_kg=estimate, window_min=w_min, window_max=w_max, phase=kind
        )


def estimate_sequence(
    rec: SessionRecording, model, cfg: PipelineConfig | None = None, skip_filter: bool = False
) -> list[Estimate]:
    """Offline replay: the exact estimate sequence a live run would emit."""
    cfg = cfg or PipelineConfig()
    estimator = StreamEstimator(model, rec.schedule, cfg, skip_filter=skip_filter)
    out = []
    for t, channels in zip(rec.timestamps_ms, rec.channels):
        est = estimator.process_frame(int(t), channels)
        if est is not None:
            out.append(est)
    return out
