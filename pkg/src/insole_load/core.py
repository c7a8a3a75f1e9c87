"""Domain types, physical constants and pipeline configuration.

Everything downstream (ingest, dsp, regress, eval) shares the vocabulary
defined here: a Frame is one 20 Hz sample of 36 pressure channels, a
SessionRecording is one subject-session worth of frames plus the timer
schedule it was collected under, and a LabeledSample is one differential
feature vector with its load label.

Raw sensor units are abstract non-negative counts; no conversion to
physical force is attempted. The only fixed points are the channel count,
the nominal sampling rate and the full-scale ceiling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

CHANNEL_COUNT = 36
CHANNELS_PER_FOOT = 18
SAMPLE_RATE_HZ = 20.0
NOMINAL_DT_MS = 50
# Timestamp jitter beyond this is reported as a violation, not repaired.
JITTER_TOLERANCE_MS = 20

# Per-channel ceiling: 70 kg equivalent, digitised to 16-bit-style counts.
FULL_SCALE_KG = 70.0
FULL_SCALE_RAW = 65535.0
RAW_PER_KG = FULL_SCALE_RAW / FULL_SCALE_KG

# Load ladder used during collection: 2 kg to 10 kg in 0.5 kg steps.
LOAD_STEP_KG = 0.5
LOAD_MIN_KG = 2.0
LOAD_MAX_KG = 10.0
FULL_LADDER_KG = tuple(round(LOAD_MIN_KG + i * LOAD_STEP_KG, 1) for i in range(17))

PHASE_BASELINE = "baseline"
PHASE_LIFT = "lift"
PHASE_RETURN = "return"
PHASE_KINDS = (PHASE_BASELINE, PHASE_LIFT, PHASE_RETURN)


class InsoleLoadError(Exception):
    """Base for all package errors; exit_code drives the CLI."""

    exit_code = 3


class InputError(InsoleLoadError):
    """Malformed input, bad arguments, unsatisfiable configuration."""

    exit_code = 2


class ComputationError(InsoleLoadError):
    """A numerical procedure failed (divergence, degenerate data)."""

    exit_code = 3


class StreamIOError(InsoleLoadError):
    """Runtime I/O failure (lost peer, broken pipe)."""

    exit_code = 4


@dataclass(frozen=True)
class Frame:
    """One sensor sample: millisecond timestamp plus 36 channel pressures.

    Channel order is fixed: left insole channels 0-17, right insole 18-35.
    """

    timestamp_ms: int
    channels: np.ndarray

    def __post_init__(self):
        ch = np.asarray(self.channels, dtype=np.float64)
        object.__setattr__(self, "channels", ch)


@dataclass(frozen=True)
class PhaseSchedule:
    """Timer schedule for one load cycle: baseline, lift, return.

    Every phase boundary falls on schedule start + k * phase_duration.
    """

    phase_duration_s: float = 15.0
    phases: tuple[str, ...] = PHASE_KINDS

    @property
    def phase_duration_ms(self) -> int:
        return int(round(self.phase_duration_s * 1000))

    @property
    def cycle_duration_ms(self) -> int:
        return self.phase_duration_ms * len(self.phases)

    def span_ms(self, n_cycles: int) -> int:
        """Total scheduled span for n_cycles full cycles."""
        return self.cycle_duration_ms * n_cycles


@dataclass
class SessionRecording:
    """Time-ordered frames for one subject-session, with its schedule.

    Frames are stored columnar (timestamps_ms, channels) for speed; the
    `frames` property yields Frame values for sample-at-a-time consumers.
    """

    subject_id: str
    session_index: int
    timestamps_ms: np.ndarray  # (n,) int64, strictly increasing
    channels: np.ndarray  # (n, 36) float64, raw units
    schedule: PhaseSchedule
    load_ladder: tuple[float, ...]

    def __post_init__(self):
        self.timestamps_ms = np.asarray(self.timestamps_ms, dtype=np.int64)
        self.channels = np.asarray(self.channels, dtype=np.float64)
        self.load_ladder = tuple(float(v) for v in self.load_ladder)

    def __len__(self) -> int:
        return len(self.timestamps_ms)

    @property
    def frames(self):
        for t, ch in zip(self.timestamps_ms, self.channels):
            yield Frame(int(t), ch)


@dataclass
class LabeledSample:
    """One differential feature vector (lift minus baseline) with its label.

    label_kg is None for baseline-only samples.
    """

    features: np.ndarray  # (36,) raw differential units
    label_kg: float | None
    subject_id: str
    session_index: int
    frame_timestamp_ms: int


@dataclass
class PipelineConfig:
    """Knobs for the preprocessing and aggregation pipeline."""

    sample_rate_hz: float = SAMPLE_RATE_HZ
    cutoff_hz: float = 0.3
    filter_order: int = 2
    baseline_window_s: float = 5.0
    lift_window_s: float = 10.0
    aggregation_count: int = 10
    trim_quantiles: tuple[float, float] = (0.1, 0.9)
    unseen_loads_kg: tuple[float, ...] = (3.0, 6.0, 9.0)
    split_seed: int = 7

    def validate(self) -> None:
        if not 0.0 < self.cutoff_hz < self.sample_rate_hz / 2.0:
            raise InputError(
                f"cutoff_hz must lie in (0, {self.sample_rate_hz / 2.0}), "
                f"got {self.cutoff_hz}"
            )
        if self.filter_order != 2:
            raise InputError(f"filter_order must be 2, got {self.filter_order}")
        low, high = self.trim_quantiles
        if not 0.0 <= low < high <= 1.0:
            raise InputError(f"trim quantiles must satisfy 0 <= low < high <= 1, got {low}, {high}")
        if self.aggregation_count < 1:
            raise InputError("aggregation_count must be >= 1")


def valid_ladder(ladder) -> bool:
    """True iff every value sits on the 2..10 kg half-kilogram grid and
    consecutive entries increase by exactly one step."""
    vals = [float(v) for v in ladder]
    if not vals:
        return False
    for v in vals:
        steps = (v - LOAD_MIN_KG) / LOAD_STEP_KG
        on_grid = math.isclose(steps, round(steps), abs_tol=1e-9)
        if not on_grid or v < LOAD_MIN_KG - 1e-9 or v > LOAD_MAX_KG + 1e-9:
            return False
    if len(vals) > 1:
        return bool(np.all(np.abs(np.diff(vals) - LOAD_STEP_KG) < 1e-9))
    return True


def validate_session(rec: SessionRecording, full_scale_raw: float = FULL_SCALE_RAW) -> list[str]:
    """Check every SessionRecording invariant; return violations, not raise.

    Each violation is "Rule@frame k" for frame-level rules or a bare rule
    name for session-level ones. An empty list means the recording is valid.
    """
    violations: list[str] = []
    t = rec.timestamps_ms
    ch = rec.channels

    if ch.ndim != 2 or ch.shape[1] != CHANNEL_COUNT:
        # Columnar storage forces a uniform width; a ragged source is
        # reported against the first frame.
        violations.append("ChannelCount@frame 0")
        return violations
    if len(t) != len(ch):
        violations.append("FrameAlignment")
        return violations

    finite = np.isfinite(ch).all(axis=1)
    nonneg = (ch >= 0.0).all(axis=1)
    in_scale = (ch <= full_scale_raw).all(axis=1)
    for k in np.nonzero(~(finite & nonneg & in_scale))[0]:
        violations.append(f"ChannelRange@frame {k}")

    if len(t) > 1:
        dt = np.diff(t)
        for k in np.nonzero(dt <= 0)[0]:
            violations.append(f"TimestampOrder@frame {k + 1}")
        jitter_bad = (dt > 0) & (np.abs(dt - NOMINAL_DT_MS) > JITTER_TOLERANCE_MS)
        for k in np.nonzero(jitter_bad)[0]:
            violations.append(f"TimestampJitter@frame {k + 1}")

    if not valid_ladder(rec.load_ladder):
        violations.append("LoadLadder")

    return violations
