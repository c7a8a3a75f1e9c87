"""Session file parsing, phase segmentation and window extraction.

A session lives in two files: a JSON manifest (subject, session index,
schedule parameters, load ladder, frame file path) and a frame CSV with
header ``t_ms,ch00,...,ch35``. Sources with a different column naming can
attach a column-map file; the map also declares whether the stored values
are raw or already low-pass filtered.

Segmentation is purely timer-driven: the beep schedule divides the stream
into baseline / lift / return phases of equal duration, one triple per
ladder load. Windows are taken from the centre of each phase so the
samples sit well clear of the transitions.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dsp
from .core import (
    CHANNEL_COUNT,
    InputError,
    NOMINAL_DT_MS,
    PHASE_BASELINE,
    PHASE_KINDS,
    PHASE_LIFT,
    PhaseSchedule,
    PipelineConfig,
    SessionRecording,
    validate_session,
)
from .dataset import Dataset

CANONICAL_TIME_COL = "t_ms"
CANONICAL_CHANNEL_COLS = [f"ch{i:02d}" for i in range(CHANNEL_COUNT)]


class ParseError(InputError):
    pass


class ValidationError(InputError):
    pass


class ScheduleMismatch(InputError):
    pass


class WindowTooLarge(InputError):
    pass


@dataclass(frozen=True)
class ColumnMap:
    """Adapter from a source CSV schema onto the canonical columns."""

    time_col: str = CANONICAL_TIME_COL
    channel_cols: tuple[str, ...] = tuple(CANONICAL_CHANNEL_COLS)
    prefiltered: bool = False

    @classmethod
    def load(cls, path) -> "ColumnMap":
        with Path(path).open() as fh:
            raw = json.load(fh)
        channels = raw.get("channels", CANONICAL_CHANNEL_COLS)
        if len(channels) != CHANNEL_COUNT:
            raise ParseError(f"{path}: column map must name {CHANNEL_COUNT} channels")
        return cls(
            time_col=raw.get("t_ms", CANONICAL_TIME_COL),
            channel_cols=tuple(channels),
            prefiltered=bool(raw.get("prefiltered", False)),
        )


@dataclass
class SessionManifest:
    subject_id: str
    session_index: int
    schedule: PhaseSchedule
    loads_kg: tuple[float, ...]
    frames_csv: Path
    column_map: ColumnMap = field(default_factory=ColumnMap)
    body_mass_kg: float | None = None
    shoe_size_eu: float | None = None

    @classmethod
    def load(cls, path) -> "SessionManifest":
        path = Path(path)
        try:
            with path.open() as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ParseError(f"{path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
        missing = {"subject_id", "session_index", "phase_duration_s", "loads_kg", "frames_csv"} - raw.keys()
        if missing:
            raise ParseError(f"{path}: manifest missing keys {sorted(missing)}")
        frames_csv = Path(raw["frames_csv"])
        if not frames_csv.is_absolute():
            frames_csv = path.parent / frames_csv
        column_map = ColumnMap()
        if raw.get("column_map"):
            map_path = Path(raw["column_map"])
            if not map_path.is_absolute():
                map_path = path.parent / map_path
            column_map = ColumnMap.load(map_path)
        return cls(
            subject_id=str(raw["subject_id"]),
            session_index=int(raw["session_index"]),
            schedule=PhaseSchedule(phase_duration_s=float(raw["phase_duration_s"])),
            loads_kg=tuple(float(v) for v in raw["loads_kg"]),
            frames_csv=frames_csv,
            column_map=column_map,
            body_mass_kg=raw.get("body_mass_kg"),
            shoe_size_eu=raw.get("shoe_size_eu"),
        )


def _read_frame_csv(path: Path, cmap: ColumnMap) -> tuple[np.ndarray, np.ndarray]:
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}:1: frame file is empty") from None
        header = [h.strip() for h in header]
        try:
            t_idx = header.index(cmap.time_col)
            ch_idx = [header.index(c) for c in cmap.channel_cols]
        except ValueError as exc:
            raise ParseError(f"{path}:1: {exc}") from None
        times, channels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                times.append(int(float(row[t_idx])))
                channels.append([float(row[i]) for i in ch_idx])
            except (ValueError, IndexError) as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
    if not times:
        raise ParseError(f"{path}: frame file has a header but no frames")
    return np.array(times, dtype=np.int64), np.array(channels, dtype=np.float64)


def parse_session(manifest: SessionManifest | str | Path) -> SessionRecording:
    """Load and validate one session; raises on any invariant breach."""
    if not isinstance(manifest, SessionManifest):
        manifest = SessionManifest.load(manifest)
    times, channels = _read_frame_csv(manifest.frames_csv, manifest.column_map)
    rec = SessionRecording(
        subject_id=manifest.subject_id,
        session_index=manifest.session_index,
        timestamps_ms=times,
        channels=channels,
        schedule=manifest.schedule,
        load_ladder=manifest.loads_kg,
    )
    violations = validate_session(rec)
    if violations:
        shown = ", ".join(violations[:5])
        more = f" (+{len(violations) - 5} more)" if len(violations) > 5 else ""
        raise ValidationError(f"{manifest.frames_csv}: {shown}{more}")
    return rec


@dataclass(frozen=True)
class PhaseSegment:
    kind: str  # baseline | lift | return
    load_kg: float
    start: int  # first frame index (inclusive)
    stop: int  # past-the-end frame index

    def __len__(self) -> int:
        return self.stop - self.start


def segment_phases(rec: SessionRecording) -> list[PhaseSegment]:
    """Split the recording into timer-aligned phase ranges.

    Ranges are contiguous, non-overlapping and cover the scheduled span;
    every segment of a cycle carries that cycle's ladder load (baseline
    segments carry the upcoming load so windows can be paired later).
    """
    schedule = rec.schedule
    n_cycles = len(rec.load_ladder)
    phase_ms = schedule.phase_duration_ms
    span_ms = schedule.span_ms(n_cycles)
    if len(rec) == 0 or rec.timestamps_ms[-1] + NOMINAL_DT_MS < span_ms:
        have = 0 if len(rec) == 0 else int(rec.timestamps_ms[-1]) + NOMINAL_DT_MS
        raise ScheduleMismatch(
            f"recording covers {have} ms but the schedule requires {span_ms} ms"
        )
    n_phases = len(schedule.phases)
    boundaries = np.arange(n_cycles * n_phases + 1, dtype=np.int64) * phase_ms
    cuts = np.searchsorted(rec.timestamps_ms, boundaries, side="left")
    segments = []
    for i in range(n_cycles * n_phases):
        cycle, phase = divmod(i, n_phases)
        segments.append(
            PhaseSegment(
                kind=schedule.phases[phase],
                load_kg=rec.load_ladder[cycle],
                start=int(cuts[i]),
                stop=int(cuts[i + 1]),
            )
        )
    return segments


@dataclass
class CycleWindows:
    """Centre windows of one cycle's baseline and lift phases, paired."""

    load_kg: float
    baseline: np.ndarray  # (Wb, 36)
    lift: np.ndarray  # (Wl, 36)
    lift_t_ms: np.ndarray  # (Wl,)


def _centered(seg: PhaseSegment, want: int, what: str) -> tuple[int, int]:
    n = len(seg)
    if n < want:
        raise WindowTooLarge(
            f"{what} window needs {want} frames but the {seg.kind} phase "
            f"at {seg.load_kg} kg has only {n}"
        )
    start = seg.start + (n - want) // 2
    return start, start + want


def extract_windows(
    rec: SessionRecording, segments: list[PhaseSegment], cfg: PipelineConfig
) -> list[CycleWindows]:
    """Pick the centred baseline/lift windows of every cycle.

    The baseline window always comes from the stand phase immediately
    preceding the lift; cross-cycle baselines are never used.
    """
    wb = int(round(cfg.baseline_window_s * cfg.sample_rate_hz))
    wl = int(round(cfg.lift_window_s * cfg.sample_rate_hz))
    cycles = []
    n_phases = len(rec.schedule.phases)
    for c in range(len(segments) // n_phases):
        chunk = segments[c * n_phases : (c + 1) * n_phases]
        phase_map = {s.kind: s for s in chunk}
        if PHASE_BASELINE not in phase_map or PHASE_LIFT not in phase_map:
            raise ScheduleMismatch(f"cycle {c} lacks a baseline/lift pair")
        b0, b1 = _centered(phase_map[PHASE_BASELINE], wb, "baseline")
        l0, l1 = _centered(phase_map[PHASE_LIFT], wl, "lift")
        cycles.append(
            CycleWindows(
                load_kg=phase_map[PHASE_LIFT].load_kg,
                baseline=rec.channels[b0:b1],
                lift=rec.channels[l0:l1],
                lift_t_ms=rec.timestamps_ms[l0:l1],
            )
        )
    return cycles


def extract_labeled_samples(
    rec: SessionRecording, cfg: PipelineConfig, skip_filter: bool = False
) -> Dataset:
    """Full per-session pipeline: filter, segment, window, difference.

    Filtering runs over the whole session before segmentation (the same
    causal filter a live stream would apply). skip_filter passes stored
    values through untouched, for sources that are already filtered.
    """
    cfg.validate()
    if skip_filter:
        filtered = rec.channels
    else:
        coeffs = dsp.design_butterworth(cfg.cutoff_hz, cfg.sample_rate_hz)
        filtered = dsp.filter_frames(rec.channels, coeffs)
    work = SessionRecording(
        subject_id=rec.subject_id,
        session_index=rec.session_index,
        timestamps_ms=rec.timestamps_ms,
        channels=filtered,
        schedule=rec.schedule,
        load_ladder=rec.load_ladder,
    )
    segments = segment_phases(work)
    cycles = extract_windows(work, segments, cfg)
    feats, labels, times = [], [], []
    for cyc in cycles:
        base = dsp.baseline_mean(cyc.baseline)
        feats.append(dsp.differential_features(cyc.lift, base))
        labels.append(np.full(len(cyc.lift), cyc.load_kg))
        times.append(cyc.lift_t_ms)
    n = sum(len(f) for f in feats)
    return Dataset(
        features=np.concatenate(feats),
        labels_kg=np.concatenate(labels),
        subject_ids=np.array([rec.subject_id] * n, dtype=object),
        session_indices=np.full(n, rec.session_index, dtype=np.int64),
        timestamps_ms=np.concatenate(times),
    )
