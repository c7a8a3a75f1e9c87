"""Synthetic session generator with known ground truth.

Generated pressure is body-weight offset plus, during lift phases, a
per-channel load response, plus optional white noise and linear drift.
Because the generating function is known exactly, these sessions act as
the oracle for the whole pipeline: after filter settling, the extracted
differential features must equal the planted load response.

The generator writes the same CSV/manifest format `ingest` reads, so the
full parse-filter-segment-difference path is exercised end to end.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (
    CHANNEL_COUNT,
    FULL_SCALE_RAW,
    InputError,
    LOAD_MAX_KG,
    LOAD_STEP_KG,
    NOMINAL_DT_MS,
    PHASE_LIFT,
    PhaseSchedule,
    RAW_PER_KG,
    SessionRecording,
)
from .ingest import CANONICAL_CHANNEL_COLS, CANONICAL_TIME_COL

# Per-foot channel layout used by the built-in archetypes:
# 0-2 toes, 3-7 metatarsal heads, 8-11 arch/midfoot, 12-17 heel.
_BW_PATTERN = np.array(
    # Standing weight concentrates under heel and metatarsal heads.
    [1.0, 0.8, 0.6, 3.0, 3.5, 3.2, 2.8, 2.2, 1.2, 1.5, 1.8, 1.4, 5.5, 6.5, 6.0, 5.0, 4.5, 3.5]
)

_LOAD_SHIFT = np.array(
    # Holding a box in front pitches the wearer forward: metatarsal and toe
    # channels gain, heel channels shed. This is the zero-sum moment part
    # of the response; the net weight transfer is added separately.
    [0.06, 0.08, 0.05, 0.30, 0.42, 0.48, 0.36, 0.22, 0.03, 0.02, 0.01, 0.0,
     -0.26, -0.30, -0.28, -0.24, -0.22, -0.20]
)


class InvalidSpec(InputError):
    pass


@dataclass
class SynthSpec:
    """Generating parameters for one synthetic subject archetype.

    body_weight_raw: per-channel standing pressure, raw units.
    load_response_raw_per_kg: per-channel pressure increment per lifted kg.
    load_response_offset_raw: fixed increment present whenever a load is
        held (the affine part); zero by default.
    saturation_raw: optional per-channel soft ceiling making the response
        mildly nonlinear, to give the polynomial kernel something to do.
    """

    body_weight_raw: np.ndarray
    load_response_raw_per_kg: np.ndarray
    load_response_offset_raw: np.ndarray | None = None
    saturation_raw: np.ndarray | None = None
    noise_sigma_raw: float = 0.0
    drift_raw_per_s: float = 0.0
    seed: int = 0

    def __post_init__(self):
        self.body_weight_raw = np.asarray(self.body_weight_raw, dtype=np.float64)
        self.load_response_raw_per_kg = np.asarray(self.load_response_raw_per_kg, dtype=np.float64)
        if self.body_weight_raw.shape != (CHANNEL_COUNT,):
            raise InvalidSpec(f"body weight vector must have {CHANNEL_COUNT} channels")
        if self.load_response_raw_per_kg.shape != (CHANNEL_COUNT,):
            raise InvalidSpec(f"load response vector must have {CHANNEL_COUNT} channels")

    def lift_increment(self, load_kg: float) -> np.ndarray:
        """Planted per-channel pressure increment for a held load."""
        inc = self.load_response_raw_per_kg * load_kg
        if self.load_response_offset_raw is not None:
            inc = inc + self.load_response_offset_raw
        if self.saturation_raw is not None:
            # Odd-symmetric soft saturation, safe for signed increments.
            s = self.saturation_raw
            inc = s * np.tanh(inc / s)
        return inc


def make_archetype(
    subject_index: int,
    body_mass_kg: float = 73.0,
    noise_sigma_raw: float = 0.0,
    drift_raw_per_s: float = 0.0,
    saturating: bool = False,
    seed: int | None = None,
) -> SynthSpec:
    """A ready-made subject archetype with subject-specific variation.

    Body-weight distribution and load response are perturbed per subject
    so pooled training sees genuine inter-subject variability.
    """
    rng = np.random.default_rng(1000 + subject_index)
    bw_shares = np.concatenate([_BW_PATTERN, _BW_PATTERN[::-1]])
    bw_shares = bw_shares * rng.uniform(0.8, 1.25, size=CHANNEL_COUNT)
    bw_shares /= bw_shares.sum()
    body_weight = bw_shares * body_mass_kg * RAW_PER_KG

    # Force balance pins the net response: the two feet together must gain
    # exactly one kg-equivalent per lifted kg, for every subject. What
    # varies between subjects is the zero-sum moment redistribution.
    net_part = bw_shares.copy()
    shift = np.concatenate([_LOAD_SHIFT, _LOAD_SHIFT[::-1]])
    shift = shift * rng.uniform(0.85, 1.18, size=CHANNEL_COUNT)
    shift -= shift.sum() / CHANNEL_COUNT
    response = (net_part + shift) * RAW_PER_KG

    # Keep every channel clear of the zero rail: the heaviest lift must not
    # deplete a heel channel, even through the noise floor.
    depletion = np.maximum(0.0, -response) * (LOAD_MAX_KG + LOAD_STEP_KG)
    body_weight = np.maximum(body_weight, depletion + 3.0 * noise_sigma_raw + 300.0)

    saturation = None
    if saturating:
        saturation = np.maximum(np.abs(response) * 12.0, 1e-6)
    return SynthSpec(
        body_weight_raw=body_weight,
        load_response_raw_per_kg=response,
        saturation_raw=saturation,
        noise_sigma_raw=noise_sigma_raw,
        drift_raw_per_s=drift_raw_per_s,
        seed=seed if seed is not None else 7700 + subject_index,
    )


@dataclass
class GroundTruth:
    """Out-of-band truth attached to a generated session."""

    load_kg_per_frame: np.ndarray  # (n,) held load, 0 outside lift phases
    lift_increments: dict[float, np.ndarray]  # load -> planted increment


def generate_session(
    spec: SynthSpec,
    schedule: PhaseSchedule,
    ladder,
    subject_id: str = "synth",
    session_index: int = 1,
) -> tuple[SessionRecording, GroundTruth]:
    """Simulate one session following the timer schedule exactly.

    The held load steps in at each lift-phase start and out at the return
    beep; pressures are clipped into the valid sensor range.
    """
    ladder = tuple(float(v) for v in ladder)
    if not ladder:
        raise InvalidSpec("ladder must contain at least one load")
    n_phases = len(schedule.phases)
    span_ms = schedule.span_ms(len(ladder))
    n_frames = span_ms // NOMINAL_DT_MS
    t_ms = np.arange(n_frames, dtype=np.int64) * NOMINAL_DT_MS

    phase_idx = (t_ms // schedule.phase_duration_ms).astype(np.int64)
    cycle = phase_idx // n_phases
    phase = phase_idx % n_phases
    lift_mask = np.array([schedule.phases[p] == PHASE_LIFT for p in range(n_phases)])[phase]
    load_per_frame = np.where(lift_mask, np.asarray(ladder)[cycle], 0.0)

    channels = np.tile(spec.body_weight_raw, (n_frames, 1))
    increments = {load: spec.lift_increment(load) for load in ladder}
    for load, inc in increments.items():
        lowest = (spec.body_weight_raw + inc).min()
        if lowest < 0.0:
            raise InvalidSpec(
                f"load response drives a channel to {lowest:.1f} raw units "
                f"at {load} kg; pressures must stay non-negative"
            )
    for load in ladder:
        rows = lift_mask & (np.asarray(ladder)[cycle] == load)
        channels[rows] += increments[load]
    if spec.drift_raw_per_s != 0.0:
        channels += spec.drift_raw_per_s * (t_ms[:, None] / 1000.0)
    if spec.noise_sigma_raw > 0.0:
        rng = np.random.default_rng(spec.seed)
        channels += rng.normal(0.0, spec.noise_sigma_raw, size=channels.shape)
    np.clip(channels, 0.0, FULL_SCALE_RAW, out=channels)

    rec = SessionRecording(
        subject_id=subject_id,
        session_index=session_index,
        timestamps_ms=t_ms,
        channels=channels,
        schedule=schedule,
        load_ladder=ladder,
    )
    return rec, GroundTruth(load_kg_per_frame=load_per_frame, lift_increments=increments)


def make_corpus(
    n_subjects: int = 5,
    sessions: tuple[int, ...] = (1, 2, 3),
    ladder=None,
    schedule: PhaseSchedule | None = None,
    noise_sigma_raw: float = 0.0,
    drift_raw_per_s: float = 0.0,
    saturating: bool = False,
) -> list[tuple[SessionRecording, GroundTruth]]:
    """Generate a multi-subject, multi-session corpus with distinct seeds.

    Defaults mirror the collection protocol: subjects S1..Sn, three
    sessions each, the full 2-10 kg ladder, 15 s phases.
    """
    from .core import FULL_LADDER_KG

    ladder = tuple(ladder) if ladder is not None else FULL_LADDER_KG
    schedule = schedule or PhaseSchedule()
    corpus = []
    for s in range(n_subjects):
        for sess in sessions:
            spec = make_archetype(
                s,
                noise_sigma_raw=noise_sigma_raw,
                drift_raw_per_s=drift_raw_per_s,
                saturating=saturating,
                seed=5000 + 100 * s + sess,
            )
            corpus.append(
                generate_session(
                    spec, schedule, ladder, subject_id=f"S{s + 1}", session_index=sess
                )
            )
    return corpus


def write_session(rec: SessionRecording, out_dir, prefiltered: bool = False) -> Path:
    """Write a recording as manifest + frame CSV; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{rec.subject_id}_s{rec.session_index}"
    frames_path = out_dir / f"{stem}_frames.csv"
    with frames_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([CANONICAL_TIME_COL] + CANONICAL_CHANNEL_COLS)
        for t, row in zip(rec.timestamps_ms, rec.channels):
            writer.writerow([int(t)] + [repr(float(v)) for v in row])
    manifest = {
        "subject_id": rec.subject_id,
        "session_index": rec.session_index,
        "phase_duration_s": rec.schedule.phase_duration_s,
        "loads_kg": list(rec.load_ladder),
        "frames_csv": frames_path.name,
    }
    if prefiltered:
        map_path = out_dir / f"{stem}_columns.json"
        with map_path.open("w") as fh:
            json.dump({"prefiltered": True}, fh)
        manifest["column_map"] = map_path.name
    manifest_path = out_dir / f"{stem}_manifest.json"
    with manifest_path.open("w") as fh:
        json.dump(manifest, fh, indent=2)
    return manifest_path
