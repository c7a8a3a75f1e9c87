"""Columnar container for labeled differential samples, with CSV round-trip.

The dataset file is the hand-off point between preprocessing and model
training: one row per lift-window frame, header
``subject,session,t_ms,f00,...,f35,label_kg``. An empty label field marks
a baseline-only sample.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import CHANNEL_COUNT, InputError, LabeledSample

_FEATURE_COLS = [f"f{i:02d}" for i in range(CHANNEL_COUNT)]
_HEADER = ["subject", "session", "t_ms"] + _FEATURE_COLS + ["label_kg"]


@dataclass
class Dataset:
    features: np.ndarray  # (n, 36) float64
    labels_kg: np.ndarray  # (n,) float64, NaN where unlabeled
    subject_ids: np.ndarray  # (n,) str
    session_indices: np.ndarray  # (n,) int64
    timestamps_ms: np.ndarray  # (n,) int64

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64).reshape(-1, CHANNEL_COUNT)
        self.labels_kg = np.asarray(self.labels_kg, dtype=np.float64)
        self.subject_ids = np.asarray(self.subject_ids, dtype=object)
        self.session_indices = np.asarray(self.session_indices, dtype=np.int64)
        self.timestamps_ms = np.asarray(self.timestamps_ms, dtype=np.int64)

    def __len__(self) -> int:
        return self.features.shape[0]

    def subset(self, mask_or_idx) -> "Dataset":
        return Dataset(
            self.features[mask_or_idx],
            self.labels_kg[mask_or_idx],
            self.subject_ids[mask_or_idx],
            self.session_indices[mask_or_idx],
            self.timestamps_ms[mask_or_idx],
        )

    def samples(self):
        for i in range(len(self)):
            label = self.labels_kg[i]
            yield LabeledSample(
                features=self.features[i],
                label_kg=None if np.isnan(label) else float(label),
                subject_id=str(self.subject_ids[i]),
                session_index=int(self.session_indices[i]),
                frame_timestamp_ms=int(self.timestamps_ms[i]),
            )

    def to_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(_HEADER)
            for i in range(len(self)):
                label = self.labels_kg[i]
                row = [str(self.subject_ids[i]), int(self.session_indices[i]), int(self.timestamps_ms[i])]
                row += [repr(float(v)) for v in self.features[i]]
                row += ["" if np.isnan(label) else repr(float(label))]
                writer.writerow(row)

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        path = Path(path)
        subjects, sessions, times, feats, labels = [], [], [], [], []
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise InputError(f"{path}: empty dataset file") from None
            if header != _HEADER:
                raise InputError(f"{path}: unexpected header {header[:4]}...")
            for lineno, row in enumerate(reader, start=2):
                if len(row) != len(_HEADER):
                    raise InputError(f"{path}:{lineno}: expected {len(_HEADER)} fields, got {len(row)}")
                try:
                    subjects.append(row[0])
                    sessions.append(int(row[1]))
                    times.append(int(row[2]))
                    feats.append([float(v) for v in row[3 : 3 + CHANNEL_COUNT]])
                    labels.append(float(row[-1]) if row[-1] != "" else np.nan)
                except ValueError as exc:
                    raise InputError(f"{path}:{lineno}: {exc}") from None
        if not feats:
            raise InputError(f"{path}: dataset has no rows")
        return cls(
            np.array(feats),
            np.array(labels),
            np.array(subjects, dtype=object),
            np.array(sessions),
            np.array(times),
        )

    @staticmethod
    def concat(datasets: list["Dataset"]) -> "Dataset":
        if not datasets:
            raise InputError("cannot concatenate zero datasets")
        return Dataset(
            np.concatenate([d.features for d in datasets]),
            np.concatenate([d.labels_kg for d in datasets]),
            np.concatenate([d.subject_ids for d in datasets]),
            np.concatenate([d.session_indices for d in datasets]),
            np.concatenate([d.timestamps_ms for d in datasets]),
        )
