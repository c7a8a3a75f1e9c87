"""Shared training plumbing for the three regressors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import ComputationError, InputError


class NonFiniteInput(InputError):
    pass


class NoConvergence(ComputationError):
    pass


class NonFiniteLoss(ComputationError):
    pass


@dataclass
class TrainingReport:
    final_train_loss: float
    final_val_loss: float | None
    epochs_run: int
    converged: bool
    wall_time_s: float
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "final_train_loss": self.final_train_loss,
            "final_val_loss": self.final_val_loss,
            "epochs_run": self.epochs_run,
            "converged": self.converged,
            "wall_time_s": self.wall_time_s,
            "extras": self.extras,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "TrainingReport":
        return cls(
            final_train_loss=raw["final_train_loss"],
            final_val_loss=raw["final_val_loss"],
            epochs_run=raw["epochs_run"],
            converged=raw["converged"],
            wall_time_s=raw["wall_time_s"],
            extras=raw.get("extras", {}),
        )


def check_finite_xy(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2:
        raise NonFiniteInput(f"X must be 2-d, got shape {X.shape}")
    if X.shape[0] != y.shape[0]:
        raise NonFiniteInput(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
    if not np.isfinite(X).all() or not np.isfinite(y).all():
        raise NonFiniteInput("training data contains non-finite values")
    return X, y


def mse(pred: np.ndarray, target: np.ndarray) -> float:
    d = np.asarray(pred).ravel() - np.asarray(target).ravel()
    return float(np.mean(d * d))
