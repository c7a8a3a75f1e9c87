"""Small fully-connected regressor trained with decoupled weight decay.

Architecture: 36 -> 32 -> 16 -> 8 -> 1. The first two hidden layers are
batch-normalised before the rectifier; dropout follows every hidden
activation during training. Inference always uses the running batch-norm
statistics with dropout off, so predictions are deterministic.

Written directly in numpy so the backward pass is inspectable and can be
validated against central finite differences.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .common import NonFiniteInput, NonFiniteLoss, TrainingReport, check_finite_xy, mse


@dataclass(frozen=True)
class MlpConfig:
    hidden: tuple[int, ...] = (32, 16, 8)
    bn_layers: int = 2  # batch-norm after the first two hidden layers
    dropout: float = 0.3
    bn_eps: float = 1e-5
    bn_momentum: float = 0.1
    lr: float = 1e-4
    weight_decay: float = 0.01
    batch_size: int = 64
    max_epochs: int = 200
    patience: int = 20
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "hidden": list(self.hidden),
            "bn_layers": self.bn_layers,
            "dropout": self.dropout,
            "bn_eps": self.bn_eps,
            "bn_momentum": self.bn_momentum,
            "lr": self.lr,
            "weight_decay": self.weight_decay,
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
            "patience": self.patience,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "MlpConfig":
        raw = dict(raw)
        raw["hidden"] = tuple(raw.get("hidden", (32, 16, 8)))
        return cls(**raw)


@dataclass
class MlpModel:
    config: MlpConfig
    params: dict[str, np.ndarray]  # W{i}, b{i}, and per-bn gamma/beta
    running: dict[str, np.ndarray]  # per-bn mean/var

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        out, _ = _forward(X, self.config, self.params, self.running, train=False, rng=None)
        return out.ravel()


def init_params(n_features: int, cfg: MlpConfig, rng: np.random.Generator):
    """He-uniform weights, zero biases, identity batch-norm."""
    sizes = [n_features, *cfg.hidden, 1]
    params: dict[str, np.ndarray] = {}
    running: dict[str, np.ndarray] = {}
    for i in range(len(sizes) - 1):
        bound = np.sqrt(6.0 / sizes[i])
        params[f"W{i}"] = rng.uniform(-bound, bound, size=(sizes[i], sizes[i + 1]))
        params[f"b{i}"] = np.zeros(sizes[i + 1])
    for i in range(cfg.bn_layers):
        h = cfg.hidden[i]
        params[f"bn{i}_gamma"] = np.ones(h)
        params[f"bn{i}_beta"] = np.zeros(h)
        running[f"bn{i}_mean"] = np.zeros(h)
        running[f"bn{i}_var"] = np.ones(h)
    return params, running


def _forward(X, cfg: MlpConfig, params, running, train: bool, rng):
    """Forward pass; returns (output, cache-for-backward).

    train=True uses batch statistics (and updates the running ones) plus
    inverted dropout; train=False is the frozen, deterministic path.
    """
    cache = {"X": X, "layers": []}
    a = X
    n_hidden = len(cfg.hidden)
    for i in range(n_hidden):
        z = a @ params[f"W{i}"] + params[f"b{i}"]
        layer = {"a_in": a, "z": z}
        if i < cfg.bn_layers:
            if train:
                mu = z.mean(axis=0)
                var = z.var(axis=0)
                running[f"bn{i}_mean"] *= 1.0 - cfg.bn_momentum
                running[f"bn{i}_mean"] += cfg.bn_momentum * mu
                running[f"bn{i}_var"] *= 1.0 - cfg.bn_momentum
                running[f"bn{i}_var"] += cfg.bn_momentum * var
            else:
                mu = running[f"bn{i}_mean"]
                var = running[f"bn{i}_var"]
            inv_std = 1.0 / np.sqrt(var + cfg.bn_eps)
            z_hat = (z - mu) * inv_std
            z = params[f"bn{i}_gamma"] * z_hat + params[f"bn{i}_beta"]
            layer.update(z_hat=z_hat, inv_std=inv_std, batch_stats=train)
        h = np.maximum(z, 0.0)
        layer["pre_relu"] = z
        if train and cfg.dropout > 0.0:
            keep = 1.0 - cfg.dropout
            mask = (rng.random(h.shape) < keep) / keep
            h = h * mask
            layer["drop_mask"] = mask
        cache["layers"].append(layer)
        a = h
    out = a @ params[f"W{n_hidden}"] + params[f"b{n_hidden}"]
    cache["a_last"] = a
    return out, cache


def _backward(dout, cfg: MlpConfig, params, cache):
    """Gradients of the loss w.r.t. every parameter, given dL/d(output)."""
    grads: dict[str, np.ndarray] = {}
    n_hidden = len(cfg.hidden)
    grads[f"W{n_hidden}"] = cache["a_last"].T @ dout
    grads[f"b{n_hidden}"] = dout.sum(axis=0)
    da = dout @ params[f"W{n_hidden}"].T
    for i in reversed(range(n_hidden)):
        layer = cache["layers"][i]
        if "drop_mask" in layer:
            da = da * layer["drop_mask"]
        dz = da * (layer["pre_relu"] > 0.0)
        if i < cfg.bn_layers:
            z_hat, inv_std = layer["z_hat"], layer["inv_std"]
            grads[f"bn{i}_gamma"] = (dz * z_hat).sum(axis=0)
            grads[f"bn{i}_beta"] = dz.sum(axis=0)
            dz_hat = dz * params[f"bn{i}_gamma"]
            if layer["batch_stats"]:
                m = dz_hat.shape[0]
                dz = (
                    inv_std
                    / m
                    * (m * dz_hat - dz_hat.sum(axis=0) - z_hat * (dz_hat * z_hat).sum(axis=0))
                )
            else:
                # Frozen statistics: batch-norm is a fixed affine map.
                dz = dz_hat * inv_std
        grads[f"W{i}"] = layer["a_in"].T @ dz
        grads[f"b{i}"] = dz.sum(axis=0)
        da = dz @ params[f"W{i}"].T
    return grads


def loss_and_grads(X, y, cfg: MlpConfig, params, running, train: bool = False, rng=None):
    """MSE loss plus parameter gradients; the train=False path is the one
    the finite-difference check exercises (deterministic, frozen norm)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1, 1)
    out, cache = _forward(X, cfg, params, running, train=train, rng=rng)
    diff = out - y
    loss = float(np.mean(diff * diff))
    dout = 2.0 * diff / len(y)
    grads = _backward(dout, cfg, params, cache)
    return loss, grads


class _AdamW:
    """Adam with decoupled weight decay; decay applies to weight matrices
    only (biases and batch-norm parameters are left undecayed)."""

    def __init__(self, params, lr, weight_decay, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.wd = weight_decay
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for k, g in grads.items():
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            update = (self.m[k] / bc1) / (np.sqrt(self.v[k] / bc2) + self.eps)
            params[k] -= self.lr * update
            if self.wd > 0.0 and k.startswith("W"):
                params[k] -= self.lr * self.wd * params[k]


def fit_mlp(
    X,
    y,
    cfg: MlpConfig = MlpConfig(),
    X_val=None,
    y_val=None,
) -> tuple[MlpModel, TrainingReport]:
    """Mini-batch AdamW training with early stopping on validation MSE.

    Returns the best-validation snapshot. When no validation split is
    supplied, a seeded 20% holdout is carved from the training set.
    """
    X, y = check_finite_xy(X, y)
    rng = np.random.default_rng(cfg.seed)
    if X_val is None or y_val is None:
        n_val = max(1, int(round(0.2 * len(y))))
        perm = rng.permutation(len(y))
        X_val, y_val = X[perm[:n_val]], y[perm[:n_val]]
        X, y = X[perm[n_val:]], y[perm[n_val:]]
    else:
        X_val, y_val = check_finite_xy(X_val, y_val)
    if len(y) < cfg.batch_size:
        raise NonFiniteInput(
            f"need at least batch_size={cfg.batch_size} training samples, have {len(y)}"
        )
    start = time.perf_counter()

    params, running = init_params(X.shape[1], cfg, rng)
    optimizer = _AdamW(params, cfg.lr, cfg.weight_decay)

    def snapshot():
        return (
            {k: v.copy() for k, v in params.items()},
            {k: v.copy() for k, v in running.items()},
        )

    def val_mse():
        out, _ = _forward(X_val, cfg, params, running, train=False, rng=None)
        return mse(out, y_val)

    best_val = val_mse()
    best_state = snapshot()
    best_epoch = 0
    stale = 0
    epochs = 0
    for epoch in range(1, cfg.max_epochs + 1):
        epochs = epoch
        order = rng.permutation(len(y))
        for s in range(0, len(y) - cfg.batch_size + 1, cfg.batch_size):
            idx = order[s : s + cfg.batch_size]
            loss, grads = loss_and_grads(
                X[idx], y[idx], cfg, params, running, train=True, rng=rng
            )
            if not np.isfinite(loss):
                raise NonFiniteLoss(f"training loss diverged at epoch {epoch}")
            optimizer.step(params, grads)
        current = val_mse()
        if current < best_val - 1e-12:
            best_val = current
            best_state = snapshot()
            best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break

    params, running = best_state
    model = MlpModel(config=cfg, params=params, running=running)
    train_loss = mse(model.predict(X), y)
    report = TrainingReport(
        final_train_loss=train_loss,
        final_val_loss=best_val,
        epochs_run=epochs,
        converged=epochs < cfg.max_epochs or stale < cfg.patience,
        wall_time_s=time.perf_counter() - start,
        extras={"best_epoch": best_epoch},
    )
    return model, report
