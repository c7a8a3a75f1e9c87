"""Epsilon-insensitive support vector regression, solved by SMO.

The dual is expressed in the net coefficients beta_i = alpha_i - alpha_i*
(one bounded variable per sample, |beta_i| <= C), minimising

    P(beta) = 1/2 beta' K beta - y' beta + epsilon * ||beta||_1
    subject to  sum(beta) = 0.

Sequential minimal optimisation picks the maximal violating pair: every
sample contributes an interval of bias values compatible with its KKT
conditions; optimality holds when the intervals intersect. The selected
two-variable subproblem is piecewise quadratic along the constraint line
(the L1 term has kinks at beta=0), so it is solved exactly by evaluating
the per-orthant stationary points plus the kink and box endpoints.

Kernel: K(u, v) = (gamma * <u, v> + coef0) ** degree.
"""

from __future__ import annotations

import time
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .common import NoConvergence, NonFiniteInput, TrainingReport, check_finite_xy, mse


@dataclass(frozen=True)
class SvrParams:
    degree: int = 2
    C: float = 1.0
    gamma: float = 1e-8
    coef0: float = 10.0
    epsilon: float = 1.3
    tol: float = 1e-3
    max_passes: int = 100_000

    def to_dict(self) -> dict:
        return {
            "degree": self.degree,
            "C": self.C,
            "gamma": self.gamma,
            "coef0": self.coef0,
            "epsilon": self.epsilon,
            "tol": self.tol,
            "max_passes": self.max_passes,
        }


def kernel_value(u, v, params: SvrParams) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    return float((params.gamma * (u @ v) + params.coef0) ** params.degree)


def kernel_matrix(U, V, params: SvrParams) -> np.ndarray:
    U = np.asarray(U, dtype=np.float64)
    V = np.asarray(V, dtype=np.float64)
    return (params.gamma * (U @ V.T) + params.coef0) ** params.degree


@dataclass
class SvrModel:
    support_vectors: np.ndarray  # (m, d)
    dual_coefs: np.ndarray  # (m,) net coefficients, |beta| <= C
    bias: float
    params: SvrParams

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if len(self.dual_coefs) == 0:
            return np.full(X.shape[0], self.bias)
        return kernel_matrix(X, self.support_vectors, self.params) @ self.dual_coefs + self.bias


class _RowCache:
    """Bounded LRU cache of kernel rows; whole-matrix storage would not fit
    for session-scale training sets."""

    def __init__(self, X: np.ndarray, params: SvrParams, budget_bytes: int = 64 << 20):
        self.X = X
        self.params = params
        self.rows: OrderedDict[int, np.ndarray] = OrderedDict()
        self.max_rows = max(4, budget_bytes // (8 * max(1, X.shape[0])))

    def row(self, i: int) -> np.ndarray:
        cached = self.rows.get(i)
        if cached is not None:
            self.rows.move_to_end(i)
            return cached
        r = (self.params.gamma * (self.X @ self.X[i]) + self.params.coef0) ** self.params.degree
        self.rows[i] = r
        if len(self.rows) > self.max_rows:
            self.rows.popitem(last=False)
        return r


def _snapped(value: float, C: float, tol: float) -> float:
    if abs(value) < tol:
        return 0.0
    if abs(value - C) < tol:
        return C
    if abs(value + C) < tol:
        return -C
    return value


def _solve_pair(
    beta_i: float, beta_j: float, delta: float, eta: float, eps: float, C: float
) -> float:
    """Exact minimiser of the two-variable subproblem; returns new beta_i.

    With t = new beta_i and s = beta_i + beta_j fixed, the objective change
    is phi(t) = -delta*(t - beta_i) + eta/2*(t - beta_i)^2
                + eps*(|t| + |s - t|) - eps*(|beta_i| + |beta_j|).
    """
    s = beta_i + beta_j
    lo = max(-C, s - C)
    hi = min(C, s + C)

    def phi(t: float) -> float:
        u = t - beta_i
        return -delta * u + 0.5 * eta * u * u + eps * (abs(t) + abs(s - t))

    candidates = [lo, hi]
    if lo < 0.0 < hi:
        candidates.append(0.0)
    if lo < s < hi:
        candidates.append(s)
    if eta > 0.0:
        for sig_i in (-1.0, 1.0):
            for sig_j in (-1.0, 1.0):
                # Stationary point of the smooth orthant piece where
                # sign(t) = sig_i and sign(s - t) = sig_j.
                t = beta_i + (delta - eps * (sig_i - sig_j)) / eta
                if sig_i * t >= 0.0 and sig_j * (s - t) >= 0.0 and lo <= t <= hi:
                    candidates.append(t)
    best = min(candidates, key=phi)
    return best


def fit_svr(
    X,
    y,
    params: SvrParams = SvrParams(),
    X_val=None,
    y_val=None,
) -> tuple[SvrModel, TrainingReport]:
    """Train epsilon-SVR with maximal-violating-pair SMO.

    Raises NoConvergence (with the final KKT residual) if the pass budget
    is exhausted before the bias intervals overlap within tol.
    """
    X, y = check_finite_xy(X, y)
    n = X.shape[0]
    if n < 2:
        raise NonFiniteInput("SVR needs at least two samples")
    start = time.perf_counter()

    C, eps, tol = params.C, params.epsilon, params.tol
    beta = np.zeros(n)
    f0 = np.zeros(n)  # f0_i = sum_k beta_k K(x_k, x_i), bias excluded
    cache = _RowCache(X, params)
    kdiag = (params.gamma * (X * X).sum(axis=1) + params.coef0) ** params.degree

    residual = np.inf
    passes = 0
    converged = False
    for passes in range(1, params.max_passes + 1):
        g = y - f0
        lo_vals = np.where(beta >= 0.0, g - eps, g + eps)  # b needed to stop an increase
        hi_vals = np.where(beta <= 0.0, g + eps, g - eps)  # b needed to stop a decrease
        lo_vals = np.where(beta < C, lo_vals, -np.inf)
        hi_vals = np.where(beta > -C, hi_vals, np.inf)
        i = int(np.argmax(lo_vals))
        j = int(np.argmin(hi_vals))
        residual = float(lo_vals[i] - hi_vals[j])
        if residual <= tol:
            converged = True
            break

        row_i = cache.row(i)
        row_j = cache.row(j)
        eta = float(kdiag[i] + kdiag[j] - 2.0 * row_i[j])
        delta = float(g[i] - g[j])
        new_i = _solve_pair(float(beta[i]), float(beta[j]), delta, max(eta, 0.0), eps, C)
        new_j = float(beta[i] + beta[j]) - new_i
        # Snap to the breakpoints: a residue like 3e-17 instead of an exact
        # zero flips the KKT sign branch and fabricates violations.
        snap = 1e-12 * max(1.0, C)
        new_i = _snapped(new_i, C, snap)
        new_j = _snapped(new_j, C, snap)
        d_i = new_i - beta[i]
        d_j = new_j - beta[j]
        if abs(d_i) < 1e-14 and abs(d_j) < 1e-14:
            # A violating pair always has descent room, so a zero step can
            # only mean floating-point exhaustion; stop rather than spin.
            break
        beta[i] = new_i
        beta[j] = new_j
        f0 += d_i * row_i + d_j * row_j

    bias = _final_bias(beta, y - f0, eps, C)
    if not converged and residual > tol:
        raise NoConvergence(
            f"SMO used {passes} passes without reaching tol={tol}; "
            f"KKT residual {residual:.3e}"
        )

    sv_mask = beta != 0.0
    model = SvrModel(
        support_vectors=X[sv_mask].copy(),
        dual_coefs=beta[sv_mask].copy(),
        bias=bias,
        params=params,
    )
    train_loss = mse(f0 + bias, y)
    val_loss = None
    if X_val is not None and y_val is not None:
        val_loss = mse(model.predict(X_val), y_val)
    dual_objective = float(-(0.5 * beta @ f0 - y @ beta + eps * np.abs(beta).sum()))
    report = TrainingReport(
        final_train_loss=train_loss,
        final_val_loss=val_loss,
        epochs_run=passes,
        converged=converged,
        wall_time_s=time.perf_counter() - start,
        extras={
            "kkt_residual": residual,
            "n_support": int(sv_mask.sum()),
            "dual_objective": dual_objective,
        },
    )
    return model, report


def _final_bias(beta: np.ndarray, g: np.ndarray, eps: float, C: float) -> float:
    """Midpoint of the bias interval left open by the KKT conditions."""
    lo_vals = np.where(beta >= 0.0, g - eps, g + eps)
    hi_vals = np.where(beta <= 0.0, g + eps, g - eps)
    lo_vals = np.where(beta < C, lo_vals, -np.inf)
    hi_vals = np.where(beta > -C, hi_vals, np.inf)
    b_low = float(lo_vals.max())
    b_high = float(hi_vals.min())
    if np.isinf(b_low) and np.isinf(b_high):
        return 0.0
    if np.isinf(b_low):
        return b_high
    if np.isinf(b_high):
        return b_low
    return 0.5 * (b_low + b_high)


def dual_objective_value(X, y, beta, params: SvrParams) -> float:
    """Maximisation-form dual value for a given coefficient vector."""
    X = np.asarray(X, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    K = kernel_matrix(X, X, params)
    return float(
        -0.5 * beta @ K @ beta + np.asarray(y, dtype=np.float64) @ beta
        - params.epsilon * np.abs(beta).sum()
    )
