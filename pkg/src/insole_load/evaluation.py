"""Inter-subject evaluation protocol.

Sessions 1-2 of every subject form the pooled training set (with a
stratified 80/20 train/validation split); session 3 is the test set.
Three load levels (3, 6, 9 kg) are removed from training entirely and kept
in the test set, so the report separates interpolation to unseen loads
from accuracy on trained ones.

Reported MAE distributions are computed over aggregated estimates (one per
ten predictions, matching the 500 ms output cadence); raw per-sample MAE
is kept alongside for diagnostics. Model comparisons use the Mann-Whitney
U test: exact by enumeration for small samples, normal approximation with
tie and continuity corrections otherwise.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

from .aggregate import Aggregator
from .core import InputError, PipelineConfig
from .dataset import Dataset
from .regress import (
    MlpConfig,
    SvrParams,
    TrainingReport,
    fit_elastic_net,
    fit_mlp,
    fit_svr,
)


class EmptyInput(InputError):
    pass


class LengthMismatch(InputError):
    pass


class MissingSession(InputError):
    pass


@dataclass(frozen=True)
class SplitSpec:
    train_sessions: tuple[int, ...] = (1, 2)
    test_session: int = 3
    unseen_loads_kg: tuple[float, ...] = (3.0, 6.0, 9.0)
    val_fraction: float = 0.2
    seed: int = 7


def build_split(ds: Dataset, spec: SplitSpec = SplitSpec()):
    """Split a pooled dataset into (train_idx, val_idx, test_idx).

    Every subject present must contribute all required sessions. The
    validation carve-out is stratified by load level with a fixed seed, so
    all trained levels appear on both sides and reruns are identical.
    """
    sessions_by_subject: dict[str, set[int]] = {}
    for subject, session in zip(ds.subject_ids, ds.session_indices):
        sessions_by_subject.setdefault(str(subject), set()).add(int(session))
    required = set(spec.train_sessions) | {spec.test_session}
    for subject in sorted(sessions_by_subject):
        missing = required - sessions_by_subject[subject]
        if missing:
            raise MissingSession(f"subject {subject} lacks sessions {sorted(missing)}")

    in_train_sessions = np.isin(ds.session_indices, spec.train_sessions)
    unseen = np.isin(ds.labels_kg, spec.unseen_loads_kg)
    pool = np.nonzero(in_train_sessions & ~unseen & ~np.isnan(ds.labels_kg))[0]
    test_idx = np.nonzero(ds.session_indices == spec.test_session)[0]

    rng = np.random.default_rng(spec.seed)
    val_parts = []
    for level in np.unique(ds.labels_kg[pool]):
        level_idx = pool[ds.labels_kg[pool] == level]
        n_val = int(round(spec.val_fraction * len(level_idx)))
        picked = rng.permutation(len(level_idx))[:n_val]
        val_parts.append(level_idx[picked])
    val_idx = np.sort(np.concatenate(val_parts)) if val_parts else np.array([], dtype=np.int64)
    train_idx = np.setdiff1d(pool, val_idx)
    return train_idx, val_idx, test_idx


def mae(predictions, labels) -> float:
    return float(np.mean(mae_samples(predictions, labels)))


def mae_samples(predictions, labels) -> np.ndarray:
    preds = np.asarray(predictions, dtype=np.float64).ravel()
    labs = np.asarray(labels, dtype=np.float64).ravel()
    if preds.size != labs.size:
        raise LengthMismatch(f"{preds.size} predictions vs {labs.size} labels")
    if preds.size == 0:
        raise EmptyInput("no samples")
    return np.abs(preds - labs)


def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _exact_p(ranks2: np.ndarray, n1: int, u2_obs: int) -> float:
    """Exact two-sided p by enumerating all group-A index subsets.

    ranks2 holds doubled midranks (integers even with ties); u2_obs is the
    doubled observed U.
    """
    n = len(ranks2)
    base2 = n1 * (n1 + 1)  # doubled n1(n1+1)/2
    count_le = 0
    count_ge = 0
    total = 0
    for combo in combinations(range(n), n1):
        u2 = int(sum(ranks2[k] for k in combo)) - base2
        count_le += u2 <= u2_obs
        count_ge += u2 >= u2_obs
        total += 1
    return min(1.0, 2.0 * min(count_le, count_ge) / total)


def mann_whitney_u(sample_a, sample_b, exact_limit: int = 8) -> tuple[float, float]:
    """U statistic (midrank convention, for sample_a) and two-sided p.

    Exact enumeration when both samples have at most exact_limit values;
    otherwise the normal approximation with tie and continuity corrections.
    """
    a = np.asarray(sample_a, dtype=np.float64).ravel()
    b = np.asarray(sample_b, dtype=np.float64).ravel()
    if a.size == 0 or b.size == 0:
        raise EmptyInput("both samples must be non-empty")
    n1, n2 = len(a), len(b)
    pooled = np.concatenate([a, b])
    ranks = _midranks(pooled)
    u = float(ranks[:n1].sum() - n1 * (n1 + 1) / 2.0)

    if n1 <= exact_limit and n2 <= exact_limit:
        ranks2 = np.rint(2.0 * ranks).astype(np.int64)
        u2_obs = int(round(2.0 * u))
        return u, _exact_p(ranks2, n1, u2_obs)

    n = n1 + n2
    _, tie_counts = np.unique(pooled, return_counts=True)
    tie_term = float(((tie_counts**3) - tie_counts).sum())
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
    if var <= 0.0:
        return u, 1.0
    mu = n1 * n2 / 2.0
    diff = abs(u - mu) - 0.5  # continuity correction
    z = max(diff, 0.0) / math.sqrt(var)
    p = math.erfc(z / math.sqrt(2.0))
    return u, min(1.0, p)


def significance_stars(p: float) -> str:
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return "ns"


_FITTERS = {
    "elastic_net": lambda X, y, Xv, yv, kw: fit_elastic_net(X, y, X_val=Xv, y_val=yv, **kw),
    "svr": lambda X, y, Xv, yv, kw: fit_svr(X, y, SvrParams(**kw), X_val=Xv, y_val=yv),
    "mlp": lambda X, y, Xv, yv, kw: fit_mlp(X, y, MlpConfig(**kw), X_val=Xv, y_val=yv),
}


def default_models_cfg() -> dict[str, dict]:
    """The three regressors at their standard hyperparameters."""
    return {
        "svr": {"kind": "svr"},
        "mlp": {"kind": "mlp"},
        "elastic_net": {"kind": "elastic_net", "alpha": 0.1, "l1_ratio": 0.1},
    }


def fit_model(kind: str, X, y, X_val=None, y_val=None, **kwargs):
    if kind not in _FITTERS:
        raise InputError(f"unknown model kind {kind!r}; expected one of {sorted(_FITTERS)}")
    return _FITTERS[kind](X, y, X_val, y_val, kwargs)


@dataclass
class EvalReport:
    """Per-subject and per-unseen-load MAE distributions plus pairwise tests."""

    models: list[str]
    per_subject: dict[str, dict[str, dict]]  # subject -> model -> {mae_windows, mae_raw}
    per_unseen_load: dict[str, dict[str, dict]]  # load -> model -> {...}
    pairwise_tests: dict[str, dict[str, dict]]  # group -> "a|b" -> {U, p, stars}
    aggregate: dict[str, dict]  # model -> {mean_mae_windows, mean_mae_raw, ...}
    config: dict = field(default_factory=dict)
    training: dict[str, dict] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "models": self.models,
            "per_subject": self.per_subject,
            "per_unseen_load": self.per_unseen_load,
            "pairwise_tests": self.pairwise_tests,
            "aggregate": self.aggregate,
            "config": self.config,
            "training": self.training,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "EvalReport":
        return cls(
            models=list(raw["models"]),
            per_subject=raw["per_subject"],
            per_unseen_load=raw["per_unseen_load"],
            pairwise_tests=raw["pairwise_tests"],
            aggregate=raw["aggregate"],
            config=raw.get("config", {}),
            training=raw.get("training", {}),
        )

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_json(cls, path) -> "EvalReport":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_csv(self, path) -> None:
        """Flatten to subject,model,load,mae rows (one row per window MAE)."""
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["subject", "model", "load", "mae"])
            for subject in sorted(self.per_subject):
                for model in self.models:
                    entry = self.per_subject[subject].get(model)
                    if entry is None:
                        continue
                    for load, err in zip(entry["window_loads"], entry["mae_windows"]):
                        writer.writerow([subject, model, load, repr(err)])


def _window_estimates(
    preds: np.ndarray, ds: Dataset, idx: np.ndarray, cfg: PipelineConfig
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Aggregate per-sample predictions into per-window estimates.

    Windows tumble within one (subject, load) cycle, ordered by timestamp,
    exactly as the streaming path would emit them.
    """
    subjects = ds.subject_ids[idx]
    labels = ds.labels_kg[idx]
    times = ds.timestamps_ms[idx]
    est_vals, est_labels, est_subjects = [], [], []
    q_low, q_high = cfg.trim_quantiles
    for subject in sorted(set(subjects)):
        for load in np.unique(labels[subjects == subject]):
            sel = np.nonzero((subjects == subject) & (labels == load))[0]
            sel = sel[np.argsort(times[sel], kind="stable")]
            agg = Aggregator(cfg.aggregation_count, q_low, q_high)
            for p in preds[sel]:
                est = agg.push(float(p))
                if est is not None:
                    est_vals.append(est)
                    est_labels.append(float(load))
                    est_subjects.append(subject)
    return np.array(est_vals), np.array(est_labels), np.array(est_subjects, dtype=object)


def run_protocol(
    ds: Dataset,
    models_cfg: dict[str, dict] | None = None,
    cfg: PipelineConfig | None = None,
    split: SplitSpec | None = None,
) -> EvalReport:
    """Train every requested model on the pooled split and report MAE.

    Model fits run concurrently; everything downstream of the fits is
    deterministic for a fixed dataset and seed.
    """
    cfg = cfg or PipelineConfig()
    models_cfg = models_cfg or default_models_cfg()
    split = split or SplitSpec(
        unseen_loads_kg=tuple(cfg.unseen_loads_kg), seed=cfg.split_seed
    )
    train_idx, val_idx, test_idx = build_split(ds, split)
    Xtr, ytr = ds.features[train_idx], ds.labels_kg[train_idx]
    Xv, yv = ds.features[val_idx], ds.labels_kg[val_idx]
    Xte = ds.features[test_idx]

    def train_one(item):
        name, spec = item
        spec = dict(spec)
        kind = spec.pop("kind", name)
        try:
            model, report = fit_model(kind, Xtr, ytr, Xv, yv, **spec)
        except InputError as exc:
            raise type(exc)(f"model {name!r}: {exc}") from exc
        return name, model, report

    with ThreadPoolExecutor(max_workers=max(1, len(models_cfg))) as pool:
        fitted = list(pool.map(train_one, sorted(models_cfg.items())))

    models = [name for name, _, _ in fitted]
    per_subject: dict[str, dict[str, dict]] = {}
    per_unseen: dict[str, dict[str, dict]] = {}
    aggregate: dict[str, dict] = {}
    training: dict[str, dict] = {}
    window_lists: dict[tuple[str, str], np.ndarray] = {}

    for name, model, report in fitted:
        preds = model.predict(Xte)
        raw_errs = mae_samples(preds, ds.labels_kg[test_idx])
        est, est_labels, est_subjects = _window_estimates(preds, ds, test_idx, cfg)
        win_errs = mae_samples(est, est_labels)

        for subject in sorted(set(map(str, est_subjects))):
            sel = est_subjects == subject
            raw_sel = ds.subject_ids[test_idx] == subject
            per_subject.setdefault(subject, {})[name] = {
                "mae_windows": win_errs[sel].tolist(),
                "window_loads": est_labels[sel].tolist(),
                "mean_mae_windows": float(win_errs[sel].mean()),
                "mean_mae_raw": float(raw_errs[raw_sel].mean()),
            }
            window_lists[("subject:" + subject, name)] = win_errs[sel]
        for load in split.unseen_loads_kg:
            sel = est_labels == load
            raw_sel = ds.labels_kg[test_idx] == load
            if not sel.any():
                continue
            per_unseen.setdefault(f"{load:g}", {})[name] = {
                "mae_windows": win_errs[sel].tolist(),
                "mean_mae_windows": float(win_errs[sel].mean()),
                "mean_mae_raw": float(raw_errs[raw_sel].mean()),
            }
            window_lists[(f"load:{load:g}", name)] = win_errs[sel]

        unseen_mask = np.isin(est_labels, split.unseen_loads_kg)
        aggregate[name] = {
            "mean_mae_windows": float(win_errs.mean()),
            "mean_mae_raw": float(raw_errs.mean()),
            "mean_mae_windows_unseen": float(win_errs[unseen_mask].mean())
            if unseen_mask.any()
            else None,
        }
        training[name] = {
            "converged": report.converged,
            "epochs_run": report.epochs_run,
            "final_train_loss": report.final_train_loss,
            "final_val_loss": report.final_val_loss,
        }

    pairwise: dict[str, dict[str, dict]] = {}
    groups = sorted({g for g, _ in window_lists})
    for group in groups:
        for name_a, name_b in combinations(models, 2):
            key_a, key_b = (group, name_a), (group, name_b)
            if key_a not in window_lists or key_b not in window_lists:
                continue
            u, p = mann_whitney_u(window_lists[key_a], window_lists[key_b])
            pairwise.setdefault(group, {})[f"{name_a}|{name_b}"] = {
                "U": u,
                "p": p,
                "stars": significance_stars(p),
            }

    return EvalReport(
        models=models,
        per_subject=per_subject,
        per_unseen_load=per_unseen,
        pairwise_tests=pairwise,
        aggregate=aggregate,
        config={
            "split": {
                "train_sessions": list(split.train_sessions),
                "test_session": split.test_session,
                "unseen_loads_kg": list(split.unseen_loads_kg),
                "val_fraction": split.val_fraction,
                "seed": split.seed,
            },
            "aggregation_count": cfg.aggregation_count,
            "trim_quantiles": list(cfg.trim_quantiles),
        },
        training=training,
    )


def write_box_plot_svg(report: EvalReport, group: str, path) -> None:
    """Minimal SVG box plot of window-MAE distributions for one group
    (a "subject:S1" or "load:3" key of the pairwise section)."""
    if group.startswith("subject:"):
        source = report.per_subject.get(group.split(":", 1)[1], {})
    elif group.startswith("load:"):
        source = report.per_unseen_load.get(group.split(":", 1)[1], {})
    else:
        raise InputError(f"unknown group {group!r}")
    if not source:
        raise InputError(f"group {group!r} not present in report")

    series = {m: np.asarray(source[m]["mae_windows"]) for m in report.models if m in source}
    v_max = max(float(v.max()) for v in series.values()) or 1.0
    width, height, pad = 120 * len(series) + 40, 260, 30
    y_of = lambda v: height - pad - (v / v_max) * (height - 2 * pad)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<text x="{width / 2:.0f}" y="16" text-anchor="middle" font-size="13">'
        f"window MAE [kg] - {group}</text>",
    ]
    for k, (name, vals) in enumerate(series.items()):
        q1, med, q3 = (float(np.quantile(vals, q)) for q in (0.25, 0.5, 0.75))
        lo, hi = float(vals.min()), float(vals.max())
        cx = 40 + 120 * k + 40
        parts += [
            f'<line x1="{cx}" y1="{y_of(lo):.1f}" x2="{cx}" y2="{y_of(hi):.1f}" stroke="black"/>',
            f'<rect x="{cx - 25}" y="{y_of(q3):.1f}" width="50" '
            f'height="{max(1.0, y_of(q1) - y_of(q3)):.1f}" fill="#9ecae1" stroke="black"/>',
            f'<line x1="{cx - 25}" y1="{y_of(med):.1f}" x2="{cx + 25}" y2="{y_of(med):.1f}" '
            'stroke="black" stroke-width="2"/>',
            f'<text x="{cx}" y="{height - 8}" text-anchor="middle" font-size="12">{name}</text>',
        ]
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts))
