"""Versioned on-disk model format.

A model file is a JSON envelope: kind, format version, hyperparameters,
and parameter arrays encoded as base64 little-endian float64, so a loaded
model predicts bit-identically to the one that was saved.
"""

from __future__ import annotations

import base64
import json
from pathlib import Path

import numpy as np

from ..core import InputError
from .common import TrainingReport
from .elastic_net import ElasticNetModel
from .mlp import MlpConfig, MlpModel
from .svr import SvrModel, SvrParams

FORMAT_TAG = "insole-load-model"
FORMAT_VERSION = 1

KIND_ELASTIC_NET = "elastic_net"
KIND_SVR = "svr"
KIND_MLP = "mlp"


class FormatVersionMismatch(InputError):
    pass


class CorruptFile(InputError):
    pass


def _encode(arr: np.ndarray) -> dict:
    a = np.ascontiguousarray(arr, dtype="<f8")
    return {"shape": list(a.shape), "data": base64.b64encode(a.tobytes()).decode("ascii")}


def _decode(blob: dict) -> np.ndarray:
    try:
        shape = tuple(int(s) for s in blob["shape"])
        raw = base64.b64decode(blob["data"].encode("ascii"), validate=True)
        arr = np.frombuffer(raw, dtype="<f8").astype(np.float64)
        return arr.reshape(shape)
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptFile(f"bad parameter block: {exc}") from None


def model_kind(model) -> str:
    if isinstance(model, ElasticNetModel):
        return KIND_ELASTIC_NET
    if isinstance(model, SvrModel):
        return KIND_SVR
    if isinstance(model, MlpModel):
        return KIND_MLP
    raise InputError(f"unknown model type {type(model).__name__}")


def save_model(model, path, report: TrainingReport | None = None) -> None:
    kind = model_kind(model)
    if kind == KIND_ELASTIC_NET:
        hyper = {"alpha": model.alpha, "l1_ratio": model.l1_ratio}
        parameters = {
            "weights": _encode(model.weights),
            "intercept": _encode(np.array([model.intercept])),
        }
    elif kind == KIND_SVR:
        hyper = model.params.to_dict()
        parameters = {
            "support_vectors": _encode(model.support_vectors),
            "dual_coefs": _encode(model.dual_coefs),
            "bias": _encode(np.array([model.bias])),
        }
    else:
        hyper = model.config.to_dict()
        parameters = {f"param:{k}": _encode(v) for k, v in model.params.items()}
        parameters.update({f"running:{k}": _encode(v) for k, v in model.running.items()})
    envelope = {
        "format": FORMAT_TAG,
        "version": FORMAT_VERSION,
        "kind": kind,
        "hyperparams": hyper,
        "parameters": parameters,
        "training_report": report.to_dict() if report is not None else None,
    }
    Path(path).write_text(json.dumps(envelope, sort_keys=True))


def load_model(path):
    """Load a model file; returns (model, training_report_or_None)."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CorruptFile(f"{path}: {exc}") from None
    try:
        envelope = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptFile(f"{path}: not valid JSON ({exc.msg})") from None
    if not isinstance(envelope, dict) or envelope.get("format") != FORMAT_TAG:
        raise CorruptFile(f"{path}: missing '{FORMAT_TAG}' format tag")
    if envelope.get("version") != FORMAT_VERSION:
        raise FormatVersionMismatch(
            f"{path}: format version {envelope.get('version')}, expected {FORMAT_VERSION}"
        )
    try:
        kind = envelope["kind"]
        hyper = envelope["hyperparams"]
        parameters = envelope["parameters"]
    except KeyError as exc:
        raise CorruptFile(f"{path}: missing envelope key {exc}") from None

    if kind == KIND_ELASTIC_NET:
        model = ElasticNetModel(
            weights=_decode(parameters["weights"]),
            intercept=float(_decode(parameters["intercept"])[0]),
            alpha=float(hyper["alpha"]),
            l1_ratio=float(hyper["l1_ratio"]),
        )
    elif kind == KIND_SVR:
        model = SvrModel(
            support_vectors=_decode(parameters["support_vectors"]),
            dual_coefs=_decode(parameters["dual_coefs"]),
            bias=float(_decode(parameters["bias"])[0]),
            params=SvrParams(
                degree=int(hyper["degree"]),
                C=float(hyper["C"]),
                gamma=float(hyper["gamma"]),
                coef0=float(hyper["coef0"]),
                epsilon=float(hyper["epsilon"]),
                tol=float(hyper.get("tol", 1e-3)),
                max_passes=int(hyper.get("max_passes", 100_000)),
            ),
        )
    elif kind == KIND_MLP:
        try:
            params = {
                k.split(":", 1)[1]: _decode(v)
                for k, v in parameters.items()
                if k.startswith("param:")
            }
            running = {
                k.split(":", 1)[1]: _decode(v)
                for k, v in parameters.items()
                if k.startswith("running:")
            }
            model = MlpModel(config=MlpConfig.from_dict(hyper), params=params, running=running)
        except (KeyError, TypeError) as exc:
            raise CorruptFile(f"{path}: bad MLP envelope ({exc})") from None
    else:
        raise CorruptFile(f"{path}: unknown model kind {kind!r}")

    try:
        report_raw = envelope.get("training_report")
        report = TrainingReport.from_dict(report_raw) if report_raw else None
    except KeyError as exc:
        raise CorruptFile(f"{path}: bad training report ({exc})") from None
    return model, report
