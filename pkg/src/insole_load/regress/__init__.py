"""Load regressors: elastic net, epsilon-SVR, and a small MLP."""

from __future__ import annotations

import numpy as np

from .common import NoConvergence, NonFiniteInput, NonFiniteLoss, TrainingReport
from .elastic_net import ElasticNetModel, elastic_net_objective, fit_elastic_net
from .mlp import MlpConfig, MlpModel, fit_mlp, init_params, loss_and_grads
from .serialize import (
    CorruptFile,
    FormatVersionMismatch,
    load_model,
    model_kind,
    save_model,
)
from .svr import SvrModel, SvrParams, dual_objective_value, fit_svr, kernel_value

MODEL_KINDS = ("elastic_net", "svr", "mlp")


def predict(model, x) -> float:
    """Point prediction for one 36-channel differential feature vector."""
    x = np.asarray(x, dtype=np.float64)
    return float(model.predict(x.reshape(1, -1))[0])


__all__ = [
    "CorruptFile",
    "ElasticNetModel",
    "FormatVersionMismatch",
    "MlpConfig",
    "MlpModel",
    "MODEL_KINDS",
    "NoConvergence",
    "NonFiniteInput",
    "NonFiniteLoss",
    "SvrModel",
    "SvrParams",
    "TrainingReport",
    "dual_objective_value",
    "elastic_net_objective",
    "fit_elastic_net",
    "fit_mlp",
    "fit_svr",
    "init_params",
    "kernel_value",
    "load_model",
    "loss_and_grads",
    "model_kind",
    "predict",
    "save_model",
]
