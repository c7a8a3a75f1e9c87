import json

import numpy as np
import pytest

from insole_load.regress import (
    CorruptFile,
    FormatVersionMismatch,
    MlpConfig,
    SvrParams,
    TrainingReport,
    fit_elastic_net,
    fit_mlp,
    fit_svr,
    load_model,
    predict,
    save_model,
)


@pytest.fixture()
def fitted_models(rng):
    X = rng.normal(size=(80, 36))
    y = X[:, 0] * 0.5 + 3.0
    enet, enet_rep = fit_elastic_net(X, y, alpha=0.05, l1_ratio=0.2)
    svr, svr_rep = fit_svr(X, y, SvrParams(degree=2, C=1.0, gamma=0.05, coef0=1.0, epsilon=0.1))
    mlp, mlp_rep = fit_mlp(
        X, y, MlpConfig(batch_size=16, max_epochs=10, patience=10, seed=0)
    )
    return [(enet, enet_rep), (svr, svr_rep), (mlp, mlp_rep)]


def test_round_trip_predicts_bit_identically(fitted_models, tmp_path, rng):
    probes = rng.normal(size=(20, 36))
    for k, (model, report) in enumerate(fitted_models):
        path = tmp_path / f"model_{k}.json"
        save_model(model, path, report)
        loaded, loaded_report = load_model(path)
        assert np.array_equal(loaded.predict(probes), model.predict(probes))
        assert loaded_report.epochs_run == report.epochs_run
        assert loaded_report.converged == report.converged
        # scalar predict helper agrees too
        assert predict(loaded, probes[0]) == predict(model, probes[0])


def test_truncated_file_is_corrupt(fitted_models, tmp_path):
    model, report = fitted_models[0]
    path = tmp_path / "m.json"
    save_model(model, path, report)
    text = path.read_text()
    path.write_text(text[: len(text) // 2])
    with pytest.raises(CorruptFile):
        load_model(path)


def test_version_bump_is_rejected(fitted_models, tmp_path):
    model, _ = fitted_models[0]
    path = tmp_path / "m.json"
    save_model(model, path)
    doc = json.loads(path.read_text())
    doc["version"] = 2
    path.write_text(json.dumps(doc))
    with pytest.raises(FormatVersionMismatch):
        load_model(path)


def test_wrong_format_tag_is_corrupt(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps({"format": "something-else", "version": 1}))
    with pytest.raises(CorruptFile):
        load_model(path)


def test_missing_file_is_corrupt(tmp_path):
    with pytest.raises(CorruptFile):
        load_model(tmp_path / "absent.json")


def test_mangled_base64_is_corrupt(fitted_models, tmp_path):
    model, _ = fitted_models[0]
    path = tmp_path / "m.json"
    save_model(model, path)
    doc = json.loads(path.read_text())
    doc["parameters"]["weights"]["data"] = "!!!not-base64!!!"
    path.write_text(json.dumps(doc))
    with pytest.raises(CorruptFile):
        load_model(path)


def test_report_absent_round_trips(fitted_models, tmp_path):
    model, _ = fitted_models[0]
    path = tmp_path / "m.json"
    save_model(model, path)  # no report
    _, loaded_report = load_model(path)
    assert loaded_report is None
