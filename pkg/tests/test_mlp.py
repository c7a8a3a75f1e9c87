import numpy as np
import pytest

from insole_load.regress import (
    MlpConfig,
    NonFiniteInput,
    fit_mlp,
    init_params,
    loss_and_grads,
)

FAST = MlpConfig(batch_size=16, max_epochs=200, patience=40, lr=1e-2, seed=1)
# convergence micro-test: regularisation off so the optimiser can actually
# drive the training loss to the floor
EXACT = MlpConfig(
    batch_size=32, max_epochs=500, patience=120, lr=1e-2, dropout=0.0, weight_decay=0.0, seed=1
)


def numerical_gradients(X, y, cfg, params, running, h=1e-6):
    """Central finite differences over every parameter coordinate."""
    grads = {}
    for name, arr in params.items():
        g = np.zeros_like(arr)
        flat = arr.ravel()
        gf = g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp, _ = loss_and_grads(X, y, cfg, params, running, train=False)
            flat[i] = orig - h
            lm, _ = loss_and_grads(X, y, cfg, params, running, train=False)
            flat[i] = orig
            gf[i] = (lp - lm) / (2.0 * h)
        grads[name] = g
    return grads


def test_gradient_check_against_central_differences(rng):
    cfg = MlpConfig(hidden=(6, 5, 4), seed=0)
    X = rng.normal(size=(12, 7))
    y = rng.normal(size=12)
    params, running = init_params(7, cfg, np.random.default_rng(0))
    # generic point: non-zero biases keep pre-activations off the ReLU kink,
    # mild running statistics keep units alive under the frozen norm
    for k, v in params.items():
        if k.startswith("b") and not k.startswith("bn"):
            params[k] = 0.05 * rng.normal(size=v.shape)
    for k in running:
        if k.endswith("mean"):
            running[k] = 0.2 * rng.normal(size=running[k].shape)
        else:
            running[k] = rng.uniform(0.5, 1.5, size=running[k].shape)
    _, analytic = loss_and_grads(X, y, cfg, params, running, train=False)
    numeric = numerical_gradients(X, y, cfg, params, running)
    worst = 0.0
    for name in params:
        a, n = analytic[name], numeric[name]
        rel = np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-6)
        worst = max(worst, float(rel.max()))
    assert worst < 1e-4


def test_exact_linear_data_reaches_small_mse(rng):
    X = rng.normal(size=(400, 5))
    y = 1.8 * X[:, 2]
    # convergence check only: validate against the (noise-free) fit target
    model, report = fit_mlp(X, y, EXACT, X_val=X, y_val=y)
    assert report.final_train_loss < 1e-2


def test_constant_targets_learned_by_bias(rng):
    X = rng.normal(size=(300, 4))
    y = np.full(300, 5.0)
    model, _ = fit_mlp(X, y, FAST)
    preds = model.predict(X)
    assert np.all(np.abs(preds - 5.0) < 0.05)


def test_same_seed_gives_identical_parameters(rng):
    X = rng.normal(size=(200, 6))
    y = X[:, 0] - 0.5 * X[:, 3]
    cfg = MlpConfig(batch_size=32, max_epochs=8, patience=8, seed=42)
    m1, _ = fit_mlp(X, y, cfg)
    m2, _ = fit_mlp(X, y, cfg)
    for k in m1.params:
        np.testing.assert_array_equal(m1.params[k], m2.params[k])
    for k in m1.running:
        np.testing.assert_array_equal(m1.running[k], m2.running[k])
    assert np.array_equal(m1.predict(X), m2.predict(X))


def test_inference_is_deterministic_and_dropout_free(rng):
    X = rng.normal(size=(80, 4))
    y = X[:, 0]
    model, _ = fit_mlp(X, y, MlpConfig(batch_size=16, max_epochs=5, patience=5, seed=3))
    p1 = model.predict(X)
    p2 = model.predict(X)
    assert np.array_equal(p1, p2)


def test_needs_at_least_batch_size_samples(rng):
    X = rng.normal(size=(20, 4))
    y = rng.normal(size=20)
    with pytest.raises(NonFiniteInput):
        fit_mlp(X, y, MlpConfig(batch_size=64))


def test_label_shift_approximately_absorbed(rng):
    X = rng.normal(size=(300, 4))
    y = 1.2 * X[:, 1]
    cfg = MlpConfig(batch_size=16, max_epochs=200, patience=40, lr=1e-2, seed=7)
    m1, _ = fit_mlp(X, y, cfg)
    m2, _ = fit_mlp(X, y + 2.0, cfg)
    diff = m2.predict(X) - m1.predict(X)
    assert abs(diff.mean() - 2.0) < 0.05
