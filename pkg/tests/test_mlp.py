"""Network initialization, backprop, Adam, and the training loop.

Gradients are checked against central finite differences; the Adam update
is checked against a hand-rolled reference loop; inverted dropout is
checked by Monte Carlo on a network kept in ReLU's linear region.
"""

import numpy as np
import pytest

import plugcast as pc
from plugcast.models.mlp import (
    _backward,
    _flatten,
    _forward_train,
    _to_layers,
    init_layers,
    mlp_gradients,
    mlp_loss,
    predict_layers,
)

from conftest import ts


def make_training_matrix(n=420, seed=5):
    """Split matrix whose targets are a noisy linear law of the lags."""
    rng = np.random.default_rng(seed)
    lag_values = rng.uniform(0.0, 10.0, size=(n, 3))
    targets = lag_values @ np.array([0.5, 0.3, 0.2]) + 0.05 * rng.normal(size=n)
    matrix = pc.FeatureMatrix(
        spec=pc.FeatureSpec(),
        timestamps=[ts("2017-01-02 00:00")] * n,
        targets=targets,
        lag_values=lag_values,
        dow=rng.integers(0, 7, n),
        month=rng.integers(1, 13, n),
        hour=rng.integers(0, 24, n),
    )
    return pc.split_rows(matrix, seed=seed)


# ---------------------------------------------------------------------------
# initialization and forward pass
# ---------------------------------------------------------------------------

def test_init_layer_shapes_and_bias():
    layers = init_layers([10, 100, 50, 1], 0)
    assert [(W.shape, b.shape) for W, b in layers] == [
        ((10, 100), (100,)),
        ((100, 50), (50,)),
        ((50, 1), (1,)),
    ]
    for _, b in layers:
        assert not b.any()


def test_init_weight_scale_tracks_fan_in():
    layers = init_layers([200, 300, 1], 42)
    W0 = layers[0][0]
    assert abs(W0.mean()) < 0.01
    assert W0.std() == pytest.approx(np.sqrt(2.0 / 200), rel=0.05)
    W1 = layers[1][0]
    assert W1.std() == pytest.approx(np.sqrt(2.0 / 300), rel=0.15)


def test_init_deterministic_per_seed():
    a = init_layers([5, 4, 1], 7)
    b = init_layers([5, 4, 1], 7)
    c = init_layers([5, 4, 1], 8)
    for (Wa, _), (Wb, _) in zip(a, b):
        assert np.array_equal(Wa, Wb)
    assert not np.array_equal(a[0][0], c[0][0])


def test_predict_zero_weights_outputs_zero():
    layers = [(np.zeros((3, 4)), np.zeros(4)), (np.zeros((4, 1)), np.zeros(1))]
    out = predict_layers(layers, np.random.default_rng(0).normal(size=(6, 3)))
    assert out.shape == (6,)
    assert not out.any()


def test_forward_without_dropout_matches_inference():
    rng = np.random.default_rng(3)
    layers = init_layers([6, 9, 5, 1], rng)
    X = rng.normal(size=(14, 6))
    out, _ = _forward_train(layers, X, 0.0, rng=None)
    assert np.array_equal(out[:, 0], predict_layers(layers, X))


def test_relu_is_applied():
    # one hidden unit with weight -1: any positive input must clamp to 0
    layers = [(np.array([[-1.0]]), np.zeros(1)), (np.array([[1.0]]), np.zeros(1))]
    out = predict_layers(layers, np.array([[2.0], [-3.0]]))
    assert out.tolist() == [0.0, 3.0]


def test_inverted_dropout_preserves_expectation():
    # positive weights and inputs keep every pre-activation positive, so
    # ReLU is affine there and E[dropout output] equals the inference
    # output exactly; only Monte Carlo error remains.
    rng = np.random.default_rng(11)
    layers = [
        (rng.uniform(0.5, 1.5, size=(4, 8)) / 4, np.zeros(8)),
        (rng.uniform(0.5, 1.5, size=(8, 6)) / 8, np.zeros(6)),
        (rng.uniform(0.5, 1.5, size=(6, 1)) / 6, np.zeros(1)),
    ]
    X = rng.uniform(1.0, 2.0, size=(1, 4))
    reference = predict_layers(layers, X)[0]
    draws = np.empty(10_000)
    mask_rng = np.random.default_rng(99)
    for k in range(len(draws)):
        out, _ = _forward_train(layers, X, 0.2, mask_rng)
        draws[k] = out[0, 0]
    assert draws.mean() == pytest.approx(reference, rel=0.02)
    assert draws.std() > 0  # dropout actually perturbed the forward pass


def test_dropout_masks_draw_from_the_given_stream():
    layers = init_layers([3, 5, 4, 1], 0)
    X = np.random.default_rng(2).normal(size=(8, 3))
    a, _ = _forward_train(layers, X, 0.5, np.random.default_rng(123))
    b, _ = _forward_train(layers, X, 0.5, np.random.default_rng(123))
    c, _ = _forward_train(layers, X, 0.5, np.random.default_rng(124))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


# ---------------------------------------------------------------------------
# gradients
# ---------------------------------------------------------------------------

def numeric_gradients(layers, X, y, h=1e-5):
    """Central finite differences through the inference-mode loss."""
    grads = []
    for arr in _flatten(layers):
        g = np.zeros_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            keep = arr[i]
            arr[i] = keep + h
            up = mlp_loss(layers, X, y)
            arr[i] = keep - h
            down = mlp_loss(layers, X, y)
            arr[i] = keep
            g[i] = (up - down) / (2.0 * h)
        grads.append(g)
    return grads


def max_relative_error(analytic, numeric):
    worst = 0.0
    for a, n in zip(analytic, numeric, strict=True):
        denom = np.maximum(np.abs(a) + np.abs(n), 1e-8)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def test_backprop_matches_finite_differences():
    # biases are randomized: with zero biases a sample that silences an
    # entire hidden layer parks the next pre-activation exactly on the
    # ReLU kink, where no subgradient agrees with central differences
    rng = np.random.default_rng(31)
    for trial in range(10):
        layers = [
            (W, rng.normal(0.0, 0.1, size=b.shape))
            for W, b in init_layers([5, 4, 3, 1], rng)
        ]
        X = rng.normal(size=(7, 5))
        y = rng.normal(size=7)
        err = max_relative_error(mlp_gradients(layers, X, y), numeric_gradients(layers, X, y))
        assert err <= 1e-4, f"trial {trial}: max relative error {err}"


def test_gradient_layout_matches_parameters():
    layers = init_layers([6, 9, 5, 1], 1)
    grads = mlp_gradients(layers, np.ones((3, 6)), np.ones(3))
    params = _flatten(layers)
    assert len(grads) == len(params)
    for g, p in zip(grads, params):
        assert g.shape == p.shape


def test_loss_is_mean_squared_error():
    layers = [(np.array([[1.0]]), np.zeros(1))]  # identity single layer
    X = np.array([[1.0], [2.0], [3.0]])
    y = np.array([2.0, 2.0, 2.0])
    # residuals -1, 0, 1
    assert mlp_loss(layers, X, y) == pytest.approx(2.0 / 3.0)


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

def test_adam_single_step_hand_value():
    p, m, v = [np.array([1.0])], [np.array([0.0])], [np.array([0.0])]
    g = [np.array([0.1])]
    new_p, new_m, new_v = pc.adam_step(p, g, m, v, t=1)
    # m_hat = g, v_hat = g^2, so the move is step * g / (|g| + eps)
    expected = 1.0 - 1e-3 * 0.1 / (0.1 + 1e-8)
    assert new_p[0][0] == pytest.approx(expected, abs=1e-15)
    assert new_m[0][0] == pytest.approx(0.1 * 0.1)
    assert new_v[0][0] == pytest.approx(0.001 * 0.01)


def test_adam_zero_gradient_is_a_fixed_point():
    p = [np.array([3.0, -2.0])]
    zeros = [np.zeros(2)]
    new_p, _, _ = pc.adam_step(p, zeros, zeros, zeros, t=5)
    assert np.array_equal(new_p[0], p[0])


def test_adam_does_not_mutate_inputs():
    p = [np.array([1.0])]
    g = [np.array([0.5])]
    m = [np.array([0.2])]
    v = [np.array([0.3])]
    pc.adam_step(p, g, m, v, t=2)
    assert p[0][0] == 1.0 and m[0][0] == 0.2 and v[0][0] == 0.3


def test_adam_matches_reference_loop():
    # minimize ||theta - c||^2 and compare against an explicit scalar loop
    c = np.array([1.0, -2.0, 0.5])
    theta = [np.zeros(3)]
    m = [np.zeros(3)]
    v = [np.zeros(3)]

    ref_t = np.zeros(3)
    ref_m = np.zeros(3)
    ref_v = np.zeros(3)
    b1, b2, lr, eps = 0.9, 0.999, 1e-3, 1e-8
    for t in range(1, 201):
        grad = 2.0 * (theta[0] - c)
        theta, m, v = pc.adam_step(theta, [grad], m, v, t)
        ref_g = 2.0 * (ref_t - c)
        ref_m = b1 * ref_m + (1 - b1) * ref_g
        ref_v = b2 * ref_v + (1 - b2) * ref_g**2
        ref_t = ref_t - lr * (ref_m / (1 - b1**t)) / (np.sqrt(ref_v / (1 - b2**t)) + eps)
        assert np.max(np.abs(theta[0] - ref_t)) < 1e-10
    # and it actually made progress toward c
    assert np.linalg.norm(theta[0] - c) < np.linalg.norm(c)


def test_adam_guards():
    p = [np.zeros(2)]
    with pytest.raises(ValueError):
        pc.adam_step(p, p, p, p, t=0)
    with pytest.raises(ValueError):
        pc.adam_step(p, [np.zeros(2), np.zeros(2)], p, p, t=1)


def test_train_config_round_trip_and_validation():
    config = pc.TrainConfig(epochs=5, seed=3, keep_last_epoch=True)
    assert pc.TrainConfig.from_dict(config.as_dict()) == config
    with pytest.raises(ValueError):
        pc.TrainConfig(epochs=-1)
    with pytest.raises(ValueError):
        pc.TrainConfig(dropout_rate=1.0)
    with pytest.raises(ValueError):
        pc.TrainConfig(batch_size=0)
    with pytest.raises(ValueError):
        pc.TrainConfig(step_size=0.0)


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------

def test_train_zero_epochs_returns_initial_weights():
    matrix = make_training_matrix()
    model, history = pc.train_mlp(matrix, "v1", pc.TrainConfig(epochs=0, seed=1))
    assert history == {"train": [], "validation": [], "best_epoch": None}
    fresh = init_layers([10, 100, 50, 1], np.random.default_rng(1))
    for (W0, _), (W1, _) in zip(model.layers, fresh):
        assert np.array_equal(W0, W1)


def test_train_deterministic_per_seed():
    matrix = make_training_matrix()
    config = pc.TrainConfig(epochs=3, seed=4)
    model_a, hist_a = pc.train_mlp(matrix, "v1", config)
    model_b, hist_b = pc.train_mlp(matrix, "v1", config)
    model_c, _ = pc.train_mlp(matrix, "v1", pc.TrainConfig(epochs=3, seed=5))
    assert hist_a == hist_b
    for (Wa, ba), (Wb, bb) in zip(model_a.layers, model_b.layers):
        assert np.array_equal(Wa, Wb)
        assert np.array_equal(ba, bb)
    assert not np.array_equal(model_a.layers[0][0], model_c.layers[0][0])


def test_train_history_and_checkpoint_consistency():
    matrix = make_training_matrix()
    model, history = pc.train_mlp(matrix, "v1", pc.TrainConfig(epochs=8, seed=2))
    assert len(history["train"]) == len(history["validation"]) == 8
    best = history["best_epoch"]
    assert best == int(np.argmin(history["validation"])) + 1
    # restored parameters reproduce the best recorded validation loss
    va = matrix.indices_of("validation")
    X_va = model.design_rows(matrix, va)
    val = mlp_loss(model.layers, X_va, matrix.targets[va])
    assert val == pytest.approx(history["validation"][best - 1], rel=1e-12)


def test_train_keep_last_epoch():
    matrix = make_training_matrix()
    model, history = pc.train_mlp(
        matrix, "v1", pc.TrainConfig(epochs=6, seed=2, keep_last_epoch=True)
    )
    assert history["best_epoch"] is None
    va = matrix.indices_of("validation")
    X_va = model.design_rows(matrix, va)
    val = mlp_loss(model.layers, X_va, matrix.targets[va])
    assert val == pytest.approx(history["validation"][-1], rel=1e-12)


def test_train_scales_lags_with_training_statistics():
    matrix = make_training_matrix()
    model, _ = pc.train_mlp(matrix, "v1", pc.TrainConfig(epochs=1, seed=0))
    train = matrix.indices_of("train")
    assert np.allclose(model.lag_means, matrix.lag_values[train].mean(axis=0))
    assert np.allclose(model.lag_stds, matrix.lag_values[train].std(axis=0))


def test_train_divergence_reported_with_epoch():
    matrix = make_training_matrix()
    config = pc.TrainConfig(epochs=4, seed=0, step_size=1e150)
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(pc.DivergenceError, match="epoch"):
            pc.train_mlp(matrix, "v1", config)


def test_train_requires_split_labels():
    matrix = make_training_matrix()
    unlabeled = pc.FeatureMatrix(
        spec=matrix.spec,
        timestamps=matrix.timestamps,
        targets=matrix.targets,
        lag_values=matrix.lag_values,
        dow=matrix.dow,
        month=matrix.month,
        hour=matrix.hour,
    )
    with pytest.raises(pc.DataError, match="split"):
        pc.train_mlp(unlabeled, "v1", pc.TrainConfig(epochs=1))


def test_train_learns_a_linear_law():
    # with dropout off, a short run should land close to the noise floor
    # and far below the variance of the raw targets
    matrix = make_training_matrix(n=600, seed=8)
    config = pc.TrainConfig(epochs=150, seed=3, dropout_rate=0.0)
    model, history = pc.train_mlp(matrix, "v3", config)
    test_idx = matrix.indices_of("test")
    preds = model.predict_rows(matrix, test_idx)
    rmse = float(np.sqrt(np.mean((preds - matrix.targets[test_idx]) ** 2)))
    target_sd = float(matrix.targets[test_idx].std())
    assert rmse < 0.2 * target_sd
    assert history["validation"][-1] < history["validation"][0] / 10


def test_variant_width_enforced():
    with pytest.raises(ValueError, match="hidden widths"):
        pc.MlpModel(
            variant="v1",
            spec=pc.FeatureSpec.for_variant("v1"),
            layers=init_layers([10, 64, 32, 1], 0),
            lag_means=np.zeros(3),
            lag_stds=np.ones(3),
            seed=0,
        )
    with pytest.raises(ValueError, match="input width"):
        pc.MlpModel(
            variant="v2",
            spec=pc.FeatureSpec.for_variant("v2"),
            layers=init_layers([10, 100, 50, 1], 0),
            lag_means=np.zeros(3),
            lag_stds=np.ones(3),
            seed=0,
        )
