"""Network tests: finite-difference gradient oracle, update rule, training."""

import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from thermocast.exceptions import ConfigError
from thermocast.mlp import (
    Mlp,
    MlpConfig,
    MlpForecaster,
    apply_update,
    forward,
    format_hidden_layout,
    gradient,
    init_mlp,
    loss,
    parse_hidden_layout,
    predict_window,
    train,
    validation_mae,
)
from thermocast.preprocess import PatternSet, WindowSpec, invert_difference


def random_patterns(rng, n=40, width=6, z=3, spec=None):
    spec = spec or WindowSpec(past_size=width, future_window=z)
    inputs = rng.normal(0, 1, size=(n, width))
    targets = rng.normal(0, 0.3, size=(n, z))
    anchors = rng.normal(20, 1, size=n)
    return PatternSet(inputs, targets, np.arange(n) + spec.max_past, anchors, spec)


def finite_difference_grads(net, x, target, weight_decay, step=1e-5):
    gw_fd = [np.zeros_like(w) for w in net.weights]
    gb_fd = [np.zeros_like(b) for b in net.biases]
    for arrs, outs in ((net.weights, gw_fd), (net.biases, gb_fd)):
        for layer, arr in enumerate(arrs):
            flat = arr.ravel()
            out = outs[layer].ravel()
            for i in range(flat.size):
                keep = flat[i]
                flat[i] = keep + step
                up = loss(net, forward(net, x), target, weight_decay)
                flat[i] = keep - step
                down = loss(net, forward(net, x), target, weight_decay)
                flat[i] = keep
                out[i] = (up - down) / (2 * step)
    return gw_fd, gb_fd


def max_relative_error(analytic, numeric):
    worst = 0.0
    for a, b in zip(analytic, numeric):
        scale = np.maximum(1e-6, np.maximum(np.abs(a), np.abs(b)))
        worst = max(worst, float(np.max(np.abs(a - b) / scale)))
    return worst


class TestInit:
    def test_shapes_and_bounds(self):
        config = MlpConfig(5, (8, 4), 3, ("tanh", "logistic"), seed=1)
        net = init_mlp(config)
        assert [w.shape for w in net.weights] == [(8, 5), (4, 8), (3, 4)]
        assert [b.shape for b in net.biases] == [(8,), (4,), (3,)]
        for w, (fan_out, fan_in) in zip(net.weights, [(8, 5), (4, 8), (3, 4)]):
            r = math.sqrt(6.0 / (fan_in + fan_out))
            assert np.all(np.abs(w) <= r)
        for b in net.biases:
            assert np.all(b == 0.0)

    def test_seed_reproducibility(self):
        config = MlpConfig(4, (6,), 2, ("tanh",), seed=7)
        a, b = init_mlp(config), init_mlp(config)
        for wa, wb in zip(a.weights, b.weights):
            np.testing.assert_array_equal(wa, wb)
        c = init_mlp(MlpConfig(4, (6,), 2, ("tanh",), seed=8))
        assert any(np.any(wa != wc) for wa, wc in zip(a.weights, c.weights))


class TestConfigValidation:
    def test_three_hidden_layers_rejected(self):
        with pytest.raises(ConfigError):
            MlpConfig(4, (8, 8, 8), 2, ("tanh",) * 3)

    def test_momentum_range(self):
        with pytest.raises(ConfigError):
            MlpConfig(4, (8,), 2, ("tanh",), momentum=1.0)

    def test_unknown_activation(self):
        with pytest.raises(ConfigError):
            MlpConfig(4, (8,), 2, ("relu",))

    def test_activation_count_must_match(self):
        with pytest.raises(ConfigError):
            MlpConfig(4, (8, 4), 2, ("tanh",))


class TestForwardAndLoss:
    def test_loss_hand_value(self):
        net = init_mlp(MlpConfig(2, (3,), 2, ("tanh",), seed=0))
        assert loss(net, [1.0, 1.0], [0.0, 0.0], 0.0) == pytest.approx(0.5)

    def test_penalty_counts_weights_not_biases(self):
        net = init_mlp(MlpConfig(2, (2,), 1, ("tanh",), seed=0))
        net.weights = [np.ones((2, 2)), np.ones((1, 2))]
        net.biases = [np.full(2, 100.0), np.full(1, 100.0)]
        # data term zero, penalty = 0.5 * wd * 6 ones
        value = loss(net, [1.0], [1.0], 0.1)
        assert value == pytest.approx(0.5 * 0.1 * 6.0)

    def test_batch_forward_matches_single(self):
        rng = np.random.default_rng(3)
        net = init_mlp(MlpConfig(5, (7, 3), 4, ("tanh", "logistic"), seed=3))
        X = rng.normal(size=(10, 5))
        batch = forward(net, X)
        for i in range(10):
            np.testing.assert_allclose(batch[i], forward(net, X[i]), atol=1e-12)

    def test_output_layer_is_linear(self):
        # with zero hidden weights the output equals the output bias exactly
        net = init_mlp(MlpConfig(3, (4,), 2, ("logistic",), seed=0))
        for w in net.weights:
            w[:] = 0.0
        net.biases[-1][:] = [5.0, -3.0]
        np.testing.assert_allclose(forward(net, [9.0, 9.0, 9.0]), [5.0, -3.0])


class TestGradient:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(42)
        for trial in range(20):
            n_in = int(rng.integers(2, 7))
            n_out = int(rng.integers(1, 5))
            depth = int(rng.integers(1, 3))
            hidden = tuple(int(rng.integers(2, 7)) for _ in range(depth))
            acts = tuple(rng.choice(["tanh", "logistic"], size=depth))
            wd = float(rng.choice([0.0, 1e-6, 1e-4, 1e-2]))
            config = MlpConfig(n_in, hidden, n_out, acts, weight_decay=wd, seed=trial)
            net = init_mlp(config)
            x = rng.normal(size=n_in)
            target = rng.normal(size=n_out)
            gw, gb = gradient(net, x, target, wd)
            gw_fd, gb_fd = finite_difference_grads(net, x, target, wd)
            assert max_relative_error(gw, gw_fd) < 1e-4
            assert max_relative_error(gb, gb_fd) < 1e-4

    def test_bias_gradient_has_no_decay(self):
        rng = np.random.default_rng(0)
        config = MlpConfig(3, (4,), 2, ("tanh",), seed=0)
        net = init_mlp(config)
        x = rng.normal(size=3)
        target = forward(net, x).copy()  # data term vanishes at the optimum
        gw, gb = gradient(net, x, target, 0.5)
        for layer in range(net.n_layers):
            np.testing.assert_allclose(gw[layer], 0.5 * net.weights[layer], atol=1e-12)
            np.testing.assert_allclose(gb[layer], 0.0, atol=1e-12)


class TestUpdateRule:
    def test_momentum_accumulates_previous_step(self):
        config = MlpConfig(2, (2,), 1, ("tanh",), seed=1)
        net = init_mlp(config)
        gw = [np.ones_like(w) for w in net.weights]
        gb = [np.ones_like(b) for b in net.biases]
        before = [w.copy() for w in net.weights]
        apply_update(net, gw, gb, learning_rate=0.1, momentum=0.5)
        apply_update(net, gw, gb, learning_rate=0.1, momentum=0.5)
        # steps: -0.1, then -0.1 + 0.5 * (-0.1) = -0.15
        for w, w0 in zip(net.weights, before):
            np.testing.assert_allclose(w, w0 - 0.25, atol=1e-12)

    def test_pure_decay_shrinks_weights_and_leaves_biases(self):
        rng = np.random.default_rng(5)
        config = MlpConfig(3, (4,), 2, ("tanh",), weight_decay=0.01, seed=5)
        net = init_mlp(config)
        net.biases = [rng.normal(size=b.shape) for b in net.biases]
        bias_before = [b.copy() for b in net.biases]
        for _ in range(10):
            x = rng.normal(size=3)
            target = forward(net, x).copy()  # zero data gradient at this point
            norm_before = sum(float(np.sum(w * w)) for w in net.weights)
            gw, gb = gradient(net, x, target, 0.01)
            apply_update(net, gw, gb, learning_rate=0.05, momentum=0.0)
            norm_after = sum(float(np.sum(w * w)) for w in net.weights)
            assert norm_after < norm_before
        for b, b0 in zip(net.biases, bias_before):
            np.testing.assert_array_equal(b, b0)


class TestTrain:
    def test_learns_a_simple_mapping(self):
        rng = np.random.default_rng(11)
        inputs = rng.uniform(-1, 1, size=(60, 3))
        targets = np.stack([0.5 * inputs[:, 0], -0.25 * inputs[:, 1]], axis=1)
        spec = WindowSpec(past_size=3, future_window=2)
        ps = PatternSet(inputs, targets, np.arange(60) + 3, np.full(60, 20.0), spec)
        config = MlpConfig(3, (8,), 2, ("tanh",), learning_rate=0.05, momentum=0.0,
                           weight_decay=0.0, epochs=80, patience=80, seed=11)
        net, report = train(init_mlp(config), ps, None, config)
        assert report.train_loss[-1] < 0.25 * report.train_loss[0]

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(13)
        ps = random_patterns(rng)
        val = random_patterns(rng, n=20)
        config = MlpConfig(6, (5,), 3, ("tanh",), epochs=5, patience=10, seed=21)
        net_a, _ = train(init_mlp(config), ps, val, config)
        net_b, _ = train(init_mlp(config), ps, val, config)
        for wa, wb in zip(net_a.weights, net_b.weights):
            np.testing.assert_array_equal(wa, wb)

    def test_best_epoch_tracks_validation_minimum(self):
        rng = np.random.default_rng(17)
        ps = random_patterns(rng, n=50)
        val = random_patterns(rng, n=25)
        config = MlpConfig(6, (5,), 3, ("tanh",), learning_rate=0.02,
                           epochs=30, patience=30, seed=2)
        _, report = train(init_mlp(config), ps, val, config)
        assert report.best_epoch == int(np.argmin(report.val_mae))

    def test_zero_patience_stops_on_first_stall(self):
        rng = np.random.default_rng(19)
        ps = random_patterns(rng)
        val = random_patterns(rng, n=10)
        config = MlpConfig(6, (5,), 3, ("tanh",), learning_rate=1e-300,
                           epochs=50, patience=0, seed=3)
        _, report = train(init_mlp(config), ps, val, config)
        # epoch 0 improves on infinity, epoch 1 cannot improve on it
        assert report.epochs_run == 2
        assert report.stopping_reason == "patience"

    def test_divergence_reported_and_best_restored(self):
        rng = np.random.default_rng(23)
        ps = random_patterns(rng)
        config = MlpConfig(6, (5,), 3, ("tanh",), learning_rate=1e12,
                           epochs=50, patience=50, seed=4)
        reference = init_mlp(config)
        net, report = train(init_mlp(config), ps, None, config)
        assert report.stopping_reason == "diverged"
        for w in net.weights:
            assert np.all(np.isfinite(w))

    def test_mismatched_widths_rejected(self):
        rng = np.random.default_rng(29)
        ps = random_patterns(rng, width=6)
        config = MlpConfig(7, (5,), 3, ("tanh",), epochs=1)
        with pytest.raises(ConfigError):
            train(init_mlp(config), ps, None, config)


class TestPrediction:
    def test_predict_window_composes_forward_and_rebuild(self):
        net = init_mlp(MlpConfig(4, (5,), 3, ("tanh",), seed=6))
        x = np.array([0.1, -0.2, 0.3, 0.0])
        got = predict_window(net, x, 19.5)
        np.testing.assert_allclose(got, invert_difference(forward(net, x), 19.5), atol=1e-12)

    def test_validation_mae_is_absolute_scale(self):
        # network predicting all-zero deltas scores the MAE of a flat forecast
        net = init_mlp(MlpConfig(2, (3,), 2, ("tanh",), seed=0))
        for w in net.weights:
            w[:] = 0.0
        spec = WindowSpec(past_size=2, future_window=2)
        inputs = np.zeros((1, 2))
        targets = np.array([[1.0, -0.5]])  # absolute targets: 21.0, 20.5
        ps = PatternSet(inputs, targets, np.array([2]), np.array([20.0]), spec)
        assert validation_mae(net, ps) == pytest.approx((1.0 + 0.5) / 2)


class TestLayoutStrings:
    def test_parse_examples(self):
        assert parse_hidden_layout("24t-16t") == ((24, 16), ("tanh", "tanh"))
        assert parse_hidden_layout("16l-8l") == ((16, 8), ("logistic", "logistic"))
        assert parse_hidden_layout("8t") == ((8,), ("tanh",))

    def test_format_round_trip(self):
        sizes, acts = parse_hidden_layout("24t-8l")
        assert format_hidden_layout(sizes, acts) == "24t-8l"

    def test_bad_layouts_rejected(self):
        for bad in ("", "24", "t8", "8x", "8t--4t"):
            with pytest.raises(ConfigError):
                parse_hidden_layout(bad)


class TestForecasterApi:
    def test_fit_predict_shapes(self):
        rng = np.random.default_rng(31)
        ps = random_patterns(rng, n=50)
        val = random_patterns(rng, n=20)
        model = MlpForecaster(hidden=(6,), epochs=5, patience=5, seed=1)
        model.fit(ps, val)
        preds = model.predict(ps.inputs)
        assert preds.shape == ps.targets.shape
        absolute = model.predict_absolute(ps)
        np.testing.assert_allclose(absolute, invert_difference(preds, ps.anchors), atol=1e-12)

    def test_layout_string_architecture(self):
        rng = np.random.default_rng(37)
        ps = random_patterns(rng, n=30)
        model = MlpForecaster(hidden="5t-4l", epochs=2, patience=2, seed=1).fit(ps)
        assert [w.shape[0] for w in model.net_.weights] == [5, 4, 3]
        assert model.config_.activations == ("tanh", "logistic")

    def test_unfitted_predict_raises(self):
        with pytest.raises(NotFittedError):
            MlpForecaster().predict(np.zeros((2, 3)))

    def test_sklearn_clone_compatible(self):
        model = MlpForecaster(hidden=(9,), learning_rate=0.003, seed=5)
        twin = clone(model)
        assert twin.get_params() == model.get_params()
