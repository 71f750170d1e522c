from datetime import date, timedelta

import numpy as np
import pytest

from thinmkt.core import BlockTimestamp, DriverMatrix, PriceSeries
from thinmkt.errors import DataError, FitError
from thinmkt.kernel_ml.ann import (AnnConfig, AnnModel, fit_ann, forward, loss_and_grad, pack,
                                   predict_ann)
from thinmkt.kernel_ml.features import (DesignMatrix, block_effect, build_features,
                                        raw_features, standardize, training_days)
from thinmkt.kernel_ml.svr import SvrConfig, SvrModel, decision_function, fit_svr, kernel_matrix, \
    predict_svr

D0 = date(2016, 3, 1)


def prices(days, seed=0, const=None):
    rng = np.random.default_rng(seed)
    v = np.full(days * 96, const) if const is not None else 100 + rng.normal(0, 5, days * 96)
    return PriceSeries("E1", BlockTimestamp(D0, 1), v)


def design(X, y, names=None):
    names = names or [f"x{i}" for i in range(X.shape[1])]
    return standardize(np.asarray(X, float), np.asarray(y, float), names)


def fd_gradient(theta, X, y, h, step=1e-6):
    g = np.empty_like(theta)
    for i in range(theta.size):
        up, dn = theta.copy(), theta.copy()
        up[i] += step
        dn[i] -= step
        g[i] = (loss_and_grad(up, X, y, h)[0] - loss_and_grad(dn, X, y, h)[0]) / (2 * step)
    return g


def kkt_residual(model: SvrModel, d):
    """Worst violation of the epsilon-SVR optimality conditions on the training set."""
    Z, y = d.rows, d.scaled_targets
    beta = np.zeros(len(y))
    for sv, c in zip(model.support_vectors, model.dual_coef):
        beta[np.flatnonzero(np.all(Z == sv, axis=1))] = c
    r = y - decision_function(model, Z)
    C, eps = model.C, model.epsilon
    worst = 0.0
    for b, ri in zip(beta, r):
        if b == 0:
            v = max(abs(ri) - eps, 0.0)
        elif b >= C:
            v = max(eps - ri, 0.0)
        elif b <= -C:
            v = max(ri + eps, 0.0)
        elif b > 0:
            v = abs(ri - eps)
        else:
            v = abs(ri + eps)
        worst = max(worst, v)
    return worst


class TestFeatures:
    def test_block_effect_24(self):
        s, c = block_effect(24)
        assert s == pytest.approx(1.0) and c == pytest.approx(0.0, abs=1e-15)

    def test_45_day_window_sample_count(self):
        d = build_features(prices(45))
        assert len(d) == 42 * 96 and d.feature_names == ("lag1", "lag2", "lag3")

    def test_lags_are_same_block_previous_days(self):
        s = prices(5)
        day = D0 + timedelta(days=4)
        X, y, names = raw_features(s, [day])
        for k in (1, 2, 3):
            assert np.array_equal(X[:, k - 1], s.day(day - timedelta(days=k)))
        assert np.array_equal(y, s.day(day))

    def test_standardized_columns(self):
        d = build_features(prices(20))
        assert np.all(np.abs(d.rows.mean(axis=0)) < 1e-10)
        assert np.all(np.abs(d.rows.std(axis=0) - 1) < 1e-10)

    def test_constant_prices_keep_block_effect(self):
        s = prices(10, const=50.0)
        gap = DriverMatrix(BlockTimestamp(D0, 1), ("ds_gap",), np.full((10 * 96, 1), 3.0))
        with pytest.warns(UserWarning, match="zero-variance"):
            d = build_features(s, "ds", extras=gap)
        assert d.feature_names == ("block_sin", "block_cos")

    def test_ds_reads_previous_day_rows(self):
        s = prices(6)
        g = np.arange(6 * 96, dtype=float)[:, None]
        gap = DriverMatrix(BlockTimestamp(D0, 1), ("ds_gap",), g)
        day = D0 + timedelta(days=5)
        X, _, names = raw_features(s, [day], "ds", extras=gap)
        assert np.array_equal(X[:, names.index("ds_gap")], g[4 * 96:5 * 96, 0])

    def test_missing_lag(self):
        with pytest.raises(DataError, match="lag-3"):
            raw_features(prices(3), [D0 + timedelta(days=2)])

    def test_training_days(self):
        assert training_days(prices(10))[0] == D0 + timedelta(days=3)

    def test_transform_matches_training_rows(self):
        s = prices(12)
        days = training_days(s)
        X, y, names = raw_features(s, days)
        d = standardize(X, y, names)
        assert np.allclose(d.transform(X, names), d.rows)


class TestAnn:
    @pytest.mark.parametrize("seed", range(10))
    def test_backprop_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        n, f, h = 40, 3, 5
        X, y = rng.normal(size=(n, f)), rng.normal(size=n)
        theta = rng.normal(0, 0.7, h * f + 2 * h + 1)
        g = loss_and_grad(theta, X, y, h)[1]
        fd = fd_gradient(theta, X, y, h)
        rel = np.abs(g - fd) / np.maximum(np.abs(g) + np.abs(fd), 1e-8)
        assert rel.max() < 1e-4

    def test_zero_target(self):
        rng = np.random.default_rng(1)
        m = fit_ann(design(rng.normal(size=(200, 2)), np.zeros(200)))
        Z = rng.normal(size=(20, 2))
        assert np.all(np.abs(predict_ann(m, Z)) < 1e-3)

    def test_linear_oracle(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(600, 2))
        y = 2 * X[:, 0] - X[:, 1]
        d = design(X[:500], y[:500])
        m = fit_ann(d, AnnConfig(epochs=3000, learning_rate=0.5))
        z_test = d.transform(X[500:], d.feature_names)
        out, _ = forward(m.W1, m.b1, m.w2, m.b2, z_test)
        y_test = (y[500:] - d.target_mean) / d.target_sd
        assert np.mean((out - y_test) ** 2) < 1e-2

    def test_loss_non_increasing(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(300, 3))
        m = fit_ann(design(X, np.sin(X[:, 0]) + X[:, 1] ** 2), AnnConfig(learning_rate=5.0))
        assert np.all(np.diff(m.loss_trace) <= 0)
        assert m.loss_trace[-1] <= m.loss_trace[0]

    def test_deterministic(self):
        rng = np.random.default_rng(4)
        d = design(rng.normal(size=(100, 2)), rng.normal(size=100))
        a, b = fit_ann(d, AnnConfig(epochs=50)), fit_ann(d, AnnConfig(epochs=50))
        assert np.array_equal(pack(a.W1, a.b1, a.w2, a.b2), pack(b.W1, b.b1, b.w2, b.b2))

    def test_zero_weight_net_predicts_output_bias(self):
        m = AnnModel(np.zeros((3, 2)), np.zeros(3), np.zeros(3), 4.0)
        assert np.all(predict_ann(m, np.ones((5, 2))) == 4.0)

    def test_single_unit_zero_output_weight(self):
        m = AnnModel(np.ones((1, 2)), np.ones(1), np.zeros(1), 1.5)
        assert np.all(predict_ann(m, np.random.default_rng(0).normal(size=(4, 2))) == 1.5)

    def test_manual_forward_pass(self):
        W1 = np.array([[0.5, -1.0], [2.0, 0.25]])
        m = AnnModel(W1, np.array([0.1, -0.2]), np.array([1.5, -0.5]), 0.3,
                     target_mean=10.0, target_sd=2.0)
        x = np.array([[1.0, 2.0]])
        h1, h2 = np.tanh(0.5 - 2.0 + 0.1), np.tanh(2.0 + 0.5 - 0.2)
        expected = (1.5 * h1 - 0.5 * h2 + 0.3) * 2.0 + 10.0
        assert predict_ann(m, x)[0] == pytest.approx(expected)

    def test_output_floored_at_zero(self):
        m = AnnModel(np.zeros((1, 1)), np.zeros(1), np.zeros(1), -3.0)
        assert predict_ann(m, np.ones((2, 1))).tolist() == [0.0, 0.0]

    def test_empty_design(self):
        empty = DesignMatrix(np.zeros((0, 2)), np.zeros(0), ("a", "b"), np.zeros(2), np.ones(2))
        with pytest.raises(FitError):
            fit_ann(empty)


class TestSvr:
    def test_noiseless_line(self):
        x = np.linspace(0, 1, 60)
        d = design(x[:, None], 3 * x + 1)
        m = fit_svr(d, SvrConfig(kernel="linear", C=10, epsilon=0.01))
        z = d.transform(np.linspace(0, 1, 25)[:, None], d.feature_names)
        assert np.max(np.abs(predict_svr(m, z) - (3 * np.linspace(0, 1, 25) + 1))) < 0.05

    def test_constant_targets(self):
        rng = np.random.default_rng(5)
        d = design(rng.normal(size=(50, 2)), np.full(50, 7.0))
        m = fit_svr(d, SvrConfig(epsilon=0.1))
        assert np.allclose(predict_svr(m, rng.normal(size=(5, 2))), 7.0)

    @pytest.mark.parametrize("kernel", ["radial", "linear"])
    @pytest.mark.parametrize("C", [0.1, 1.0, 10.0])
    def test_box_and_kkt(self, kernel, C):
        rng = np.random.default_rng(6)
        X = rng.normal(size=(150, 3))
        y = np.sin(X[:, 0]) + 0.5 * X[:, 1] + rng.normal(0, 0.3, 150)
        d = design(X, y)
        m = fit_svr(d, SvrConfig(kernel=kernel, C=C))
        assert m.converged and m.dual_coef.size >= 1
        assert np.all(np.abs(m.dual_coef) <= C)
        assert abs(m.dual_coef.sum()) < 1e-8
        assert kkt_residual(m, d) <= 1e-3

    def test_linear_kernel_equals_weight_vector(self):
        rng = np.random.default_rng(7)
        d = design(rng.normal(size=(80, 3)), rng.normal(size=80))
        m = fit_svr(d, SvrConfig(kernel="linear"))
        z = rng.normal(size=(10, 3))
        assert np.allclose(decision_function(m, z), z @ m.weights + m.bias)

    def test_radial_at_lone_support_vector(self):
        sv = np.array([[0.3, -0.2]])
        m = SvrModel("radial", 0.5, 1.0, 0.1, sv, np.array([0.7]), 0.25)
        assert decision_function(m, sv)[0] == pytest.approx(0.95)

    def test_empty_query(self):
        m = SvrModel("linear", 1.0, 1.0, 0.1, np.zeros((1, 2)), np.array([0.5]), 0.0)
        assert predict_svr(m, np.zeros((0, 2))).size == 0

    def test_kernel_matrix_radial_diagonal(self):
        A = np.random.default_rng(8).normal(size=(4, 3))
        assert np.allclose(np.diag(kernel_matrix(A, A, "radial", 0.3)), 1.0)

    def test_bad_parameters(self):
        d = design(np.ones((3, 1)) * np.arange(3)[:, None], np.arange(3.0))
        with pytest.raises(ValueError):
            fit_svr(d, SvrConfig(C=0))
        with pytest.raises(ValueError):
            fit_svr(d, SvrConfig(kernel="poly"))
        with pytest.raises(ValueError):
            fit_svr(d, SvrConfig(gamma=-1.0))

    def test_deterministic(self):
        rng = np.random.default_rng(9)
        d = design(rng.normal(size=(100, 2)), rng.normal(size=100))
        a, b = fit_svr(d), fit_svr(d)
        assert np.array_equal(a.dual_coef, b.dual_coef) and a.bias == b.bias
