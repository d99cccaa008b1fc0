import numpy as np
import pytest
from sklearn.exceptions import NotFittedError

from dqrc.readout import LinearReadout, capacity, mse, train


def design_matrix(rng, rows=60, cols=6):
    X = rng.standard_normal((rows, cols))
    X[:, -1] = 1.0  # bias column
    return X


class TestTraining:
    def test_exactly_representable_target(self):
        rng = np.random.default_rng(0)
        X = design_matrix(rng)
        model = train(X, X[:, 2])
        assert abs(model.weights_[2] - 1.0) < 1e-10
        others = np.delete(model.weights_, 2)
        assert np.max(np.abs(others)) < 1e-10
        assert model.residual_ < 1e-10

    def test_constant_target_absorbed_by_bias(self):
        rng = np.random.default_rng(1)
        X = design_matrix(rng)
        model = train(X, np.full(len(X), 0.7))
        assert abs(model.weights_[-1] - 0.7) < 1e-10
        assert np.max(np.abs(model.weights_[:-1])) < 1e-10

    def test_plant_and_recover(self):
        rng = np.random.default_rng(2)
        X = design_matrix(rng, rows=300)
        w = rng.standard_normal(X.shape[1])
        y = X @ w + 1e-8 * rng.standard_normal(300)
        model = train(X, y)
        assert np.max(np.abs(model.weights_ - w)) < 1e-6

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            train(np.zeros((0, 3)), np.zeros(0))

    def test_row_mismatch_rejected(self):
        with pytest.raises(ValueError):
            train(np.zeros((5, 3)), np.zeros(4))

    def test_ridge_shrinks_weights(self):
        rng = np.random.default_rng(3)
        X = design_matrix(rng)
        y = rng.standard_normal(len(X))
        plain = LinearReadout().fit(X, y)
        ridged = LinearReadout(ridge=10.0).fit(X, y)
        assert np.linalg.norm(ridged.weights_) < np.linalg.norm(plain.weights_)


class TestPrediction:
    def test_zero_weights(self):
        model = LinearReadout()
        model.weights_ = np.zeros(4)
        model.rcond_ = model.rcond
        model.residual_ = 0.0
        assert np.all(model.predict(np.ones((3, 4))) == 0.0)

    def test_single_identity_feature(self):
        X = np.arange(5.0)[:, None]
        model = train(X, X[:, 0])
        assert np.allclose(model.predict(X), X[:, 0])

    def test_predict_consistent_with_residual(self):
        rng = np.random.default_rng(4)
        X = design_matrix(rng)
        y = rng.standard_normal(len(X))
        model = train(X, y)
        assert np.linalg.norm(model.predict(X) - y) == pytest.approx(model.residual_)

    def test_unfitted_and_mismatched(self):
        with pytest.raises(NotFittedError):
            LinearReadout().predict(np.zeros((2, 2)))
        rng = np.random.default_rng(5)
        model = train(design_matrix(rng), rng.standard_normal(60))
        with pytest.raises(ValueError):
            model.predict(np.zeros((2, 99)))

    def test_json_round_trip(self):
        rng = np.random.default_rng(6)
        X = design_matrix(rng)
        model = train(X, X[:, 0])
        text = model.to_json(feature_labels=[f"f{i}" for i in range(X.shape[1])])
        back = LinearReadout.from_json(text)
        assert np.array_equal(back.weights_, model.weights_)
        assert back.residual_ == model.residual_


class TestCapacity:
    def test_perfect(self):
        y = np.random.default_rng(7).uniform(0, 1, 100)
        assert capacity(y, y) == pytest.approx(1.0)

    def test_affine_invariance(self):
        rng = np.random.default_rng(8)
        y = rng.uniform(0, 1, 200)
        assert capacity(y, 3.2 * y + 0.5) == pytest.approx(1.0, abs=1e-12)
        assert capacity(2.0 * y - 1.0, y) == pytest.approx(1.0, abs=1e-12)

    def test_shuffled_decorrelates(self):
        rng = np.random.default_rng(9)
        y = rng.uniform(0, 1, 10000)
        shuffled = rng.permutation(y)
        assert capacity(y, shuffled) <= 0.01

    def test_degenerate_variance_is_zero(self):
        y = np.random.default_rng(10).uniform(0, 1, 50)
        assert capacity(y, np.full(50, 0.3)) == 0.0
        assert capacity(np.full(50, 0.3), y) == 0.0

    def test_bounded_by_one(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            y, p = rng.uniform(0, 1, 50), rng.uniform(0, 1, 50)
            assert 0.0 <= capacity(y, p) <= 1.0 + 1e-12

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            capacity(np.zeros(3), np.zeros(4))


class TestMse:
    def test_trivials(self):
        assert mse(np.array([1.0, 2.0]), np.array([1.0, 2.0])) == 0.0
        assert mse(np.array([0.0, 0.0]), np.array([1.0, 1.0])) == 1.0

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(12)
        y, p = rng.uniform(0, 1, 37), rng.uniform(0, 1, 37)
        acc = 0.0
        for a, b in zip(y, p):
            acc += (b - a) ** 2
        assert mse(y, p) == pytest.approx(acc / 37)


class TestOptimality:
    def test_local_optimality_of_residual(self):
        rng = np.random.default_rng(13)
        X = design_matrix(rng, rows=80, cols=5)
        y = rng.standard_normal(80)
        model = train(X, y)
        base = np.linalg.norm(X @ model.weights_ - y)
        for j in range(5):
            for delta in (1e-4, -1e-4):
                w = model.weights_.copy()
                w[j] += delta
                assert np.linalg.norm(X @ w - y) >= base - 1e-12

    def test_nested_columns_never_hurt_training_fit(self):
        rng = np.random.default_rng(14)
        X = rng.standard_normal((100, 8))
        y = rng.standard_normal(100)
        prev = -1.0
        for ncols in range(2, 9):
            model = train(X[:, :ncols], y)
            c = capacity(y, model.predict(X[:, :ncols]))
            assert c >= prev - 1e-10
            prev = c

    def test_estimator_clone_and_params(self):
        from sklearn.base import clone

        model = LinearReadout(rcond=1e-8, ridge=0.5)
        params = model.get_params()
        assert params == {"rcond": 1e-8, "ridge": 0.5}
        dup = clone(model)
        assert dup.get_params() == params
