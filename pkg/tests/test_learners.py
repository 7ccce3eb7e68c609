import numpy as np
import pytest

from featimp import (Featureless, KnnRegressor, LinearModel, RegressionForest,
                     RegressionTree, RidgeModel, Task, fit_on_task, make_learner,
                     predict_on_task)


def linear_task(n=200, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 4))
    y = 2.0 * X[:, 0] + X[:, 2]  # exact linear DGP, no noise
    return Task("lin", X, ["x1", "x2", "x3", "x4"], y)


class TestLinear:
    def test_recovers_exact_coefficients(self):
        t = linear_task()
        m = LinearModel().fit(t.X(), t.target())
        np.testing.assert_allclose(m.coef_, [2, 0, 1, 0], atol=1e-8)
        assert abs(m.intercept_) < 1e-8
        assert not m.degenerate_

    def test_duplicated_column_falls_back_to_ridge(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=100)
        X = np.column_stack([x, x])
        y = 3.0 * x + rng.normal(size=100) * 0.1
        m = LinearModel().fit(X, y)
        assert m.degenerate_
        Xnew = np.column_stack([rng.normal(size=20)] * 2)
        preds = m.predict(Xnew)
        assert np.all(np.isfinite(preds))
        # min-norm (pseudo-inverse) reference on the same augmented design
        A = np.column_stack([np.ones(100), X])
        sol = np.linalg.pinv(A) @ y
        ref = np.column_stack([np.ones(20), Xnew]) @ sol
        np.testing.assert_allclose(preds, ref, atol=1e-6)

    def test_never_worse_than_featureless_on_train(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(80, 3))
        y = rng.normal(size=80)
        lin = LinearModel().fit(X, y).predict(X)
        base = Featureless().fit(X, y).predict(X)
        assert np.mean((y - lin) ** 2) <= np.mean((y - base) ** 2) + 1e-12


class TestFeatureless:
    def test_predicts_training_mean(self):
        X = np.zeros((3, 2))
        m = Featureless().fit(X, np.array([1.0, 2.0, 3.0]))
        np.testing.assert_array_equal(m.predict(np.zeros((5, 2))), np.full(5, 2.0))


class TestTree:
    def test_depth_zero_is_featureless(self):
        t = linear_task()
        stump = RegressionTree(max_depth=0).fit(t.X(), t.target())
        np.testing.assert_array_equal(stump.predict(t.X()),
                                      np.full(t.n, t.target().mean()))

    def test_fits_strong_signal(self):
        t = linear_task(n=500)
        m = RegressionTree(max_depth=8).fit(t.X(), t.target())
        resid = t.target() - m.predict(t.X())
        assert np.mean(resid**2) < 0.25 * np.var(t.target())

    def test_deterministic(self):
        t = linear_task(n=300, seed=3)
        a = RegressionTree().fit(t.X(), t.target()).predict(t.X())
        b = RegressionTree().fit(t.X(), t.target()).predict(t.X())
        np.testing.assert_array_equal(a, b)

    def test_min_node_size_respected(self):
        t = linear_task(n=100, seed=4)
        m = RegressionTree(max_depth=None, min_node_size=20).fit(t.X(), t.target())
        feat, thr, left, right, value = m.tree_
        # count samples reaching each leaf
        node = np.zeros(t.n, dtype=int)
        for _ in range(64):
            internal = feat[node] >= 0
            if not internal.any():
                break
            idx = np.where(internal)[0]
            go_left = t.X()[idx, feat[node[idx]]] <= thr[node[idx]]
            node[idx] = np.where(go_left, left[node[idx]], right[node[idx]])
        _, counts = np.unique(node, return_counts=True)
        assert counts.min() >= 20


class TestForest:
    def test_single_tree_no_bootstrap_equals_cart(self):
        t = linear_task(n=250, seed=5)
        forest = RegressionForest(n_trees=1, mtry=4, bootstrap=False,
                                  random_state=9).fit(t.X(), t.target())
        cart = RegressionTree(max_depth=None, min_node_size=5).fit(t.X(), t.target())
        np.testing.assert_array_equal(forest.predict(t.X()), cart.predict(t.X()))

    def test_prediction_is_mean_of_trees(self):
        t = linear_task(n=200, seed=6)
        m = RegressionForest(n_trees=12, random_state=1).fit(t.X(), t.target())
        per_tree = m.predict_per_tree(t.X())
        assert per_tree.shape == (12, t.n)
        np.testing.assert_array_equal(m.predict(t.X()), per_tree.mean(axis=0))

    def test_bit_identical_refits(self):
        t = linear_task(n=200, seed=7)
        a = RegressionForest(n_trees=15, random_state=3).fit(t.X(), t.target())
        b = RegressionForest(n_trees=15, random_state=3).fit(t.X(), t.target())
        np.testing.assert_array_equal(a.predict(t.X()), b.predict(t.X()))

    def test_thread_count_does_not_change_fit(self):
        t = linear_task(n=200, seed=8)
        a = RegressionForest(n_trees=16, random_state=3, n_threads=1).fit(t.X(), t.target())
        b = RegressionForest(n_trees=16, random_state=3, n_threads=4).fit(t.X(), t.target())
        np.testing.assert_array_equal(a.predict(t.X()), b.predict(t.X()))

    def test_default_mtry(self):
        t = linear_task()
        m = RegressionForest(n_trees=2, random_state=0).fit(t.X(), t.target())
        assert m.mtry_ == 2  # ceil(4 / 3)


class TestKnn:
    def test_k_equal_n_train_reduces_to_featureless(self):
        t = linear_task(n=50, seed=9)
        m = KnnRegressor(k=50).fit(t.X(), t.target())
        np.testing.assert_allclose(m.predict(t.X()[:10]),
                                   np.full(10, t.target().mean()), rtol=1e-12)

    def test_constant_feature_contributes_no_distance(self):
        rng = np.random.default_rng(10)
        X = np.column_stack([rng.normal(size=60), np.full(60, 7.0)])
        y = X[:, 0]
        m = KnnRegressor(k=3).fit(X, y)
        Xq = np.column_stack([X[:5, 0], np.full(5, -100.0)])
        base = KnnRegressor(k=3).fit(X[:, :1], y).predict(X[:5, :1])
        np.testing.assert_allclose(m.predict(Xq), base)


class TestCatalog:
    def test_registry_and_param_validation(self):
        assert isinstance(make_learner("ridge", lam=0.5), RidgeModel)
        with pytest.raises(ValueError, match="unknown learner"):
            make_learner("xgboost")
        with pytest.raises(ValueError, match="invalid forest hyperparameters"):
            make_learner("forest", bad_key=3)
        with pytest.raises(ValueError, match="lam must be >= 0"):
            make_learner("ridge", lam=-1).fit(np.ones((3, 1)), np.ones(3))

    def test_empty_training_data_rejected(self):
        with pytest.raises(ValueError, match="training data is empty"):
            LinearModel().fit(np.empty((0, 2)), np.empty(0))

    def test_predict_on_task_missing_feature(self, tiny_task):
        m = fit_on_task(LinearModel(), tiny_task, tiny_task.row_ids)
        reduced = tiny_task.view(features=["a"])
        with pytest.raises(ValueError, match="missing model features.*'b'"):
            predict_on_task(m, reduced, reduced.row_ids)

    def test_predict_on_task_reorders_by_name(self, tiny_task):
        m = fit_on_task(LinearModel(), tiny_task, tiny_task.row_ids)
        # same data with swapped column order must give identical predictions
        swapped = Task("sw", tiny_task.X()[:, [1, 0]], ["b", "a"],
                       tiny_task.target(), row_ids=tiny_task.row_ids)
        a = predict_on_task(m, tiny_task, tiny_task.row_ids).response
        b = predict_on_task(m, swapped, swapped.row_ids).response
        np.testing.assert_array_equal(a, b)
