"""Built-in regression learners with a uniform fit/predict contract.

All learners are deterministic given (hyperparameters, data, random_state).
The catalog is intentionally small and self-contained: a featureless
baseline, least squares with a ridge fallback, ridge, a CART-style
regression tree, a bagged forest of such trees, and k-nearest neighbors.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, clone

from ._tree import grow_tree, predict_tree
from .rng import substream
from .task import Prediction, Task

_DUMMY_POOL = np.zeros((1, 1), dtype=np.int64)


class _RegressorBase(RegressorMixin, BaseEstimator):
    def _start_fit(self, X, y, feature_names):
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError("X must be 2-d")
        if X.shape[0] == 0:
            raise ValueError("training data is empty")
        if y.shape != (X.shape[0],):
            raise ValueError("X and y have inconsistent lengths")
        self.n_features_in_ = X.shape[1]
        if feature_names is not None:
            self.feature_names_in_ = tuple(feature_names)
        return X, y

    def _check_X(self, X):
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"expected {self.n_features_in_} features, got {X.shape[1] if X.ndim == 2 else '?'}")
        return X


class Featureless(_RegressorBase):
    """Predicts the training-target mean, ignoring all features."""

    def fit(self, X, y, feature_names=None):
        _, y = self._start_fit(X, y, feature_names)
        self.mean_ = float(np.mean(y))
        return self

    def predict(self, X):
        X = self._check_X(X)
        return np.full(X.shape[0], self.mean_)


def _ridge_solve(X, y, lam):
    """Ridge with unpenalized intercept via the centered normal equations."""
    xm = X.mean(axis=0)
    ym = float(np.mean(y))
    Xc = X - xm
    G = Xc.T @ Xc + lam * np.eye(X.shape[1])
    try:
        coef = np.linalg.solve(G, Xc.T @ (y - ym))
    except np.linalg.LinAlgError:
        coef = np.linalg.lstsq(G, Xc.T @ (y - ym), rcond=None)[0]
    return coef, ym - float(xm @ coef)


class LinearModel(_RegressorBase):
    """Ordinary least squares with intercept.

    Solved by SVD (rank-revealing); on rank deficiency the fit falls back
    to ridge with lambda = 1e-8 and sets ``degenerate_``.
    """

    def fit(self, X, y, feature_names=None):
        X, y = self._start_fit(X, y, feature_names)
        A = np.column_stack([np.ones(X.shape[0]), X])
        sol, _, rank, _ = np.linalg.lstsq(A, y, rcond=None)
        self.degenerate_ = rank < A.shape[1]
        if self.degenerate_:
            self.coef_, self.intercept_ = _ridge_solve(X, y, 1e-8)
        else:
            self.intercept_ = float(sol[0])
            self.coef_ = sol[1:]
        return self

    def predict(self, X):
        X = self._check_X(X)
        return X @ self.coef_ + self.intercept_


class RidgeModel(_RegressorBase):
    """L2-regularized least squares; the intercept is not penalized."""

    def __init__(self, lam=1e-3):
        self.lam = lam

    def fit(self, X, y, feature_names=None):
        if self.lam < 0:
            raise ValueError(f"lam must be >= 0, got {self.lam!r}")
        X, y = self._start_fit(X, y, feature_names)
        self.coef_, self.intercept_ = _ridge_solve(X, y, float(self.lam))
        return self

    def predict(self, X):
        X = self._check_X(X)
        return X @ self.coef_ + self.intercept_


class RegressionTree(_RegressorBase):
    """Greedy variance-reduction CART for regression.

    Thresholds sit at midpoints of sorted unique values; equal-gain ties
    resolve to the lowest feature index, then the lowest threshold.
    min_node_size is the minimum number of observations in each child.
    """

    def __init__(self, max_depth=8, min_node_size=5):
        self.max_depth = max_depth
        self.min_node_size = min_node_size

    def fit(self, X, y, feature_names=None):
        X, y = self._start_fit(X, y, feature_names)
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0 or None")
        if self.min_node_size < 1:
            raise ValueError("min_node_size must be >= 1")
        depth = -1 if self.max_depth is None else int(self.max_depth)
        self.tree_ = grow_tree(X, y, X.shape[1], int(self.min_node_size),
                               depth, _DUMMY_POOL)
        return self

    def predict(self, X):
        X = self._check_X(X)
        return predict_tree(*self.tree_, X)


class RegressionForest(_RegressorBase):
    """Bagged regression trees with per-split feature subsampling.

    Each tree draws a bootstrap sample (n with replacement) and considers
    mtry features per split (default ceil(p / 3)). Tree t uses the RNG
    substream derived from (random_state, t), so fits are reproducible
    and independent of the number of worker threads.
    """

    def __init__(self, n_trees=500, mtry=None, min_node_size=5, max_depth=None,
                 bootstrap=True, random_state=None, n_threads=1):
        self.n_trees = n_trees
        self.mtry = mtry
        self.min_node_size = min_node_size
        self.max_depth = max_depth
        self.bootstrap = bootstrap
        self.random_state = random_state
        self.n_threads = n_threads

    def fit(self, X, y, feature_names=None):
        X, y = self._start_fit(X, y, feature_names)
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        n, p = X.shape
        mtry = math.ceil(p / 3) if self.mtry is None else int(self.mtry)
        if not 1 <= mtry <= p:
            raise ValueError(f"mtry must be in [1, {p}], got {mtry}")
        self.mtry_ = mtry
        depth = -1 if self.max_depth is None else int(self.max_depth)

        def build(t):
            rng = substream(self.random_state, t)
            if self.bootstrap:
                rows = rng.integers(0, n, n)
                Xt, yt = X[rows], y[rows]
            else:
                Xt, yt = X, y
            if mtry < p:
                pool = rng.integers(0, 1 << 62, size=(2 * n + 1, mtry))
            else:
                pool = _DUMMY_POOL
            return grow_tree(Xt, yt, mtry, int(self.min_node_size), depth, pool)

        if self.n_threads and self.n_threads > 1:
            with ThreadPoolExecutor(max_workers=self.n_threads) as ex:
                self.trees_ = list(ex.map(build, range(self.n_trees)))
        else:
            self.trees_ = [build(t) for t in range(self.n_trees)]
        return self

    def predict_per_tree(self, X):
        """(n_trees, n) matrix of individual tree predictions."""
        X = self._check_X(X)
        return np.stack([predict_tree(*t, X) for t in self.trees_])

    def predict(self, X):
        return self.predict_per_tree(X).mean(axis=0)


class KnnRegressor(_RegressorBase):
    """k-nearest-neighbor mean over a standardized training matrix.

    Features are scaled by training mean/sd; a zero-sd feature contributes
    zero distance. Neighbor ties resolve toward lower training row index.
    """

    def __init__(self, k=10):
        self.k = k

    def fit(self, X, y, feature_names=None):
        X, y = self._start_fit(X, y, feature_names)
        if self.k < 1:
            raise ValueError("k must be >= 1")
        self.mean_ = X.mean(axis=0)
        sd = X.std(axis=0, ddof=0)
        self.scale_ = np.where(sd > 0, sd, np.inf)
        self.Z_ = (X - self.mean_) / self.scale_
        self.y_ = y.copy()
        return self

    def predict(self, X):
        X = self._check_X(X)
        Z = (X - self.mean_) / self.scale_
        k = min(int(self.k), self.Z_.shape[0])
        d2 = (np.sum(Z * Z, axis=1)[:, None] + np.sum(self.Z_ * self.Z_, axis=1)[None, :]
              - 2.0 * Z @ self.Z_.T)
        if k == self.Z_.shape[0]:
            nn = np.broadcast_to(np.arange(k), (Z.shape[0], k))
        else:
            nn = np.argpartition(d2, k - 1, axis=1)[:, :k]
        return self.y_[nn].mean(axis=1)


LEARNERS = {
    "featureless": Featureless,
    "linear": LinearModel,
    "ridge": RidgeModel,
    "cart": RegressionTree,
    "forest": RegressionForest,
    "knn": KnnRegressor,
}


def make_learner(learner_id, **params):
    """Construct a learner from its string id; unknown ids or keys raise."""
    try:
        cls = LEARNERS[learner_id]
    except KeyError:
        raise ValueError(f"unknown learner: {learner_id!r} (choose from {sorted(LEARNERS)})") from None
    try:
        return cls(**params)
    except TypeError as err:
        raise ValueError(f"invalid {learner_id} hyperparameters: {err}") from None


def fit_on_task(learner, task: Task, rows, random_state=None):
    """Clone and fit a learner on the given rows of a task.

    random_state, when the learner exposes that parameter, overrides the
    clone's seed so engines can derive per-iteration substreams.
    """
    est = clone(learner)
    if random_state is not None and "random_state" in est.get_params():
        est.set_params(random_state=random_state)
    est.fit(task.X(rows), task.target(rows), feature_names=task.feature_names)
    return est


def predict_on_task(model, task: Task, rows) -> Prediction:
    """Predict on task rows, aligning columns to the model's training schema."""
    names = getattr(model, "feature_names_in_", None)
    if names is None:
        X = task.X(rows)
    else:
        missing = [f for f in names if f not in task.feature_names]
        if missing:
            raise ValueError(f"task is missing model features: {missing}")
        X = task.X(rows, names)
    rows = np.asarray(rows, dtype=np.int64)
    return Prediction(rows, task.target(rows), model.predict(X))
