"""Feature samplers: replacement-value generators for perturbation methods.

A sampler is fit on training rows and then asked to draw new values for a
set of features on arbitrary rows, optionally conditional on other
features. Four kinds are provided:

* marginal permutation: shuffles the requested columns in place (jointly,
  preserving the within-group distribution);
* conditional Gaussian: draws from the multivariate-normal conditional
  implied by the training mean/covariance;
* Gaussian knockoffs: second-order model-X knockoffs (Candes et al. 2018)
  with the equicorrelated diagonal, generated jointly and cached so all
  features' knockoffs come from one coherent draw;
* conditional k-nearest-neighbor: a nonparametric fallback that copies
  feature values from a random close neighbor in conditioning space.

``sample`` is pure given its ``random_state``: callers derive one
substream per unit of work, so parallel schedules cannot change results.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .rng import substream
from .task import Task


def _regularized_moments(X):
    """Column means and unbiased covariance, ridged so the smallest
    eigenvalue is at least 1e-8 * trace / p. Returns (mu, Sigma, notes)."""
    notes = []
    mu = X.mean(axis=0)
    if X.shape[0] < 2:
        raise ValueError("Gaussian samplers need at least 2 training rows")
    Sigma = np.atleast_2d(np.cov(X, rowvar=False, ddof=1))
    p = Sigma.shape[0]
    if X.shape[0] < p + 1:
        notes.append(f"fewer training rows ({X.shape[0]}) than p+1; covariance is rank-deficient")
    sd = np.sqrt(np.diag(Sigma))
    if np.any(sd == 0):
        const = [i for i in range(p) if sd[i] == 0]
        notes.append(f"constant training columns at indices {const}; regularization applied")
    floor = 1e-8 * np.trace(Sigma) / p
    lam_min = float(np.linalg.eigvalsh(Sigma)[0])
    eps = max(0.0, floor - lam_min)
    if eps > 0:
        Sigma = Sigma + eps * np.eye(p)
        notes.append(f"covariance regularized with eps={eps:.3e}")
    return mu, Sigma, notes


def _psd_factor(C):
    """Symmetric square-root-like factor L with L @ L.T == C after clamping
    negative eigenvalues (degenerate conditionals become deterministic)."""
    C = 0.5 * (C + C.T)
    w, V = np.linalg.eigh(C)
    return V * np.sqrt(np.clip(w, 0.0, None))


class _SamplerBase(BaseEstimator):
    kind = ""
    conditional = False
    joint_draws = False

    def fit(self, task: Task, rows=None):
        self.feature_names_ = task.feature_names
        self.n_train_ = task.n if rows is None else len(rows)
        if self.n_train_ == 0:
            raise ValueError("sampler needs at least one training row")
        self.notes_ = []
        self._fit(task, rows)
        return self

    def _fit(self, task, rows):
        pass

    def _resolve_sets(self, features, conditioning):
        names = self.feature_names_
        fset = set(features)
        unknown = fset - set(names)
        if unknown:
            raise ValueError(f"unknown features: {sorted(unknown)}")
        fidx = np.array([names.index(f) for f in features], dtype=np.int64)
        if conditioning is None:
            gidx = np.array([j for j, f in enumerate(names) if f not in fset], dtype=np.int64)
        else:
            gset = set(conditioning)
            if gset & fset:
                raise ValueError("features and conditioning set must be disjoint")
            if gset - set(names):
                raise ValueError(f"unknown conditioning features: {sorted(gset - set(names))}")
            gidx = np.array([j for j, f in enumerate(names) if f in gset], dtype=np.int64)
        return fidx, gidx

    def sample(self, features, data: Task, rows, conditioning=None,
               random_state=None, n_draws=None):
        """Draw replacement values for ``features`` on the given rows.

        Returns (n_rows, n_features) for n_draws=None, else
        (n_draws, n_rows, n_features).
        """
        raise NotImplementedError


class MarginalPermutationSampler(_SamplerBase):
    """In-place joint shuffle of the requested columns over the given rows."""

    kind = "marginal_permutation"

    def sample(self, features, data, rows, conditioning=None,
               random_state=None, n_draws=None):
        if conditioning is not None and len(conditioning) > 0:
            raise ValueError("marginal permutation cannot use a conditioning set")
        self._resolve_sets(features, ())
        X = data.X(rows, features)
        rng = substream(random_state)
        k = 1 if n_draws is None else n_draws
        out = np.stack([X[rng.permutation(X.shape[0])] for _ in range(k)])
        return out[0] if n_draws is None else out


class ConditionalGaussianSampler(_SamplerBase):
    """Multivariate-normal conditional draws from training moments.

    An empty conditioning set degrades to the marginal Gaussian fit.
    Schur-complement solves are cached per (features, conditioning) pair.
    """

    kind = "conditional_gaussian"
    conditional = True

    def _fit(self, task, rows):
        X = task.X(rows if rows is not None else task.row_ids)
        self.mu_, self.Sigma_, notes = _regularized_moments(X)
        self.notes_.extend(notes)
        self._cache = {}

    def _solve(self, fidx, gidx):
        key = (tuple(fidx), tuple(gidx))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        Sff = self.Sigma_[np.ix_(fidx, fidx)]
        if len(gidx) == 0:
            W = np.zeros((0, len(fidx)))
            L = _psd_factor(Sff)
        else:
            Sgg = self.Sigma_[np.ix_(gidx, gidx)]
            Sgf = self.Sigma_[np.ix_(gidx, fidx)]
            W = np.linalg.solve(Sgg, Sgf)
            L = _psd_factor(Sff - Sgf.T @ W)
        self._cache[key] = (W, L)
        return W, L

    def sample(self, features, data, rows, conditioning=None,
               random_state=None, n_draws=None):
        fidx, gidx = self._resolve_sets(features, conditioning)
        W, L = self._solve(fidx, gidx)
        n = len(rows)
        if len(gidx) == 0:
            mean = np.broadcast_to(self.mu_[fidx], (n, len(fidx)))
        else:
            Xg = data.X(rows, [self.feature_names_[j] for j in gidx])
            mean = self.mu_[fidx] + (Xg - self.mu_[gidx]) @ W
        rng = substream(random_state)
        k = 1 if n_draws is None else n_draws
        Z = rng.standard_normal((k, n, len(fidx)))
        out = mean[None, :, :] + Z @ L.T
        return out[0] if n_draws is None else out


class ConditionalKnnSampler(_SamplerBase):
    """Copies requested features from one of the k nearest training rows in
    standardized conditioning coordinates (nonparametric fallback; not a
    calibrated conditional-density estimator)."""

    kind = "conditional_knn"
    conditional = True

    def __init__(self, k=20):
        self.k = k

    def _fit(self, task, rows):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        X = task.X(rows if rows is not None else task.row_ids)
        self.X_train_ = X.copy()
        self.mean_ = X.mean(axis=0)
        sd = X.std(axis=0, ddof=0)
        self.scale_ = np.where(sd > 0, sd, np.inf)
        self.Z_ = (X - self.mean_) / self.scale_

    def sample(self, features, data, rows, conditioning=None,
               random_state=None, n_draws=None):
        fidx, gidx = self._resolve_sets(features, conditioning)
        rng = substream(random_state)
        n = len(rows)
        n_train = self.X_train_.shape[0]
        k = 1 if n_draws is None else n_draws
        if len(gidx) == 0:
            pick = rng.integers(0, n_train, (k, n))
        else:
            Zg = (data.X(rows, [self.feature_names_[j] for j in gidx])
                  - self.mean_[gidx]) / self.scale_[gidx]
            Zt = self.Z_[:, gidx]
            d2 = (np.sum(Zg * Zg, axis=1)[:, None] + np.sum(Zt * Zt, axis=1)[None, :]
                  - 2.0 * Zg @ Zt.T)
            kk = min(int(self.k), n_train)
            if kk == n_train:
                nn = np.broadcast_to(np.arange(kk), (n, kk))
            else:
                nn = np.argpartition(d2, kk - 1, axis=1)[:, :kk]
            pick = nn[np.arange(n)[None, :], rng.integers(0, kk, (k, n))]
        out = self.X_train_[pick][:, :, fidx]
        return out[0] if n_draws is None else out


class KnockoffGaussianSampler(_SamplerBase):
    """Second-order Gaussian model-X knockoffs, equicorrelated construction.

    On the correlation scale s_j = min(1, 2 * lambda_min(R)) for all j,
    rescaled to the covariance scale. Knockoffs for all features come from
    one joint draw per (rows, random_state), cached so repeated per-feature
    requests stay mutually coherent (required by the CPI test).
    """

    kind = "knockoff_gaussian"
    conditional = True
    joint_draws = True

    def _fit(self, task, rows):
        X = task.X(rows if rows is not None else task.row_ids)
        self.mu_, self.Sigma_, notes = _regularized_moments(X)
        self.notes_.extend(notes)
        sd = np.sqrt(np.diag(self.Sigma_))
        R = self.Sigma_ / np.outer(sd, sd)
        lam_min = float(np.linalg.eigvalsh(R)[0])
        s_corr = min(1.0, max(0.0, 2.0 * lam_min))
        self.s_ = np.full(self.Sigma_.shape[0], s_corr)
        s_cov = s_corr * np.diag(self.Sigma_)
        self.P_ = np.linalg.solve(self.Sigma_, np.diag(s_cov))
        C = 2.0 * np.diag(s_cov) - np.diag(s_cov) @ self.P_
        self.L_ = _psd_factor(C)
        self._cache = {}

    def knockoff_matrix(self, data, rows, random_state=None):
        """Joint knockoff draw for all features on the given rows (cached)."""
        key = (None if random_state is None else int(random_state), tuple(int(r) for r in rows))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        X = data.X(rows, self.feature_names_)
        rng = substream(random_state)
        Z = rng.standard_normal(X.shape)
        Xk = X - (X - self.mu_) @ self.P_ + Z @ self.L_.T
        self._cache[key] = Xk
        return Xk

    def sample(self, features, data, rows, conditioning=None,
               random_state=None, n_draws=None):
        if conditioning is not None and len(conditioning) > 0:
            raise ValueError("knockoff sampling is only compatible with CFI "
                             "(no explicit conditioning set)")
        if n_draws is not None:
            raise ValueError("knockoff sampler draws one joint knockoff matrix; "
                             "n_draws is not supported")
        fidx, _ = self._resolve_sets(features, ())
        return self.knockoff_matrix(data, rows, random_state)[:, fidx]


SAMPLERS = {
    "marginal_permutation": MarginalPermutationSampler,
    "conditional_gaussian": ConditionalGaussianSampler,
    "knockoff_gaussian": KnockoffGaussianSampler,
    "conditional_knn": ConditionalKnnSampler,
}


def make_sampler(sampler_id, **params):
    try:
        cls = SAMPLERS[sampler_id]
    except KeyError:
        raise ValueError(f"unknown sampler: {sampler_id!r} (choose from {sorted(SAMPLERS)})") from None
    try:
        return cls(**params)
    except TypeError as err:
        raise ValueError(f"invalid {sampler_id} parameters: {err}") from None
