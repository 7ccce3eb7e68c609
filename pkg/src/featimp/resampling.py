"""Train/test split strategies with deterministic instantiation.

Instantiating a strategy on a task materializes per-iteration train and
test row ids. Instances are immutable and carry the sizes (K, n_train,
n_test) that variance-corrected inference needs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .rng import substream
from .task import Task
from .validation import check_positive_int, check_ratio


@dataclass(frozen=True)
class ResamplingInstance:
    """Materialized splits: train_sets/test_sets are lists of row-id arrays."""

    id: str
    train_sets: list = field(repr=False)
    test_sets: list = field(repr=False)
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.train_sets) != len(self.test_sets):
            raise ValueError("train/test set count mismatch")
        for tr, te in zip(self.train_sets, self.test_sets):
            if len(tr) == 0 or len(te) == 0:
                raise ValueError("resampling produced an empty train or test set")
            if np.intersect1d(np.unique(tr), te).size:
                raise ValueError("train and test sets overlap")

    @property
    def K(self) -> int:
        return len(self.train_sets)

    @property
    def n_train(self) -> np.ndarray:
        return np.array([len(t) for t in self.train_sets])

    @property
    def n_test(self) -> np.ndarray:
        return np.array([len(t) for t in self.test_sets])

    def test_train_ratio(self) -> float:
        """Mean per-iteration n_test / n_train, as used by the Nadeau-Bengio
        variance correction."""
        return float(np.mean(self.n_test / self.n_train))


class _ResamplingBase(BaseEstimator):
    id = ""

    def _rng(self):
        return substream(self.random_state, "resampling")

    def instantiate(self, task: Task) -> ResamplingInstance:
        if task.n < 2:
            raise ValueError("resampling needs at least 2 observations")
        return self._split(task.row_ids.copy(), self._rng())


class Holdout(_ResamplingBase):
    """Single shuffled train/test split; n_train = floor(ratio * n)."""

    id = "holdout"

    def __init__(self, ratio=2 / 3, random_state=None):
        self.ratio = ratio
        self.random_state = random_state

    def _split(self, ids, rng):
        check_ratio(self.ratio, "holdout ratio")
        perm = rng.permutation(ids)
        n_train = math.floor(self.ratio * len(ids))
        if n_train < 1 or n_train >= len(ids):
            raise ValueError(f"holdout ratio {self.ratio} yields an empty train or test set")
        return ResamplingInstance("holdout", [perm[:n_train]], [perm[n_train:]],
                                  {"ratio": self.ratio})


class CV(_ResamplingBase):
    """k-fold cross-validation; test sets partition all rows."""

    id = "cv"

    def __init__(self, folds=5, random_state=None):
        self.folds = folds
        self.random_state = random_state

    def _split(self, ids, rng):
        folds = check_positive_int(self.folds, "cv folds", minimum=2)
        if len(ids) < folds:
            raise ValueError(f"cv needs n >= folds, got n={len(ids)}, folds={folds}")
        perm = rng.permutation(ids)
        tests = np.array_split(perm, folds)
        trains = [np.setdiff1d(perm, t, assume_unique=True) for t in tests]
        return ResamplingInstance("cv", trains, tests, {"folds": folds})


class Subsampling(_ResamplingBase):
    """Repeated shuffled splits with train fraction ``ratio``."""

    id = "subsampling"

    def __init__(self, repeats=15, ratio=0.9, random_state=None):
        self.repeats = repeats
        self.ratio = ratio
        self.random_state = random_state

    def _split(self, ids, rng):
        repeats = check_positive_int(self.repeats, "subsampling repeats")
        check_ratio(self.ratio, "subsampling ratio")
        n_train = math.floor(self.ratio * len(ids))
        if n_train < 1 or n_train >= len(ids):
            raise ValueError(f"subsampling ratio {self.ratio} yields an empty train or test set")
        trains, tests = [], []
        for _ in range(repeats):
            perm = rng.permutation(ids)
            trains.append(perm[:n_train])
            tests.append(perm[n_train:])
        return ResamplingInstance("subsampling", trains, tests,
                                  {"repeats": repeats, "ratio": self.ratio})


class Bootstrap(_ResamplingBase):
    """Bootstrap training multisets; each test set is the out-of-bag rows."""

    id = "bootstrap"

    def __init__(self, repeats=15, random_state=None):
        self.repeats = repeats
        self.random_state = random_state

    def _split(self, ids, rng):
        repeats = check_positive_int(self.repeats, "bootstrap repeats")
        n = len(ids)
        trains, tests = [], []
        for _ in range(repeats):
            draw = rng.integers(0, n, n)
            oob = np.setdiff1d(np.arange(n), draw)
            if oob.size == 0:
                raise ValueError("bootstrap iteration has no out-of-bag rows")
            trains.append(ids[draw])
            tests.append(ids[oob])
        return ResamplingInstance("bootstrap", trains, tests, {"repeats": repeats})


RESAMPLINGS = {
    "holdout": Holdout,
    "cv": CV,
    "subsampling": Subsampling,
    "bootstrap": Bootstrap,
}


def make_resampling(resampling_id, **params):
    try:
        cls = RESAMPLINGS[resampling_id]
    except KeyError:
        raise ValueError(
            f"unknown resampling: {resampling_id!r} (choose from {sorted(RESAMPLINGS)})") from None
    try:
        return cls(**params)
    except TypeError as err:
        raise ValueError(f"invalid {resampling_id} parameters: {err}") from None


def resolve_instance(resampling, task: Task, default=None) -> ResamplingInstance:
    """Accept a strategy, an already-materialized instance, or None (default)."""
    if resampling is None:
        resampling = default if default is not None else Holdout()
    if isinstance(resampling, ResamplingInstance):
        for ids in (*resampling.train_sets, *resampling.test_sets):
            task.positions(ids)  # raises on ids the task does not contain
        return resampling
    return resampling.instantiate(task)
