"""Regression task, prediction, and performance-measure primitives.

A Task is an immutable in-memory dataset: named float64 feature columns,
one numeric target, and stable 1-based row ids. All validation (finite
values, unique names) happens once at construction; downstream code can
slice and recombine views without re-checking.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .validation import check_finite_matrix, check_finite_vector


class Task:
    """Immutable tabular regression dataset.

    Attributes:
        name: identifier used in outputs.
        feature_names: ordered tuple of column names.
        target_name: name of the response column.
        row_ids: stable 1-based integer ids, preserved by views.
    """

    def __init__(self, name, X, feature_names, y, target_name="y", row_ids=None):
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError("X must be a 2-d array")
        y = np.asarray(y, dtype=np.float64)
        n, p = X.shape
        if n < 1:
            raise ValueError("task needs at least one observation")
        if p < 1:
            raise ValueError("at least one feature required")
        if y.shape != (n,):
            raise ValueError(f"target length {y.shape} does not match n={n}")
        feature_names = tuple(str(f) for f in feature_names)
        if len(feature_names) != p:
            raise ValueError("feature_names length does not match X")
        if len(set(feature_names)) != p:
            raise ValueError("feature names must be unique")
        if target_name in feature_names:
            raise ValueError(f"target name {target_name!r} collides with a feature")
        check_finite_matrix(X, feature_names)
        check_finite_vector(y, target_name)
        if row_ids is None:
            row_ids = np.arange(1, n + 1, dtype=np.int64)
        else:
            row_ids = np.asarray(row_ids, dtype=np.int64)
            if row_ids.shape != (n,):
                raise ValueError("row_ids length mismatch")
            if len(np.unique(row_ids)) != n:
                raise ValueError("row_ids must be unique")
        self.name = str(name)
        self.feature_names = feature_names
        self.target_name = str(target_name)
        self._X = X
        self._y = y
        self.row_ids = row_ids
        self._X.flags.writeable = False
        self._y.flags.writeable = False
        self.row_ids.flags.writeable = False
        self._pos = {int(r): i for i, r in enumerate(row_ids)}
        self._fidx = {f: j for j, f in enumerate(feature_names)}

    @classmethod
    def from_dataframe(cls, df, target, name="task"):
        features = [c for c in df.columns if c != target]
        if target not in df.columns:
            raise ValueError(f"target not found: {target!r}")
        return cls(name, df[features].to_numpy(dtype=np.float64), features,
                   df[target].to_numpy(dtype=np.float64), target_name=target)

    @property
    def n(self) -> int:
        return self._X.shape[0]

    @property
    def p(self) -> int:
        return self._X.shape[1]

    @property
    def y(self) -> np.ndarray:
        return self._y

    def positions(self, row_ids) -> np.ndarray:
        """Map row ids to 0-based positions; unknown ids raise."""
        try:
            return np.array([self._pos[int(r)] for r in row_ids], dtype=np.int64)
        except KeyError as err:
            raise ValueError(f"unknown row id: {err.args[0]}") from None

    def feature_index(self, names) -> np.ndarray:
        try:
            return np.array([self._fidx[f] for f in names], dtype=np.int64)
        except KeyError as err:
            raise ValueError(f"unknown feature: {err.args[0]}") from None

    def X(self, rows=None, features=None) -> np.ndarray:
        """Feature matrix for the given row ids / feature names (writable copy
        when subset, read-only when full)."""
        out = self._X
        if rows is not None:
            out = out[self.positions(rows)]
        if features is not None:
            out = out[:, self.feature_index(features)]
        return out

    def target(self, rows=None) -> np.ndarray:
        if rows is None:
            return self._y
        return self._y[self.positions(rows)]

    def view(self, rows=None, features=None) -> "Task":
        """Subset by row ids and/or feature names, preserving row_ids and
        column order; the original task is unmodified."""
        if features is not None:
            features = list(features)
            if len(features) == 0:
                raise ValueError("at least one feature required")
            self.feature_index(features)  # validate early, keeps task order below
            features = [f for f in self.feature_names if f in set(features)]
        else:
            features = list(self.feature_names)
        if rows is None:
            rows = self.row_ids
        pos = self.positions(rows)
        return Task(self.name, self._X[pos][:, self.feature_index(features)],
                    features, self._y[pos], target_name=self.target_name,
                    row_ids=np.asarray(rows, dtype=np.int64))

    def __repr__(self):
        return f"Task({self.name!r}, n={self.n}, p={self.p}, target={self.target_name!r})"


@dataclass(frozen=True)
class Prediction:
    """Truth/response pair on a set of rows."""

    row_ids: np.ndarray
    truth: np.ndarray
    response: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "row_ids", np.asarray(self.row_ids, dtype=np.int64))
        object.__setattr__(self, "truth", np.asarray(self.truth, dtype=np.float64))
        object.__setattr__(self, "response", np.asarray(self.response, dtype=np.float64))
        if not (len(self.row_ids) == len(self.truth) == len(self.response)):
            raise ValueError("prediction fields must have equal length")

    def __len__(self):
        return len(self.truth)


@dataclass(frozen=True)
class Measure:
    """A loss or score with an optimization direction.

    decomposable means the aggregate equals the mean of observation-wise
    losses, which observation-level tests (CPI, LOCO inference) require.
    """

    id: str
    direction: str  # "minimize" | "maximize"
    decomposable: bool

    @property
    def sign(self) -> float:
        """+1 when larger post-perturbation loss means importance, -1 for scores."""
        return 1.0 if self.direction == "minimize" else -1.0


_MEASURES = {
    "mse": Measure("mse", "minimize", True),
    "mae": Measure("mae", "minimize", True),
    "rmse": Measure("rmse", "minimize", False),
    "rsq": Measure("rsq", "maximize", False),
}


def get_measure(measure) -> Measure:
    if isinstance(measure, Measure):
        return measure
    try:
        return _MEASURES[measure]
    except KeyError:
        raise ValueError(f"unknown measure: {measure!r} (choose from {sorted(_MEASURES)})") from None


def evaluate_measure(measure, prediction: Prediction) -> float:
    """Aggregate score of a prediction.

    Means use numpy pairwise summation, so aggregates are stable to
    observation order well below 1e-12.
    """
    measure = get_measure(measure)
    if len(prediction) == 0:
        raise ValueError("empty prediction")
    t, r = prediction.truth, prediction.response
    if measure.id == "mse":
        return float(np.mean((t - r) ** 2))
    if measure.id == "mae":
        return float(np.mean(np.abs(t - r)))
    if measure.id == "rmse":
        return float(np.sqrt(np.mean((t - r) ** 2)))
    if measure.id == "rsq":
        denom = float(np.sum((t - np.mean(t)) ** 2))
        if denom <= 0.0:
            raise ValueError("degenerate R² denominator: constant truth")
        return 1.0 - float(np.sum((t - r) ** 2)) / denom
    raise AssertionError(measure.id)


def obs_losses(measure, prediction: Prediction) -> np.ndarray:
    """Per-observation losses; their mean equals evaluate_measure."""
    measure = get_measure(measure)
    if not measure.decomposable:
        raise ValueError(f"measure not decomposable: {measure.id}")
    if len(prediction) == 0:
        raise ValueError("empty prediction")
    t, r = prediction.truth, prediction.response
    if measure.id == "mse":
        return (t - r) ** 2
    if measure.id == "mae":
        return np.abs(t - r)
    raise AssertionError(measure.id)
