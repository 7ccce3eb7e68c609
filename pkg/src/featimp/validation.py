"""Input-validation helpers shared across the package."""

from __future__ import annotations

import numpy as np


def check_finite_matrix(X, names):
    bad = ~np.isfinite(X)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise ValueError(f"non-finite value in column {names[j]!r}, row {i + 1}")


def check_finite_vector(v, name):
    bad = ~np.isfinite(v)
    if bad.any():
        i = int(np.argmax(bad))
        raise ValueError(f"non-finite value in {name!r}, row {i + 1}")


def check_in(value, allowed, what):
    if value not in allowed:
        raise ValueError(f"invalid {what}: {value!r} (choose from {sorted(allowed)})")
    return value


def check_positive_int(value, what, minimum=1):
    if not isinstance(value, (int, np.integer)) or value < minimum:
        raise ValueError(f"{what} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_ratio(value, what):
    if not (0.0 < float(value) < 1.0):
        raise ValueError(f"{what} must lie strictly between 0 and 1, got {value!r}")
    return float(value)


def is_fitted(estimator) -> bool:
    """sklearn convention: fitted estimators carry trailing-underscore attributes."""
    return any(
        k.endswith("_") and not k.endswith("__") and not k.startswith("_")
        for k in vars(estimator)
    )
