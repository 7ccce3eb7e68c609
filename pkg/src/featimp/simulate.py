"""Built-in data generators and CSV ingestion.

The generators mirror the synthetic settings the importance methods are
validated on: a linear target with one correlated feature pair, a fully
independent linear design, and a radial "peak" response on a uniform ball
with configurable dimension for runtime benchmarks.
"""

from __future__ import annotations

import csv
import math

import numpy as np

from .rng import substream
from .task import Task


def sim_correlated(n=5000, r=0.8, noise_sd=0.2, random_state=None) -> Task:
    """Four standard-normal features; cor(x1, x2) = r, x3 and x4 independent;
    y = 2*x1 + x3 + eps with eps ~ N(0, noise_sd^2)."""
    if n < 10:
        raise ValueError("n must be >= 10")
    if not -1.0 < r < 1.0:
        raise ValueError(f"r must lie in (-1, 1), got {r!r}")
    rng = substream(random_state, "sim_correlated")
    z = rng.standard_normal((n, 4))
    x1 = z[:, 0]
    x2 = r * z[:, 0] + math.sqrt(1.0 - r * r) * z[:, 1]
    x3, x4 = z[:, 2], z[:, 3]
    y = 2.0 * x1 + x3 + noise_sd * rng.standard_normal(n)
    X = np.column_stack([x1, x2, x3, x4])
    return Task("correlated", X, ["x1", "x2", "x3", "x4"], y)


def sim_independent(n=5000, coefficients=(1.0, 0.0), noise_sd=0.2,
                    random_state=None) -> Task:
    """Independent standard-normal features with a linear target
    y = sum(beta_j * x_j) + eps. Feature count follows the coefficients."""
    if n < 10:
        raise ValueError("n must be >= 10")
    beta = np.asarray(coefficients, dtype=np.float64)
    if beta.ndim != 1 or beta.size < 1:
        raise ValueError("coefficients must be a non-empty 1-d sequence")
    rng = substream(random_state, "sim_independent")
    X = rng.standard_normal((n, beta.size))
    y = X @ beta + noise_sd * rng.standard_normal(n)
    names = [f"x{j + 1}" for j in range(beta.size)]
    return Task("independent", X, names, y)


def sim_peak(n=5000, d=5, random_state=None) -> Task:
    """Points uniform in the d-ball of radius 3 (normalized Gaussian direction,
    radius 3 * U^(1/d)); y = 25 * exp(-r^2 / 2)."""
    if n < 10:
        raise ValueError("n must be >= 10")
    if d < 1:
        raise ValueError("d must be >= 1")
    rng = substream(random_state, "sim_peak")
    g = rng.standard_normal((n, d))
    norms = np.linalg.norm(g, axis=1)
    norms[norms == 0] = 1.0
    radius = 3.0 * rng.uniform(size=n) ** (1.0 / d)
    X = g / norms[:, None] * radius[:, None]
    y = 25.0 * np.exp(-radius**2 / 2.0)
    names = [f"x{j + 1}" for j in range(d)]
    return Task("peak", X, names, y)


SIMULATORS = {
    "correlated": sim_correlated,
    "independent": sim_independent,
    "peak": sim_peak,
}


def load_csv(path, target, name=None) -> Task:
    """Read a numeric CSV (header row required, UTF-8, '.' decimals) into a
    Task; the target column is removed from the features. Cell-level parse
    and finiteness failures report 1-based row/column coordinates."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        if len(set(header)) != len(header):
            dupes = sorted({h for h in header if header.count(h) > 1})
            raise ValueError(f"{path}: duplicate header names: {dupes}")
        if target not in header:
            raise ValueError(f"{path}: target not found: {target!r}")
        rows = []
        for i, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise ValueError(f"{path}: row {i} has {len(row)} cells, expected {len(header)}")
            vals = []
            for j, cell in enumerate(row):
                try:
                    v = float(cell)
                except ValueError:
                    raise ValueError(f"{path}: non-numeric value {cell!r} at row {i}, "
                                     f"column {header[j]!r}") from None
                if not math.isfinite(v):
                    raise ValueError(f"{path}: non-finite value at row {i}, "
                                     f"column {header[j]!r}")
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    data = np.asarray(rows, dtype=np.float64)
    t = header.index(target)
    feat_idx = [j for j in range(len(header)) if j != t]
    if not feat_idx:
        raise ValueError("at least one feature required")
    features = [header[j] for j in feat_idx]
    if name is None:
        name = str(path)
    return Task(name, data[:, feat_idx], features, data[:, t], target_name=target)
