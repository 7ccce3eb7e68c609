"""Long-format result container shared by all importance methods."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .resampling import ResamplingInstance
from .task import Measure

RECORD_COLUMNS = ["feature", "iter_rsmp", "iter_repeat",
                  "loss_baseline", "loss_post", "importance"]
OBS_COLUMNS = ["feature", "iter_rsmp", "iter_repeat", "row_id", "delta"]


@dataclass
class ScoresTable:
    """One record per (feature-or-group, resampling iteration, repetition).

    ``importance`` is signed so that larger means more important under the
    measure's direction. ``obs_diffs`` holds per-observation loss
    differences with the same sign convention (mean of a record's deltas
    reproduces that record's importance) and is present only for
    decomposable measures.
    """

    records: pd.DataFrame
    method: str
    measure: Measure
    resampling: ResamplingInstance
    feature_order: tuple
    sampler: str | None = None
    obs_diffs: pd.DataFrame | None = None
    warnings: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        missing = [c for c in RECORD_COLUMNS if c not in self.records.columns]
        if missing:
            raise ValueError(f"scores records missing columns: {missing}")
        if len(self.records) == 0:
            raise ValueError("scores table is empty")

    @property
    def K(self) -> int:
        return self.resampling.K

    def importance(self) -> pd.DataFrame:
        """Per-feature mean importance over all (iteration, repeat) records."""
        means = self.records.groupby("feature", sort=False)["importance"].mean()
        means = means.reindex(list(self.feature_order))
        return pd.DataFrame({"feature": means.index, "importance": means.to_numpy()})

    def iteration_means(self) -> pd.DataFrame:
        """Per-(feature, iteration) mean importance (repeats averaged)."""
        g = (self.records.groupby(["feature", "iter_rsmp"], sort=False)["importance"]
             .mean().reset_index())
        return g

    def pooled_obs_diffs(self) -> pd.DataFrame:
        """Observation-level deltas pooled for testing: averaged over repeats
        within an iteration, concatenated across iterations."""
        if self.obs_diffs is None:
            raise ValueError("measure not decomposable: no observation-wise losses stored")
        g = (self.obs_diffs
             .groupby(["feature", "iter_rsmp", "row_id"], sort=False)["delta"]
             .mean().reset_index())
        return g

    def __repr__(self):
        return (f"ScoresTable(method={self.method!r}, K={self.K}, "
                f"features={len(self.feature_order)}, records={len(self.records)})")


def records_frame(rows) -> pd.DataFrame:
    df = pd.DataFrame(rows, columns=RECORD_COLUMNS)
    df["iter_rsmp"] = df["iter_rsmp"].astype(np.int64)
    df["iter_repeat"] = df["iter_repeat"].astype(np.int64)
    return df


def obs_frame(parts) -> pd.DataFrame | None:
    if not parts:
        return None
    return pd.concat(parts, ignore_index=True)
