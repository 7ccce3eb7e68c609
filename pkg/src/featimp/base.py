"""Shared surface of all importance estimators.

Estimators are configured at construction (sklearn conventions: parameters
stored verbatim, results in trailing-underscore attributes), run via
``fit(task)``, and queried through ``importance`` / ``scores`` /
``obs_loss_diffs``.
"""

from __future__ import annotations

import pandas as pd
from sklearn.base import BaseEstimator

from . import inference
from .scores import ScoresTable


class ImportanceEstimator(BaseEstimator):
    scores_: ScoresTable

    def _require_fitted(self):
        if not hasattr(self, "scores_"):
            raise ValueError("estimator is not fitted; call fit(task) first")

    def scores(self) -> pd.DataFrame:
        """Per-record scores: feature, iteration, repeat, losses, importance."""
        self._require_fitted()
        return self.scores_.records.copy()

    def obs_loss_diffs(self) -> pd.DataFrame:
        """Observation-wise loss differences (decomposable measures only)."""
        self._require_fitted()
        if self.scores_.obs_diffs is None:
            raise ValueError("measure not decomposable: observation-wise losses unavailable")
        return self.scores_.obs_diffs.copy()

    def importance(self, ci_method=None, *, alternative=None, alpha=0.05,
                   test=None, p_adjust="none", pooling="average_repeats") -> pd.DataFrame:
        """Aggregated importance, optionally with uncertainty quantification.

        ci_method: None (plain means), "quantile", "raw", "nadeau_bengio",
        "cpi" (knockoff-based perturbation scores), or "lei" (refit scores).
        """
        self._require_fitted()
        s = self.scores_
        if ci_method in (None, "none"):
            return s.importance()
        if ci_method == "quantile":
            return inference.ci_quantile(s, alpha=alpha,
                                         alternative=alternative or "two.sided",
                                         pooling=pooling)
        if ci_method == "raw":
            return inference.ci_raw(s, alpha=alpha,
                                    alternative=alternative or "two.sided",
                                    p_adjust_method=p_adjust)
        if ci_method == "nadeau_bengio":
            return inference.ci_nadeau_bengio(s, alpha=alpha,
                                              alternative=alternative or "two.sided",
                                              p_adjust_method=p_adjust)
        if ci_method == "cpi":
            return inference.cpi_test(s, test=test or "t",
                                      alternative=alternative or "greater",
                                      alpha=alpha, p_adjust_method=p_adjust)
        if ci_method == "lei":
            return inference.lei_test(s, test=test or "wilcox",
                                      alternative=alternative or "two.sided",
                                      alpha=alpha, p_adjust_method=p_adjust)
        raise ValueError(f"unknown ci_method: {ci_method!r}")
