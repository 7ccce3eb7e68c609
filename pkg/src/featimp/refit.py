"""Refit-based importance: LOCO and the general leave-out/leave-in WVIM.

Per resampling iteration and repeat, the full model and one reduced (or
group-only) model per group are refit on the same training rows and
compared on the same test rows, so comparisons are paired. Importance is
signed so that predictive features and groups score positive under both
directions.
"""

from __future__ import annotations

import numpy as np
import pandas as pd
from sklearn.base import clone

from .base import ImportanceEstimator
from .learners import Featureless
from .parallel import parallel_map
from .perturbation import resolve_groups
from .resampling import resolve_instance
from .rng import substream_seed
from .scores import ScoresTable, obs_frame, records_frame
from .task import Prediction, Task, evaluate_measure, get_measure, obs_losses
from .validation import is_fitted


class WVIM(ImportanceEstimator):
    """Leave-out / leave-in refit importance over feature groups.

    direction="leave-out": importance of a group is the loss increase of a
    model refit without it, relative to the full model.
    direction="leave-in": importance is the performance gained by a model
    trained on the group alone, relative to a featureless baseline.
    """

    _method = "wvim"

    def __init__(self, learner=None, measure="mse", resampling=None,
                 direction="leave-out", groups=None, n_repeats=1,
                 features=None, random_state=None, n_threads=1):
        self.learner = learner
        self.measure = measure
        self.resampling = resampling
        self.direction = direction
        self.groups = groups
        self.n_repeats = n_repeats
        self.features = features
        self.random_state = random_state
        self.n_threads = n_threads

    def fit(self, task: Task):
        if self.direction not in ("leave-out", "leave-in"):
            raise ValueError(f"direction must be 'leave-out' or 'leave-in', got {self.direction!r}")
        measure = get_measure(self.measure)
        if self.learner is None:
            raise ValueError("a learner is required")
        if is_fitted(self.learner):
            raise ValueError("refit methods require an untrained learner; "
                             "a pre-fit model cannot be retrained without its features")
        if self.n_repeats < 1:
            raise ValueError("n_repeats must be >= 1")
        instance = resolve_instance(self.resampling, task)
        groups = resolve_groups(task, self.features, self.groups)
        leave_out = self.direction == "leave-out"
        seed = self.random_state
        records, obs_parts, warnings = [], [], []

        for k in range(1, instance.K + 1):
            train_ids = instance.train_sets[k - 1]
            test_ids = instance.test_sets[k - 1]
            truth = task.target(test_ids)
            for rep in range(1, self.n_repeats + 1):
                if leave_out:
                    base_model = self._fit_subset(task, train_ids, task.feature_names,
                                                  substream_seed(seed, "fit-full", k, rep))
                else:
                    base_model = Featureless().fit(task.X(train_ids), task.target(train_ids),
                                                   feature_names=task.feature_names)
                base_pred = self._predict_subset(base_model, task, test_ids)
                loss_base = evaluate_measure(measure, base_pred)
                obs_base = obs_losses(measure, base_pred) if measure.decomposable else None

                def run_group(item, _k=k, _rep=rep, _test=test_ids, _train=train_ids,
                              _truth=truth, _loss_base=loss_base, _obs_base=obs_base):
                    gname, feats = item
                    if leave_out:
                        keep = [f for f in task.feature_names if f not in set(feats)]
                    else:
                        keep = feats
                    flagged = None
                    if not keep:
                        flagged = (f"group {gname!r} removes all features; "
                                   "reduced model is the featureless baseline")
                        model = Featureless().fit(task.X(_train), task.target(_train),
                                                  feature_names=task.feature_names)
                    else:
                        model = self._fit_subset(task, _train, keep,
                                                 substream_seed(seed, "fit-group", _k, gname, _rep))
                    pred = self._predict_subset(model, task, _test)
                    loss_post = evaluate_measure(measure, pred)
                    if leave_out:
                        imp = measure.sign * (loss_post - _loss_base)
                    else:
                        imp = measure.sign * (_loss_base - loss_post)
                    rec = (gname, _k, _rep, _loss_base, loss_post, imp)
                    obs = None
                    if measure.decomposable:
                        d = obs_losses(measure, pred) - _obs_base
                        obs = measure.sign * (d if leave_out else -d)
                    return rec, obs, flagged

                items = list(groups.items())
                for (gname, _), (rec, obs, flagged) in zip(
                        items, parallel_map(run_group, items, self.n_threads)):
                    records.append(rec)
                    if flagged:
                        warnings.append(f"iteration {k}: {flagged}")
                    if obs is not None:
                        obs_parts.append(pd.DataFrame({
                            "feature": gname,
                            "iter_rsmp": np.int64(k),
                            "iter_repeat": np.int64(rep),
                            "row_id": np.asarray(test_ids, dtype=np.int64),
                            "delta": obs,
                        }))

        self.scores_ = ScoresTable(
            records=records_frame(records),
            method=self._method,
            measure=measure,
            resampling=instance,
            feature_order=tuple(groups),
            sampler=None,
            obs_diffs=obs_frame(obs_parts),
            warnings=warnings,
            meta={"direction": self.direction},
        )
        return self

    def _fit_subset(self, task, rows, features, fit_seed):
        est = clone(self.learner)
        if "random_state" in est.get_params():
            est.set_params(random_state=fit_seed)
        est.fit(task.X(rows, features), task.target(rows), feature_names=features)
        return est

    @staticmethod
    def _predict_subset(model, task, rows) -> Prediction:
        X = task.X(rows, model.feature_names_in_)
        rows = np.asarray(rows, dtype=np.int64)
        return Prediction(rows, task.target(rows), model.predict(X))


class LOCO(WVIM):
    """Leave-one-covariate-out: WVIM with leave-out direction and singleton
    groups (one refit per feature) by default."""

    _method = "loco"

    def __init__(self, learner=None, measure="mse", resampling=None, groups=None,
                 n_repeats=1, features=None, random_state=None, n_threads=1):
        super().__init__(learner=learner, measure=measure, resampling=resampling,
                         direction="leave-out", groups=groups, n_repeats=n_repeats,
                         features=features, random_state=random_state,
                         n_threads=n_threads)
