"""Perturbation-based importance: PFI, CFI, and RFI.

One engine serves all three: per resampling iteration a model is trained
(or a pre-fit one reused), a sampler is fit on the training rows, and each
feature (or group, perturbed jointly) is replaced on the test rows by a
sampler draw. Importance is the signed loss change, one record per
(feature, iteration, repeat).

PFI shuffles marginally; CFI draws conditional on all remaining features;
RFI generalizes to a user-chosen conditioning set, recovering PFI for an
empty set and CFI for the full complement.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import clone

from .base import ImportanceEstimator
from .learners import fit_on_task
from .parallel import parallel_map
from .resampling import resolve_instance
from .rng import substream_seed
from .samplers import ConditionalGaussianSampler, MarginalPermutationSampler
from .scores import ScoresTable, obs_frame, records_frame
from .task import Prediction, Task, evaluate_measure, get_measure, obs_losses
from .validation import is_fitted


def resolve_groups(task: Task, features, groups):
    """Normalize the features/groups arguments to an ordered name->list map."""
    if features is not None and groups is not None:
        raise ValueError("specify either features or groups, not both")
    if groups is None:
        foi = list(features) if features is not None else list(task.feature_names)
        task.feature_index(foi)
        return {f: [f] for f in foi}
    out = {}
    for name, feats in groups.items():
        feats = list(feats)
        if not feats:
            raise ValueError(f"group {name!r} is empty")
        task.feature_index(feats)
        if len(set(feats)) != len(feats):
            raise ValueError(f"group {name!r} lists a feature twice")
        out[str(name)] = feats
    if not out:
        raise ValueError("groups map is empty")
    return out


class _PerturbationBase(ImportanceEstimator):
    _method = ""

    def _sampler_template(self):
        raise NotImplementedError

    def _conditioning(self, group_features):
        """Conditioning set passed to the sampler; None means sampler default
        (all remaining features)."""
        raise NotImplementedError

    def _validate(self, task):
        pass

    def fit(self, task: Task):
        measure = get_measure(self.measure)
        if self.learner is None:
            raise ValueError("a learner or pre-fit model is required")
        if self.n_repeats < 1:
            raise ValueError("n_repeats must be >= 1")
        self._validate(task)
        instance = resolve_instance(self.resampling, task)
        prefit = is_fitted(self.learner)
        if prefit and instance.K != 1:
            raise ValueError("a pre-fit model requires a resampling instantiated "
                             "with exactly one test set (holdout)")
        groups = resolve_groups(task, self.features, self.groups)
        sampler_template = self._sampler_template()
        seed = self.random_state
        records, obs_parts, warnings = [], [], []

        for k in range(1, instance.K + 1):
            train_ids = instance.train_sets[k - 1]
            test_ids = instance.test_sets[k - 1]
            if prefit:
                model = self.learner
            else:
                model = fit_on_task(self.learner, task, train_ids,
                                    random_state=substream_seed(seed, "fit", k))
            sampler = clone(sampler_template).fit(task, rows=train_ids)
            warnings.extend(f"iteration {k}: {n}" for n in sampler.notes_)

            names_model = getattr(model, "feature_names_in_", task.feature_names)
            missing = [f for f in names_model if f not in task.feature_names]
            if missing:
                raise ValueError(f"task is missing model features: {missing}")
            pos = {f: i for i, f in enumerate(names_model)}
            X_test = task.X(test_ids, names_model)
            truth = task.target(test_ids)
            base_pred = Prediction(test_ids, truth, model.predict(X_test))
            loss_base = evaluate_measure(measure, base_pred)
            obs_base = obs_losses(measure, base_pred) if measure.decomposable else None

            units = [(gname, feats, rep)
                     for gname, feats in groups.items()
                     for rep in range(1, self.n_repeats + 1)]

            def run_unit(unit, _k=k, _sampler=sampler, _model=model,
                         _X=X_test, _truth=truth, _pos=pos, _test_ids=test_ids):
                gname, feats, rep = unit
                for f in feats:
                    if f not in _pos:
                        raise ValueError(f"feature {f!r} is not used by the model")
                if _sampler.joint_draws:
                    draw_seed = substream_seed(seed, "draw", _k, rep)
                else:
                    draw_seed = substream_seed(seed, "draw", _k, gname, rep)
                cols = _sampler.sample(feats, task, _test_ids,
                                       conditioning=self._conditioning(feats),
                                       random_state=draw_seed)
                Xp = _X.copy()
                Xp[:, [_pos[f] for f in feats]] = cols
                pred = Prediction(_test_ids, _truth, _model.predict(Xp))
                loss_post = evaluate_measure(measure, pred)
                rec = (gname, _k, rep, loss_base, loss_post,
                       measure.sign * (loss_post - loss_base))
                obs = None
                if measure.decomposable:
                    obs = measure.sign * (obs_losses(measure, pred) - obs_base)
                return rec, obs

            for (gname, feats, rep), (rec, obs) in zip(
                    units, parallel_map(run_unit, units, self.n_threads)):
                records.append(rec)
                if obs is not None:
                    obs_parts.append(_obs_part(gname, k, rep, test_ids, obs))

        self.scores_ = ScoresTable(
            records=records_frame(records),
            method=self._method,
            measure=measure,
            resampling=instance,
            feature_order=tuple(groups),
            sampler=sampler_template.kind,
            obs_diffs=obs_frame(obs_parts),
            warnings=warnings,
        )
        return self


def _obs_part(gname, k, rep, test_ids, deltas):
    import pandas as pd
    return pd.DataFrame({
        "feature": gname,
        "iter_rsmp": np.int64(k),
        "iter_repeat": np.int64(rep),
        "row_id": np.asarray(test_ids, dtype=np.int64),
        "delta": deltas,
    })


class PFI(_PerturbationBase):
    """Permutation feature importance: loss change after marginally
    shuffling the feature(s) of interest on the test rows."""

    _method = "pfi"

    def __init__(self, learner=None, measure="mse", resampling=None, n_repeats=5,
                 features=None, groups=None, random_state=None, n_threads=1):
        self.learner = learner
        self.measure = measure
        self.resampling = resampling
        self.n_repeats = n_repeats
        self.features = features
        self.groups = groups
        self.random_state = random_state
        self.n_threads = n_threads

    def _sampler_template(self):
        return MarginalPermutationSampler()

    def _conditioning(self, group_features):
        return ()


class CFI(_PerturbationBase):
    """Conditional feature importance: the feature(s) of interest are
    redrawn conditional on all remaining features."""

    _method = "cfi"

    def __init__(self, learner=None, measure="mse", resampling=None, sampler=None,
                 n_repeats=5, features=None, groups=None, random_state=None,
                 n_threads=1):
        self.learner = learner
        self.measure = measure
        self.resampling = resampling
        self.sampler = sampler
        self.n_repeats = n_repeats
        self.features = features
        self.groups = groups
        self.random_state = random_state
        self.n_threads = n_threads

    def _sampler_template(self):
        sampler = self.sampler if self.sampler is not None else ConditionalGaussianSampler()
        if not sampler.conditional:
            raise ValueError("CFI requires a conditional sampler "
                             f"(got {sampler.kind!r})")
        return sampler

    def _conditioning(self, group_features):
        return None  # sampler default: all remaining features

    def _validate(self, task):
        self._sampler_template()


class RFI(_PerturbationBase):
    """Relative feature importance: redraw conditional on an arbitrary
    conditioning set. An empty set recovers PFI (with a marginal sampler),
    the full complement recovers CFI."""

    _method = "rfi"

    def __init__(self, learner=None, measure="mse", resampling=None, sampler=None,
                 conditioning_set=(), n_repeats=5, features=None, groups=None,
                 random_state=None, n_threads=1):
        self.learner = learner
        self.measure = measure
        self.resampling = resampling
        self.sampler = sampler
        self.conditioning_set = conditioning_set
        self.n_repeats = n_repeats
        self.features = features
        self.groups = groups
        self.random_state = random_state
        self.n_threads = n_threads

    def _sampler_template(self):
        return self.sampler if self.sampler is not None else ConditionalGaussianSampler()

    def _conditioning(self, group_features):
        return tuple(self.conditioning_set)

    def _validate(self, task):
        G = list(self.conditioning_set)
        task.feature_index(G)
        groups = resolve_groups(task, self.features, self.groups)
        for name, feats in groups.items():
            overlap = set(feats) & set(G)
            if overlap:
                raise ValueError(f"conditioning set overlaps feature(s) of interest "
                                 f"{sorted(overlap)} in group {name!r}")
