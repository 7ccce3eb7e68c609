"""Shapley-based global importance via the permutation estimator.

Performance (loss versus a mean-prediction baseline) is distributed across
features by sampling feature orderings and crediting each feature with the
value gained when it joins the coalition of features before it (Covert et
al. 2020). The value of a coalition S is measured by imputing the missing
features either from the marginal background distribution or from a
conditional sampler given X_S.

Per permutation the credited gains telescope to v(full coalition), so the
estimates sum to the total performance exactly (up to float rounding). An
exact enumeration oracle over all 2^p coalitions is provided for testing
at small p.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from sklearn.base import clone

from .base import ImportanceEstimator
from .learners import fit_on_task
from .parallel import parallel_map
from .resampling import resolve_instance
from .rng import substream, substream_seed
from .samplers import ConditionalGaussianSampler
from .scores import ScoresTable, records_frame
from .task import Prediction, Task, evaluate_measure, get_measure
from .validation import is_fitted


def _mask_bits(mask) -> int:
    bits = 0
    for j in np.where(mask)[0]:
        bits |= 1 << int(j)
    return bits


@dataclass
class SageState:
    """Per-iteration estimator state: streaming moments of the per-permutation
    feature contributions plus workload bookkeeping."""

    features: tuple
    permutations: int = 0
    coalitions_evaluated: int = 0
    early_stopped: bool = False
    v_full: float = 0.0
    loss_empty: float = 0.0
    mean: np.ndarray = field(default=None, repr=False)
    m2: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        p = len(self.features)
        if self.mean is None:
            self.mean = np.zeros(p)
        if self.m2 is None:
            self.m2 = np.zeros(p)

    def update(self, deltas):
        self.permutations += 1
        d = deltas - self.mean
        self.mean += d / self.permutations
        self.m2 += d * (deltas - self.mean)

    def se(self) -> np.ndarray:
        if self.permutations < 2:
            return np.full(len(self.features), np.inf)
        return np.sqrt(self.m2 / (self.permutations - 1) / self.permutations)

    def converged(self, ratio) -> bool:
        spread = float(self.mean.max() - self.mean.min())
        if spread <= 0.0:
            return False
        return float(self.se().max()) < ratio * spread


class _CoalitionValues:
    """Evaluates v(S) for one fitted model on one test set.

    v(S) = sign * (loss of the mean-prediction baseline - loss of the
    prediction with features outside S integrated out). v(empty) = 0 by
    construction and v(all) uses the exact model predictions, so both ends
    of every permutation walk are noise-free.
    """

    def __init__(self, model, measure, task, test_ids, background_X, variant,
                 sampler, n_samples, cache_by_mask=False):
        self.model = model
        self.measure = measure
        self.task = task
        self.test_ids = np.asarray(test_ids, dtype=np.int64)
        self.names = tuple(getattr(model, "feature_names_in_", task.feature_names))
        self.variant = variant
        self.sampler = sampler
        self.n_samples = n_samples
        self.X_test = task.X(self.test_ids, self.names)
        self.truth = task.target(self.test_ids)
        self.X_back = background_X
        empty_response = np.full(len(self.truth), float(np.mean(model.predict(background_X))))
        self.loss_empty = evaluate_measure(measure, Prediction(self.test_ids, self.truth,
                                                               empty_response))
        self.loss_full = evaluate_measure(measure, Prediction(self.test_ids, self.truth,
                                                              model.predict(self.X_test)))
        self.v_full = measure.sign * (self.loss_empty - self.loss_full)
        self._cache = {} if cache_by_mask else None

    def value(self, mask, stream_keys):
        """(v(S), loss(S)) for the boolean coalition mask over self.names."""
        if mask.all():
            return self.v_full, self.loss_full
        if not mask.any():
            return 0.0, self.loss_empty
        if self._cache is not None:
            hit = self._cache.get(_mask_bits(mask))
            if hit is not None:
                return hit
        n = self.X_test.shape[0]
        s = self.n_samples
        out_idx = np.where(~mask)[0]
        if self.variant == "marginal":
            rng = substream(*stream_keys)
            bg = rng.integers(0, self.X_back.shape[0], (n, s))
            Xi = self.X_back[bg.reshape(-1)]
            in_idx = np.where(mask)[0]
            Xi[:, in_idx] = np.repeat(self.X_test[:, in_idx], s, axis=0)
            preds = self.model.predict(Xi).reshape(n, s).mean(axis=1)
        else:
            draw_names = [self.names[j] for j in out_idx]
            cond_names = [self.names[j] for j in np.where(mask)[0]]
            draws = self.sampler.sample(draw_names, self.task, self.test_ids,
                                        conditioning=cond_names,
                                        random_state=substream_seed(*stream_keys),
                                        n_draws=s)
            Xi = np.tile(self.X_test, (s, 1))
            Xi[:, out_idx] = draws.reshape(s * n, len(out_idx))
            preds = self.model.predict(Xi).reshape(s, n).mean(axis=0)
        loss = evaluate_measure(self.measure, Prediction(self.test_ids, self.truth, preds))
        v = self.measure.sign * (self.loss_empty - loss)
        if self._cache is not None:
            self._cache[_mask_bits(mask)] = (v, loss)
        return v, loss


class _SageBase(ImportanceEstimator):
    _variant = ""
    _method = ""

    def _sampler_template(self):
        return None

    def fit(self, task: Task):
        measure = get_measure(self.measure)
        if self.learner is None:
            raise ValueError("a learner or pre-fit model is required")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.n_permutations < self.min_permutations:
            raise ValueError("n_permutations must be >= min_permutations")
        instance = resolve_instance(self.resampling, task)
        prefit = is_fitted(self.learner)
        if prefit and instance.K != 1:
            raise ValueError("a pre-fit model requires a resampling instantiated "
                             "with exactly one test set (holdout)")
        sampler_template = self._sampler_template()
        seed = self.random_state
        records, warnings, states = [], [], []

        for k in range(1, instance.K + 1):
            train_ids = instance.train_sets[k - 1]
            test_ids = instance.test_sets[k - 1]
            if prefit:
                model = self.learner
            else:
                model = fit_on_task(self.learner, task, train_ids,
                                    random_state=substream_seed(seed, "fit", k))
            names = tuple(getattr(model, "feature_names_in_", task.feature_names))
            p = len(names)
            bg_rng = substream(seed, "background", k)
            n_bg = min(int(self.background_size), len(train_ids))
            back_rows = bg_rng.choice(train_ids, size=n_bg, replace=False)
            sampler = None
            if sampler_template is not None:
                sampler = clone(sampler_template).fit(task, rows=train_ids)
                warnings.extend(f"iteration {k}: {n}" for n in sampler.notes_)
            evaluator = _CoalitionValues(
                model, measure, task, test_ids, task.X(back_rows, names),
                self._variant, sampler, int(self.n_samples),
                cache_by_mask=self.coalition_seeded_draws)
            state = SageState(features=names, v_full=evaluator.v_full,
                              loss_empty=evaluator.loss_empty)
            state.coalitions_evaluated = 1  # the empty coalition

            def walk(perm_idx, _k=k, _ev=evaluator, _p=p, _names=names):
                rng = substream(seed, "perm", _k, perm_idx)
                order = rng.permutation(_p)
                mask = np.zeros(_p, dtype=bool)
                v_prev, loss_prev = 0.0, _ev.loss_empty
                deltas = np.empty(_p)
                recs = []
                for step, j in enumerate(order):
                    mask[j] = True
                    if self.coalition_seeded_draws:
                        keys = (seed, "impute", _k, _mask_bits(mask))
                    else:
                        keys = (seed, "impute", _k, perm_idx, step)
                    v_cur, loss_cur = _ev.value(mask, keys)
                    deltas[j] = v_cur - v_prev
                    recs.append((_names[j], _k, perm_idx, loss_prev, loss_cur,
                                 v_cur - v_prev))
                    v_prev, loss_prev = v_cur, loss_cur
                return deltas, recs

            if self.early_stopping:
                # serial: the stopping decision must not depend on worker count
                for perm_idx in range(1, self.n_permutations + 1):
                    deltas, recs = walk(perm_idx)
                    state.update(deltas)
                    state.coalitions_evaluated += p
                    records.extend(recs)
                    if (state.permutations >= self.min_permutations
                            and state.converged(self.convergence_ratio)):
                        state.early_stopped = True
                        break
            else:
                results = parallel_map(walk, range(1, self.n_permutations + 1),
                                       self.n_threads)
                for deltas, recs in results:
                    state.update(deltas)
                    state.coalitions_evaluated += p
                    records.extend(recs)
            states.append(state)

        self.states_ = states
        self.scores_ = ScoresTable(
            records=records_frame(records),
            method=self._method,
            measure=measure,
            resampling=instance,
            feature_order=tuple(states[0].features),
            sampler=None if sampler_template is None else sampler_template.kind,
            obs_diffs=None,
            warnings=warnings,
            meta={
                "variant": self._variant,
                "n_samples": int(self.n_samples),
                "coalitions_evaluated": int(sum(s.coalitions_evaluated for s in states)),
                "early_stopping_rule": "stop once max per-feature se of the running "
                                       "mean drops below convergence_ratio times the "
                                       "range of the running means",
                "iterations": [{"iteration": i + 1,
                                "permutations": s.permutations,
                                "coalitions_evaluated": s.coalitions_evaluated,
                                "early_stopped": s.early_stopped,
                                "v_full": s.v_full} for i, s in enumerate(states)],
            },
        )
        return self

    def sage_values(self):
        """Per-feature running means with their standard errors (diagnostic)."""
        self._require_fitted()
        imp = self.scores_.importance()
        ses = []
        for f in imp["feature"]:
            per_perm = self.scores_.records.loc[self.scores_.records["feature"] == f,
                                                "importance"].to_numpy()
            ses.append(np.std(per_perm, ddof=1) / np.sqrt(per_perm.size)
                       if per_perm.size > 1 else np.inf)
        imp["se"] = ses
        return imp


class MarginalSAGE(_SageBase):
    """SAGE with marginal imputation: missing features are spliced in from
    background rows drawn uniformly with replacement."""

    _variant = "marginal"
    _method = "sage_marginal"

    def __init__(self, learner=None, measure="mse", resampling=None,
                 n_permutations=100, n_samples=100, min_permutations=20,
                 early_stopping=False, convergence_ratio=0.025,
                 background_size=512, coalition_seeded_draws=False,
                 random_state=None, n_threads=1):
        self.learner = learner
        self.measure = measure
        self.resampling = resampling
        self.n_permutations = n_permutations
        self.n_samples = n_samples
        self.min_permutations = min_permutations
        self.early_stopping = early_stopping
        self.convergence_ratio = convergence_ratio
        self.background_size = background_size
        self.coalition_seeded_draws = coalition_seeded_draws
        self.random_state = random_state
        self.n_threads = n_threads


class ConditionalSAGE(_SageBase):
    """SAGE with conditional imputation: missing features are drawn from a
    conditional sampler given the coalition's observed values."""

    _variant = "conditional"
    _method = "sage_conditional"

    def __init__(self, learner=None, measure="mse", resampling=None, sampler=None,
                 n_permutations=100, n_samples=100, min_permutations=20,
                 early_stopping=False, convergence_ratio=0.025,
                 background_size=512, coalition_seeded_draws=False,
                 random_state=None, n_threads=1):
        self.learner = learner
        self.measure = measure
        self.resampling = resampling
        self.sampler = sampler
        self.n_permutations = n_permutations
        self.n_samples = n_samples
        self.min_permutations = min_permutations
        self.early_stopping = early_stopping
        self.convergence_ratio = convergence_ratio
        self.background_size = background_size
        self.coalition_seeded_draws = coalition_seeded_draws
        self.random_state = random_state
        self.n_threads = n_threads

    def _sampler_template(self):
        sampler = self.sampler if self.sampler is not None else ConditionalGaussianSampler()
        if not sampler.conditional:
            raise ValueError("conditional SAGE requires a conditional sampler "
                             f"(got {sampler.kind!r})")
        return sampler


def exact_shapley_values(model, measure, task, test_rows, background_rows,
                         variant="marginal", sampler=None, n_samples=100,
                         random_state=None):
    """Exact Shapley attribution over all 2^p coalitions (test oracle).

    Each coalition value is evaluated once with draws keyed by the coalition
    content, matching a coalition_seeded_draws estimator run on the same
    seed. Guarded to p <= 12.
    """
    measure = get_measure(measure)
    names = tuple(getattr(model, "feature_names_in_", task.feature_names))
    p = len(names)
    if p > 12:
        raise ValueError("p too large for exact enumeration (requires p <= 12)")
    evaluator = _CoalitionValues(model, measure, task, test_rows,
                                 task.X(background_rows, names), variant, sampler,
                                 int(n_samples), cache_by_mask=True)
    values = np.empty(1 << p)
    for bits in range(1 << p):
        mask = np.array([(bits >> j) & 1 for j in range(p)], dtype=bool)
        values[bits], _ = evaluator.value(mask, (random_state, "impute", 1, bits))
    weights = [math.factorial(s) * math.factorial(p - s - 1) / math.factorial(p)
               for s in range(p)]
    sage = np.zeros(p)
    for bits in range(1 << p):
        size = bin(bits).count("1")
        for j in range(p):
            if not (bits >> j) & 1:
                sage[j] += weights[size] * (values[bits | (1 << j)] - values[bits])
    out = pd.DataFrame({"feature": list(names), "sage": sage})
    out.attrs["meta"] = {"v_full": evaluator.v_full, "loss_empty": evaluator.loss_empty,
                         "coalitions": 1 << p}
    return out
