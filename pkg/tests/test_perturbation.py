import numpy as np
import pandas as pd
import pytest

from featimp import (CFI, PFI, RFI, ConditionalGaussianSampler, Featureless,
                     Holdout, KnockoffGaussianSampler, LinearModel,
                     MarginalPermutationSampler, RegressionForest, Subsampling,
                     fit_on_task, sim_correlated, sim_independent)


def imp_dict(est):
    df = est.importance()
    return dict(zip(df["feature"], df["importance"]))


class TestPFIAnalytic:
    def test_linear_oracle_on_correlated_dgp(self, correlated_5000):
        # for a linear model with coefficient b, permuting x_j shifts the MSE
        # by E[(b (x - x'))^2] = 2 b^2 Var(x): 8.0 for x1, 2.0 for x3
        pfi = PFI(learner=LinearModel(), resampling=Holdout(random_state=1),
                  n_repeats=10, random_state=5).fit(correlated_5000)
        d = imp_dict(pfi)
        assert 7.4 <= d["x1"] <= 8.6
        assert 1.8 <= d["x3"] <= 2.2
        assert abs(d["x2"]) < 0.1
        assert abs(d["x4"]) < 0.1

    def test_forest_reproduces_published_ordering(self, correlated_5000):
        pfi = PFI(learner=RegressionForest(n_trees=100),
                  resampling=Holdout(random_state=2), n_repeats=10,
                  random_state=6).fit(correlated_5000)
        d = imp_dict(pfi)
        assert d["x1"] > d["x3"] > d["x2"] > abs(d["x4"])
        assert 4.0 < d["x1"] < 9.0
        assert 1.0 < d["x3"] < 2.5
        assert 0.0 < d["x2"] < 1.5
        assert abs(d["x4"]) < 0.1


class TestCFIAnalytic:
    def test_linear_gaussian_oracle(self, correlated_5000):
        # conditional variance of x1 given x2 is 1 - r^2, so CFI(x1) is
        # 2 * b1^2 * (1 - 0.64) = 2.88
        cfi = CFI(learner=LinearModel(), resampling=Holdout(random_state=3),
                  n_repeats=10, random_state=7).fit(correlated_5000)
        d = imp_dict(cfi)
        assert 2.5 <= d["x1"] <= 3.3
        assert abs(d["x2"]) < 0.1

    def test_requires_conditional_sampler(self, correlated_small):
        cfi = CFI(learner=LinearModel(), sampler=MarginalPermutationSampler())
        with pytest.raises(ValueError, match="requires a conditional sampler"):
            cfi.fit(correlated_small)


class TestRFIReductions:
    def test_empty_set_is_pfi_bitwise(self, correlated_small):
        kw = dict(learner=LinearModel(), resampling=Holdout(random_state=4),
                  n_repeats=4, random_state=8)
        pfi = PFI(**kw).fit(correlated_small)
        rfi = RFI(sampler=MarginalPermutationSampler(), conditioning_set=(),
                  **kw).fit(correlated_small)
        pd.testing.assert_frame_equal(pfi.scores_.records, rfi.scores_.records)

    def test_full_complement_is_cfi_bitwise(self, correlated_small):
        kw = dict(learner=LinearModel(), resampling=Holdout(random_state=4),
                  n_repeats=4, random_state=8)
        cfi = CFI(**kw).fit(correlated_small)
        parts = []
        for f in correlated_small.feature_names:
            others = [g for g in correlated_small.feature_names if g != f]
            rfi = RFI(conditioning_set=others, features=[f], **kw).fit(correlated_small)
            parts.append(rfi.scores_.records)
        merged = (pd.concat(parts, ignore_index=True)
                  .sort_values(["feature", "iter_rsmp", "iter_repeat"])
                  .reset_index(drop=True))
        ref = (cfi.scores_.records
               .sort_values(["feature", "iter_rsmp", "iter_repeat"])
               .reset_index(drop=True))
        pd.testing.assert_frame_equal(ref, merged)

    def test_conditioning_overlap_rejected(self, correlated_small):
        rfi = RFI(learner=LinearModel(), conditioning_set=["x1"])
        with pytest.raises(ValueError, match="overlaps"):
            rfi.fit(correlated_small)

    def test_knockoff_sampler_rejected_with_conditioning(self, correlated_small):
        rfi = RFI(learner=LinearModel(), sampler=KnockoffGaussianSampler(),
                  conditioning_set=["x2"], features=["x1"], random_state=1)
        with pytest.raises(ValueError, match="only compatible with CFI"):
            rfi.fit(correlated_small)


class TestInvariants:
    def test_cfi_matches_pfi_on_independent_features(self):
        # paired per-iteration comparison under subsampling
        task = sim_independent(n=2000, coefficients=(1.0, 1.0, 0.0), random_state=21)
        kw = dict(learner=LinearModel(), measure="mse",
                  resampling=Subsampling(repeats=10, ratio=0.8, random_state=5),
                  n_repeats=5, random_state=9)
        pfi = PFI(**kw).fit(task).scores_.iteration_means()
        cfi = CFI(**kw).fit(task).scores_.iteration_means()
        for f in task.feature_names:
            a = pfi.loc[pfi["feature"] == f, "importance"].to_numpy()
            b = cfi.loc[cfi["feature"] == f, "importance"].to_numpy()
            diff = b - a
            se = diff.std(ddof=1) / np.sqrt(len(diff))
            assert abs(diff.mean()) <= 3 * se + 1e-9

    def test_featureless_model_gives_exact_zero(self, correlated_small):
        pfi = PFI(learner=Featureless(), resampling=Holdout(random_state=5),
                  n_repeats=3, random_state=10).fit(correlated_small)
        assert (pfi.scores_.records["importance"] == 0.0).all()

    def test_singleton_group_equals_feature(self, correlated_small):
        kw = dict(learner=LinearModel(), resampling=Holdout(random_state=6),
                  n_repeats=3, random_state=11)
        by_feature = PFI(features=["x1"], **kw).fit(correlated_small)
        by_group = PFI(groups={"x1": ["x1"]}, **kw).fit(correlated_small)
        pd.testing.assert_frame_equal(by_feature.scores_.records,
                                      by_group.scores_.records)

    def test_rsq_sign_convention(self, correlated_small):
        # positive importance means R^2 drops after perturbation
        pfi = PFI(learner=LinearModel(), measure="rsq",
                  resampling=Holdout(random_state=7), n_repeats=5,
                  random_state=12).fit(correlated_small)
        d = imp_dict(pfi)
        assert d["x1"] > 0.3
        rec = pfi.scores_.records.iloc[0]
        assert rec["loss_post"] < rec["loss_baseline"]  # R^2 dropped

    def test_group_perturbation_joint(self, correlated_5000):
        # perturbing the correlated pair jointly keeps within-pair structure:
        # group PFI must exceed the x1-only PFI but stay below the sum of
        # marginal PFIs plus interaction slack; sanity ordering only
        pfi = PFI(learner=LinearModel(), resampling=Holdout(random_state=8),
                  groups={"pair": ["x1", "x2"], "rest": ["x3", "x4"]},
                  n_repeats=5, random_state=13).fit(correlated_5000)
        d = imp_dict(pfi)
        assert d["pair"] > 5.0
        assert 1.5 < d["rest"] < 2.5


class TestObsDiffs:
    def test_mean_reproduces_record_importance(self, correlated_small):
        pfi = PFI(learner=LinearModel(), resampling=Holdout(random_state=9),
                  n_repeats=3, random_state=14).fit(correlated_small)
        obs = pfi.obs_loss_diffs()
        rec = pfi.scores_.records
        merged = (obs.groupby(["feature", "iter_rsmp", "iter_repeat"])["delta"]
                  .mean().reset_index())
        joined = rec.merge(merged, on=["feature", "iter_rsmp", "iter_repeat"])
        np.testing.assert_allclose(joined["delta"], joined["importance"], atol=1e-12)

    def test_non_decomposable_measure_has_no_obs_diffs(self, correlated_small):
        pfi = PFI(learner=LinearModel(), measure="rsq",
                  resampling=Holdout(random_state=10), n_repeats=2,
                  random_state=15).fit(correlated_small)
        with pytest.raises(ValueError, match="measure not decomposable"):
            pfi.obs_loss_diffs()

    def test_constant_predictions_give_zero_deltas(self, correlated_small):
        pfi = PFI(learner=Featureless(), resampling=Holdout(random_state=11),
                  n_repeats=2, random_state=16).fit(correlated_small)
        assert (pfi.obs_loss_diffs()["delta"] == 0.0).all()


class TestAggregation:
    def test_importance_means(self, correlated_small):
        pfi = PFI(learner=LinearModel(), resampling=Holdout(random_state=12),
                  n_repeats=4, random_state=17).fit(correlated_small)
        rec = pfi.scores_.records
        # arity: one record per (feature, iteration, repeat)
        assert len(rec) == 4 * 1 * 4
        d = imp_dict(pfi)
        for f in correlated_small.feature_names:
            assert d[f] == rec.loc[rec["feature"] == f, "importance"].mean()


class TestPreFitModels:
    def test_prefit_skips_training_and_matches_refit(self, correlated_small):
        inst = Holdout(random_state=13).instantiate(correlated_small)
        # engine-trained path and a pre-fit model trained on the same rows
        kw = dict(measure="mse", resampling=inst, n_repeats=3, random_state=18)
        from featimp.rng import substream_seed
        model = fit_on_task(LinearModel(), correlated_small, inst.train_sets[0],
                            random_state=substream_seed(18, "fit", 1))
        a = PFI(learner=LinearModel(), **kw).fit(correlated_small)
        b = PFI(learner=model, **kw).fit(correlated_small)
        pd.testing.assert_frame_equal(a.scores_.records, b.scores_.records)

    def test_prefit_requires_single_test_set(self, correlated_small):
        from featimp import CV
        model = fit_on_task(LinearModel(), correlated_small,
                            correlated_small.row_ids[:1000])
        pfi = PFI(learner=model, resampling=CV(folds=3, random_state=14))
        with pytest.raises(ValueError, match="exactly one test set"):
            pfi.fit(correlated_small)


class TestValidation:
    def test_n_repeats_must_be_positive(self, correlated_small):
        with pytest.raises(ValueError, match="n_repeats"):
            PFI(learner=LinearModel(), n_repeats=0).fit(correlated_small)

    def test_features_and_groups_exclusive(self, correlated_small):
        with pytest.raises(ValueError, match="either features or groups"):
            PFI(learner=LinearModel(), features=["x1"],
                groups={"g": ["x2"]}).fit(correlated_small)

    def test_learner_required(self, correlated_small):
        with pytest.raises(ValueError, match="learner"):
            PFI().fit(correlated_small)

    def test_threads_do_not_change_results(self, correlated_small):
        kw = dict(learner=LinearModel(), resampling=Holdout(random_state=15),
                  n_repeats=6, random_state=19)
        a = PFI(n_threads=1, **kw).fit(correlated_small)
        b = PFI(n_threads=4, **kw).fit(correlated_small)
        pd.testing.assert_frame_equal(a.scores_.records, b.scores_.records)
