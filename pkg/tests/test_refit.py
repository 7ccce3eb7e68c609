import numpy as np
import pandas as pd
import pytest

from featimp import (LOCO, WVIM, Featureless, Holdout, LinearModel,
                     RegressionForest, Task, evaluate_measure, fit_on_task,
                     predict_on_task, sim_correlated)


def imp_dict(est):
    df = est.importance()
    return dict(zip(df["feature"], df["importance"]))


class TestLOCOAnalytic:
    def test_linear_oracle(self, correlated_5000):
        # refit without x1 can use 2r * x2 instead; excess MSE = 4 (1 - r^2)
        loco = LOCO(learner=LinearModel(), resampling=Holdout(random_state=1),
                    random_state=2).fit(correlated_5000)
        d = imp_dict(loco)
        assert 1.25 <= d["x1"] <= 1.65
        assert 0.85 <= d["x3"] <= 1.1
        assert abs(d["x2"]) < 0.05
        assert abs(d["x4"]) < 0.05

    def test_equals_wvim_with_singleton_groups(self, correlated_small):
        kw = dict(learner=RegressionForest(n_trees=20), measure="mse",
                  resampling=Holdout(random_state=3), n_repeats=2, random_state=4)
        loco = LOCO(**kw).fit(correlated_small)
        wvim = WVIM(direction="leave-out",
                    groups={f: [f] for f in correlated_small.feature_names},
                    **kw).fit(correlated_small)
        pd.testing.assert_frame_equal(loco.scores_.records, wvim.scores_.records)

    def test_featureless_learner_all_zero(self, correlated_small):
        loco = LOCO(learner=Featureless(), resampling=Holdout(random_state=5),
                    random_state=6).fit(correlated_small)
        assert (loco.scores_.records["importance"] == 0.0).all()


class TestWVIM:
    def test_leave_in_all_features_equals_total_performance(self, correlated_small):
        # leave-in on the full feature set measures loss(featureless) - loss(full)
        inst = Holdout(random_state=7).instantiate(correlated_small)
        wvim = WVIM(learner=LinearModel(), direction="leave-in",
                    groups={"all": list(correlated_small.feature_names)},
                    resampling=inst, random_state=8).fit(correlated_small)
        from featimp.rng import substream_seed
        full = fit_on_task(LinearModel(), correlated_small, inst.train_sets[0],
                           random_state=substream_seed(8, "fit-group", 1, "all", 1))
        base = Featureless().fit(correlated_small.X(inst.train_sets[0]),
                                 correlated_small.target(inst.train_sets[0]))
        test = inst.test_sets[0]
        loss_full = evaluate_measure("mse", predict_on_task(full, correlated_small, test))
        loss_base = evaluate_measure("mse", predict_on_task(base, correlated_small, test))
        got = imp_dict(wvim)["all"]
        assert abs(got - (loss_base - loss_full)) < 1e-12
        assert got > 0

    def test_leave_in_sign_positive_for_predictive_group(self, correlated_small):
        wvim = WVIM(learner=LinearModel(), direction="leave-in",
                    groups={"signal": ["x1", "x3"], "noise": ["x4"]},
                    resampling=Holdout(random_state=9), random_state=10,
                    ).fit(correlated_small)
        d = imp_dict(wvim)
        assert d["signal"] > 1.0
        assert abs(d["noise"]) < 0.1

    def test_leave_out_group_removing_all_features_flagged(self, correlated_small):
        wvim = WVIM(learner=LinearModel(), direction="leave-out",
                    groups={"everything": list(correlated_small.feature_names)},
                    resampling=Holdout(random_state=11), random_state=12,
                    ).fit(correlated_small)
        assert any("featureless" in w for w in wvim.scores_.warnings)
        assert imp_dict(wvim)["everything"] > 1.0

    def test_direction_validated(self, correlated_small):
        with pytest.raises(ValueError, match="direction"):
            WVIM(learner=LinearModel(), direction="sideways").fit(correlated_small)

    def test_prefit_model_rejected(self, correlated_small):
        model = fit_on_task(LinearModel(), correlated_small,
                            correlated_small.row_ids[:500])
        with pytest.raises(ValueError, match="untrained learner"):
            WVIM(learner=model).fit(correlated_small)


class TestRefitInvariants:
    def test_duplicated_feature_has_near_zero_loco(self):
        rng = np.random.default_rng(13)
        n = 700
        x1 = rng.normal(size=n)
        x2 = rng.normal(size=n)
        X = np.column_stack([x1, x1, x2])
        y = 2 * x1 + x2 + 0.2 * rng.normal(size=n)
        task = Task("dup", X, ["a", "a_copy", "b"], y)
        loco = LOCO(learner=RegressionForest(n_trees=60), features=["a_copy"],
                    resampling=Holdout(random_state=14), n_repeats=6,
                    random_state=15).fit(task)
        rec = loco.scores_.records["importance"].to_numpy()
        se = rec.std(ddof=1) / np.sqrt(len(rec))
        assert abs(rec.mean()) <= 3 * se + 0.02

    def test_repeat_averaging_reduces_seed_variance(self):
        # aggregated importance over 12 seeds: repeats=4 must vary less than
        # repeats=1 for a stochastic learner
        task = sim_correlated(n=400, random_state=16)
        def run(n_repeats, seed):
            loco = LOCO(learner=RegressionForest(n_trees=25), features=["x1"],
                        resampling=Holdout(random_state=17), n_repeats=n_repeats,
                        random_state=seed).fit(task)
            return imp_dict(loco)["x1"]
        one = np.array([run(1, s) for s in range(12)])
        four = np.array([run(4, s) for s in range(12)])
        assert four.var(ddof=1) < one.var(ddof=1)

    def test_full_model_loss_shared_across_groups(self, correlated_small):
        loco = LOCO(learner=LinearModel(), resampling=Holdout(random_state=18),
                    random_state=19).fit(correlated_small)
        rec = loco.scores_.records
        assert rec.groupby(["iter_rsmp", "iter_repeat"])["loss_baseline"].nunique().max() == 1

    def test_obs_diff_means_match_records(self, correlated_small):
        loco = LOCO(learner=LinearModel(), resampling=Holdout(random_state=20),
                    random_state=21).fit(correlated_small)
        obs = loco.obs_loss_diffs()
        merged = (obs.groupby(["feature", "iter_rsmp", "iter_repeat"])["delta"]
                  .mean().reset_index())
        joined = loco.scores_.records.merge(merged,
                                            on=["feature", "iter_rsmp", "iter_repeat"])
        np.testing.assert_allclose(joined["delta"], joined["importance"], atol=1e-12)
