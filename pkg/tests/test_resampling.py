import numpy as np
import pytest

from featimp import CV, Bootstrap, Holdout, Subsampling, Task, make_resampling


def task_n(n, seed=0):
    rng = np.random.default_rng(seed)
    return Task("t", rng.normal(size=(n, 2)), ["a", "b"], rng.normal(size=n))


class TestHoldout:
    def test_two_thirds_of_nine(self):
        inst = Holdout(ratio=2 / 3, random_state=1).instantiate(task_n(9))
        assert inst.K == 1
        assert inst.n_train[0] == 6
        assert inst.n_test[0] == 3

    def test_infeasible_ratio(self):
        with pytest.raises(ValueError, match="empty train or test"):
            Holdout(ratio=0.01, random_state=1).instantiate(task_n(9))
        with pytest.raises(ValueError, match="strictly between"):
            Holdout(ratio=1.5).instantiate(task_n(9))


class TestCV:
    def test_three_folds_partition_nine(self):
        inst = CV(folds=3, random_state=2).instantiate(task_n(9))
        assert inst.K == 3
        tests = [set(t) for t in inst.test_sets]
        assert all(len(t) == 3 for t in tests)
        assert set().union(*tests) == set(range(1, 10))
        for i in range(3):
            for j in range(i + 1, 3):
                assert not tests[i] & tests[j]

    def test_train_is_complement(self):
        inst = CV(folds=4, random_state=3).instantiate(task_n(20))
        for tr, te in zip(inst.train_sets, inst.test_sets):
            assert set(tr) | set(te) == set(range(1, 21))
            assert not set(tr) & set(te)

    def test_folds_exceeding_n(self):
        with pytest.raises(ValueError, match="n >= folds"):
            CV(folds=10).instantiate(task_n(5))


class TestSubsampling:
    def test_iterations_differ(self):
        inst = Subsampling(repeats=15, ratio=0.9, random_state=4).instantiate(task_n(100))
        tests = {tuple(sorted(t)) for t in inst.test_sets}
        assert len(tests) == 15

    def test_sizes(self):
        inst = Subsampling(repeats=3, ratio=0.9, random_state=5).instantiate(task_n(100))
        assert all(inst.n_train == 90)
        assert all(inst.n_test == 10)


class TestBootstrap:
    def test_oob_fraction_near_e_inverse(self):
        # mean out-of-bag fraction over 50 seeds approximates (1 - 1/n)^n
        fracs = []
        t = task_n(100)
        for seed in range(50):
            inst = Bootstrap(repeats=1, random_state=seed).instantiate(t)
            fracs.append(inst.n_test[0] / 100)
        assert abs(np.mean(fracs) - 0.368) < 0.05

    def test_train_multiset_and_disjoint_oob(self):
        inst = Bootstrap(repeats=5, random_state=6).instantiate(task_n(60))
        for tr, te in zip(inst.train_sets, inst.test_sets):
            assert len(tr) == 60
            assert not set(tr) & set(te)


class TestDeterminism:
    def test_reinstantiation_bit_identical(self):
        t = task_n(50)
        for make in (lambda: Holdout(random_state=7), lambda: CV(folds=5, random_state=7),
                     lambda: Subsampling(repeats=4, random_state=7),
                     lambda: Bootstrap(repeats=4, random_state=7)):
            a = make().instantiate(t)
            b = make().instantiate(t)
            for x, y in zip(a.train_sets + a.test_sets, b.train_sets + b.test_sets):
                np.testing.assert_array_equal(x, y)

    def test_registry(self):
        assert isinstance(make_resampling("cv", folds=3), CV)
        with pytest.raises(ValueError, match="unknown resampling"):
            make_resampling("loocv")
        with pytest.raises(ValueError, match="invalid holdout parameters"):
            make_resampling("holdout", nope=1)
