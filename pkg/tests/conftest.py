import numpy as np
import pytest

from featimp import Task, sim_correlated


@pytest.fixture(scope="session")
def correlated_small():
    return sim_correlated(n=1500, r=0.8, random_state=11)


@pytest.fixture(scope="session")
def correlated_5000():
    return sim_correlated(n=5000, r=0.8, random_state=101)


@pytest.fixture()
def tiny_task():
    X = np.array([[1.0, 10.0], [2.0, 20.0], [3.0, 30.0], [4.0, 40.0]])
    return Task("tiny", X, ["a", "b"], np.array([1.0, 2.0, 3.0, 4.0]))
