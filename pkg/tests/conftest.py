import numpy as np
import pytest
from scipy.special import expit

from src.domains.models.schemas import Dataset, Family, ModelSpec


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def logistic_model():
    return ModelSpec(family=Family.logistic, p=2)


@pytest.fixture
def hetero_model():
    return ModelSpec(family=Family.hetero_log_var, p=2)


@pytest.fixture
def linear_model():
    return ModelSpec(family=Family.linear, p=1)


def make_logistic_data(n: int, beta, seed: int = 0) -> Dataset:
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, len(beta) - 1))
    eta = beta[0] + X @ np.asarray(beta[1:])
    y = (rng.random(n) < expit(eta)).astype(float)
    return Dataset(X=X, y=y)


@pytest.fixture
def logistic_data():
    return make_logistic_data(3000, [0.1, 0.5, 0.5], seed=7)


@pytest.fixture
def hetero_data():
    rng = np.random.default_rng(11)
    X = rng.uniform(-1.0, 1.0, size=(400, 2))
    beta = np.array([0.5, 0.3, -0.4])
    eta = beta[0] + X @ beta[1:]
    y = eta + np.exp(0.5 * X @ beta[1:]) * rng.standard_normal(400)
    return Dataset(X=X, y=y)


@pytest.fixture
def blobs():
    rng = np.random.default_rng(3)
    first = rng.normal(0.0, 0.5, size=(200, 2))
    second = rng.normal(5.0, 0.5, size=(200, 2))
    return np.vstack([first, second])
