import numpy as np
import pytest
from scipy.special import expit

from src.core.errors import InvalidArgumentError, NumericOverflowError, SeparationError
from src.domains.models.schemas import Dataset, Family, ModelSpec
from src.domains.models.service import ModelService

model_service = ModelService()


def test_dim_beta_and_rank():
    assert ModelSpec(family=Family.logistic, p=3).dim_beta == 4
    assert ModelSpec(family=Family.logistic_no_intercept, p=3).dim_beta == 3
    assert ModelSpec(family=Family.linear, p=3).dim_beta == 4
    hetero = ModelSpec(family=Family.hetero_log_var, p=3)
    assert hetero.dim_beta == 4
    assert hetero.rank == 2


def test_logistic_information_matches_dense(logistic_model):
    beta = np.array([0.1, 0.5, -0.3])
    x = np.array([0.7, -1.2])
    z = np.array([1.0, *x])
    pi = expit(z @ beta)
    expected = pi * (1 - pi) * np.outer(z, z)
    np.testing.assert_allclose(model_service.fisher_info(logistic_model, beta, x).dense(), expected, rtol=1e-12)


def test_logistic_information_is_finite_for_large_eta(logistic_model):
    F = model_service.information_factors(logistic_model, [0.0, 400.0, 400.0], np.array([[3.0, 3.0], [-3.0, -3.0]]))
    assert np.all(np.isfinite(F))


def test_hetero_information_matches_dense(hetero_model):
    beta = np.array([0.2, 0.4, -0.6])
    x = np.array([0.5, 1.5])
    z = np.array([1.0, *x])
    xt = np.array([0.0, *x])
    sigma2 = np.exp(x @ beta[1:])
    expected = np.outer(z, z) / sigma2 + 0.5 * np.outer(xt, xt)
    info = model_service.fisher_info(hetero_model, beta, x)
    assert info.rank == 2
    np.testing.assert_allclose(info.dense(), expected, rtol=1e-12)


def test_hetero_variance_overflow_is_reported(hetero_model):
    X = np.array([[0.0, 0.0], [1.0, 1.0]])
    with pytest.raises(NumericOverflowError) as err:
        model_service.information_factors(hetero_model, [0.0, 500.0, 500.0], X)
    assert err.value.row == 1


def test_information_factors_have_model_rank(logistic_model, hetero_model):
    X = np.random.default_rng(8).standard_normal((5, 2))
    assert model_service.information_factors(logistic_model, [0.1, 0.2, 0.3], X).shape == (5, 1, 3)
    assert model_service.information_factors(hetero_model, [0.1, 0.2, 0.3], X).shape == (5, 2, 3)


def test_beta_length_is_checked(logistic_model):
    with pytest.raises(InvalidArgumentError):
        model_service.fisher_info(logistic_model, [0.1, 0.2], np.array([0.0, 0.0]))


def test_logistic_likelihood_at_zero(logistic_model, logistic_data):
    value = model_service.log_likelihood(logistic_model, np.zeros(3), logistic_data)
    assert value == pytest.approx(-logistic_data.n * np.log(2.0), rel=1e-12)


def test_linear_likelihood_at_zero(linear_model):
    data = Dataset(X=np.linspace(-1.0, 1.0, 9)[:, None], y=np.zeros(9))
    value = model_service.log_likelihood(linear_model, np.zeros(2), data)
    assert value == pytest.approx(-4.5 * np.log(2.0 * np.pi), rel=1e-12)


def _numeric_score(model, beta, data, weights=None, h=1e-6):
    grad = np.zeros_like(beta)
    for j in range(beta.size):
        step = np.zeros_like(beta)
        step[j] = h
        up = model_service.log_likelihood(model, beta + step, data, weights)
        down = model_service.log_likelihood(model, beta - step, data, weights)
        grad[j] = (up - down) / (2 * h)
    return grad


@pytest.mark.parametrize("seed", range(5))
def test_logistic_score_matches_finite_differences(logistic_model, seed):
    rng = np.random.default_rng(seed)
    data = Dataset(X=rng.standard_normal((60, 2)), y=rng.integers(0, 2, 60).astype(float))
    beta = rng.normal(0.0, 0.5, 3)
    weights = rng.uniform(0.2, 1.0, 60)
    np.testing.assert_allclose(
        model_service.score(logistic_model, beta, data, weights), _numeric_score(logistic_model, beta, data, weights), rtol=1e-5, atol=1e-6
    )


@pytest.mark.parametrize("seed", range(5))
def test_hetero_score_matches_finite_differences(hetero_model, seed):
    rng = np.random.default_rng(100 + seed)
    data = Dataset(X=rng.uniform(-1, 1, (60, 2)), y=rng.standard_normal(60))
    beta = rng.normal(0.0, 0.5, 3)
    np.testing.assert_allclose(
        model_service.score(hetero_model, beta, data), _numeric_score(hetero_model, beta, data), rtol=1e-5, atol=1e-6
    )


def test_logistic_mle_recovers_parameter():
    rng = np.random.default_rng(1)
    beta = np.array([0.1, 0.5, 0.5])
    X = rng.standard_normal((20_000, 2))
    y = (rng.random(20_000) < expit(beta[0] + X @ beta[1:])).astype(float)
    estimate = model_service.fit_mle(ModelSpec(family=Family.logistic, p=2), Dataset(X=X, y=y))
    assert estimate.converged
    assert np.linalg.norm(estimate.beta - beta) < 0.1


def test_uniform_weights_match_unweighted_fit(logistic_model, logistic_data):
    plain = model_service.fit_mle(logistic_model, logistic_data)
    weighted = model_service.fit_mle(logistic_model, logistic_data, weights=np.full(logistic_data.n, 0.25))
    np.testing.assert_allclose(weighted.beta, plain.beta, atol=1e-8)


def test_fit_is_invariant_to_row_order(logistic_model, logistic_data):
    order = np.random.default_rng(9).permutation(logistic_data.n)
    plain = model_service.fit_mle(logistic_model, logistic_data)
    shuffled = model_service.fit_mle(logistic_model, logistic_data.subset(order))
    np.testing.assert_allclose(shuffled.beta, plain.beta, atol=1e-8)


def test_weighted_fit_zeroes_weighted_score(logistic_model, logistic_data):
    weights = np.random.default_rng(5).uniform(0.1, 1.0, logistic_data.n)
    estimate = model_service.fit_mle(logistic_model, logistic_data, weights=weights)
    assert np.linalg.norm(model_service.score(logistic_model, estimate.beta, logistic_data, weights)) < 1e-6


def test_hetero_mle_converges(hetero_model, hetero_data):
    estimate = model_service.fit_mle(hetero_model, hetero_data)
    assert estimate.converged
    assert np.linalg.norm(estimate.beta - np.array([0.5, 0.3, -0.4])) < 0.5


def test_linear_mle_is_least_squares(linear_model):
    rng = np.random.default_rng(2)
    X = rng.standard_normal((100, 1))
    y = 1.0 - 2.0 * X[:, 0] + 0.1 * rng.standard_normal(100)
    estimate = model_service.fit_mle(linear_model, Dataset(X=X, y=y))
    expected, *_ = np.linalg.lstsq(np.hstack([np.ones((100, 1)), X]), y, rcond=None)
    np.testing.assert_allclose(estimate.beta, expected, atol=1e-10)


def test_separated_responses_raise():
    X = np.linspace(-2.0, 2.0, 40)[:, None]
    y = (X[:, 0] > 0).astype(float)
    with pytest.raises(SeparationError):
        model_service.fit_mle(ModelSpec(family=Family.logistic, p=1), Dataset(X=X, y=y))


def test_logistic_needs_binary_responses(logistic_model):
    data = Dataset(X=np.zeros((4, 2)) + np.arange(4)[:, None], y=[0.0, 1.0, 2.0, 1.0])
    with pytest.raises(InvalidArgumentError):
        model_service.fit_mle(logistic_model, data)


def test_dataset_rejects_mismatched_lengths():
    with pytest.raises(ValueError):
        Dataset(X=np.zeros((3, 2)), y=[1.0, 0.0])
