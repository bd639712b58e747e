"""Fisher information, log-likelihood and (weighted) maximum likelihood for the
supported regression families.

Weights passed to ``log_likelihood``/``fit_mle`` are sampling probabilities:
row i contributes its log-likelihood term divided by ``weights[i]``.
"""
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.special import expit

from src.core.config import settings
from src.core.errors import InvalidArgumentError, NumericOverflowError, SeparationError
from src.core.logger import get_logger
from .schemas import Dataset, Family, InfoFactor, ModelSpec, ParamEstimate
from .utils import check_beta, check_covariates, design_matrix, log_variance

logger = get_logger(__name__)

HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)
SQRT_HALF = np.sqrt(0.5)


def _multipliers(weights, n: int) -> np.ndarray:
    if weights is None:
        return np.ones(n)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (n,):
        raise InvalidArgumentError(f"weights must have length {n}, got shape {weights.shape}")
    if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
        raise InvalidArgumentError("weights must be positive and finite")
    return 1.0 / weights


def _check_data(model: ModelSpec, data: Dataset) -> None:
    if data.p != model.p:
        raise InvalidArgumentError(f"dataset has {data.p} covariates, model expects {model.p}")
    if data.y is None:
        raise InvalidArgumentError("dataset has no responses")


def _terms(model: ModelSpec, beta: np.ndarray, Z: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    eta = Z @ beta
    if model.is_logistic:
        return y * eta - np.logaddexp(0.0, eta)
    if model.family == Family.linear:
        return -HALF_LOG_2PI - 0.5 * (y - eta) ** 2
    log_var = log_variance(model, beta, X)
    return -HALF_LOG_2PI - 0.5 * log_var - 0.5 * (y - eta) ** 2 * np.exp(-log_var)


def _score_and_information(model, beta, Z, X, y, m, observed: bool = True):
    """Score vector and negative Hessian (observed) or expected information."""
    eta = Z @ beta
    if model.is_logistic:
        pi = expit(eta)
        g = Z.T @ (m * (y - pi))
        H = (Z * (m * pi * (1.0 - pi))[:, None]).T @ Z
        return g, H

    if model.family == Family.linear:
        return Z.T @ (m * (y - eta)), (Z * m[:, None]).T @ Z

    s = np.exp(-log_variance(model, beta, X))
    r = y - eta
    Xt = np.hstack([np.zeros((X.shape[0], 1)), X])
    g = Z.T @ (m * r * s) + Xt.T @ (m * 0.5 * (r * r * s - 1.0))
    if not observed:
        return g, (Z * (m * s)[:, None]).T @ Z + 0.5 * (Xt * m[:, None]).T @ Xt
    cross = (Z * (m * r * s)[:, None]).T @ Xt
    H = (Z * (m * s)[:, None]).T @ Z + cross + cross.T + 0.5 * (Xt * (m * r * r * s)[:, None]).T @ Xt
    return g, H


def _initial_beta(model: ModelSpec, Z: np.ndarray, y: np.ndarray, m: np.ndarray) -> np.ndarray:
    if model.is_logistic:
        return np.zeros(Z.shape[1])
    root = np.sqrt(m)
    beta, *_ = np.linalg.lstsq(Z * root[:, None], y * root, rcond=None)
    return beta


def _newton_direction(model, beta, Z, X, y, m):
    g, H = _score_and_information(model, beta, Z, X, y, m)
    try:
        return g, cho_solve(cho_factor(H), g)
    except LinAlgError:
        if model.family == Family.hetero_log_var:
            logger.debug("Observed information not positive definite, using Fisher scoring step")
            _, F = _score_and_information(model, beta, Z, X, y, m, observed=False)
            return g, np.linalg.solve(F, g)
        if model.is_logistic:
            raise SeparationError("Information matrix became singular; the responses are separated")
        raise InvalidArgumentError("Design matrix is rank deficient")


def _safe_objective(model, beta, Z, X, y, m) -> float:
    try:
        return float(m @ _terms(model, beta, Z, X, y))
    except NumericOverflowError:
        return -np.inf


class ModelService:

    def information_factors(self, model: ModelSpec, beta, X) -> np.ndarray:
        """Batched factors of I(beta, x) for every row of X, shape (n, model.rank, dim_beta)."""
        beta = check_beta(model, beta)
        X = check_covariates(model, X)
        Z = design_matrix(model, X)
        factors = np.empty((X.shape[0], model.rank, model.dim_beta))

        if model.is_logistic:
            eta = Z @ beta
            # exp(eta/2) / (1 + exp(eta)) without overflow
            phi = np.exp(0.5 * eta - np.logaddexp(0.0, eta))
            factors[:, 0, :] = phi[:, None] * Z
        elif model.family == Family.linear:
            factors[:, 0, :] = Z
        else:
            inv_sigma = np.exp(-0.5 * log_variance(model, beta, X))
            factors[:, 0, :] = inv_sigma[:, None] * Z
            factors[:, 1, 0] = 0.0
            factors[:, 1, 1:] = X * SQRT_HALF
        return factors

    def fisher_info(self, model: ModelSpec, beta, x) -> InfoFactor:
        x = np.asarray(x, dtype=float)
        if x.ndim != 1:
            raise InvalidArgumentError(f"x must be a single covariate vector, got shape {x.shape}")
        return InfoFactor(factors=self.information_factors(model, beta, x[None, :])[0])

    def log_likelihood(self, model: ModelSpec, beta, data: Dataset, weights=None) -> float:
        beta = check_beta(model, beta)
        _check_data(model, data)
        m = _multipliers(weights, data.n)
        Z = design_matrix(model, data.X)
        return float(m @ _terms(model, beta, Z, data.X, data.y))

    def score(self, model: ModelSpec, beta, data: Dataset, weights=None) -> np.ndarray:
        """Gradient of ``log_likelihood`` with respect to beta."""
        beta = check_beta(model, beta)
        _check_data(model, data)
        m = _multipliers(weights, data.n)
        g, _ = _score_and_information(model, beta, design_matrix(model, data.X), data.X, data.y, m)
        return g

    def fit_mle(
        self,
        model: ModelSpec,
        data: Dataset,
        weights=None,
        tol: Optional[float] = None,
        max_iter: Optional[int] = None,
    ) -> ParamEstimate:
        """Newton-Raphson with step halving on the (inverse-probability weighted) log-likelihood."""
        tol = settings.MLE_TOL if tol is None else tol
        max_iter = settings.MLE_MAX_ITER if max_iter is None else max_iter
        _check_data(model, data)
        y = data.y
        if model.is_logistic:
            if not np.all((y == 0) | (y == 1)):
                raise InvalidArgumentError("logistic responses must be 0 or 1")
            if y.min() == y.max():
                raise InvalidArgumentError("both response classes must be present")

        m = _multipliers(weights, data.n)
        m = m / m.mean()
        X = data.X
        Z = design_matrix(model, X)
        beta = _initial_beta(model, Z, y, m)
        total = m.sum()

        if model.family == Family.linear:
            g, _ = _score_and_information(model, beta, Z, X, y, m)
            return ParamEstimate(beta=beta, converged=True, iterations=1, score_norm=float(np.linalg.norm(g) / total))

        objective = _safe_objective(model, beta, Z, X, y, m)
        converged = False
        iterations = 0
        score_norm = np.inf
        for iterations in range(1, max_iter + 1):
            g, step = _newton_direction(model, beta, Z, X, y, m)
            score_norm = float(np.linalg.norm(g) / total)
            if score_norm <= tol:
                converged = True
                break

            t = 1.0
            for _ in range(settings.MLE_MAX_HALVINGS):
                candidate = beta + t * step
                value = _safe_objective(model, candidate, Z, X, y, m)
                if value >= objective - 1e-12 * abs(objective):
                    break
                t *= 0.5
            else:
                logger.warning(f"Step halving exhausted at iteration {iterations}; stopping")
                break

            beta, objective = candidate, value
            if model.is_logistic and np.max(np.abs(beta)) > settings.MLE_SEPARATION_BOUND:
                raise SeparationError()

        if model.is_logistic and objective / total > -1e-8:
            raise SeparationError("Perfect fit reached; the responses are separated")

        if converged:
            logger.debug(f"MLE converged in {iterations} iterations (score {score_norm:.2e})")
        else:
            logger.warning(f"MLE did not converge in {max_iter} iterations (score {score_norm:.2e})")

        return ParamEstimate(beta=beta, converged=converged, iterations=iterations, score_norm=score_norm)
