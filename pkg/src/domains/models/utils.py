import numpy as np

from src.core.errors import InvalidArgumentError, NumericOverflowError
from .schemas import ModelSpec

LOG_VARIANCE_LIMIT = 700.0


def check_beta(model: ModelSpec, beta) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (model.dim_beta,):
        raise InvalidArgumentError(f"beta must have length {model.dim_beta}, got shape {beta.shape}")
    if not np.all(np.isfinite(beta)):
        raise InvalidArgumentError("beta contains NaN or infinite values")
    return beta


def check_covariates(model: ModelSpec, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.p:
        raise InvalidArgumentError(f"covariates must have {model.p} columns, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidArgumentError("covariates contain NaN or infinite values")
    return X


def design_matrix(model: ModelSpec, X: np.ndarray) -> np.ndarray:
    """Rows z = (1, x) for families with an intercept, z = x otherwise."""
    if not model.has_intercept:
        return X
    return np.hstack([np.ones((X.shape[0], 1)), X])


def log_variance(model: ModelSpec, beta: np.ndarray, X: np.ndarray) -> np.ndarray:
    """log sigma^2(x, beta) = x^T (beta_1, ..., beta_p) for the heteroskedastic family."""
    eta = X @ beta[1:]
    bad = np.flatnonzero(np.abs(eta) > LOG_VARIANCE_LIMIT)
    if bad.size:
        raise NumericOverflowError(int(bad[0]), float(eta[bad[0]]))
    return eta
