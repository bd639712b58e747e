"""Covariate and response generators for the simulation study."""
from typing import Optional

import numpy as np
from scipy import linalg
from scipy.special import expit
from scipy.stats import norm, t as student_t

from src.core.errors import DecompositionError, InvalidArgumentError
from src.domains.models.schemas import Family
from src.domains.models.utils import design_matrix, log_variance
from src.domains.sampler.service import Seed
from .schemas import CovariateLaw, Scenario, SigmaKind

DOMINANT_WEIGHTS = {
    SigmaKind.S2: (2.0, 1.8, 1.6, 1.4, 1.2),
    SigmaKind.S3: (3.0, 2.0, 1.0),
}


def toeplitz_sigma(p: int) -> np.ndarray:
    """(0.5^|i-j|)."""
    return linalg.toeplitz(0.5 ** np.arange(p))


def orthonormal_frame(p: int, count: int, seed: Seed) -> np.ndarray:
    """``count`` random orthonormal directions in R^p, one per column."""
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((p, count)))
    return q * np.sign(np.diag(r))


def _cholesky(sigma: np.ndarray) -> np.ndarray:
    try:
        return linalg.cholesky(sigma, lower=True)
    except linalg.LinAlgError as exc:
        raise DecompositionError("covariance matrix is not positive definite") from exc


def _mahalanobis(L: np.ndarray, X: np.ndarray) -> np.ndarray:
    W = linalg.solve_triangular(L, X.T, lower=True)
    return np.sum(W * W, axis=0)


class ScenarioGenerator:
    """Covariance matrices, covariates and responses of the simulated populations."""

    def make_sigma(self, kind: SigmaKind, p: int, seed: Seed = 0) -> np.ndarray:
        kind = SigmaKind(kind)
        base = toeplitz_sigma(p)
        if kind == SigmaKind.S1:
            return base
        if kind == SigmaKind.custom:
            raise InvalidArgumentError("custom covariance matrices come with the scenario")
        weights = np.asarray(DOMINANT_WEIGHTS[kind])
        if p < weights.size:
            raise InvalidArgumentError(f"{kind.value} needs p >= {weights.size}, got {p}")
        E = orthonormal_frame(p, weights.size, seed)
        sigma = (E * weights) @ E.T + 0.1 * base
        return 0.5 * (sigma + sigma.T)

    def scenario_sigma(self, scenario: Scenario, seed: Seed) -> np.ndarray:
        if scenario.sigma == SigmaKind.custom:
            return np.asarray(scenario.sigma_matrix, dtype=float)
        return self.make_sigma(scenario.sigma, scenario.p, seed)

    def sample_covariates(self, scenario: Scenario, n: int, seed: Seed, sigma: Optional[np.ndarray] = None) -> np.ndarray:
        """i.i.d. draws from the scenario's covariate law.

        Skewed laws draw from the symmetric law and flip the sign of a draw x when
        a latent variate exceeds its skewing argument alpha^T x (times the
        Student factor for skew-t).
        """
        rng = np.random.default_rng(seed)
        p = scenario.p
        sigma = self.scenario_sigma(scenario, rng.integers(2 ** 32)) if sigma is None else sigma
        L = _cholesky(sigma)
        Z = rng.standard_normal((n, p)) @ L.T
        mu = np.asarray(scenario.mu)
        law = scenario.law

        if law == CovariateLaw.normal:
            return Z + mu
        if law == CovariateLaw.mixture:
            second = rng.random(n) < 0.5
            centers = np.where(second[:, None], np.asarray(scenario.mu2), mu)
            return Z + centers

        kappa = scenario.kappa
        if law in (CovariateLaw.t, CovariateLaw.skew_t):
            Z = Z / np.sqrt(rng.chisquare(kappa, size=n) / kappa)[:, None]
        if law == CovariateLaw.t:
            return Z + mu

        alpha = np.asarray(scenario.alpha)
        argument = Z @ alpha
        if law == CovariateLaw.skew_normal:
            latent = norm.rvs(size=n, random_state=rng)
        else:
            argument = argument * np.sqrt((kappa + p) / (kappa + _mahalanobis(L, Z)))
            latent = student_t.rvs(kappa + p, size=n, random_state=rng)
        flip = latent > argument
        Z[flip] = -Z[flip]
        return Z + mu

    def sample_responses(self, scenario: Scenario, X: np.ndarray, seed: Seed) -> np.ndarray:
        rng = np.random.default_rng(seed)
        model = scenario.model
        beta = scenario.true_beta
        eta = design_matrix(model, X) @ beta
        if model.is_logistic:
            return (rng.random(X.shape[0]) < expit(eta)).astype(float)
        if model.family == Family.linear:
            return eta + rng.standard_normal(X.shape[0])
        sd = np.exp(0.5 * log_variance(model, beta, X))
        return eta + sd * rng.standard_normal(X.shape[0])
