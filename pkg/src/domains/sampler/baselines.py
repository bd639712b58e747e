"""Comparison subsamplers: uniform, OSMAC with mixture weights and an
IBOSS-style extreme-value rule."""
import time
from typing import Optional

import numpy as np
from scipy.special import expit

from src.core.config import settings
from src.core.errors import InvalidArgumentError
from src.core.logger import get_logger
from src.domains.models.schemas import Dataset, ModelSpec
from src.domains.models.service import ModelService
from src.domains.models.utils import design_matrix
from .schemas import OsmacVariant, SubsampleResult
from .service import SamplerService, Seed, as_seed_sequence, take_available

logger = get_logger(__name__)
model_service = ModelService()
sampler_service = SamplerService()


def _extremes(U: np.ndarray, count: int, available: np.ndarray) -> np.ndarray:
    """Cycle over columns taking the smallest and largest still-available values."""
    q = U.shape[1]
    orders = [np.argsort(U[:, j], kind="stable") for j in range(q)]
    per_side = count // (2 * q)
    picked = []
    for order in orders:
        picked.append(take_available(order, available, per_side))
        picked.append(take_available(order[::-1], available, per_side))

    missing = count - sum(part.size for part in picked)
    j, high = 0, False
    while missing > 0:
        order = orders[j] if not high else orders[j][::-1]
        part = take_available(order, available, 1)
        picked.append(part)
        missing -= part.size
        high = not high
        if not high:
            j = (j + 1) % q
    return np.concatenate(picked)


class BaselineSampler:

    def uniform_method(self, dataset: Dataset, k: int, seed: Seed) -> SubsampleResult:
        start = time.perf_counter()
        indices = sampler_service.uniform_subsample(dataset.n, k, seed)
        return SubsampleResult(
            method="uniform",
            k=k,
            indices=indices,
            initial_indices=np.empty(0, dtype=np.int64),
            timings={"total": (time.perf_counter() - start) * 1000.0},
        )

    def osmac_probabilities(
        self,
        dataset: Dataset,
        model: ModelSpec,
        beta,
        variant: OsmacVariant,
        pilot_indices: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        """Subsampling probabilities proportional to |y - pi(x, beta)| times ||z|| (mVc)
        or ||M_X^-1 z|| (mMSE), M_X estimated on the pilot rows."""
        if not model.is_logistic:
            raise InvalidArgumentError("OSMAC probabilities are defined for the logistic families")
        if dataset.y is None:
            raise InvalidArgumentError("OSMAC needs responses")
        variant = OsmacVariant(variant)
        beta = np.asarray(beta, dtype=float)
        Z = design_matrix(model, dataset.X)
        pi = expit(Z @ beta)
        residual = np.abs(dataset.y - pi)

        if variant == OsmacVariant.mvc:
            norms = np.linalg.norm(Z, axis=1)
        else:
            rows = np.arange(dataset.n) if pilot_indices is None else np.asarray(pilot_indices)
            Zp, pp = Z[rows], pi[rows]
            M = (Zp * (pp * (1.0 - pp))[:, None]).T @ Zp / rows.size
            norms = np.linalg.norm(np.linalg.solve(M, Z.T), axis=0)

        scores = residual * norms
        total = scores.sum()
        if total <= 0:
            logger.warning("All OSMAC scores are zero; falling back to uniform probabilities")
            return np.full(dataset.n, 1.0 / dataset.n)
        return scores / total

    def osmac_subsample(
        self,
        dataset: Dataset,
        model: ModelSpec,
        k: int,
        k0: int,
        variant: OsmacVariant,
        seed: Seed,
    ) -> SubsampleResult:
        """Uniform pilot of k0 rows, then k - k0 draws with replacement from the
        OSMAC probabilities.

        Repeated rows are kept once; their estimation weight is the mixture
        probability divided by the number of times they were drawn.
        """
        if not model.is_logistic:
            raise InvalidArgumentError("OSMAC is defined for the logistic families")
        n = dataset.n
        if not 0 < k0 <= k <= n:
            raise InvalidArgumentError(f"OSMAC needs 0 < k0 <= k <= n, got k0={k0}, k={k}, n={n}")
        variant = OsmacVariant(variant)
        pilot_seed, draw_seed = as_seed_sequence(seed).spawn(2)

        timings = {}
        start = time.perf_counter()
        pilot = sampler_service.uniform_subsample(n, k0, pilot_seed)
        beta_hat = model_service.fit_mle(model, dataset.subset(pilot)).beta
        timings["stage1"] = (time.perf_counter() - start) * 1000.0

        start = time.perf_counter()
        k1 = k - k0
        probs = self.osmac_probabilities(dataset, model, beta_hat, variant, pilot_indices=pilot)
        draws = np.random.default_rng(draw_seed).choice(n, size=k1, replace=True, p=probs) if k1 else np.empty(0, int)
        multiplicity = np.bincount(np.concatenate([pilot, draws]), minlength=n)
        indices = np.flatnonzero(multiplicity)
        mixture = (k0 / k) / n + (k1 / k) * probs
        weights = mixture[indices] / multiplicity[indices]
        timings["stage2"] = (time.perf_counter() - start) * 1000.0
        timings["total"] = timings["stage1"] + timings["stage2"]

        logger.debug(f"OSMAC-{variant.value}: {indices.size} distinct rows from {k} draws")
        return SubsampleResult(
            method=f"osmac-{variant.value}",
            k=k,
            indices=indices,
            initial_indices=pilot,
            weights_for_estimation=weights,
            beta_hat=beta_hat,
            timings=timings,
        )

    def iboss_subsample(self, dataset: Dataset, model: ModelSpec, k: int, seed: Seed) -> SubsampleResult:
        """IBOSS-style selection of rows with extreme covariate values.

        The logistic families apply the rule to the information factors at a pilot
        estimate (intercept column excluded) instead of the raw covariates.
        """
        p = model.p
        n = dataset.n
        if k < 2 * p:
            raise InvalidArgumentError(f"IBOSS needs k >= 2p = {2 * p}, got {k}")
        if k > n:
            raise InvalidArgumentError(f"cannot select {k} rows from {n}")

        start = time.perf_counter()
        available = np.ones(n, dtype=bool)
        pilot = np.empty(0, dtype=np.int64)
        beta_hat = None
        if model.is_logistic:
            k0 = max(model.dim_beta + 1, int(round(settings.K0_FRACTION * k)))
            if k0 >= k:
                raise InvalidArgumentError(f"k = {k} leaves no rows after a pilot of {k0}")
            pilot = sampler_service.uniform_subsample(n, k0, seed)
            beta_hat = model_service.fit_mle(model, dataset.subset(pilot)).beta
            U = model_service.information_factors(model, beta_hat, dataset.X)[:, 0, :]
            if model.has_intercept:
                U = U[:, 1:]
            available[pilot] = False
        else:
            U = dataset.X

        chosen = _extremes(U, k - pilot.size, available)
        indices = np.sort(np.concatenate([pilot, chosen]))
        return SubsampleResult(
            method="iboss-style",
            k=k,
            indices=indices,
            initial_indices=pilot,
            beta_hat=beta_hat,
            timings={"total": (time.perf_counter() - start) * 1000.0},
        )
