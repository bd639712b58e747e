"""Psi_q criteria, approximate optimal designs on finite candidate sets and
support reduction.

Finite q: multiplicative weight updates with periodic vertex-exchange steps, stopped
once the general equivalence theorem certifies the design. E-optimality: a
cutting-plane linear program over eigenvector cuts with column generation, whose
duals give the certificate.
"""
import math
from typing import Optional

import numpy as np
from scipy.optimize import linprog, minimize_scalar

from src.core.config import settings
from src.core.errors import (
    DecompositionError,
    InfeasibleDesignError,
    InvalidArgumentError,
    InvalidReferenceError,
)
from src.core.logger import get_logger
from src.domains.clustering.schemas import DesignSpace
from src.domains.models.schemas import ModelSpec
from src.domains.models.service import ModelService
from .schemas import Criterion, Design

logger = get_logger(__name__)
model_service = ModelService()

SINGULAR_RTOL = 1e-12
E_WARM_START = Criterion(q=-8.0)
E_WARM_START_ITER = 500
E_COLUMN_BATCH = 50


def _moment(weights: np.ndarray, F: np.ndarray) -> np.ndarray:
    return np.einsum("s,srd,sre->de", weights, F, F)


def _eigenvalues(M: np.ndarray) -> np.ndarray:
    vals = np.linalg.eigvalsh(0.5 * (M + M.T))
    return np.clip(vals, 0.0, None)


def _is_singular(vals: np.ndarray) -> bool:
    return vals[0] <= SINGULAR_RTOL * max(vals[-1], 1e-300)


def _psi(M: np.ndarray, crit: Criterion, normalized: bool = False) -> float:
    vals = _eigenvalues(np.atleast_2d(M))
    q = crit.q
    if q <= 0 and _is_singular(vals):
        return 0.0
    if crit.is_e:
        return float(vals[0])
    if crit.is_d:
        return float(np.exp(np.mean(np.log(vals))))
    total = np.sum(vals ** q)
    if normalized:
        total /= vals.size
    return float(total ** (1.0 / q))


def _gradient(M: np.ndarray, crit: Criterion):
    """Matrix G and normalizer c such that tr(G I(x)) / c is the directional-derivative ratio."""
    vals, vecs = np.linalg.eigh(0.5 * (M + M.T))
    vals = np.clip(vals, 1e-300, None)
    if crit.is_d:
        return (vecs / vals) @ vecs.T, float(vals.size)
    return (vecs * vals ** (crit.q - 1.0)) @ vecs.T, float(np.sum(vals ** crit.q))


def _ratios(F: np.ndarray, M: np.ndarray, crit: Criterion, dual: Optional[np.ndarray] = None) -> np.ndarray:
    if crit.is_e:
        # dual is a convex combination of unit eigenvector projections
        lower = max(_eigenvalues(M)[0], 1e-300)
        return np.einsum("srd,de,sre->s", F, dual, F) / lower
    G, c = _gradient(M, crit)
    return np.einsum("srd,de,sre->s", F, G, F) / c


def _log_psi(M: np.ndarray, crit: Criterion) -> float:
    value = _psi(M, crit)
    return math.log(value) if value > 0 else -math.inf


def _exchange(weights: np.ndarray, F: np.ndarray, ratios: np.ndarray, crit: Criterion) -> None:
    """Move mass from the worst heavy support point to the best candidate, with line search."""
    best = int(np.argmax(ratios))
    heavy = np.flatnonzero(weights >= 1e-3 * weights.max())
    worst = int(heavy[np.argmin(ratios[heavy])])
    if best == worst or weights[worst] <= 0:
        return
    M = _moment(weights, F)
    direction = F[best].T @ F[best] - F[worst].T @ F[worst]

    def objective(alpha: float) -> float:
        return -_log_psi(M + alpha * direction, crit)

    result = minimize_scalar(objective, bounds=(0.0, float(weights[worst])), method="bounded")
    alpha = float(result.x)
    if objective(alpha) < objective(0.0):
        weights[worst] -= alpha
        weights[best] += alpha


def _multiplicative(F: np.ndarray, weights: np.ndarray, crit: Criterion, tol: float, max_iter: int, exchange_every: int):
    power = 1.0 if crit.is_d else 0.5
    certified = False
    iteration = 0
    for iteration in range(1, max_iter + 1):
        ratios = _ratios(F, _moment(weights, F), crit)
        if ratios.max() <= 1.0 + tol:
            certified = True
            break
        weights *= np.clip(ratios, 0.0, None) ** power
        weights /= weights.sum()
        if exchange_every and iteration % exchange_every == 0:
            _exchange(weights, F, ratios, crit)
    return weights, certified, iteration


def _max_min_lp(G: np.ndarray):
    """max t s.t. t <= sum_i w_i G[i, k] for every cut k, w on the simplex.

    Returns the weights, the optimal t and the normalized cut duals.
    """
    m, K = G.shape
    c = np.zeros(m + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-G.T, np.ones((K, 1))])
    A_eq = np.hstack([np.ones((1, m)), np.zeros((1, 1))])
    bounds = [(0.0, None)] * m + [(None, None)]
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(K), A_eq=A_eq, b_eq=[1.0], bounds=bounds, method="highs")
    if res.status != 0:
        raise DecompositionError(f"E-optimal master problem failed: {res.message}")
    w = np.clip(res.x[:m], 0.0, None)
    w /= w.sum()
    mu = np.clip(-res.ineqlin.marginals, 0.0, None)
    mu = mu / mu.sum() if mu.sum() > 0 else np.full(K, 1.0 / K)
    return w, float(-res.fun), mu


def _cutting_plane(F: np.ndarray, weights: np.ndarray, tol: float, max_iter: int, max_cuts: int):
    """E-optimal weights by Kelley's method on lambda_min.

    For unit cuts v_k and duals mu, max_i sum_k mu_k |F_i v_k|^2 bounds the optimum from
    above and lambda_min(M(w)) from below; the design is certified once they agree.
    """
    s, _, d = F.shape
    warm, _, iterations = _multiplicative(
        F, weights, E_WARM_START, tol, min(max_iter, E_WARM_START_ITER), settings.DESIGN_EXCHANGE_EVERY
    )
    active = np.flatnonzero(warm > 1e-6 * warm.max())
    _, vecs = np.linalg.eigh(_moment(warm, F))
    cuts = [vecs[:, k] for k in range(d)]

    weights = warm
    dual = np.outer(vecs[:, 0], vecs[:, 0])
    certified = False
    for _ in range(max_cuts):
        iterations += 1
        V = np.column_stack(cuts)
        G = np.sum(np.einsum("ard,dk->ark", F[active], V) ** 2, axis=1)
        w_active, t, mu = _max_min_lp(G)
        weights = np.zeros(s)
        weights[active] = w_active
        dual = (V * mu) @ V.T

        vals, vecs = np.linalg.eigh(_moment(weights, F))
        lower = vals[0]
        scores = np.einsum("srd,de,sre->s", F, dual, F)
        upper = scores.max()
        if lower > 0 and upper <= lower * (1.0 + tol):
            certified = True
            break

        added = False
        for k in np.flatnonzero(vals < t):
            v = vecs[:, k]
            if np.max(np.abs(V.T @ v)) < 1.0 - 1e-12:
                cuts.append(v)
                added = True
        outside = np.setdiff1d(np.flatnonzero(scores > t * (1.0 + 1e-12)), active)
        if outside.size:
            top = outside[np.argsort(-scores[outside], kind="stable")[:E_COLUMN_BATCH]]
            active = np.union1d(active, top)
            added = True
        if not added:
            logger.debug("Cutting plane stalled: no violated cut or column left")
            break

    logger.debug(f"E-optimal master problem used {len(cuts)} cuts over {active.size} columns")
    return weights, certified, iterations, dual


def _solve(F: np.ndarray, weights: np.ndarray, crit: Criterion, tol: float, max_iter: int):
    if crit.is_e:
        return _cutting_plane(F, weights, tol, max_iter, settings.DESIGN_E_MAX_CUTS)
    weights, certified, iterations = _multiplicative(
        F, weights, crit, tol, max_iter, settings.DESIGN_EXCHANGE_EVERY
    )
    return weights, certified, iterations, None


class DesignService:

    def info_matrix(self, design: Design, model: ModelSpec, beta) -> np.ndarray:
        """M(xi, beta) = sum_i w_i I(beta, x_i)."""
        F = model_service.information_factors(model, beta, design.support)
        M = _moment(design.weights, F)
        return 0.5 * (M + M.T)

    def criterion_value(self, M, crit: Criterion, normalized: bool = False) -> float:
        """Psi_q(M); 0 when M is singular and q <= 0.

        ``normalized`` returns the power mean (tr(M^q)/d)^(1/q), which is monotone in q.
        """
        return _psi(np.asarray(M, dtype=float), Criterion.parse(crit), normalized)

    @staticmethod
    def existence_bound(dim: int) -> int:
        return dim * (dim + 1) // 2 + 1

    def optimize_design(
        self,
        candidates: DesignSpace,
        model: ModelSpec,
        beta,
        crit: Optional[Criterion] = None,
        tol: Optional[float] = None,
        max_iter: Optional[int] = None,
    ) -> Design:
        """Weights over the candidate points maximizing Psi_q(M(xi, beta))."""
        crit = Criterion() if crit is None else Criterion.parse(crit)
        tol = settings.DESIGN_TOL if tol is None else tol
        max_iter = settings.DESIGN_MAX_ITER if max_iter is None else max_iter
        if not 0 < tol <= 0.1:
            raise InvalidArgumentError(f"tol must lie in (0, 0.1], got {tol}")
        if candidates.is_empty:
            raise InfeasibleDesignError(0, model.dim_beta)

        F = model_service.information_factors(model, beta, candidates.points)
        s, dim = F.shape[0], F.shape[2]
        vals = _eigenvalues(_moment(np.full(s, 1.0 / s), F))
        if _is_singular(vals):
            rank = int(np.sum(vals > SINGULAR_RTOL * max(vals[-1], 1e-300)))
            raise InfeasibleDesignError(rank, dim)

        logger.info(f"Optimizing {crit.label}-optimal design over {s} candidates (dim {dim})")
        weights, certified, iterations, dual = _solve(F, np.full(s, 1.0 / s), crit, tol, max_iter)

        keep = np.flatnonzero(weights >= settings.DESIGN_PRUNE_THRESHOLD)
        bound = self.existence_bound(dim)
        if keep.size > bound:
            trimmed = keep[np.argsort(-weights[keep], kind="stable")[:bound]]
            if _is_singular(_eigenvalues(_moment(weights[trimmed], F[trimmed]))):
                logger.warning(f"Trimming to {bound} points would make the design singular; keeping {keep.size}")
            else:
                keep = trimmed
                logger.warning(f"Support trimmed to the existence bound of {bound} points")
        if keep.size < s:
            sub_weights = weights[keep] / weights[keep].sum()
            sub_weights, _, extra, dual = _solve(F[keep], sub_weights, crit, tol, max_iter)
            iterations += extra
            weights = np.zeros(s)
            weights[keep] = sub_weights
            keep = np.flatnonzero(weights >= settings.DESIGN_PRUNE_THRESHOLD)
            weights_kept = weights[keep] / weights[keep].sum()
            M = _moment(weights_kept, F[keep])
            certified = bool(_ratios(F, M, crit, dual).max() <= 1.0 + tol)
        else:
            weights_kept = weights

        if not certified:
            logger.warning(f"Design not certified after {iterations} iterations (tol {tol})")

        M = _moment(weights_kept, F[keep])
        design = Design.build(
            candidates.points[keep],
            weights_kept,
            criterion_value=_psi(M, crit),
            certified=certified,
            iterations=iterations,
        )
        logger.info(f"Design has {design.b} support points, Psi = {design.criterion_value:.6g}")
        return design

    def efficiency(self, design: Design, reference: Design, model: ModelSpec, beta, crit: Optional[Criterion] = None) -> float:
        crit = Criterion() if crit is None else Criterion.parse(crit)
        ref_value = _psi(self.info_matrix(reference, model, beta), crit)
        if ref_value <= 0:
            raise InvalidReferenceError()
        value = _psi(self.info_matrix(design, model, beta), crit)
        return float(min(max(value / ref_value, 0.0), 1.0))

    def reduce_support(
        self,
        design: Design,
        zeta: float,
        model: ModelSpec,
        beta,
        crit: Optional[Criterion] = None,
    ) -> Design:
        """Drop lightest support points while the rescaled design keeps efficiency above zeta.

        A design that loses points is no longer known to be optimal, so its
        ``certified`` flag becomes None.
        """
        crit = Criterion() if crit is None else Criterion.parse(crit)
        if not 0.5 < zeta <= 1.0:
            raise InvalidArgumentError(f"zeta must lie in (0.5, 1], got {zeta}")
        current = Design.build(design.support, design.weights)
        threshold = zeta * _psi(self.info_matrix(current, model, beta), crit)

        while current.b - 1 >= model.dim_beta:
            candidate = Design.build(current.support[:-1], current.weights[:-1])
            value = _psi(self.info_matrix(candidate, model, beta), crit)
            if value <= threshold:
                break
            current = candidate

        value = _psi(self.info_matrix(current, model, beta), crit)
        logger.info(f"Support reduced from {design.b} to {current.b} points (zeta {zeta})")
        return Design.build(
            current.support,
            current.weights,
            criterion_value=value,
            certified=design.certified if current.b == design.b else None,
            iterations=design.iterations,
        )
