"""Distances between Fisher information matrices given by low-rank factors.

A factor array ``F`` of shape (rank, d) represents ``A = F^T F``. Every metric is
computed from factor differences rather than from differences of squared norms,
so identical inputs give exactly zero and close inputs keep their relative accuracy.
"""
import numpy as np

from src.core.errors import InvalidArgumentError, NumericOverflowError
from src.core.logger import get_logger
from src.domains.models.schemas import Dataset, InfoFactor, ModelSpec
from src.domains.models.service import ModelService
from .schemas import Metric

logger = get_logger(__name__)
model_service = ModelService()

CHUNK_ROWS = 65_536


def _psd_sqrt(A: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(A)
    root = np.sqrt(np.clip(vals, 0.0, None))
    return (vecs * root[..., None, :]) @ np.swapaxes(vecs, -1, -2)


def _rank_one_frobenius(a: np.ndarray, B: np.ndarray) -> np.ndarray:
    # a a^T - b b^T = (u v^T + v u^T) / 2 with u = a - b, v = a + b
    u = a[None, :] - B
    v = a[None, :] + B
    uu = np.einsum("nd,nd->n", u, u)
    vv = np.einsum("nd,nd->n", v, v)
    uv = np.einsum("nd,nd->n", u, v)
    return np.sqrt(0.5 * (uu * vv + uv * uv))


def _unit_root(B: np.ndarray) -> np.ndarray:
    """Rows b / sqrt(|b|), so that (b b^T)^(1/2) = b~ b~^T."""
    norms = np.sqrt(np.sum(B * B, axis=1))
    scale = np.divide(1.0, np.sqrt(norms), out=np.zeros_like(norms), where=norms > 0)
    return B * scale[:, None]


def _rank_one(metric: Metric, a: np.ndarray, B: np.ndarray) -> np.ndarray:
    if metric == Metric.frobenius:
        return _rank_one_frobenius(a, B)
    if metric == Metric.square_root:
        return _rank_one_frobenius(_unit_root(a[None, :])[0], _unit_root(B))
    return np.minimum(np.linalg.norm(a[None, :] - B, axis=1), np.linalg.norm(a[None, :] + B, axis=1))


def _frobenius(a: np.ndarray, F: np.ndarray) -> np.ndarray:
    U = a[None] - F
    V = a[None] + F
    UV = np.einsum("nrd,nre->nde", U, V)
    return np.linalg.norm(0.5 * (UV + np.swapaxes(UV, 1, 2)), axis=(1, 2))


def _square_root(a: np.ndarray, F: np.ndarray) -> np.ndarray:
    root_a = _psd_sqrt(np.einsum("nrd,nre->nde", a[None], a[None]))[0]
    root_b = _psd_sqrt(np.einsum("nrd,nre->nde", F, F))
    return np.linalg.norm(root_b - root_a, axis=(1, 2))


def _procrustes(a: np.ndarray, F: np.ndarray) -> np.ndarray:
    # min over orthogonal R of |a - R^T F|, R from the polar factor of F a^T
    M = np.einsum("nsd,rd->nsr", F, a)
    U, _, Vt = np.linalg.svd(M)
    R = U @ Vt
    residual = a[None] - np.einsum("nsr,nsd->nrd", R, F)
    return np.linalg.norm(residual, axis=(1, 2))


def _pad_rank(a: np.ndarray, F: np.ndarray):
    r = max(a.shape[0], F.shape[1])
    if a.shape[0] < r:
        a = np.vstack([a, np.zeros((r - a.shape[0], a.shape[1]))])
    if F.shape[1] < r:
        F = np.concatenate([F, np.zeros((F.shape[0], r - F.shape[1], F.shape[2]))], axis=1)
    return a, F


def _batched(metric: Metric, a: np.ndarray, F: np.ndarray) -> np.ndarray:
    if a.shape[0] == 1 and F.shape[1] == 1:
        return _rank_one(metric, a[0], F[:, 0, :])
    a, F = _pad_rank(a, F)
    if metric == Metric.frobenius:
        return _frobenius(a, F)
    if metric == Metric.square_root:
        return _square_root(a, F)
    return _procrustes(a, F)


class DistanceService:

    def psd_sqrt(self, A) -> np.ndarray:
        """Symmetric square root of (a stack of) PSD matrices, eigenvalues clamped at 0."""
        return _psd_sqrt(np.asarray(A, dtype=float))

    def distance(self, metric: Metric, a: InfoFactor, b: InfoFactor) -> float:
        metric = Metric(metric)
        if a.dim != b.dim:
            raise InvalidArgumentError(f"information matrices differ in dimension: {a.dim} vs {b.dim}")
        return float(_batched(metric, a.factors, b.factors[None, :, :])[0])

    def distance_row(self, metric: Metric, a: InfoFactor, dataset: Dataset, model: ModelSpec, beta) -> np.ndarray:
        """Distances from ``a`` to I(beta, x_j) for every row x_j of the dataset."""
        metric = Metric(metric)
        if a.dim != model.dim_beta:
            raise InvalidArgumentError(f"reference has dimension {a.dim}, model has {model.dim_beta}")
        out = np.empty(dataset.n)
        for start in range(0, dataset.n, CHUNK_ROWS):
            stop = min(start + CHUNK_ROWS, dataset.n)
            try:
                F = model_service.information_factors(model, beta, dataset.X[start:stop])
            except NumericOverflowError as exc:
                raise NumericOverflowError(exc.row + start, exc.value) from exc
            out[start:stop] = _batched(metric, a.factors, F)
        logger.debug(f"Computed {metric.value} distances to {dataset.n} rows")
        return out
