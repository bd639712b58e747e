"""Design-space estimation: DBSCAN on the initial subsample, then either grid
filtering or Metropolis-Hastings sampling inside the detected clusters."""
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import multivariate_t
from sklearn.cluster import DBSCAN
from sklearn.neighbors import NearestNeighbors

from src.core.config import settings
from src.core.errors import (
    DegenerateDataError,
    InvalidArgumentError,
    StalledChainError,
    TooManyCandidatesError,
)
from src.core.logger import get_logger
from .schemas import OUTLIER, ClusterModel, DesignSpace, SpaceSource

logger = get_logger(__name__)

NEIGHBOR_RANK = 4
TIE_ATOL = 1e-12


def grid_bounds(points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    points = np.asarray(points, dtype=float)
    return points.min(axis=0), points.max(axis=0)


def _membership(model: ClusterModel, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    out = np.full(X.shape[0], OUTLIER, dtype=int)
    n_core = int(model.core_flags.sum())
    if n_core == 0 or X.shape[0] == 0:
        return out

    k = min(NEIGHBOR_RANK, n_core)
    dist, idx = model.core_tree.query(X, k=k, distance_upper_bound=model.epsilon * (1 + 1e-12))
    dist = np.reshape(dist, (X.shape[0], k))
    idx = np.reshape(idx, (X.shape[0], k))

    # ties on the nearest distance go to the lowest cluster id; rows with no core point
    # in range have an infinite nearest distance and are compared against 0
    nearest = np.where(np.isfinite(dist[:, :1]), dist[:, :1], 0.0)
    tied = np.isfinite(dist) & (dist - nearest <= TIE_ATOL)
    labels = np.where(tied, model.core_labels[np.minimum(idx, n_core - 1)], np.iinfo(int).max)
    inside = tied[:, 0]
    out[inside] = labels[inside].min(axis=1)
    return out


def _proposal_shape(model: ClusterModel, cluster: int, scale: Union[None, float, np.ndarray]) -> np.ndarray:
    p = model.p
    if scale is None:
        members = model.cluster_points(cluster)
        variances = members.var(axis=0, ddof=1) if members.shape[0] > 1 else np.zeros(p)
        variances = np.where(variances > 0, variances, model.epsilon ** 2)
        return np.diag(2.38 ** 2 / p * variances)
    scale = np.asarray(scale, dtype=float)
    if scale.ndim == 0:
        return float(scale) * np.eye(p)
    return scale


def _run_chain(model: ClusterModel, cluster: int, shape: np.ndarray, quota: int, rng: np.random.Generator) -> np.ndarray:
    cores = model.points[model.core_flags & (model.labels == cluster)]
    state = cores[rng.integers(cores.shape[0])]
    proposal = multivariate_t(loc=np.zeros(model.p), shape=shape, df=settings.MH_DEGREES_OF_FREEDOM)

    accepted = []
    proposals = 0
    while len(accepted) < quota:
        steps = np.reshape(proposal.rvs(size=settings.MH_BATCH, random_state=rng), (-1, model.p))
        for step in steps:
            proposals += 1
            candidate = state + step
            if _membership(model, candidate[None, :])[0] == cluster:
                state = candidate
                accepted.append(candidate)
                if len(accepted) == quota:
                    break
            if proposals == settings.MH_MAX_PROPOSALS and len(accepted) < settings.MH_MIN_ACCEPTANCE * proposals:
                raise StalledChainError(cluster, len(accepted), proposals)
    logger.debug(f"Cluster {cluster}: {quota} states accepted from {proposals} proposals")
    return np.asarray(accepted)


class ClusteringService:

    def epsilon_rule(self, points: np.ndarray) -> float:
        """min{0.1 (p-1) (max X - min X), max_x dist_4(x)}; p = 1 uses the second term alone."""
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or points.shape[0] <= NEIGHBOR_RANK:
            raise InvalidArgumentError(f"epsilon rule needs at least {NEIGHBOR_RANK + 1} points")
        p = points.shape[1]
        spread = float(points.max() - points.min())
        if spread == 0.0 or np.unique(points, axis=0).shape[0] == 1:
            raise DegenerateDataError("all points are identical")

        # column 0 is the point itself
        neighbors = NearestNeighbors(n_neighbors=NEIGHBOR_RANK + 1).fit(points)
        dist, _ = neighbors.kneighbors(points)
        knn_term = float(dist[:, NEIGHBOR_RANK].max())
        if knn_term <= 0:
            raise DegenerateDataError("fourth-neighbor distances are all zero")
        if p == 1:
            return knn_term
        return min(0.1 * (p - 1) * spread, knn_term)

    def dbscan_fit(self, points: np.ndarray, epsilon: float, m_p: Optional[int] = None) -> ClusterModel:
        m_p = settings.DBSCAN_MIN_POINTS if m_p is None else m_p
        if epsilon <= 0:
            raise InvalidArgumentError(f"epsilon must be positive, got {epsilon}")
        if m_p < 1:
            raise InvalidArgumentError(f"m_p must be at least 1, got {m_p}")
        points = np.asarray(points, dtype=float)

        # clusters are numbered in scan order; border points join the first cluster reaching them
        fitted = DBSCAN(eps=epsilon, min_samples=m_p).fit(points)
        labels = fitted.labels_ + 1
        core_flags = np.zeros(points.shape[0], dtype=bool)
        core_flags[fitted.core_sample_indices_] = True

        model = ClusterModel(epsilon=epsilon, m_p=m_p, points=points, labels=labels, core_flags=core_flags)
        logger.info(
            f"DBSCAN found {model.n_clusters} clusters, {int(np.sum(labels == OUTLIER))} outliers "
            f"(eps {epsilon:.4g}, m_p {m_p})"
        )
        return model

    def membership(self, model: ClusterModel, X: np.ndarray) -> np.ndarray:
        """Cluster id of the nearest core point within epsilon for every row, else 0."""
        return _membership(model, X)

    def is_member(self, model: ClusterModel, x: np.ndarray) -> int:
        return int(_membership(model, np.asarray(x, dtype=float)[None, :])[0])

    def default_grid_partitions(self, p: int, budget: Optional[int] = None) -> int:
        """Largest L with (L + 1)^p <= budget."""
        budget = settings.GRID_CANDIDATE_BUDGET if budget is None else budget
        L = int(np.floor(budget ** (1.0 / p))) - 1
        while (L + 2) ** p <= budget:
            L += 1
        while L > 0 and (L + 1) ** p > budget:
            L -= 1
        return L

    def grid_design_space(
        self,
        model: ClusterModel,
        L: int,
        bounds: Optional[Tuple[Sequence[float], Sequence[float]]] = None,
        budget: Optional[int] = None,
    ) -> DesignSpace:
        """Grid points with L + 1 equispaced values per dimension that fall inside a cluster."""
        budget = settings.GRID_CANDIDATE_BUDGET if budget is None else budget
        if L < 2:
            raise InvalidArgumentError(f"grid needs L >= 2 partitions, got {L}")
        p = model.p
        count = (L + 1) ** p
        if count > budget:
            raise TooManyCandidatesError(count, budget)
        lower, upper = grid_bounds(model.points) if bounds is None else (np.asarray(b, dtype=float) for b in bounds)

        axes = [np.linspace(lower[j], upper[j], L + 1) for j in range(p)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, p)
        keep = _membership(model, grid) != OUTLIER
        logger.info(f"Grid design space: {int(keep.sum())} of {count} grid points inside clusters")
        return DesignSpace(points=grid[keep], source=SpaceSource.grid)

    @staticmethod
    def mh_quota(p: int) -> int:
        """Accepted states per cluster: 5 (p (p + 1) / 2 + 1)."""
        return 5 * (p * (p + 1) // 2 + 1)

    def mh_design_space(
        self,
        model: ClusterModel,
        seed: int,
        proposal_scale: Union[None, float, np.ndarray, dict] = None,
        quota: Optional[int] = None,
    ) -> DesignSpace:
        """Random-walk Metropolis-Hastings samples from the uniform law on each cluster."""
        if model.n_clusters == 0:
            return DesignSpace(points=np.empty((0, model.p)), source=SpaceSource.mh)
        quota = self.mh_quota(model.p) if quota is None else quota
        streams = np.random.SeedSequence(seed).spawn(model.n_clusters)

        chains = []
        for cluster, stream in zip(range(1, model.n_clusters + 1), streams):
            scale = proposal_scale.get(cluster) if isinstance(proposal_scale, dict) else proposal_scale
            shape = _proposal_shape(model, cluster, scale)
            chains.append(_run_chain(model, cluster, shape, quota, np.random.default_rng(stream)))

        points = np.vstack(chains)
        _, first = np.unique(points, axis=0, return_index=True)
        points = points[np.sort(first)]
        logger.info(f"MH design space: {points.shape[0]} points over {model.n_clusters} clusters")
        return DesignSpace(points=points, source=SpaceSource.mh)

    def full_sample_design_space(self, X: np.ndarray) -> DesignSpace:
        X = np.asarray(X, dtype=float)
        _, first = np.unique(X, axis=0, return_index=True)
        return DesignSpace(points=X[np.sort(first)], source=SpaceSource.full_sample)
