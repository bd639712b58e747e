"""Optimal-design-based subsampling.

Stage 1 draws a uniform pilot, estimates beta on it and (unless the full
sample is used as design space) clusters the pilot to bound the design space.
Stage 2 solves for an approximate optimal design and prunes its support.
Stage 3 takes, for every support point, the rows whose information matrices
are closest to it.
"""
import time
from contextlib import contextmanager
from typing import Dict, Iterator, Optional, Union

import numpy as np

from src.core.config import settings
from src.core.errors import (
    DesignSpaceEmptyError,
    InvalidArgumentError,
    SeparationError,
    ShortfallError,
)
from src.core.logger import get_logger
from src.domains.clustering.service import ClusteringService
from src.domains.design.schemas import Criterion, Design
from src.domains.design.service import DesignService
from src.domains.distances.schemas import Metric
from src.domains.distances.service import DistanceService
from src.domains.models.schemas import Dataset, Family, ModelSpec
from src.domains.models.service import ModelService
from .schemas import OdbssConfig, SpaceMode, SubsampleResult

logger = get_logger(__name__)
clustering_service = ClusteringService()
design_service = DesignService()
distance_service = DistanceService()
model_service = ModelService()

Seed = Union[int, np.random.SeedSequence]


def as_seed_sequence(seed: Seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(int(seed))


@contextmanager
def _timed(timings: Dict[str, float], stage: str) -> Iterator[None]:
    start = time.perf_counter()
    try:
        yield
    finally:
        timings[stage] = (time.perf_counter() - start) * 1000.0


def take_available(order: np.ndarray, available: np.ndarray, count: int) -> np.ndarray:
    picked = order[available[order]][:count]
    available[picked] = False
    return picked


def _pilot_estimate(model: ModelSpec, pilot: Dataset) -> np.ndarray:
    if pilot.y is None:
        if model.family != Family.linear:
            raise InvalidArgumentError(f"{model.family.value} subsampling needs responses")
        # linear information does not depend on beta
        return np.zeros(model.dim_beta)
    try:
        estimate = model_service.fit_mle(model, pilot)
    except SeparationError as exc:
        raise SeparationError(f"{exc.detail} on the initial subsample; increase k0") from exc
    return estimate.beta


def _resolve_mode(config: OdbssConfig, p: int) -> SpaceMode:
    if config.space_mode != SpaceMode.auto:
        return config.space_mode
    L = clustering_service.default_grid_partitions(p) if config.L is None else config.L
    return SpaceMode.grid if L >= settings.GRID_MIN_PARTITIONS else SpaceMode.mh


def _design_space(dataset: Dataset, pilot: Dataset, config: OdbssConfig, mode: SpaceMode, seed: Seed):
    if mode == SpaceMode.full:
        return clustering_service.full_sample_design_space(dataset.X), None

    epsilon = clustering_service.epsilon_rule(pilot.X) if config.epsilon is None else config.epsilon
    clusters = clustering_service.dbscan_fit(pilot.X, epsilon, config.m_p)
    if mode == SpaceMode.grid:
        L = clustering_service.default_grid_partitions(dataset.p) if config.L is None else config.L
        return clustering_service.grid_design_space(clusters, L), epsilon
    space_seed = int(seed.generate_state(1)[0]) if isinstance(seed, np.random.SeedSequence) else seed
    return clustering_service.mh_design_space(clusters, space_seed), epsilon


class SamplerService:

    def uniform_subsample(self, n: int, k: int, seed: Seed) -> np.ndarray:
        """k distinct row indices drawn uniformly without replacement, sorted."""
        if k < 0 or k > n:
            raise InvalidArgumentError(f"cannot draw {k} rows from {n}")
        rng = np.random.default_rng(seed)
        return np.sort(rng.choice(n, size=k, replace=False))

    def allocate(
        self,
        dataset: Dataset,
        design: Design,
        metric: Metric,
        model: ModelSpec,
        beta,
        k1: int,
        excluded: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        """Rows closest to each support point, floor(w_i k1) of them per point.

        Support points are visited heaviest first. The k1 - sum floor(w_i k1)
        leftover rows go one per support point in order of largest fractional part.
        """
        n = dataset.n
        available = np.ones(n, dtype=bool)
        if excluded is not None and len(excluded):
            available[np.asarray(excluded, dtype=np.int64)] = False
        free = int(available.sum())
        if k1 > free:
            raise ShortfallError(k1, free)
        if k1 <= 0:
            return np.empty(0, dtype=np.int64)

        share = design.weights * k1
        counts = np.floor(share).astype(int)
        remainder = int(np.clip(k1 - counts.sum(), 0, design.b))
        top_up = np.argsort(-(share - counts), kind="stable")[:remainder]

        orders = []
        picked = []
        for i, point in enumerate(design.support):
            reference = model_service.fisher_info(model, beta, point)
            # stable sort keeps ties in row order
            order = np.argsort(distance_service.distance_row(metric, reference, dataset, model, beta), kind="stable")
            orders.append(order)
            picked.append(take_available(order, available, counts[i]))
        for i in top_up:
            picked.append(take_available(orders[i], available, 1))

        chosen = np.concatenate(picked)
        if chosen.size != k1:
            raise ShortfallError(k1, int(chosen.size))
        logger.debug(f"Allocated {k1} rows around {design.b} support points")
        return chosen

    def odbss(self, dataset: Dataset, model: ModelSpec, config: OdbssConfig) -> SubsampleResult:
        n, k = dataset.n, config.k
        if dataset.p != model.p:
            raise InvalidArgumentError(f"dataset has {dataset.p} covariates, model expects {model.p}")
        if n <= k:
            raise InvalidArgumentError(f"dataset has {n} rows, subsample size must be smaller (k = {k})")
        k0, k1 = config.k0, config.k1
        if k0 < model.dim_beta + 1:
            raise InvalidArgumentError(f"k0 = {k0} must be at least dim_beta + 1 = {model.dim_beta + 1}")
        if k1 < 1:
            raise InvalidArgumentError(f"k0 = {k0} leaves no rows for the optimal-design stage")
        crit = Criterion.parse(config.criterion)
        pilot_seed, space_seed = as_seed_sequence(config.seed).spawn(2)
        mode = _resolve_mode(config, model.p)

        logger.info(f"ODBSS: n={n}, k={k} (k0={k0}), {crit.label}-optimality, {mode.value} design space")
        timings: Dict[str, float] = {}
        with _timed(timings, "stage1"):
            initial = self.uniform_subsample(n, k0, pilot_seed)
            pilot = dataset.subset(initial)
            beta_hat = _pilot_estimate(model, pilot)
            space, epsilon = _design_space(dataset, pilot, config, mode, space_seed)
            if space.is_empty:
                raise DesignSpaceEmptyError()

        with _timed(timings, "stage2"):
            design = design_service.optimize_design(space, model, beta_hat, crit, tol=config.design_tol)
            design = design_service.reduce_support(design, config.zeta, model, beta_hat, crit)

        with _timed(timings, "stage3"):
            chosen = self.allocate(dataset, design, config.metric, model, beta_hat, k1, excluded=initial)

        if np.intersect1d(initial, chosen).size:
            raise RuntimeError("stage-3 allocation re-selected initial rows")
        indices = np.sort(np.concatenate([initial, chosen]))
        timings["total"] = sum(timings.values())
        logger.info(
            f"ODBSS done: {design.b} support points, "
            + ", ".join(f"{stage} {ms:.1f} ms" for stage, ms in timings.items())
        )
        return SubsampleResult(
            method="odbss-2" if mode == SpaceMode.full else "odbss",
            k=k,
            indices=indices,
            initial_indices=initial,
            design_used=design,
            beta_hat=beta_hat,
            epsilon=epsilon,
            space_source=space.source.value,
            timings=timings,
        )
