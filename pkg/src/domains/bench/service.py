"""Monte-Carlo MSE experiments comparing the subsamplers."""
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Iterator, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from src.core.config import settings
from src.core.errors import InvalidArgumentError, OdbssError
from src.core.logger import get_logger
from src.core.storage import ResultWriter
from src.domains.models.schemas import Dataset
from src.domains.models.service import ModelService
from src.domains.sampler.baselines import BaselineSampler
from src.domains.sampler.schemas import OdbssConfig, OsmacVariant, SpaceMode, SubsampleResult
from src.domains.sampler.service import SamplerService
from .scenarios import ScenarioGenerator
from .schemas import (
    ODBSS_METHODS,
    RESULT_COLUMNS,
    SUMMARY_COLUMNS,
    BenchConfig,
    BenchMethod,
    MethodSpec,
    ResultRow,
    Scenario,
)

logger = get_logger(__name__)
baseline_sampler = BaselineSampler()
model_service = ModelService()
sampler_service = SamplerService()
scenario_generator = ScenarioGenerator()


def _subsample(method: MethodSpec, data: Dataset, scenario: Scenario, k: int, seed: int, config: BenchConfig) -> SubsampleResult:
    model = scenario.model
    base = method.base
    if base in ODBSS_METHODS:
        options = {**config.odbss, **method.options}
        if base == BenchMethod.odbss2:
            options["space_mode"] = SpaceMode.full
        return sampler_service.odbss(data, model, OdbssConfig(k=k, seed=seed, **options))
    if base == BenchMethod.uniform:
        return baseline_sampler.uniform_method(data, k, seed)
    if base == BenchMethod.iboss:
        return baseline_sampler.iboss_subsample(data, model, k, seed)
    variant = OsmacVariant.mvc if base == BenchMethod.osmac_mvc else OsmacVariant.mmse
    fraction = method.options.get("k0_fraction", config.odbss.get("k0_fraction", settings.K0_FRACTION))
    return baseline_sampler.osmac_subsample(data, model, k, int(round(fraction * k)), variant, seed)


def _squared_error(beta_hat: np.ndarray, beta: np.ndarray) -> float:
    return float(np.sum((beta_hat - beta) ** 2))


def _run_method(
    method: MethodSpec, data: Dataset, scenario: Scenario, k: int, seed: int, config: BenchConfig, rep: int
) -> ResultRow:
    row = dict(scenario=scenario.id, method=method.name, k=k, rep=rep)
    try:
        if method.base == BenchMethod.full:
            estimate = model_service.fit_mle(scenario.model, data)
            return ResultRow(**row, mse=_squared_error(estimate.beta, scenario.true_beta))

        result = _subsample(method, data, scenario, k, seed, config)
        estimate = model_service.fit_mle(scenario.model, data.subset(result.indices), weights=result.weights_for_estimation)
        timings = result.timings if config.record_timings else {}
        return ResultRow(
            **row,
            mse=_squared_error(estimate.beta, scenario.true_beta),
            support_count=result.support_count,
            t_stage1_ms=timings.get("stage1", timings.get("total", 0.0)),
            t_stage2_ms=timings.get("stage2", 0.0),
            t_stage3_ms=timings.get("stage3", 0.0),
        )
    except OdbssError as exc:
        logger.error(f"{method.name} failed on {scenario.id} rep {rep} k {k}: {exc.detail}")
        return ResultRow(**row, error=type(exc).__name__)
    except Exception as exc:
        # any other failure also becomes an error row
        logger.exception(f"{method.name} crashed on {scenario.id} rep {rep} k {k}: {exc}")
        return ResultRow(**row, error=type(exc).__name__)


def run_replicate(task: Tuple[BenchConfig, int, int]) -> List[ResultRow]:
    """All methods at all k on one replicate; module level so worker processes can pickle it."""
    config, scenario_idx, rep = task
    scenario = config.scenarios[scenario_idx]
    data = BenchService.replicate_data(scenario, config.seed, scenario_idx, rep)
    rows = []
    for method in config.methods:
        ks = [scenario.n] if method.base == BenchMethod.full else config.k_grid
        for k in ks:
            seed = BenchService.method_seed(config.seed, scenario_idx, rep, k)
            rows.append(_run_method(method, data, scenario, k, seed, config, rep))
    logger.info(f"Scenario {scenario.id} replicate {rep + 1}/{config.replicates} done")
    return rows


def _tasks(config: BenchConfig) -> Iterator[Tuple[BenchConfig, int, int]]:
    for scenario_idx in range(len(config.scenarios)):
        for rep in range(config.replicates):
            yield config, scenario_idx, rep


class BenchService:

    @staticmethod
    def replicate_data(scenario: Scenario, master_seed: int, scenario_idx: int, rep: int) -> Dataset:
        """The (X, y) every method sees for one replicate of one scenario."""
        sigma_seed, x_seed, y_seed = np.random.SeedSequence([master_seed, scenario_idx, rep]).spawn(3)
        sigma = scenario_generator.scenario_sigma(scenario, sigma_seed)
        X = scenario_generator.sample_covariates(scenario, scenario.n, x_seed, sigma=sigma)
        y = scenario_generator.sample_responses(scenario, X, y_seed)
        return Dataset(X=X, y=y)

    @staticmethod
    def method_seed(master_seed: int, scenario_idx: int, rep: int, k: int) -> int:
        # shared by every method at the same (scenario, rep, k)
        return int(np.random.SeedSequence([master_seed, scenario_idx, rep, k, 1]).generate_state(1)[0])

    def run_experiment(self, config: BenchConfig, out_path: Optional[Union[str, Path]] = None) -> pd.DataFrame:
        """Every method at every k on every replicate; rows are written as they complete, in task order."""
        logger.info(
            f"Running {len(config.scenarios)} scenarios x {config.replicates} replicates, "
            f"methods {', '.join(m.name for m in config.methods)}, k in {config.k_grid}"
        )
        collected: List[ResultRow] = []

        def consume(batches, writer: Optional[ResultWriter]):
            for rows in batches:
                collected.extend(rows)
                if writer is not None:
                    writer.write(rows)

        def execute(writer: Optional[ResultWriter]):
            if config.workers > 1:
                with ProcessPoolExecutor(max_workers=config.workers) as pool:
                    consume(pool.map(run_replicate, _tasks(config)), writer)
            else:
                consume(map(run_replicate, _tasks(config)), writer)

        if out_path is None:
            execute(None)
        else:
            with ResultWriter(out_path, RESULT_COLUMNS) as writer:
                execute(writer)

        return pd.DataFrame([row.model_dump() for row in collected], columns=RESULT_COLUMNS)

    def summarize(self, results: pd.DataFrame) -> pd.DataFrame:
        """Mean MSE, its Monte-Carlo standard error and mean timings per scenario, method and k."""
        if results.empty:
            raise InvalidArgumentError("result table is empty")
        ok = results[results["error"].fillna("").astype(str) == ""] if "error" in results else results
        grouped = ok.groupby(["scenario", "method", "k"], sort=False)
        summary = grouped.agg(
            n_reps=("mse", "size"),
            mse_mean=("mse", "mean"),
            mse_sd=("mse", lambda s: s.std(ddof=1) if s.size > 1 else 0.0),
            support_count_mean=("support_count", "mean"),
            t_stage1_ms_mean=("t_stage1_ms", "mean"),
            t_stage2_ms_mean=("t_stage2_ms", "mean"),
            t_stage3_ms_mean=("t_stage3_ms", "mean"),
        ).reset_index()
        summary["mse_se"] = summary["mse_sd"] / np.sqrt(summary["n_reps"])
        return summary[SUMMARY_COLUMNS]
