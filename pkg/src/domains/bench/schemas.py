from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.core.config import settings
from src.domains.models.schemas import Family, ModelSpec
from src.domains.sampler.schemas import OdbssConfig

RESULT_COLUMNS = [
    "scenario",
    "method",
    "k",
    "rep",
    "mse",
    "support_count",
    "t_stage1_ms",
    "t_stage2_ms",
    "t_stage3_ms",
    "error",
]

SUMMARY_COLUMNS = [
    "scenario",
    "method",
    "k",
    "n_reps",
    "mse_mean",
    "mse_se",
    "support_count_mean",
    "t_stage1_ms_mean",
    "t_stage2_ms_mean",
    "t_stage3_ms_mean",
]


class CovariateLaw(str, Enum):
    normal = "normal"
    t = "t"
    skew_normal = "skew_normal"
    skew_t = "skew_t"
    mixture = "mixture"


class SigmaKind(str, Enum):
    S1 = "S1"
    S2 = "S2"
    S3 = "S3"
    custom = "custom"


class BenchMethod(str, Enum):
    odbss = "odbss"
    odbss2 = "odbss2"
    uniform = "uniform"
    iboss = "iboss"
    osmac_mvc = "osmac-mvc"
    osmac_mmse = "osmac-mmse"
    full = "full"


ODBSS_METHODS = (BenchMethod.odbss, BenchMethod.odbss2)
OSMAC_METHODS = (BenchMethod.osmac_mvc, BenchMethod.osmac_mmse)
RESERVED_OPTIONS = {"k", "seed"}


class MethodSpec(BaseModel):
    """A named run of one base method, e.g. ``odbss-procrustes`` = odbss with metric procrustes.

    ODBSS options override ``BenchConfig.odbss``; OSMAC accepts ``k0_fraction``.
    """

    model_config = ConfigDict(frozen=True)

    name: str = Field(min_length=1)
    base: BenchMethod
    options: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="before")
    @classmethod
    def _from_name(cls, data: Any):
        if isinstance(data, (str, BenchMethod)):
            base = BenchMethod(data)
            return {"name": base.value, "base": base}
        return data

    @model_validator(mode="after")
    def _check_options(self):
        keys = set(self.options)
        if self.base in ODBSS_METHODS:
            unknown = keys - set(OdbssConfig.model_fields)
            if unknown or keys & RESERVED_OPTIONS:
                raise ValueError(f"{self.name}: options may not set {sorted(unknown | (keys & RESERVED_OPTIONS))}")
            OdbssConfig(k=2, **self.options)
        elif self.base in OSMAC_METHODS:
            if keys - {"k0_fraction"}:
                raise ValueError(f"{self.name}: OSMAC options are limited to k0_fraction")
        elif keys:
            raise ValueError(f"{self.name}: {self.base.value} takes no options")
        return self


def _broadcast(value, p: int, name: str) -> Optional[List[float]]:
    if value is None:
        return None
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(p, float(arr))
    if arr.shape != (p,):
        raise ValueError(f"{name} must have length {p}, got {arr.shape[0]}")
    return arr.tolist()


class Scenario(BaseModel):
    """One simulated population: model, true parameter and covariate law.

    Scalar beta, mu, alpha and mu2 are broadcast to full vectors.
    """

    model_config = ConfigDict(frozen=True)

    id: str
    p: int = Field(ge=1)
    family: Family = Family.logistic_no_intercept
    beta: List[float]
    n: int = Field(default=100_000, ge=10)
    law: CovariateLaw = CovariateLaw.normal
    sigma: SigmaKind = SigmaKind.S1
    sigma_matrix: Optional[List[List[float]]] = None
    kappa: float = Field(default=3.0, gt=0)
    alpha: Optional[List[float]] = None
    mu: List[float]
    mu2: Optional[List[float]] = None

    @model_validator(mode="before")
    @classmethod
    def _broadcast_vectors(cls, data: Any):
        if not isinstance(data, dict) or not isinstance(data.get("p"), int):
            return data
        data = dict(data)
        p = data["p"]
        family = Family(data.get("family", Family.logistic_no_intercept))
        dim = ModelSpec(family=family, p=p).dim_beta
        data["beta"] = _broadcast(data.get("beta", 0.5), dim, "beta")
        data["mu"] = _broadcast(data.get("mu", 0.0), p, "mu")
        for name in ("alpha", "mu2"):
            data[name] = _broadcast(data.get(name), p, name)
        if data.get("law") in (CovariateLaw.mixture, CovariateLaw.mixture.value) and data["mu2"] is None:
            data["mu2"] = [-m for m in data["mu"]]
        return data

    @model_validator(mode="after")
    def _check(self):
        p = self.p
        if len(self.beta) != self.model.dim_beta:
            raise ValueError(f"beta must have length {self.model.dim_beta} for {self.family.value} with p = {p}")
        if self.law in (CovariateLaw.skew_normal, CovariateLaw.skew_t) and self.alpha is None:
            raise ValueError(f"{self.law.value} covariates need a slant vector alpha")
        if self.law == CovariateLaw.mixture and self.mu2 is None:
            raise ValueError("mixture covariates need a second center mu2")
        if self.sigma == SigmaKind.custom and (self.sigma_matrix is None or np.shape(self.sigma_matrix) != (p, p)):
            raise ValueError(f"custom sigma needs a {p} x {p} sigma_matrix")
        if self.sigma == SigmaKind.S2 and p < 5:
            raise ValueError("S2 needs p >= 5")
        if self.sigma == SigmaKind.S3 and p < 3:
            raise ValueError("S3 needs p >= 3")
        return self

    @property
    def model(self) -> ModelSpec:
        return ModelSpec(family=self.family, p=self.p)

    @property
    def true_beta(self) -> np.ndarray:
        return np.asarray(self.beta, dtype=float)


class BenchConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    scenarios: List[Scenario] = Field(min_length=1)
    methods: List[MethodSpec] = Field(min_length=1)
    k_grid: List[int] = Field(min_length=1)
    replicates: int = Field(default_factory=lambda: settings.BENCH_REPLICATES, ge=1)
    seed: int = Field(default=0, ge=0)
    odbss: Dict[str, Any] = Field(default_factory=dict)
    workers: int = Field(default_factory=lambda: settings.BENCH_WORKERS, ge=1)
    record_timings: bool = True

    @field_validator("k_grid")
    @classmethod
    def _check_k(cls, value):
        if any(k < 2 for k in value):
            raise ValueError("every k must be at least 2")
        return value

    @field_validator("odbss")
    @classmethod
    def _check_overrides(cls, value):
        if "k" in value or "seed" in value:
            raise ValueError("odbss overrides may not set k or seed")
        return value

    @field_validator("methods")
    @classmethod
    def _check_names(cls, value):
        names = [method.name for method in value]
        if len(set(names)) != len(names):
            raise ValueError(f"method names must be unique, got {names}")
        return value


class ResultRow(BaseModel):
    scenario: str
    method: str
    k: int
    rep: int = Field(ge=0)
    mse: Optional[float] = Field(default=None, ge=0)
    support_count: int = 0
    t_stage1_ms: float = 0.0
    t_stage2_ms: float = 0.0
    t_stage3_ms: float = 0.0
    error: str = ""
