from enum import Enum
from typing import Dict, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.core.config import settings
from src.domains.design.schemas import Design
from src.domains.distances.schemas import Metric
from src.domains.models.schemas import Family


class SpaceMode(str, Enum):
    grid = "grid"
    mh = "mh"
    full = "full"
    auto = "auto"


class OsmacVariant(str, Enum):
    mvc = "mVc"
    mmse = "mMSE"


class OdbssConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    k: int = Field(ge=2)
    k0_fraction: float = Field(default_factory=lambda: settings.K0_FRACTION, gt=0, lt=1)
    criterion: Union[str, float] = "A"
    metric: Metric = Metric.frobenius
    zeta: float = Field(default_factory=lambda: settings.ZETA, gt=0.5, le=1.0)
    space_mode: SpaceMode = SpaceMode.auto
    L: Optional[int] = Field(default=None, ge=2)
    epsilon: Optional[float] = Field(default=None, gt=0)
    m_p: Optional[int] = Field(default=None, ge=1)
    design_tol: Optional[float] = Field(default=None, gt=0, le=0.1)
    seed: int = Field(default=0, ge=0)

    @property
    def k0(self) -> int:
        return int(round(self.k0_fraction * self.k))

    @property
    def k1(self) -> int:
        return self.k - self.k0


class SubsampleResult(BaseModel):
    """Selected rows plus the artifacts of every stage that produced them."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    method: str
    k: int
    indices: np.ndarray
    initial_indices: np.ndarray
    design_used: Optional[Design] = None
    weights_for_estimation: Optional[np.ndarray] = None
    beta_hat: Optional[np.ndarray] = None
    epsilon: Optional[float] = None
    space_source: Optional[str] = None
    timings: Dict[str, float] = Field(default_factory=dict)

    @field_validator("indices", "initial_indices", mode="before")
    @classmethod
    def _coerce_indices(cls, value):
        arr = np.array(value, dtype=np.int64).reshape(-1)
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def _check(self):
        if np.unique(self.indices).size != self.indices.size:
            raise ValueError("subsample indices must be distinct")
        if np.any(self.indices < 0):
            raise ValueError("subsample indices must be non-negative")
        if not np.all(np.isin(self.initial_indices, self.indices)):
            raise ValueError("initial indices must be part of the subsample")
        if self.weights_for_estimation is None:
            if self.indices.size != self.k:
                raise ValueError(f"subsample has {self.indices.size} rows, expected {self.k}")
        else:
            # with-replacement draws fold duplicates into the weights
            if self.weights_for_estimation.shape != self.indices.shape:
                raise ValueError("one estimation weight per index is required")
            if self.indices.size > self.k:
                raise ValueError(f"subsample has {self.indices.size} rows, expected at most {self.k}")
        return self

    @property
    def support_count(self) -> int:
        return 0 if self.design_used is None else self.design_used.b

    def to_dict(self, include_timings: bool = True) -> dict:
        payload = {
            "method": self.method,
            "k": self.k,
            "k0": int(self.initial_indices.size),
            "beta_hat": None if self.beta_hat is None else self.beta_hat.tolist(),
            "epsilon": self.epsilon,
            "space_source": self.space_source,
            "design": None if self.design_used is None else self.design_used.to_dict(),
        }
        if include_timings:
            payload["timings_ms"] = dict(self.timings)
        return payload


class SubsampleRequest(BaseModel):
    X: list[list[float]]
    y: Optional[list[float]] = None
    family: Family
    k: int = Field(ge=2)
    k0_fraction: Optional[float] = Field(default=None, gt=0, lt=1)
    criterion: str = "A"
    metric: Metric = Metric.frobenius
    zeta: Optional[float] = Field(default=None, gt=0.5, le=1.0)
    space_mode: SpaceMode = SpaceMode.auto
    seed: int = Field(default=0, ge=0)


class SubsampleResponse(BaseModel):
    indices: list[int]
    initial_indices: list[int]
    beta_hat: Optional[list[float]]
    support: list[list[float]]
    weights: list[float]
    timings_ms: Dict[str, float]
