from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field, field_validator, model_validator


class Family(str, Enum):
    logistic = "logistic"
    logistic_no_intercept = "logistic_no_intercept"
    linear = "linear"
    hetero_log_var = "hetero_log_var"


LOGISTIC_FAMILIES = (Family.logistic, Family.logistic_no_intercept)


def as_float_array(value, ndim: int, name: str) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or infinite values")
    arr.setflags(write=False)
    return arr


class ModelSpec(BaseModel):
    """Regression family in force and its covariate dimension."""

    model_config = ConfigDict(frozen=True)

    family: Family
    p: int = Field(ge=1)

    @computed_field
    @property
    def dim_beta(self) -> int:
        return self.p if self.family == Family.logistic_no_intercept else self.p + 1

    @property
    def rank(self) -> int:
        return 2 if self.family == Family.hetero_log_var else 1

    @property
    def has_intercept(self) -> bool:
        return self.family != Family.logistic_no_intercept

    @property
    def is_logistic(self) -> bool:
        return self.family in LOGISTIC_FAMILIES


class InfoFactor(BaseModel):
    """Low-rank factors of a Fisher information matrix: I = sum_r f_r f_r^T."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    factors: np.ndarray  # shape (rank, dim_beta)

    @field_validator("factors", mode="before")
    @classmethod
    def _coerce(cls, value):
        arr = np.array(value, dtype=float)
        if arr.ndim == 1:
            arr = arr[None, :]
        return as_float_array(arr, 2, "factors")

    @property
    def rank(self) -> int:
        return self.factors.shape[0]

    @property
    def dim(self) -> int:
        return self.factors.shape[1]

    def dense(self) -> np.ndarray:
        return self.factors.T @ self.factors


class ParamEstimate(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    beta: np.ndarray
    converged: bool
    iterations: int
    score_norm: float

    @field_validator("beta", mode="before")
    @classmethod
    def _coerce(cls, value):
        return as_float_array(value, 1, "beta")


class Dataset(BaseModel):
    """Covariates X (n x p) and optional responses y; read-only once built."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    X: np.ndarray
    y: Optional[np.ndarray] = None

    @field_validator("X", mode="before")
    @classmethod
    def _coerce_x(cls, value):
        arr = np.array(value, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        return as_float_array(arr, 2, "X")

    @field_validator("y", mode="before")
    @classmethod
    def _coerce_y(cls, value):
        if value is None:
            return None
        return as_float_array(value, 1, "y")

    @model_validator(mode="after")
    def _check_lengths(self):
        if self.X.shape[0] == 0:
            raise ValueError("dataset is empty")
        if self.y is not None and self.y.shape[0] != self.X.shape[0]:
            raise ValueError(f"y has {self.y.shape[0]} rows, X has {self.X.shape[0]}")
        return self

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def subset(self, indices: np.ndarray) -> "Dataset":
        return Dataset(X=self.X[indices], y=None if self.y is None else self.y[indices])
