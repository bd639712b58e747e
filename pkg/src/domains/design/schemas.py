import math
from typing import Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.core.errors import InvalidArgumentError
from src.domains.models.schemas import Family, as_float_array

NAMED_CRITERIA = {"A": -1.0, "D": 0.0, "E": -math.inf}


class Criterion(BaseModel):
    """Kiefer's Psi_q criterion; q = -1 (A), 0 (D), -inf (E)."""

    model_config = ConfigDict(frozen=True)

    q: float = Field(default=-1.0, lt=1.0)

    @classmethod
    def parse(cls, value: Union[str, float, "Criterion"]) -> "Criterion":
        if isinstance(value, Criterion):
            return value
        if isinstance(value, str) and value.upper() in NAMED_CRITERIA:
            return cls(q=NAMED_CRITERIA[value.upper()])
        try:
            return cls(q=float(value))
        except (TypeError, ValueError) as exc:
            raise InvalidArgumentError(f"unknown criterion {value!r}; use A, D, E or a number q < 1") from exc

    @property
    def label(self) -> str:
        for name, q in NAMED_CRITERIA.items():
            if q == self.q:
                return name
        return f"q={self.q:g}"

    @property
    def is_d(self) -> bool:
        return self.q == 0.0

    @property
    def is_e(self) -> bool:
        return self.q == -math.inf


class Design(BaseModel):
    """Approximate design: support points with probability weights, heaviest first."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    support: np.ndarray  # (b, p)
    weights: np.ndarray  # (b,)
    criterion_value: Optional[float] = None
    certified: Optional[bool] = None
    iterations: int = 0

    @field_validator("support", mode="before")
    @classmethod
    def _coerce_support(cls, value):
        arr = np.array(value, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        return as_float_array(arr, 2, "support")

    @field_validator("weights", mode="before")
    @classmethod
    def _coerce_weights(cls, value):
        return as_float_array(value, 1, "weights")

    @model_validator(mode="after")
    def _check(self):
        if self.support.shape[0] != self.weights.shape[0]:
            raise ValueError("support and weights differ in length")
        if self.weights.size == 0:
            raise ValueError("design has no support points")
        if np.any(self.weights < 0):
            raise ValueError("weights must be non-negative")
        if abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValueError(f"weights sum to {self.weights.sum()}, expected 1")
        if np.unique(self.support, axis=0).shape[0] != self.support.shape[0]:
            raise ValueError("support points must be distinct")
        return self

    @classmethod
    def build(cls, support, weights, **extra) -> "Design":
        """Normalize weights and order support points by descending weight."""
        support = np.asarray(support, dtype=float)
        weights = np.asarray(weights, dtype=float)
        order = np.argsort(-weights, kind="stable")
        weights = weights[order] / weights.sum()
        return cls(support=support[order], weights=weights, **extra)

    @property
    def b(self) -> int:
        return self.weights.shape[0]

    def to_dict(self) -> dict:
        return {
            "support": self.support.tolist(),
            "weights": self.weights.tolist(),
            "criterion_value": self.criterion_value,
            "certified": self.certified,
            "iterations": self.iterations,
        }


class DesignRequest(BaseModel):
    candidates: list[list[float]]
    family: Family
    beta: list[float]
    criterion: str = "A"
    tol: Optional[float] = Field(default=None, gt=0, le=0.1)


class DesignResponse(BaseModel):
    support: list[list[float]]
    weights: list[float]
    criterion_value: Optional[float]
    certified: Optional[bool]
    iterations: int
