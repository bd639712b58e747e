from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator, model_validator
from scipy.spatial import cKDTree

from src.domains.models.schemas import as_float_array

OUTLIER = 0


class SpaceSource(str, Enum):
    grid = "grid"
    mh = "mh"
    full_sample = "full"


class ClusterModel(BaseModel):
    """Trained DBSCAN state; labels use 0 for outliers and 1..m for clusters."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    epsilon: float = Field(gt=0)
    m_p: int = Field(ge=1)
    points: np.ndarray
    labels: np.ndarray
    core_flags: np.ndarray

    _core_tree: Optional[cKDTree] = PrivateAttr(default=None)

    @field_validator("points", mode="before")
    @classmethod
    def _coerce_points(cls, value):
        return as_float_array(value, 2, "points")

    @field_validator("labels", mode="before")
    @classmethod
    def _coerce_labels(cls, value):
        arr = np.array(value, dtype=int)
        arr.setflags(write=False)
        return arr

    @field_validator("core_flags", mode="before")
    @classmethod
    def _coerce_flags(cls, value):
        arr = np.array(value, dtype=bool)
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def _check(self):
        n = self.points.shape[0]
        if self.labels.shape != (n,) or self.core_flags.shape != (n,):
            raise ValueError("labels and core_flags must have one entry per point")
        return self

    @property
    def p(self) -> int:
        return self.points.shape[1]

    @property
    def n_clusters(self) -> int:
        return int(self.labels.max(initial=OUTLIER))

    @property
    def core_points(self) -> np.ndarray:
        return self.points[self.core_flags]

    @property
    def core_labels(self) -> np.ndarray:
        return self.labels[self.core_flags]

    @property
    def core_tree(self) -> cKDTree:
        if self._core_tree is None:
            self._core_tree = cKDTree(self.core_points)
        return self._core_tree

    def cluster_points(self, cluster: int) -> np.ndarray:
        return self.points[self.labels == cluster]


class DesignSpace(BaseModel):
    """Finite candidate set for the optimal design."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    points: np.ndarray
    source: SpaceSource

    @field_validator("points", mode="before")
    @classmethod
    def _coerce_points(cls, value):
        arr = np.array(value, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        return as_float_array(arr, 2, "points")

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def is_empty(self) -> bool:
        return self.size == 0
