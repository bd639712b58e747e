"""CSV/JSON reading and writing shared by the CLI and the benchmark harness."""
import json
from pathlib import Path
from typing import Iterable, List, Optional, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel

from src.core.errors import InvalidArgumentError
from src.core.logger import get_logger
from src.domains.models.schemas import Dataset

logger = get_logger(__name__)

PathLike = Union[str, Path]


def load_frame(path: PathLike) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise InvalidArgumentError(f"{path} does not exist")
    frame = pd.read_csv(path)
    if frame.empty:
        raise InvalidArgumentError(f"{path} has no rows")
    return frame


def load_matrix(path: PathLike) -> np.ndarray:
    frame = load_frame(path)
    _check_numeric(frame, path)
    return frame.to_numpy(dtype=float)


def load_dataset(path: PathLike, response: Optional[str] = None) -> Dataset:
    """Response column by name, every other column is a covariate in file order."""
    frame = load_frame(path)
    y = None
    if response is not None:
        if response not in frame.columns:
            raise InvalidArgumentError(f"response column {response!r} not found in {path}")
        y = frame.pop(response)
        _check_numeric(y.to_frame(), path)
        y = y.to_numpy(dtype=float)
    _check_numeric(frame, path)
    logger.info(f"Loaded {frame.shape[0]} rows with {frame.shape[1]} covariates from {path}")
    try:
        return Dataset(X=frame.to_numpy(dtype=float), y=y)
    except ValueError as exc:
        raise InvalidArgumentError(f"{path}: {exc}") from exc


def _check_numeric(frame: pd.DataFrame, path: PathLike) -> None:
    bad = [col for col in frame.columns if not pd.api.types.is_numeric_dtype(frame[col])]
    if bad:
        raise InvalidArgumentError(f"non-numeric columns in {path}: {', '.join(map(str, bad))}")


def write_indices(path: PathLike, indices: Iterable[int]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(f"{int(i)}\n" for i in indices))


def write_json(path: PathLike, payload: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_json(path: PathLike) -> dict:
    path = Path(path)
    if not path.exists():
        raise InvalidArgumentError(f"{path} does not exist")
    return json.loads(path.read_text())


class ResultWriter:
    """Appends result rows to one CSV; the header is written on open."""

    def __init__(self, path: PathLike, columns: List[str]):
        self.path = Path(path)
        self.columns = columns
        self.rows_written = 0

    def __enter__(self) -> "ResultWriter":
        self.path.parent.mkdir(parents=True, exist_ok=True)
        pd.DataFrame(columns=self.columns).to_csv(self.path, index=False)
        return self

    def __exit__(self, *exc) -> None:
        logger.info(f"Wrote {self.rows_written} rows to {self.path}")

    def write(self, rows: List[BaseModel]) -> None:
        if not rows:
            return
        frame = pd.DataFrame([row.model_dump() for row in rows], columns=self.columns)
        frame.to_csv(self.path, mode="a", header=False, index=False)
        self.rows_written += len(rows)
