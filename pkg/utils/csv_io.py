import hashlib
import os

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike, NDArray

from utils.custom_exceptions import DataError

FLOAT_FORMAT = "%.17g"


def _ensure_parent(path: str) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)


def column_names(prefix: str, n: int) -> list[str]:
    return [f"{prefix}{i + 1}" for i in range(n)]


def write_frame(frame: pd.DataFrame, path: str, index: bool = False) -> str:
    _ensure_parent(path)
    try:
        frame.to_csv(path, index=index, float_format=FLOAT_FORMAT)
    except OSError as e:
        raise DataError(f"cannot write {path}: {e}") from e
    return path


def write_matrix(values: ArrayLike, path: str, prefix: str) -> str:
    values = np.atleast_2d(np.asarray(values, dtype=float))
    frame = pd.DataFrame(values, columns=column_names(prefix, values.shape[1]))
    return write_frame(frame, path)


def read_matrix(path: str, prefix: str, n: int) -> NDArray[np.float64]:
    """Reads the columns prefix1..prefix{n} of a CSV file as a float matrix."""
    if not os.path.isfile(path):
        raise DataError(f"data file {path} does not exist")
    try:
        frame = pd.read_csv(path)
    except (OSError, ValueError) as e:
        raise DataError(f"cannot read {path}: {e}") from e
    columns = column_names(prefix, n)
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise DataError(f"{path} is missing columns {missing}")
    try:
        values = frame[columns].to_numpy(dtype=float)
    except ValueError as e:
        raise DataError(f"{path} has non-numeric entries: {e}") from e
    if not np.all(np.isfinite(values)):
        raise DataError(f"{path} has missing or non-finite entries")
    return values


def data_digest(values: ArrayLike) -> str:
    arr = np.ascontiguousarray(values, dtype=float)
    return hashlib.sha256(arr.tobytes()).hexdigest()[:16]
