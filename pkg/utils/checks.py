import numpy as np
from numpy.typing import ArrayLike, NDArray

from utils.custom_exceptions import InvalidConfigError, InvalidInputError


# --- Input checks ---


def require_finite(name: str, value: ArrayLike) -> NDArray[np.float64]:
    """Returns `value` as a float array, raising InvalidInputError on NaN or inf."""
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        detail = f", got {value!r}" if arr.ndim == 0 else ""
        raise InvalidInputError(f"{name} must be finite{detail}")
    return arr


def require_in_unit_cube(name: str, value: ArrayLike) -> NDArray[np.float64]:
    arr = require_finite(name, value)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise InvalidInputError(f"{name} must lie in [0, 1]")
    return arr


def require_min_count(name: str, count: int, minimum: int) -> None:
    if count < minimum:
        raise InvalidInputError(f"{name} needs at least {minimum} entries, got {count}")


# --- Config checks ---


def require_positive(name: str, value: float) -> float:
    if not np.isfinite(value) or value <= 0:
        raise InvalidConfigError(f"{name} must be positive, got {value}")
    return float(value)


def require_open_unit(name: str, value: float) -> float:
    if not 0.0 < value < 1.0:
        raise InvalidConfigError(f"{name} must lie in (0, 1), got {value}")
    return float(value)
