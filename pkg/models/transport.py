from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from models.copula import WeightedSample
from utils.custom_exceptions import InvalidInputError


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Finitely supported probability measure on [0, 1]^n."""

    points: NDArray[np.float64]
    weights: NDArray[np.float64]

    def __post_init__(self) -> None:
        points = np.array(self.points, dtype=float)
        if points.ndim == 1:
            points = points.reshape(1, -1)
        weights = np.array(self.weights, dtype=float).reshape(-1)
        if points.ndim != 2 or points.shape[0] != weights.size or weights.size == 0:
            raise InvalidInputError(
                f"{points.shape[0]} atoms but {weights.size} weights given"
            )
        if not np.all(np.isfinite(points)) or not np.all(np.isfinite(weights)):
            raise InvalidInputError("atoms and weights must be finite")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise InvalidInputError("weights must be nonnegative and sum to 1")
        points.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls, points: ArrayLike) -> "DiscreteMeasure":
        points = np.atleast_2d(np.asarray(points, dtype=float))
        count = points.shape[0]
        return cls(points=points, weights=np.full(count, 1.0 / count))

    @classmethod
    def from_sample(cls, sample: WeightedSample) -> "DiscreteMeasure":
        return cls(points=sample.points, weights=sample.weights)

    @property
    def size(self) -> int:
        return int(self.weights.size)

    @property
    def n(self) -> int:
        return int(self.points.shape[1])
