from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from utils.checks import require_in_unit_cube
from utils.custom_exceptions import InvalidConfigError, InvalidInputError


@dataclass(frozen=True, eq=False)
class WeightedSample:
    """
    Empirical copula estimate: t0 + t equally weighted pseudo-observations in
    [0, 1]^n. Updates return a new sample; the points array is read-only.
    """

    points: NDArray[np.float64]
    t0: int
    t: int = 0

    def __post_init__(self) -> None:
        points = np.array(self.points, dtype=float)
        if points.ndim != 2 or points.shape[0] == 0:
            raise InvalidInputError(
                f"points must be a nonempty (count, n) array, got {points.shape}"
            )
        require_in_unit_cube("pseudo-observations", points)
        if self.t0 < 0 or self.t < 0 or points.shape[0] != self.t0 + self.t:
            raise InvalidInputError(
                f"point count {points.shape[0]} does not equal t0 + t = "
                f"{self.t0} + {self.t}"
            )
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    @property
    def count(self) -> int:
        return self.t0 + self.t

    @property
    def n(self) -> int:
        return int(self.points.shape[1])

    @property
    def weights(self) -> NDArray[np.float64]:
        return np.full(self.count, 1.0 / self.count)

    def __repr__(self) -> str:
        return f"WeightedSample(t0={self.t0}, t={self.t}, n={self.n})"


@dataclass(frozen=True, eq=False)
class CopulaSummary:
    marginal_moments: NDArray[np.float64]
    pair_covariances: NDArray[np.float64]

    def __post_init__(self) -> None:
        moments = np.array(self.marginal_moments, dtype=float)
        pairs = np.array(self.pair_covariances, dtype=float).reshape(-1)
        if moments.ndim != 2:
            raise InvalidInputError("marginal_moments must be an (n, m) matrix")
        n = moments.shape[0]
        if pairs.size != n * (n - 1) // 2:
            raise InvalidInputError(
                f"expected {n * (n - 1) // 2} pair covariances, got {pairs.size}"
            )
        moments.setflags(write=False)
        pairs.setflags(write=False)
        object.__setattr__(self, "marginal_moments", moments)
        object.__setattr__(self, "pair_covariances", pairs)

    @property
    def n(self) -> int:
        return int(self.marginal_moments.shape[0])

    @property
    def m(self) -> int:
        return int(self.marginal_moments.shape[1])

    def vector(self) -> NDArray[np.float64]:
        moments = self.marginal_moments.reshape(-1)
        return np.concatenate((moments, self.pair_covariances))

    @classmethod
    def from_vector(cls, vector: ArrayLike, n: int) -> "CopulaSummary":
        vector = np.asarray(vector, dtype=float).reshape(-1)
        m = summary_moment_count(vector.size, n)
        return cls(
            marginal_moments=vector[: n * m].reshape(n, m),
            pair_covariances=vector[n * m :],
        )


def summary_dim(n: int, m: int) -> int:
    return n * m + n * (n - 1) // 2


def summary_moment_count(size: int, n: int) -> int:
    """Recovers m from the length of a flattened summary vector."""
    pairs = n * (n - 1) // 2
    if size <= pairs or (size - pairs) % n:
        raise InvalidInputError(f"summary length {size} does not fit n={n}")
    return (size - pairs) // n


@dataclass(frozen=True)
class RadiusConfig:
    """
    Constants of the concentration radius c * count^(-rate) * sqrt(ln(1/alpha)).

    `exponent` overrides the default rate 1 / max(n, 2p).
    """

    c_scale: float = 0.3
    exponent: float | None = None
    p: float = 2.0
    n: int = 2

    def __post_init__(self) -> None:
        if self.c_scale < 0:
            raise InvalidConfigError(f"c_scale must be nonnegative, got {self.c_scale}")
        if self.exponent is not None and self.exponent <= 0:
            raise InvalidConfigError(f"exponent must be positive, got {self.exponent}")
        if self.p < 1:
            raise InvalidConfigError(f"p must be at least 1, got {self.p}")

    @property
    def rate(self) -> float:
        if self.exponent is not None:
            return self.exponent
        return 1.0 / max(self.n, 2 * self.p)
