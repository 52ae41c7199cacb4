from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.typing import ArrayLike, NDArray

from utils.checks import require_positive
from utils.custom_exceptions import InvalidConfigError, InvalidInputError


def _frozen_array(value: ArrayLike, ndim: int, name: str) -> NDArray[np.float64]:
    arr = np.array(value, dtype=float)
    if arr.ndim != ndim:
        raise InvalidConfigError(f"{name} must be {ndim}-dimensional, not {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TrueModel:
    """Gaussian model of one period's log-returns: the data-generating law F*."""

    mean: NDArray[np.float64]
    covariance: NDArray[np.float64]

    def __post_init__(self) -> None:
        mean = _frozen_array(self.mean, 1, "mean")
        cov = _frozen_array(self.covariance, 2, "covariance")
        if cov.shape != (mean.size, mean.size):
            raise InvalidConfigError(
                f"covariance shape {cov.shape} does not match mean length {mean.size}"
            )
        if not np.all(np.isfinite(cov)) or not np.all(np.isfinite(mean)):
            raise InvalidConfigError("mean and covariance must be finite")
        if np.max(np.abs(cov - cov.T)) > 1e-12:
            raise InvalidConfigError("covariance must be symmetric")
        if np.min(np.linalg.eigvalsh(cov)) <= 0:
            raise InvalidConfigError("covariance must be positive definite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @classmethod
    def from_annual(
        cls,
        mean: ArrayLike,
        volatility: ArrayLike,
        correlation: float,
        periods: int,
    ) -> "TrueModel":
        """Per-period model from annualized moments, prorated over `periods`."""
        mean = np.asarray(mean, dtype=float)
        vol = np.asarray(volatility, dtype=float)
        n = mean.size
        corr = np.full((n, n), float(correlation))
        np.fill_diagonal(corr, 1.0)
        cov = corr * np.outer(vol, vol)
        return cls(mean=mean / periods, covariance=cov / periods)

    @property
    def n(self) -> int:
        return int(self.mean.size)

    @cached_property
    def std(self) -> NDArray[np.float64]:
        return np.sqrt(np.diag(self.covariance))

    @cached_property
    def cholesky(self) -> NDArray[np.float64]:
        return np.linalg.cholesky(self.covariance)

    def sample(self, rng: np.random.Generator, size: int | tuple[int, ...]) -> NDArray:
        shape = (size,) if isinstance(size, int) else tuple(size)
        eps = rng.standard_normal((*shape, self.n))
        return self.mean + eps @ self.cholesky.T

    def __repr__(self) -> str:
        return f"TrueModel(mean={self.mean.tolist()}, std={self.std.tolist()})"


@dataclass(frozen=True)
class MarketParams:
    interest_rate_per_period: float
    horizon: int
    risk_aversion: float = 0.05
    initial_wealth: float = 100.0

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise InvalidConfigError(f"horizon must be at least 1, got {self.horizon}")
        require_positive("risk_aversion", self.risk_aversion)
        require_positive("initial_wealth", self.initial_wealth)


@dataclass(frozen=True, eq=False)
class ControlBox:
    """The compact control set A: per-asset proportion bounds."""

    lower: NDArray[np.float64]
    upper: NDArray[np.float64]

    def __post_init__(self) -> None:
        lower = _frozen_array(self.lower, 1, "lower")
        upper = _frozen_array(self.upper, 1, "upper")
        if lower.shape != upper.shape:
            raise InvalidConfigError("control bounds must have the same length")
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise InvalidConfigError("control bounds must be finite")
        if np.any(lower > upper):
            raise InvalidConfigError("control lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return int(self.lower.size)

    @property
    def center(self) -> NDArray[np.float64]:
        return 0.5 * (self.lower + self.upper)

    @property
    def is_degenerate(self) -> bool:
        return bool(np.all(self.lower == self.upper))

    def corners(self) -> NDArray[np.float64]:
        grid = np.array(np.meshgrid(*zip(self.lower, self.upper))).reshape(self.dim, -1)
        return np.unique(grid.T, axis=0)

    def project(self, a: ArrayLike) -> NDArray[np.float64]:
        return np.clip(np.asarray(a, dtype=float), self.lower, self.upper)

    def contains(self, a: ArrayLike, tol: float = 1e-12) -> bool:
        a = np.asarray(a, dtype=float)
        return bool(np.all(a >= self.lower - tol) and np.all(a <= self.upper + tol))

    def __repr__(self) -> str:
        return f"ControlBox(lower={self.lower.tolist()}, upper={self.upper.tolist()})"


@dataclass(frozen=True, eq=False)
class AugmentedState:
    """
    The reduced state y = (wealth, copula summary) at time `time`.

    `copula_summary` is the flattened CopulaSummary vector: the n*m raw
    marginal moments row by row, then the n(n-1)/2 pairwise covariances.
    """

    wealth: float
    copula_summary: NDArray[np.float64]
    time: int

    def __post_init__(self) -> None:
        if not np.isfinite(self.wealth):
            raise InvalidInputError(f"wealth must be finite, got {self.wealth}")
        if self.time < 0:
            raise InvalidInputError(f"time must be nonnegative, got {self.time}")
        summary = np.array(self.copula_summary, dtype=float).reshape(-1)
        summary.setflags(write=False)
        object.__setattr__(self, "wealth", float(self.wealth))
        object.__setattr__(self, "copula_summary", summary)

    def features(self, with_copula: bool = True) -> NDArray[np.float64]:
        if not with_copula:
            return np.array([self.wealth])
        return np.concatenate(([self.wealth], self.copula_summary))

    def __repr__(self) -> str:
        return (
            f"AugmentedState(wealth={self.wealth:.6g}, time={self.time}, "
            f"summary_dim={self.copula_summary.size})"
        )


@dataclass(frozen=True)
class Scenario:
    """Everything the dynamics need besides the state: F*, market and A."""

    model: TrueModel
    market: MarketParams
    box: ControlBox = field(
        default_factory=lambda: ControlBox(lower=np.zeros(2), upper=np.ones(2))
    )

    def __post_init__(self) -> None:
        if self.box.dim != self.model.n:
            raise InvalidConfigError(
                f"control dimension {self.box.dim} does not match noise dimension "
                f"{self.model.n}"
            )
