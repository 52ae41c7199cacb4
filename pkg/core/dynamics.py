from dataclasses import dataclass
from typing import Protocol

import numpy as np
from numpy.typing import ArrayLike, NDArray

from core.copula_estimation import advance_summary, noise_from_uniform, noise_jacobian
from core.market import growth_factor, loss, loss_derivative
from models.copula import summary_moment_count
from models.market import AugmentedState, TrueModel


class ValueFunction(Protocol):
    """A value function over reduced-state features [wealth, summary...]."""

    def value_batch(self, x: ArrayLike) -> NDArray[np.float64]: ...

    def gradient_batch(self, x: ArrayLike) -> NDArray[np.float64]: ...


@dataclass(frozen=True)
class TerminalValue:
    """V_T(y) = loss(wealth); ignores every feature but the first."""

    risk_aversion: float

    def value_batch(self, x: ArrayLike) -> NDArray[np.float64]:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.asarray(loss(x[:, 0], self.risk_aversion))

    def gradient_batch(self, x: ArrayLike) -> NDArray[np.float64]:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        grad = np.zeros_like(x)
        grad[:, 0] = loss_derivative(x[:, 0], self.risk_aversion)
        return grad


@dataclass(frozen=True)
class ScaledValue:
    inner: ValueFunction
    factor: float

    def value_batch(self, x: ArrayLike) -> NDArray[np.float64]:
        return self.factor * self.inner.value_batch(x)

    def gradient_batch(self, x: ArrayLike) -> NDArray[np.float64]:
        return self.factor * self.inner.gradient_batch(x)


@dataclass(frozen=True)
class Successors:
    """Successor features of a batch of draws, with Jacobians."""

    features: NDArray[np.float64]  # (batch, D)
    d_du: NDArray[np.float64]  # (batch, D, n)
    d_da: NDArray[np.float64]  # (batch, D, n)
    noise: NDArray[np.float64]  # (batch, n)
    dz_du: NDArray[np.float64]  # (batch, n)


def successors(
    state: AugmentedState,
    count: int,
    a: ArrayLike,
    u: ArrayLike,
    model: TrueModel,
    rate: float,
    with_copula: bool = True,
) -> Successors:
    """
    Reduced successor states of G(t, y, a, F*^{-1}(u)) for a batch of u.

    `count` is the number of points behind `state.copula_summary`. Since
    F*(F*^{-1}(u)) = u, the copula block is advanced with u directly.
    """
    u = np.atleast_2d(np.asarray(u, dtype=float))
    a = np.asarray(a, dtype=float)
    z = noise_from_uniform(u, model)
    dz = noise_jacobian(u, model)
    x = state.wealth
    growth = np.exp(z)
    wealth = x * growth_factor(a, z, rate)
    dw_du = x * a * growth * dz
    dw_da = x * (growth - (1.0 + rate))

    batch, n = u.shape
    if with_copula:
        m = summary_moment_count(state.copula_summary.size, n)
        summary, summary_du = advance_summary(state.copula_summary, count, u, n, m)
        features = np.column_stack((wealth, summary))
        d_du = np.concatenate((dw_du[:, None, :], summary_du), axis=1)
    else:
        features = wealth[:, None]
        d_du = dw_du[:, None, :]
    d_da = np.zeros((batch, features.shape[1], a.size))
    d_da[:, 0, :] = dw_da
    return Successors(features=features, d_du=d_du, d_da=d_da, noise=z, dz_du=dz)
