import numpy as np
from numpy.typing import ArrayLike, NDArray

from core.copula_estimation import summarize, update_copula
from models.copula import CopulaSummary, WeightedSample, summary_moment_count
from models.market import AugmentedState, MarketParams, TrueModel
from utils.checks import require_finite
from utils.custom_exceptions import InvalidConfigError, InvalidInputError


def growth_factor(a: ArrayLike, z: ArrayLike, r: float) -> NDArray[np.float64]:
    """(1 - sum a)(1 + r) + sum_i a_i exp(z_i), broadcast over leading axes."""
    a = np.asarray(a, dtype=float)
    z = np.asarray(z, dtype=float)
    cash = 1.0 - np.sum(a, axis=-1)
    return cash * (1.0 + r) + np.sum(a * np.exp(z), axis=-1)


def wealth_step(x: float, a: ArrayLike, z: ArrayLike, r: float) -> float:
    require_finite("wealth", x)
    require_finite("control", a)
    require_finite("log-return", z)
    require_finite("interest rate", r)
    return float(x * growth_factor(a, z, r))


def loss(x: ArrayLike, risk_aversion: float) -> NDArray[np.float64] | float:
    """Loss -U(x) of the exponential utility U(x) = (1 - exp(-lambda x)) / lambda."""
    if not risk_aversion > 0:
        raise InvalidConfigError(f"risk_aversion must be positive, got {risk_aversion}")
    value = np.expm1(-risk_aversion * np.asarray(x, dtype=float)) / risk_aversion
    return float(value) if np.ndim(value) == 0 else value


def loss_derivative(x: ArrayLike, risk_aversion: float) -> NDArray[np.float64]:
    return -np.exp(-risk_aversion * np.asarray(x, dtype=float))


def transition(
    y: AugmentedState,
    copula_state: WeightedSample,
    a: ArrayLike,
    z: ArrayLike,
    model: TrueModel,
    market: MarketParams,
) -> tuple[AugmentedState, WeightedSample]:
    """
    One step of the augmented dynamics G: wealth moves with the realized
    log-returns `z`, the copula estimate absorbs the pseudo-observation of `z`.
    """
    if y.time >= market.horizon:
        raise InvalidInputError(
            f"cannot step past the terminal time {market.horizon} (state at t={y.time})"
        )
    m = summary_moment_count(y.copula_summary.size, model.n)
    wealth = wealth_step(y.wealth, a, z, market.interest_rate_per_period)
    next_sample = update_copula(copula_state, z, model)
    summary: CopulaSummary = summarize(next_sample, m)
    return AugmentedState(wealth, summary.vector(), y.time + 1), next_sample
