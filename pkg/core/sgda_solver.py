import logging
from dataclasses import dataclass, field, replace
from typing import Protocol

import numpy as np
import scipy.special
from numpy.typing import ArrayLike, NDArray

from config.constants import LOGGER_NAME
from core.copula_estimation import noise_from_uniform, noise_jacobian
from core.dynamics import ScaledValue, ValueFunction, successors
from models.market import AugmentedState, ControlBox, TrueModel
from models.solver import (
    DualPoint,
    SgdaConfig,
    SgdaResult,
    TraceRow,
    TransportMetric,
)
from utils.checks import require_in_unit_cube
from utils.custom_exceptions import InvalidInputError

logger = logging.getLogger(LOGGER_NAME)

# Clip applied to data atoms before the noise-space quantile transform.
DATA_CLAMP = 1e-12


# --- Bernstein basis ---


def bernstein(k: int, K: int, u: ArrayLike) -> NDArray[np.float64] | float:
    """beta_{k,K}(u) = C(K, k) u^k (1 - u)^(K - k)."""
    if not 0 <= k <= K:
        raise InvalidInputError(
            f"Bernstein index must satisfy 0 <= k <= K, got k={k}, K={K}"
        )
    u = np.asarray(u, dtype=float)
    value = scipy.special.comb(K, k) * u**k * (1.0 - u) ** (K - k)
    return float(value) if value.ndim == 0 else value


def bernstein_basis(K: int, u: ArrayLike) -> NDArray[np.float64]:
    """All K + 1 basis values, stacked on a new trailing axis."""
    u = np.asarray(u, dtype=float)[..., None]
    k = np.arange(K + 1)
    return scipy.special.comb(K, k) * u**k * (1.0 - u) ** (K - k)


def bernstein_basis_derivative(K: int, u: ArrayLike) -> NDArray[np.float64]:
    u = np.asarray(u, dtype=float)
    if K == 0:
        return np.zeros((*u.shape, 1))
    lower = bernstein_basis(K - 1, u)
    zero = np.zeros((*u.shape, 1))
    # beta'_{k,K} = K (beta_{k-1,K-1} - beta_{k,K-1})
    shifted = np.concatenate((zero, lower), axis=-1)
    return K * (shifted - np.concatenate((lower, zero), axis=-1))


# --- Inner problem ---


@dataclass(frozen=True)
class InnerProblem:
    """
    The inf-sup problem at one design point: the controller picks (a, gamma, g),
    the adversary moves each data atom u_hat_j to some u.
    """

    state: AugmentedState
    count: int
    data: NDArray[np.float64]
    value_fn: ValueFunction
    radius: float
    model: TrueModel
    rate: float
    box: ControlBox
    with_copula: bool = True

    def __post_init__(self) -> None:
        data = np.atleast_2d(np.asarray(self.data, dtype=float))
        if data.shape[0] == 0:
            raise InvalidInputError("inner problem needs at least one data atom")
        require_in_unit_cube("data atoms", data)
        if self.radius < 0:
            raise InvalidInputError(f"radius must be nonnegative, got {self.radius}")
        object.__setattr__(self, "data", data)


@dataclass(frozen=True)
class DualGradient:
    a: NDArray[np.float64]
    gamma: float
    g: NDArray[np.float64]
    u: NDArray[np.float64]


@dataclass(frozen=True)
class _Terms:
    """Batched pieces of v_hat at points u (batch, n) against atoms u_hat."""

    adversary: NDArray[np.float64]  # V - gamma d^p - sum g beta
    transport: NDArray[np.float64]  # d^p
    basis: NDArray[np.float64]  # (batch, n, K+1)
    grad_u: NDArray[np.float64] | None = None
    grad_a: NDArray[np.float64] | None = None
    curvature: NDArray[np.float64] | None = None


def _transport(
    u: NDArray, u_hat: NDArray, p: float, metric: TransportMetric, model: TrueModel
) -> tuple[NDArray, NDArray, NDArray]:
    """d^p(u, u_hat), its gradient in u, and the squared metric Jacobian."""
    if metric is TransportMetric.COPULA:
        diff = u - u_hat
        jac = np.ones_like(u)
    else:
        diff = noise_from_uniform(u, model) - noise_from_uniform(
            np.clip(u_hat, DATA_CLAMP, 1.0 - DATA_CLAMP), model
        )
        jac = noise_jacobian(u, model)
    dist = np.linalg.norm(diff, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = np.where(dist > 0, p * dist ** (p - 2.0), 0.0)
    return dist**p, coef[:, None] * diff * jac, jac**2


def _terms(
    problem: InnerProblem,
    cfg: SgdaConfig,
    a: NDArray,
    gamma: float,
    g: NDArray,
    u: NDArray,
    u_hat: NDArray,
    with_gradient: bool = True,
) -> _Terms:
    succ = successors(
        problem.state,
        problem.count,
        a,
        u,
        problem.model,
        problem.rate,
        problem.with_copula,
    )
    values = problem.value_fn.value_batch(succ.features)
    dp, d_dp, curvature = _transport(u, u_hat, cfg.p, cfg.metric, problem.model)
    basis = bernstein_basis(cfg.K, u)
    penalty = np.einsum("bik,ik->b", basis, g)
    adversary = values - gamma * dp - penalty
    if not with_gradient:
        return _Terms(adversary=adversary, transport=dp, basis=basis)
    grad_v = problem.value_fn.gradient_batch(succ.features)
    dv_du = np.einsum("bd,bdn->bn", grad_v, succ.d_du)
    dv_da = np.einsum("bd,bdn->bn", grad_v, succ.d_da)
    d_penalty = np.einsum("bik,ik->bi", bernstein_basis_derivative(cfg.K, u), g)
    return _Terms(
        adversary=adversary,
        transport=dp,
        basis=basis,
        grad_u=dv_du - gamma * d_dp - d_penalty,
        grad_a=dv_da,
        curvature=curvature,
    )


def _constant(
    problem: InnerProblem, cfg: SgdaConfig, gamma: float, g: NDArray
) -> float:
    return gamma * problem.radius**cfg.p + float(g.sum()) / (cfg.K + 1)


def dual_objective(
    pt: DualPoint, u_hat: ArrayLike, problem: InnerProblem, cfg: SgdaConfig
) -> float:
    """
    v_hat(a, gamma, g, u; u_hat) = gamma (r^p - d^p(u, u_hat))
        + sum_{i,k} g_ik (1/(K+1) - beta_{k,K}(u_i))
        + V_{t+1}(G(t, y, a, F*^{-1}(u))).
    """
    u_hat = np.asarray(u_hat, dtype=float).reshape(1, -1)
    terms = _terms(
        problem, cfg, pt.a, pt.gamma, pt.g, pt.u.reshape(1, -1), u_hat, False
    )
    return _constant(problem, cfg, pt.gamma, pt.g) + float(terms.adversary[0])


def dual_gradient(
    pt: DualPoint, u_hat: ArrayLike, problem: InnerProblem, cfg: SgdaConfig
) -> DualGradient:
    u_hat = np.asarray(u_hat, dtype=float).reshape(1, -1)
    terms = _terms(problem, cfg, pt.a, pt.gamma, pt.g, pt.u.reshape(1, -1), u_hat)
    return DualGradient(
        a=terms.grad_a[0],
        gamma=problem.radius**cfg.p - float(terms.transport[0]),
        g=1.0 / (cfg.K + 1) - terms.basis[0],
        u=terms.grad_u[0],
    )


def _damped(step: float, gamma: float, p: float, curvature: NDArray) -> NDArray:
    # proximal step on the transport term
    return step / (1.0 + step * p * gamma * curvature)


def inner_supremum(
    problem: InnerProblem,
    cfg: SgdaConfig,
    a: NDArray,
    gamma: float,
    g: NDArray,
    starts: NDArray | None = None,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """
    For every data atom, approximate sup_u [V - gamma d^p(u, u_hat_j) - g.beta(u)]
    by projected gradient ascent started at u_hat_j and at `starts[j]`.
    Returns the per-atom suprema and maximizers.
    """
    data = problem.data
    lo, hi = cfg.u_clamp, 1.0 - cfg.u_clamp
    origin = np.clip(data, lo, hi)
    u = origin if starts is None else np.vstack((np.clip(starts, lo, hi), origin))
    atoms = data if starts is None else np.vstack((data, data))
    best_value = np.full(u.shape[0], -np.inf)
    best_u = u.copy()
    for step in range(cfg.inner_steps + 1):
        terms = _terms(problem, cfg, a, gamma, g, u, atoms)
        better = terms.adversary > best_value
        best_value[better] = terms.adversary[better]
        best_u[better] = u[better]
        if step == cfg.inner_steps:
            break
        eta = _damped(cfg.inner_step, gamma, cfg.p, terms.curvature)
        u = np.clip(u + eta * terms.grad_u, lo, hi)
    count = data.shape[0]
    if starts is None:
        return best_value, best_u
    pick = best_value[:count] >= best_value[count:]
    values = np.where(pick, best_value[:count], best_value[count:])
    maximizers = np.where(pick[:, None], best_u[:count], best_u[count:])
    return values, maximizers


def full_sample_value(
    problem: InnerProblem,
    cfg: SgdaConfig,
    a: ArrayLike,
    gamma: float,
    g: ArrayLike,
    starts: NDArray | None = None,
) -> tuple[float, NDArray[np.float64]]:
    """
    gamma r^p + sum g / (K+1) + mean_j sup_u [...]: the outer objective of the
    inf-sup problem at (a, gamma, g), with the per-atom maximizers.
    """
    a = np.asarray(a, dtype=float)
    g = np.asarray(g, dtype=float)
    values, maximizers = inner_supremum(problem, cfg, a, gamma, g, starts)
    return _constant(problem, cfg, gamma, g) + float(values.mean()), maximizers


# --- Generic descent ascent engine ---


class SaddleProblem(Protocol):
    """
    A stochastic saddle problem min_x max_y; `draw` picks the data atom used in
    an iteration.
    """

    step_scale: NDArray[np.float64]

    def draw(self, rng: np.random.Generator) -> int: ...

    def descent_gradient(self, x: NDArray, y: NDArray, index: int) -> NDArray: ...

    def ascent_step(
        self, x: NDArray, y: NDArray, index: int, step: float
    ) -> NDArray: ...

    def project(self, x: NDArray) -> NDArray: ...

    def evaluate(self, x: NDArray, y: NDArray) -> tuple[float, NDArray]: ...


@dataclass
class SaddleResult:
    x: NDArray[np.float64]
    y: NDArray[np.float64]
    value: float
    iterations: int
    converged: bool
    x_average: NDArray[np.float64]
    y_average: NDArray[np.float64]
    checks: list[tuple[int, float, NDArray, float]] = field(default_factory=list)


def descent_ascent(
    problem: SaddleProblem,
    x0: ArrayLike,
    y0: ArrayLike,
    cfg: SgdaConfig,
    rng: np.random.Generator,
) -> SaddleResult:
    """
    Alternating two-time-scale stochastic gradient descent ascent.

    Each iteration draws one atom, takes a projected descent step on x, then an
    ascent step on y at the new x. Every `cfg.stall_window` iterations the
    outer objective is evaluated at the last iterate and at the step-weighted
    average of the x iterates; the best point seen so far is kept and the loop
    stops after `cfg.stall_patience` checks without relative improvement above
    `cfg.stall_tol`.
    """
    x = problem.project(np.array(x0, dtype=float))
    y = np.array(y0, dtype=float)
    best_value, y = problem.evaluate(x, y)
    best_x = x.copy()
    x_sum = np.zeros_like(x)
    y_sum = np.zeros_like(y)
    x_weight = y_weight = 0.0
    stalls = 0
    converged = False
    checks: list[tuple[int, float, NDArray, float]] = []
    iterations = 0
    for iteration in range(cfg.max_iters):
        descent, ascent = cfg.step_sizes(iteration)
        index = problem.draw(rng)
        grad = problem.descent_gradient(x, y, index)
        x = problem.project(x - descent * problem.step_scale * grad)
        y = problem.ascent_step(x, y, index, ascent)
        x_sum += descent * x
        y_sum += ascent * y
        x_weight += descent
        y_weight += ascent
        iterations = iteration + 1
        if iterations % cfg.stall_window:
            continue

        averaged = problem.project(x_sum / x_weight)
        value_last, y_last = problem.evaluate(x, y)
        value_avg, _ = problem.evaluate(averaged, y)
        value, candidate = (
            (value_last, x) if value_last <= value_avg else (value_avg, averaged)
        )
        y = y_last
        improvement = best_value - value
        if value < best_value:
            best_value, best_x = value, candidate.copy()
        checks.append((iterations, value, candidate.copy(), descent))
        if improvement <= cfg.stall_tol * (1.0 + abs(best_value)):
            stalls += 1
        else:
            stalls = 0
        if stalls >= cfg.stall_patience:
            converged = True
            break

    return SaddleResult(
        x=best_x,
        y=y,
        value=best_value,
        iterations=iterations,
        converged=converged,
        x_average=x_sum / x_weight if x_weight else best_x,
        y_average=y_sum / y_weight if y_weight else y,
        checks=checks,
    )


# --- Inner problem as a saddle problem ---


class _InnerSaddle:
    """
    Flattens (a, gamma, g) into one descent vector. y is the single adversary
    iterate u, shared across the atoms drawn in successive iterations.
    """

    def __init__(self, problem: InnerProblem, cfg: SgdaConfig) -> None:
        self.problem = problem
        self.cfg = cfg
        self.n = problem.model.n
        self.na = problem.box.dim
        self.g_shape = (self.n, cfg.K + 1)
        g_scale = 0.0 if cfg.freeze_g else cfg.bernstein_step_scale
        self.step_scale = np.concatenate(
            (
                np.full(self.na, cfg.control_step_scale),
                [1.0 / max(problem.radius**cfg.p, 1e-3)],
                np.full(self.n * (cfg.K + 1), g_scale),
            )
        )

    def pack(self, a: NDArray, gamma: float, g: NDArray) -> NDArray:
        return np.concatenate((a, [gamma], np.ravel(g)))

    def unpack(self, x: NDArray) -> tuple[NDArray, float, NDArray]:
        a = x[: self.na]
        gamma = float(x[self.na])
        g = x[self.na + 1 :].reshape(self.g_shape)
        return a, gamma, g

    def draw(self, rng: np.random.Generator) -> int:
        return int(rng.integers(self.problem.data.shape[0]))

    def descent_gradient(self, x: NDArray, y: NDArray, index: int) -> NDArray:
        a, gamma, g = self.unpack(x)
        atom = self.problem.data[index : index + 1]
        terms = _terms(self.problem, self.cfg, a, gamma, g, y.reshape(1, -1), atom)
        return self.pack(
            terms.grad_a[0],
            self.problem.radius**self.cfg.p - float(terms.transport[0]),
            1.0 / (self.cfg.K + 1) - terms.basis[0],
        )

    def ascent_step(self, x: NDArray, y: NDArray, index: int, step: float) -> NDArray:
        a, gamma, g = self.unpack(x)
        atom = self.problem.data[index : index + 1]
        terms = _terms(self.problem, self.cfg, a, gamma, g, y.reshape(1, -1), atom)
        eta = _damped(step, gamma, self.cfg.p, terms.curvature)
        lo, hi = self.cfg.u_clamp, 1.0 - self.cfg.u_clamp
        return np.clip(y + eta[0] * terms.grad_u[0], lo, hi)

    def project(self, x: NDArray) -> NDArray:
        x = x.copy()
        x[: self.na] = self.problem.box.project(x[: self.na])
        x[self.na] = max(x[self.na], 0.0)
        if self.cfg.freeze_g:
            x[self.na + 1 :] = 0.0
        return x

    def evaluate(self, x: NDArray, y: NDArray) -> tuple[float, NDArray]:
        a, gamma, g = self.unpack(x)
        starts = np.broadcast_to(y, self.problem.data.shape)
        value, _ = full_sample_value(self.problem, self.cfg, a, gamma, g, starts)
        return value, y


def value_scale(problem: InnerProblem, cfg: SgdaConfig) -> float:
    """Spread of V_{t+1} over the data successors at the box center."""
    u = np.clip(problem.data, cfg.u_clamp, 1.0 - cfg.u_clamp)
    succ = successors(
        problem.state,
        problem.count,
        problem.box.center,
        u,
        problem.model,
        problem.rate,
        problem.with_copula,
    )
    values = problem.value_fn.value_batch(succ.features)
    spread = float(np.std(values))
    if spread > 1e-10 * (1.0 + abs(float(np.mean(values)))):
        return spread
    return 1.0


def sgda_solve(
    problem: InnerProblem,
    cfg: SgdaConfig,
    init: DualPoint | None = None,
    rng: np.random.Generator | None = None,
) -> SgdaResult:
    """
    Solves the inf-sup problem at one design point by stochastic gradient
    descent ascent on the value-scaled objective.

    Descent runs on (a, gamma, g) with projection onto the control box and
    gamma >= 0; ascent runs on a single u within [u_clamp, 1 - u_clamp]^n,
    shared across the sampled atoms and started at the atom mean. `init`
    warm-starts (a, gamma, g). Returns the best iterate in original units, the
    full-sample dual value there and the iteration count.
    """
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    scale = value_scale(problem, cfg)
    scaled = replace(problem, value_fn=ScaledValue(problem.value_fn, 1.0 / scale))
    saddle = _InnerSaddle(scaled, cfg)
    if init is None:
        x0 = saddle.pack(problem.box.center, 1.0, np.zeros(saddle.g_shape))
    else:
        x0 = saddle.pack(init.a, init.gamma / scale, init.g / scale)
    y0 = np.clip(problem.data.mean(axis=0), cfg.u_clamp, 1.0 - cfg.u_clamp)

    result = descent_ascent(saddle, x0, y0, cfg, rng)
    a, gamma, g = saddle.unpack(result.x)
    u = result.y
    point = DualPoint(a=a, gamma=gamma * scale, g=g * scale, u=u)
    trace = []
    if cfg.record_trace:
        trace = [
            TraceRow(it, value * scale, saddle.unpack(x)[1] * scale, step)
            for it, value, x, step in result.checks
        ]
    if not result.converged:
        logger.debug(
            f"SGDA stopped at max_iters={cfg.max_iters} without stalling "
            f"(value={result.value * scale:.6g})"
        )
    return SgdaResult(
        point=point,
        value=result.value * scale,
        iterations=result.iterations,
        converged=result.converged,
        trace=trace,
    )
