import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import minimize
from scipy.stats import norm, qmc

from core.copula_estimation import (
    estimate_copula,
    radius,
    sample_gaussian_copula,
    summarize,
)
from core.dynamics import TerminalValue, ValueFunction
from core.gp_surrogate import GpSurrogate, PolicySurrogate, fit, fit_policy
from core.market import growth_factor, loss
from core.sgda_solver import InnerProblem, sgda_solve
from models.copula import WeightedSample
from models.market import AugmentedState, ControlBox, MarketParams, Scenario, TrueModel
from models.solver import DualPoint, TraceRow
from models.strategy import SolverBundle, StrategyKind
from utils.custom_exceptions import (
    ConditioningError,
    DataError,
    IncompleteArtifactsError,
    InvalidInputError,
    NonConvergenceAbort,
)
from utils.rng import substream, substream_seed

PILOT_PATHS = 2000
DESIGN_CORRELATION = 0.95
JITTER_RETRIES = 3


# --- Terminal layer ---


def terminal_value(y: AugmentedState, market: MarketParams) -> float:
    """V_T(y) = loss(wealth); the copula summary plays no role."""
    if y.time != market.horizon:
        raise InvalidInputError(
            f"terminal value needs a state at t={market.horizon}, got t={y.time}"
        )
    return float(loss(y.wealth, market.risk_aversion))


# --- Design points ---


@dataclass(frozen=True)
class DesignPoint:
    """A design state together with the copula sample its summary came from."""

    state: AugmentedState
    sample: WeightedSample


def _pilot_wealth(t: int, scenario: Scenario, rng: np.random.Generator) -> NDArray:
    """Wealth at time t under controls drawn uniformly from the box each period."""
    market, box = scenario.market, scenario.box
    wealth = np.full(PILOT_PATHS, market.initial_wealth)
    for _ in range(t):
        a = rng.uniform(box.lower, box.upper, size=(PILOT_PATHS, box.dim))
        z = scenario.model.sample(rng, PILOT_PATHS)
        wealth = wealth * growth_factor(a, z, market.interest_rate_per_period)
    return wealth


def wealth_grid(
    t: int, count: int, scenario: Scenario, rng: np.random.Generator
) -> NDArray[np.float64]:
    x0 = scenario.market.initial_wealth
    if t == 0:
        lo, hi = 0.9 * x0, 1.1 * x0
    else:
        q_lo, q_hi = np.quantile(_pilot_wealth(t, scenario, rng), [0.001, 0.999])
        lo, hi = q_lo - 0.1 * abs(q_lo), q_hi + 0.1 * abs(q_hi)
    if lo > 0:
        return np.geomspace(lo, hi, count)
    return np.linspace(lo, hi, count)


def design_points(
    t: int,
    count: int,
    seed: int,
    scenario: Scenario,
    t0: int,
    moment_count: int = 2,
    anchor: WeightedSample | None = None,
) -> list[DesignPoint]:
    """
    `count` design states at time t, sorted by wealth.

    Wealths are log-spaced over the range reached by a pilot simulation with
    random controls; each copula summary comes from t0 + t draws of a Gaussian
    copula whose correlation is uniform on [-0.95, 0.95]. At t = 0 the point
    nearest the initial wealth is replaced by the historical estimate `anchor`.
    """
    if count < 2:
        raise InvalidInputError(f"need at least 2 design points, got {count}")
    rng = substream(seed, "design", t)
    n = scenario.model.n
    wealths = wealth_grid(t, count, scenario, rng)
    points = []
    for wealth in wealths:
        rho = rng.uniform(-DESIGN_CORRELATION, DESIGN_CORRELATION)
        sample = WeightedSample(
            points=sample_gaussian_copula(rho, t0 + t, n, rng), t0=t0, t=t
        )
        summary = summarize(sample, moment_count).vector()
        points.append(DesignPoint(AugmentedState(wealth, summary, t), sample))

    if t == 0 and anchor is not None:
        x0 = scenario.market.initial_wealth
        j = int(np.argmin(np.abs(wealths - x0)))
        summary = summarize(anchor, moment_count).vector()
        points[j] = DesignPoint(AugmentedState(x0, summary, 0), anchor)
    return points


# --- Expectation under the true model ---


@dataclass(frozen=True, eq=False)
class NoiseSample:
    """A weighted set of log-return vectors standing in for the true law."""

    points: NDArray[np.float64]
    weights: NDArray[np.float64]

    def __post_init__(self) -> None:
        points = np.atleast_2d(np.asarray(self.points, dtype=float))
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if points.shape[0] != weights.size:
            raise InvalidInputError(
                f"{points.shape[0]} noise points but {weights.size} weights"
            )
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise InvalidInputError("noise weights must be nonnegative and sum to 1")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def sobol(cls, model: TrueModel, count: int, seed: int) -> "NoiseSample":
        """Scrambled Sobol points pushed through the Gaussian quantile and L."""
        sampler = qmc.Sobol(d=model.n, scramble=True, seed=seed)
        u = sampler.random_base2(int(np.ceil(np.log2(max(count, 2)))))
        u = np.clip(u, 1e-12, 1.0 - 1e-12)
        z = model.mean + norm.ppf(u) @ model.cholesky.T
        return cls(points=z, weights=np.full(z.shape[0], 1.0 / z.shape[0]))


@dataclass(frozen=True)
class PointSolution:
    value: float
    control: NDArray[np.float64]
    converged: bool
    dual: DualPoint | None = None
    iterations: int = 0
    trace: tuple[TraceRow, ...] = ()


def _expected_value(
    a: NDArray,
    wealth: float,
    noise: NoiseSample,
    value_fn: ValueFunction,
    rate: float,
) -> tuple[float, NDArray]:
    nxt = wealth * growth_factor(a, noise.points, rate)
    values = value_fn.value_batch(nxt[:, None])
    slopes = value_fn.gradient_batch(nxt[:, None])[:, 0]
    dw_da = wealth * (np.exp(noise.points) - (1.0 + rate))
    return float(noise.weights @ values), (noise.weights * slopes) @ dw_da


def expectation_solve(
    wealth: float,
    value_fn: ValueFunction,
    noise: NoiseSample,
    rate: float,
    box: ControlBox,
    control_grid: ArrayLike | None = None,
) -> PointSolution:
    """min over a of E[V_{t+1}(x S(a, Z))] with Z distributed as `noise`."""
    if control_grid is not None:
        grid = np.atleast_2d(np.asarray(control_grid, dtype=float))
        values = [_expected_value(a, wealth, noise, value_fn, rate)[0] for a in grid]
        best = int(np.argmin(values))
        return PointSolution(values[best], grid[best].copy(), True)
    if box.is_degenerate:
        value, _ = _expected_value(box.lower, wealth, noise, value_fn, rate)
        return PointSolution(value, box.lower.copy(), True)

    corners = box.corners()
    corner_values = [
        _expected_value(c, wealth, noise, value_fn, rate)[0] for c in corners
    ]
    starts = (box.center, corners[int(np.argmin(corner_values))])
    best = None
    for start in starts:
        res = minimize(
            _expected_value,
            start,
            args=(wealth, noise, value_fn, rate),
            jac=True,
            method="L-BFGS-B",
            bounds=list(zip(box.lower, box.upper)),
        )
        if best is None or res.fun < best.fun:
            best = res
    a = box.project(best.x)
    return PointSolution(float(best.fun), a, bool(best.success), None, int(best.nit))


# --- Layer solves ---


@dataclass(frozen=True)
class _ChunkTask:
    kind: StrategyKind
    bundle: SolverBundle
    t: int
    indices: tuple[int, ...]
    points: tuple[DesignPoint, ...]
    value_fn: ValueFunction
    noise: NoiseSample | None = None
    control_grid: NDArray | None = None


def _robust_solve(
    task: _ChunkTask,
    index: int,
    point: DesignPoint,
    init: DualPoint | None,
) -> PointSolution:
    bundle = task.bundle
    scenario = bundle.scenario
    problem = InnerProblem(
        state=point.state,
        count=point.sample.count,
        data=point.sample.points,
        value_fn=task.value_fn,
        radius=radius(bundle.alpha, bundle.t0, task.t, bundle.radius),
        model=scenario.model,
        rate=scenario.market.interest_rate_per_period,
        box=scenario.box,
        with_copula=True,
    )
    rng = substream(bundle.seed, "sgda", task.t, index)
    result = sgda_solve(problem, bundle.sgda_for(task.kind), init=init, rng=rng)
    return PointSolution(
        value=result.value,
        control=result.point.a.copy(),
        converged=result.converged,
        dual=result.point,
        iterations=result.iterations,
        trace=tuple(result.trace),
    )


def _solve_chunk(task: _ChunkTask) -> list[tuple[int, PointSolution]]:
    """Solves one chunk in wealth order, warm-starting from the previous point."""
    out = []
    init: DualPoint | None = None
    scenario = task.bundle.scenario
    for index, point in zip(task.indices, task.points):
        if task.kind.is_robust:
            solution = _robust_solve(task, index, point, init)
            init = solution.dual
        else:
            solution = expectation_solve(
                point.state.wealth,
                task.value_fn,
                task.noise,
                scenario.market.interest_rate_per_period,
                scenario.box,
                task.control_grid,
            )
        out.append((index, solution))
    return out


# --- Artifacts ---


@dataclass(frozen=True, eq=False)
class LayerArtifacts:
    t: int
    value: GpSurrogate
    policy: PolicySurrogate
    features: NDArray[np.float64]
    values: NDArray[np.float64]
    controls: NDArray[np.float64]
    converged: NDArray[np.bool_]
    # SGDA checks per design index; not checkpointed
    trace: dict[int, tuple[TraceRow, ...]] = field(default_factory=dict)

    @property
    def nonconverged(self) -> int:
        return int(np.count_nonzero(~self.converged))


@dataclass
class SolveArtifacts:
    kind: StrategyKind
    horizon: int
    layers: dict[int, LayerArtifacts] = field(default_factory=dict)
    config_hash: str = ""

    def layer(self, t: int) -> LayerArtifacts:
        if t not in self.layers:
            raise IncompleteArtifactsError(
                f"{self.kind.str_repr} has no surrogates for t={t}"
            )
        return self.layers[t]

    def require_complete(self) -> None:
        missing = [t for t in range(self.horizon) if t not in self.layers]
        if missing:
            raise IncompleteArtifactsError(
                f"{self.kind.str_repr} is missing surrogates for t={missing}"
            )


class LayerStore(Protocol):
    def load_layer(
        self, kind: StrategyKind, t: int, config_hash: str
    ) -> LayerArtifacts | None: ...

    def save_layer(
        self, kind: StrategyKind, config_hash: str, layer: LayerArtifacts
    ) -> None: ...


class BellmanEngine:
    """
    Backward recursion over t = T-1, ..., 0: solve the inner problem at every
    design point, then fit the value and policy surrogates of the layer.

    `design_provider(t)` and `control_grid` replace the default design scheme
    and the continuous control search; `noise` replaces the QMC sample of the
    true model used by TrueModelOptimal.
    """

    def __init__(
        self,
        bundle: SolverBundle,
        logger: logging.Logger,
        store: LayerStore | None = None,
        design_provider: Callable[[int], list[DesignPoint]] | None = None,
        control_grid: ArrayLike | None = None,
        noise: NoiseSample | None = None,
    ) -> None:
        self.bundle = bundle
        self.logger = logger
        self.store = store
        self.design_provider = design_provider
        self.control_grid = (
            None if control_grid is None else np.atleast_2d(control_grid).astype(float)
        )
        self.noise = noise

    def _design(self, t: int, anchor: WeightedSample) -> list[DesignPoint]:
        if self.design_provider is not None:
            return self.design_provider(t)
        bundle = self.bundle
        return design_points(
            t,
            bundle.design_count,
            bundle.seed,
            bundle.scenario,
            bundle.t0,
            bundle.moment_count,
            anchor=anchor,
        )

    def _true_noise(self) -> NoiseSample:
        if self.noise is not None:
            return self.noise
        bundle = self.bundle
        seed = substream_seed(bundle.seed, "qmc")
        return NoiseSample.sobol(bundle.scenario.model, bundle.qmc_points, seed)

    def _solve_points(
        self,
        kind: StrategyKind,
        t: int,
        points: list[DesignPoint],
        value_fn: ValueFunction,
    ) -> list[PointSolution]:
        chunk = self.bundle.warm_start_chunk
        noise = None if kind.is_robust else self._true_noise()
        tasks = [
            _ChunkTask(
                kind=kind,
                bundle=self.bundle,
                t=t,
                indices=tuple(range(start, min(start + chunk, len(points)))),
                points=tuple(points[start : start + chunk]),
                value_fn=value_fn,
                noise=noise,
                control_grid=self.control_grid,
            )
            for start in range(0, len(points), chunk)
        ]
        if self.bundle.workers > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=self.bundle.workers) as pool:
                chunks = list(pool.map(_solve_chunk, tasks))
        else:
            chunks = [_solve_chunk(task) for task in tasks]
        solutions: list[PointSolution | None] = [None] * len(points)
        for results in chunks:
            for index, solution in results:
                solutions[index] = solution
        return solutions

    def _fit_layer(
        self,
        kind: StrategyKind,
        t: int,
        features: NDArray,
        values: NDArray,
        controls: NDArray,
    ) -> tuple[GpSurrogate, PolicySurrogate]:
        bundle = self.bundle
        jitter = bundle.gp_jitter
        retries = 0
        while True:
            rng = substream(bundle.seed, "fit", t, kind.db_repr)
            try:
                value = fit(
                    features,
                    values,
                    jitter,
                    bundle.gp_restarts,
                    rng,
                    bundle.gp_length_scale,
                )
                policy = fit_policy(
                    features,
                    controls,
                    bundle.scenario.box,
                    jitter,
                    bundle.gp_restarts,
                    rng,
                    bundle.gp_length_scale,
                )
                return value, policy
            except ConditioningError as e:
                if retries == JITTER_RETRIES or e.suggested_jitter is None:
                    raise
                retries += 1
                self.logger.warning(
                    f"{kind.str_repr} t={t}: {e.message}; refitting with jitter "
                    f"{e.suggested_jitter:g}"
                )
                jitter = e.suggested_jitter

    def _solve_layer(
        self,
        kind: StrategyKind,
        t: int,
        anchor: WeightedSample,
        value_fn: ValueFunction,
    ) -> LayerArtifacts:
        started = time.perf_counter()
        points = self._design(t, anchor)
        solutions = self._solve_points(kind, t, points, value_fn)
        with_copula = kind.uses_copula_features
        features = np.array([p.state.features(with_copula) for p in points])
        values = np.array([s.value for s in solutions])
        controls = np.array([s.control for s in solutions])
        converged = np.array([s.converged for s in solutions], dtype=bool)

        failed = int(np.count_nonzero(~converged))
        rate = failed / len(points)
        if rate > self.bundle.nonconvergence_limit:
            raise NonConvergenceAbort(
                f"{kind.str_repr} t={t}: {failed} of {len(points)} design points "
                f"did not converge (limit {self.bundle.nonconvergence_limit:.0%})",
                failed=failed,
                total=len(points),
            )
        value, policy = self._fit_layer(kind, t, features, values, controls)
        self.logger.info(
            f"{kind.str_repr} t={t}: N={len(points)} mean value={values.mean():.6g} "
            f"non-converged={rate:.1%} elapsed={time.perf_counter() - started:.1f}s"
        )
        return LayerArtifacts(
            t=t,
            value=value,
            policy=policy,
            features=features,
            values=values,
            controls=controls,
            converged=converged,
            trace={i: s.trace for i, s in enumerate(solutions) if s.trace},
        )

    def backward_solve(
        self, kind: StrategyKind, data: ArrayLike, config_hash: str = ""
    ) -> SolveArtifacts:
        """
        Runs the recursion from T-1 down to 0 for one strategy kind. Layers
        already checkpointed under `config_hash` are loaded instead of solved.
        """
        bundle = self.bundle
        data = np.atleast_2d(np.asarray(data, dtype=float))
        if data.shape[0] != bundle.t0:
            raise DataError(
                f"historical sample has {data.shape[0]} rows, expected t0={bundle.t0}"
            )
        anchor = estimate_copula(data, bundle.scenario.model)
        artifacts = SolveArtifacts(kind, bundle.horizon, config_hash=config_hash)
        value_fn: ValueFunction = TerminalValue(bundle.scenario.market.risk_aversion)
        self.logger.info(
            f"Backward solve for {kind.str_repr}: T={bundle.horizon} "
            f"N={bundle.design_count} t0={bundle.t0}"
        )
        for t in range(bundle.horizon - 1, -1, -1):
            layer = None
            if self.store is not None:
                layer = self.store.load_layer(kind, t, config_hash)
                if layer is not None:
                    self.logger.info(f"{kind.str_repr} t={t}: loaded from checkpoint")
            if layer is None:
                layer = self._solve_layer(kind, t, anchor, value_fn)
                if self.store is not None:
                    self.store.save_layer(kind, config_hash, layer)
            artifacts.layers[t] = layer
            value_fn = layer.value
        return artifacts
