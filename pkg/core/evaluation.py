import logging
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike, NDArray

from config.constants import STAT_ROWS, WEALTH_QUANTILE_LEVELS
from core.bellman_engine import SolveArtifacts
from core.copula_estimation import estimate_copula, summarize
from core.market import loss, transition
from models.evaluation import PathRecord, SummaryStats
from models.market import AugmentedState
from models.strategy import SolverBundle, StrategyKind
from utils.checks import require_min_count
from utils.custom_exceptions import DataError, InvalidInputError
from utils.rng import substream


def common_noise(
    bundle: SolverBundle, n_paths: int, seed: int
) -> NDArray[np.float64]:
    """Out-of-sample log-returns of shape (n_paths, T, n), shared by all strategies."""
    model = bundle.scenario.model
    return model.sample(substream(seed, "eval"), (n_paths, bundle.horizon))


class ForwardSimulator:
    def __init__(self, bundle: SolverBundle, logger: logging.Logger) -> None:
        self.bundle = bundle
        self.logger = logger

    def forward_simulate(
        self,
        artifacts: SolveArtifacts,
        n_paths: int,
        seed: int,
        data: ArrayLike,
        noise: NDArray | None = None,
    ) -> list[PathRecord]:
        """
        Runs `n_paths` paths from the historical state under the fitted policy.

        Each path updates its own copula estimate with the returns it sees. All
        strategies simulated with the same seed see the same returns.
        """
        artifacts.require_complete()
        if n_paths < 1:
            raise InvalidInputError(f"need at least one path, got {n_paths}")
        bundle = self.bundle
        scenario = bundle.scenario
        model, market = scenario.model, scenario.market
        horizon = bundle.horizon
        data = np.atleast_2d(np.asarray(data, dtype=float))
        if data.shape[0] != bundle.t0:
            raise DataError(
                f"historical sample has {data.shape[0]} rows, expected t0={bundle.t0}"
            )
        if noise is None:
            noise = common_noise(bundle, n_paths, seed)
        if noise.shape[:2] != (n_paths, horizon):
            raise InvalidInputError(
                f"noise shape {noise.shape} does not fit {n_paths} paths of T={horizon}"
            )

        initial = estimate_copula(data, model)
        y0 = AugmentedState(
            market.initial_wealth,
            summarize(initial, bundle.moment_count).vector(),
            0,
        )
        states = [y0] * n_paths
        samples = [initial] * n_paths
        wealth = np.empty((n_paths, horizon + 1))
        wealth[:, 0] = market.initial_wealth
        controls = np.empty((n_paths, horizon, scenario.box.dim))
        with_copula = artifacts.kind.uses_copula_features

        self.logger.info(
            f"Simulating {n_paths} paths of {artifacts.kind.str_repr} over T={horizon}"
        )
        for t in range(horizon):
            policy = artifacts.layer(t).policy
            features = np.array([y.features(with_copula) for y in states])
            controls[:, t] = policy.control_batch(features)
            for i in range(n_paths):
                states[i], samples[i] = transition(
                    states[i], samples[i], controls[i, t], noise[i, t], model, market
                )
                wealth[i, t + 1] = states[i].wealth

        losses = loss(wealth[:, -1], market.risk_aversion)
        return [
            PathRecord(
                path_id=i,
                wealth=wealth[i],
                terminal_loss=float(losses[i]),
                controls=controls[i],
            )
            for i in range(n_paths)
        ]


# --- Statistics ---


def summarize_paths(paths: Sequence[PathRecord]) -> SummaryStats:
    require_min_count("paths", len(paths), 1)
    terminal = np.array([p.terminal_wealth for p in paths])
    losses = np.array([p.terminal_loss for p in paths])
    q30, q90 = np.quantile(terminal, [0.3, 0.9], method="linear")
    return SummaryStats(
        mean_utility=float(-losses.mean()),
        variance=float(terminal.var(ddof=1)) if terminal.size > 1 else 0.0,
        quantile_30=float(q30),
        quantile_90=float(q90),
        max=float(terminal.max()),
        min=float(terminal.min()),
    )


def paths_frame(paths: Iterable[PathRecord]) -> pd.DataFrame:
    return pd.DataFrame([p.to_dict() for p in paths])


def wealth_quantiles(
    paths: Sequence[PathRecord], levels: Sequence[float] = WEALTH_QUANTILE_LEVELS
) -> pd.DataFrame:
    """Per-step mean and quantiles of wealth, one row per time index."""
    require_min_count("paths", len(paths), 1)
    wealth = np.array([p.wealth for p in paths])
    frame = pd.DataFrame({"t": np.arange(wealth.shape[1])})
    frame["mean"] = wealth.mean(axis=0)
    for level in levels:
        frame[f"q{round(level * 100):02d}"] = np.quantile(
            wealth, level, axis=0, method="linear"
        )
    return frame


def comparison_table(stats: Mapping[StrategyKind, SummaryStats]) -> pd.DataFrame:
    """Statistics side by side, one column per strategy in enum order."""
    kinds = [kind for kind in StrategyKind if kind in stats]
    return pd.DataFrame(
        {kind.table_label: stats[kind].as_column() for kind in kinds},
        index=pd.Index(STAT_ROWS, name="statistic"),
    )
