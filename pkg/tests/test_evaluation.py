import numpy as np
import pytest

from config.constants import STAT_ROWS
from config.run_config import RunConfig
from core.bellman_engine import BellmanEngine, SolveArtifacts
from core.evaluation import (
    ForwardSimulator,
    common_noise,
    comparison_table,
    paths_frame,
    summarize_paths,
    wealth_quantiles,
)
from core.market import loss
from models.evaluation import PathRecord, SummaryStats
from models.market import ControlBox, MarketParams, Scenario
from models.solver import SgdaConfig
from models.strategy import SolverBundle, StrategyKind
from utils.custom_exceptions import (
    DataError,
    IncompleteArtifactsError,
    InvalidInputError,
)


def _bundle(model, horizon, box, **overrides):
    market = MarketParams(interest_rate_per_period=0.002, horizon=horizon)
    settings = dict(
        scenario=Scenario(model=model, market=market, box=box),
        t0=10,
        design_count=6,
        sgda=SgdaConfig(max_iters=100, stall_window=20, inner_steps=5),
        qmc_points=64,
        gp_restarts=1,
        nonconvergence_limit=1.0,
    )
    settings.update(overrides)
    return SolverBundle(**settings)


def _solve(bundle, kind, mock_logger):
    data = bundle.scenario.model.sample(np.random.default_rng(0), bundle.t0)
    artifacts = BellmanEngine(bundle, mock_logger).backward_solve(kind, data)
    return artifacts, data


def _record(path_id, terminal, horizon=2, risk_aversion=0.05):
    wealth = np.linspace(100.0, terminal, horizon + 1)
    return PathRecord(
        path_id=path_id,
        wealth=wealth,
        terminal_loss=float(loss(terminal, risk_aversion)),
        controls=np.zeros((horizon, 2)),
    )


@pytest.fixture
def cash_only(two_asset_model, mock_logger):
    box = ControlBox(lower=[0.0, 0.0], upper=[0.0, 0.0])
    bundle = _bundle(two_asset_model, 2, box)
    artifacts, data = _solve(bundle, StrategyKind.TRUE_MODEL_OPTIMAL, mock_logger)
    return bundle, artifacts, data


@pytest.fixture
def true_model(two_asset_model, box, mock_logger):
    bundle = _bundle(two_asset_model, 2, box)
    artifacts, data = _solve(bundle, StrategyKind.TRUE_MODEL_OPTIMAL, mock_logger)
    return bundle, artifacts, data


def test_degenerate_box_compounds_the_risk_free_rate(cash_only, mock_logger):
    bundle, artifacts, data = cash_only
    simulator = ForwardSimulator(bundle, mock_logger)
    paths = simulator.forward_simulate(artifacts, 25, seed=3, data=data)
    terminal = np.array([p.terminal_wealth for p in paths])
    np.testing.assert_allclose(terminal, 100.0 * 1.002**2, rtol=1e-12)
    stats = summarize_paths(paths)
    assert stats.variance == pytest.approx(0.0, abs=1e-20)
    assert stats.min == pytest.approx(stats.max)
    assert stats.mean_utility == pytest.approx(-loss(100.0 * 1.002**2, 0.05))


def test_same_seed_gives_identical_paths(true_model, mock_logger):
    bundle, artifacts, data = true_model
    simulator = ForwardSimulator(bundle, mock_logger)
    first = simulator.forward_simulate(artifacts, 30, seed=11, data=data)
    second = simulator.forward_simulate(artifacts, 30, seed=11, data=data)
    other = simulator.forward_simulate(artifacts, 30, seed=12, data=data)
    for a, b in zip(first, second):
        np.testing.assert_array_equal(a.wealth, b.wealth)
        np.testing.assert_array_equal(a.controls, b.controls)
    assert not np.array_equal(first[0].wealth, other[0].wealth)


def test_simulated_controls_stay_in_the_box(true_model, box, mock_logger):
    bundle, artifacts, data = true_model
    paths = ForwardSimulator(bundle, mock_logger).forward_simulate(
        artifacts, 40, seed=1, data=data
    )
    for path in paths:
        assert path.wealth.shape == (3,)
        assert path.controls.shape == (2, 2)
        assert all(box.contains(a) for a in path.controls)
        assert path.terminal_loss == pytest.approx(loss(path.terminal_wealth, 0.05))


def test_common_noise_is_shared_between_calls(true_model):
    bundle, _, _ = true_model
    noise = common_noise(bundle, 8, seed=5)
    assert noise.shape == (8, 2, 2)
    np.testing.assert_array_equal(noise, common_noise(bundle, 8, seed=5))


def test_explicit_noise_drives_the_wealth(true_model, mock_logger):
    bundle, artifacts, data = true_model
    noise = np.zeros((4, 2, 2))
    paths = ForwardSimulator(bundle, mock_logger).forward_simulate(
        artifacts, 4, seed=0, data=data, noise=noise
    )
    # zero log-returns: only the cash share earns interest
    for path in paths:
        growth = 1.002 - 0.002 * path.controls.sum(axis=1)
        np.testing.assert_allclose(path.wealth[1:], 100.0 * np.cumprod(growth))


def test_forward_simulate_validates_inputs(true_model, mock_logger):
    bundle, artifacts, data = true_model
    simulator = ForwardSimulator(bundle, mock_logger)
    with pytest.raises(InvalidInputError):
        simulator.forward_simulate(artifacts, 0, seed=0, data=data)
    with pytest.raises(DataError):
        simulator.forward_simulate(artifacts, 5, seed=0, data=data[:-1])
    with pytest.raises(InvalidInputError):
        simulator.forward_simulate(
            artifacts, 5, seed=0, data=data, noise=np.zeros((5, 3, 2))
        )


def test_forward_simulate_requires_every_layer(true_model, mock_logger):
    bundle, _, data = true_model
    empty = SolveArtifacts(StrategyKind.TRUE_MODEL_OPTIMAL, bundle.horizon)
    with pytest.raises(IncompleteArtifactsError):
        ForwardSimulator(bundle, mock_logger).forward_simulate(
            empty, 5, seed=0, data=data
        )


def test_robust_policy_reads_the_copula_summary(two_asset_model, box, mock_logger):
    bundle = _bundle(two_asset_model, 1, box, design_count=4)
    artifacts, data = _solve(bundle, StrategyKind.ADAPTIVE_ROBUST_COPULA, mock_logger)
    assert artifacts.layer(0).policy.components[0].dim == 6
    paths = ForwardSimulator(bundle, mock_logger).forward_simulate(
        artifacts, 10, seed=2, data=data
    )
    assert len(paths) == 10
    assert all(np.isfinite(p.terminal_wealth) for p in paths)


def test_summarize_paths_statistics():
    paths = [_record(i, w) for i, w in enumerate([140.0, 100.0, 120.0, 110.0, 130.0])]
    stats = summarize_paths(paths)
    assert stats.variance == pytest.approx(250.0)
    assert stats.quantile_30 == pytest.approx(112.0)
    assert stats.quantile_90 == pytest.approx(136.0)
    assert (stats.min, stats.max) == (100.0, 140.0)
    expected = -np.mean([loss(w, 0.05) for w in (100.0, 110.0, 120.0, 130.0, 140.0)])
    assert stats.mean_utility == pytest.approx(expected)


def test_summarize_paths_single_path():
    stats = summarize_paths([_record(0, 105.0)])
    assert stats.variance == 0.0
    assert stats.quantile_30 == stats.quantile_90 == 105.0


def test_summarize_paths_requires_a_path():
    with pytest.raises(InvalidInputError):
        summarize_paths([])


def test_summary_stats_reject_unordered_quantiles():
    with pytest.raises(InvalidInputError):
        SummaryStats(
            mean_utility=-19.0,
            variance=1.0,
            quantile_30=120.0,
            quantile_90=110.0,
            max=130.0,
            min=100.0,
        )


def test_comparison_table_layout():
    paths = [_record(i, w) for i, w in enumerate([100.0, 104.0, 108.0])]
    stats = {kind: summarize_paths(paths) for kind in reversed(list(StrategyKind))}
    table = comparison_table(stats)
    assert table.shape == (6, 3)
    assert list(table.index) == list(STAT_ROWS)
    assert list(table.columns) == ["AR", "AR (No Marginals)", "TR"]
    assert table.loc["min_terminal_wealth", "TR"] == 100.0
    assert (
        table.loc["min_terminal_wealth"] <= table.loc["q30_terminal_wealth"]
    ).all()


def test_comparison_table_keeps_only_solved_kinds():
    stats = {StrategyKind.TRUE_MODEL_OPTIMAL: summarize_paths([_record(0, 101.0)])}
    assert list(comparison_table(stats).columns) == ["TR"]


def test_wealth_quantiles_columns():
    paths = [_record(i, w) for i, w in enumerate(np.linspace(90.0, 130.0, 21))]
    frame = wealth_quantiles(paths)
    assert list(frame.columns) == ["t", "mean", "q05", "q25", "q50", "q75", "q95"]
    assert len(frame) == 3
    np.testing.assert_allclose(frame.loc[0, ["q05", "q95"]], 100.0)
    assert frame.loc[2, "q50"] == pytest.approx(110.0)
    quantiles = frame[["q05", "q25", "q50", "q75", "q95"]].to_numpy()
    assert np.all(np.diff(quantiles, axis=1) >= 0)


def test_paths_frame_has_one_row_per_path():
    frame = paths_frame([_record(0, 101.0), _record(1, 99.0)])
    assert list(frame["path_id"]) == [0, 1]
    assert list(frame.columns[:3]) == ["path_id", "terminal_wealth", "terminal_loss"]
    assert frame.loc[1, "wealth_t2"] == 99.0


def test_standard_error_shrinks_with_the_path_count(true_model, mock_logger):
    bundle, artifacts, data = true_model
    simulator = ForwardSimulator(bundle, mock_logger)

    def spread(n_paths):
        means = [
            np.mean(
                [
                    p.terminal_wealth
                    for p in simulator.forward_simulate(
                        artifacts, n_paths, seed=seed, data=data
                    )
                ]
            )
            for seed in range(20)
        ]
        return np.std(means, ddof=1)

    # 16 times the paths: a quarter of the spread
    ratio = spread(25) / spread(400)
    assert 2.5 < ratio < 6.5


@pytest.mark.slow
def test_strategies_rank_by_utility_and_variance(mock_logger):
    utility_ordered = variance_ordered = 0
    kinds = (
        StrategyKind.TRUE_MODEL_OPTIMAL,
        StrategyKind.ADAPTIVE_ROBUST_COPULA,
        StrategyKind.ADAPTIVE_ROBUST_EMPIRICAL,
    )
    for replication in range(10):
        cfg = RunConfig(
            seed=500 + replication,
            t0_samples=100,
            horizon_periods=3,
            design_points=200,
            eval_paths=500,
        )
        bundle = cfg.bundle()
        data = bundle.scenario.model.sample(
            np.random.default_rng(replication), bundle.t0
        )
        noise = common_noise(bundle, cfg.eval_paths, cfg.seed)
        stats = []
        for kind in kinds:
            artifacts = BellmanEngine(bundle, mock_logger).backward_solve(kind, data)
            paths = ForwardSimulator(bundle, mock_logger).forward_simulate(
                artifacts, cfg.eval_paths, seed=cfg.seed, data=data, noise=noise
            )
            stats.append(summarize_paths(paths))
        true_model, copula, empirical = stats
        if true_model.mean_utility >= copula.mean_utility >= empirical.mean_utility:
            utility_ordered += 1
        if true_model.variance <= copula.variance <= empirical.variance:
            variance_ordered += 1
    assert utility_ordered >= 8
    assert variance_ordered >= 8
