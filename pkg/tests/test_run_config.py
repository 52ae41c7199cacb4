import pytest

from config.run_config import (
    NON_SOLVE_FIELDS,
    RunConfig,
    load_run_config,
    save_run_config,
)
from models.solver import TransportMetric
from models.strategy import StrategyKind
from utils.custom_exceptions import InvalidConfigError


def test_defaults_describe_the_two_asset_market():
    cfg = load_run_config(None)
    assert cfg == RunConfig()
    assert cfg.n == 2
    assert cfg.horizon_periods == 10


def test_round_trip_through_a_run_file(tmp_path):
    cfg = RunConfig(
        seed=7,
        t0_samples=25,
        radius_exponent=0.4,
        mean_log_return_annual=(0.05, 0.07, 0.1),
        volatility_annual=(0.2, 0.3, 0.35),
        control_lower=(0.0, 0.0, 0.0),
        control_upper=(0.5, 0.5, 0.5),
    )
    path = tmp_path / "nested" / "run.cfg"
    save_run_config(cfg, str(path))
    assert "T0_SAMPLES=25" in path.read_text().splitlines()
    assert load_run_config(str(path)) == cfg


def test_blank_optional_values_load_as_none(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("RADIUS_EXPONENT=\nGP_LENGTH_SCALE=\nSEED=3\n")
    cfg = load_run_config(str(path))
    assert cfg.radius_exponent is None
    assert cfg.gp_length_scale is None
    assert cfg.seed == 3


def test_missing_run_file_is_a_config_error(tmp_path):
    with pytest.raises(InvalidConfigError):
        load_run_config(str(tmp_path / "absent.cfg"))


@pytest.mark.parametrize(
    "line",
    [
        "ALPHA=1.5",
        "DESIGN_POINTS=1",
        "CORRELATION=1.0",
        "CONTROL_LOWER=0.0",
        "VOLATILITY_ANNUAL=0.2,-0.1",
        "CONTROL_LOWER=0.6,0.0\nCONTROL_UPPER=0.5,1.0",
        "UNKNOWN_KEY=1",
    ],
)
def test_invalid_values_are_config_errors(tmp_path, line):
    path = tmp_path / "run.cfg"
    path.write_text(line + "\n")
    with pytest.raises(InvalidConfigError):
        load_run_config(str(path))


def test_config_error_names_the_key(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("ALPHA=2\n")
    with pytest.raises(InvalidConfigError) as excinfo:
        load_run_config(str(path))
    assert "ALPHA" in excinfo.value.message
    assert excinfo.value.exit_code == 2


def test_with_overrides_ignores_none():
    cfg = RunConfig().with_overrides(seed=None, eval_paths=50)
    assert cfg.seed == RunConfig().seed
    assert cfg.eval_paths == 50
    with pytest.raises(InvalidConfigError):
        RunConfig().with_overrides(eval_paths=0)


def test_fingerprint_ignores_fields_that_do_not_change_the_solve():
    base = RunConfig()
    assert NON_SOLVE_FIELDS <= set(RunConfig.model_fields)
    same = base.with_overrides(eval_paths=7, workers=4, output_dir="elsewhere")
    assert same.solve_fingerprint("abc") == base.solve_fingerprint("abc")
    assert base.with_overrides(seed=1).solve_fingerprint() != base.solve_fingerprint()
    assert base.solve_fingerprint("abc") != base.solve_fingerprint("abd")


def test_conversions_are_per_period():
    cfg = RunConfig(horizon_periods=4, interest_rate_annual=0.02)
    market = cfg.market()
    assert market.interest_rate_per_period == pytest.approx(0.005)
    assert market.horizon == 4
    model = cfg.true_model()
    assert model.mean[0] == pytest.approx(0.09 / 4)
    assert model.std[1] == pytest.approx(0.4 / 2)


def test_bundle_carries_the_solver_settings():
    cfg = RunConfig(
        t0_samples=30,
        design_points=12,
        bernstein_degree=2,
        wasserstein_order=1.0,
        radius_scale=0.1,
        workers=3,
    )
    bundle = cfg.bundle()
    assert (bundle.t0, bundle.design_count, bundle.workers) == (30, 12, 3)
    assert bundle.horizon == 10
    assert bundle.radius.c_scale == 0.1
    assert bundle.radius.p == 1.0
    copula = bundle.sgda_for(StrategyKind.ADAPTIVE_ROBUST_COPULA)
    assert (copula.K, copula.p, copula.freeze_g) == (2, 1.0, False)
    assert copula.metric is TransportMetric.COPULA
    empirical = bundle.sgda_for(StrategyKind.ADAPTIVE_ROBUST_EMPIRICAL)
    assert empirical.freeze_g
    assert empirical.metric is TransportMetric.NOISE
