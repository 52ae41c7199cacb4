import hashlib
import os
from typing import Any

from dotenv import dotenv_values
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)

from models.copula import RadiusConfig
from models.market import ControlBox, MarketParams, Scenario, TrueModel
from models.solver import SgdaConfig
from models.strategy import SolverBundle
from utils.custom_exceptions import InvalidConfigError

# Fields that do not change what backward_solve computes.
NON_SOLVE_FIELDS = {
    "eval_paths",
    "workers",
    "data_path",
    "checkpoint_dir",
    "output_dir",
}


class RunConfig(BaseModel):
    """
    Every tunable of a run. On disk it is a KEY=VALUE file whose keys are the
    upper-cased field names; vectors are comma-separated.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    seed: int = 2024
    t0_samples: int = Field(400, ge=1)
    horizon_periods: int = Field(10, ge=1)
    design_points: int = Field(1000, ge=2)
    eval_paths: int = Field(1000, ge=1)
    alpha: float = Field(0.1, gt=0, lt=1)
    wasserstein_order: float = Field(2.0, ge=1)
    moment_count: int = Field(2, ge=1)
    bernstein_degree: int = Field(3, ge=0)

    risk_aversion: float = Field(0.05, gt=0)
    initial_wealth: float = Field(100.0, gt=0)
    interest_rate_annual: float = 0.02
    mean_log_return_annual: tuple[float, ...] = (0.09, 0.13)
    volatility_annual: tuple[float, ...] = (0.25, 0.4)
    correlation: float = Field(0.85, gt=-1, lt=1)
    control_lower: tuple[float, ...] = (0.0, 0.0)
    control_upper: tuple[float, ...] = (1.0, 1.0)

    radius_scale: float = Field(0.3, ge=0)
    radius_exponent: float | None = Field(None, gt=0)

    sgda_descent_step: float = Field(0.2, gt=0)
    sgda_ascent_step: float = Field(0.5, gt=0)
    sgda_decay_horizon: float = Field(2000.0, gt=0)
    sgda_max_iters: int = Field(10000, ge=1)
    sgda_stall_window: int = Field(200, ge=1)
    sgda_stall_tol: float = Field(1e-5, ge=0)
    sgda_stall_patience: int = Field(3, ge=1)
    sgda_u_clamp: float = Field(1e-4, gt=0, lt=0.5)
    sgda_inner_steps: int = Field(30, ge=0)
    sgda_inner_step: float = Field(0.05, gt=0)
    sgda_control_step_scale: float = Field(0.1, ge=0)
    sgda_bernstein_step_scale: float = Field(0.5, ge=0)

    gp_restarts: int = Field(5, ge=1)
    gp_jitter: float = Field(1e-6, gt=0)
    gp_length_scale: float | None = Field(None, gt=0)
    qmc_points: int = Field(256, ge=2)
    nonconvergence_limit: float = Field(0.2, ge=0, le=1)
    warm_start_chunk: int = Field(50, ge=1)
    workers: int = Field(1, ge=1)

    data_path: str = "data/historical.csv"
    checkpoint_dir: str = "checkpoints"
    output_dir: str = "output"

    @field_validator(
        "mean_log_return_annual",
        "volatility_annual",
        "control_lower",
        "control_upper",
        mode="before",
    )
    @classmethod
    def split_vector(cls, value: Any) -> Any:
        if isinstance(value, str):
            return tuple(float(v) for v in value.split(",") if v.strip())
        return value

    @field_validator("radius_exponent", "gp_length_scale", mode="before")
    @classmethod
    def blank_is_none(cls, value: Any) -> Any:
        if isinstance(value, str) and value.strip() == "":
            return None
        return value

    @model_validator(mode="after")
    def check_dimensions(self) -> "RunConfig":
        n = len(self.mean_log_return_annual)
        sizes = {
            len(self.volatility_annual),
            len(self.control_lower),
            len(self.control_upper),
        }
        if n == 0 or sizes != {n}:
            raise ValueError(
                "MEAN_LOG_RETURN_ANNUAL, VOLATILITY_ANNUAL, CONTROL_LOWER and "
                "CONTROL_UPPER must have the same nonzero length"
            )
        if any(v <= 0 for v in self.volatility_annual):
            raise ValueError("VOLATILITY_ANNUAL entries must be positive")
        if any(lo > hi for lo, hi in zip(self.control_lower, self.control_upper)):
            raise ValueError("CONTROL_LOWER exceeds CONTROL_UPPER")
        return self

    # --- Conversions to the domain types, in per-period units ---

    @property
    def n(self) -> int:
        return len(self.mean_log_return_annual)

    def true_model(self) -> TrueModel:
        return TrueModel.from_annual(
            self.mean_log_return_annual,
            self.volatility_annual,
            self.correlation,
            self.horizon_periods,
        )

    def market(self) -> MarketParams:
        return MarketParams(
            interest_rate_per_period=self.interest_rate_annual / self.horizon_periods,
            horizon=self.horizon_periods,
            risk_aversion=self.risk_aversion,
            initial_wealth=self.initial_wealth,
        )

    def box(self) -> ControlBox:
        return ControlBox(lower=self.control_lower, upper=self.control_upper)

    def scenario(self) -> Scenario:
        return Scenario(model=self.true_model(), market=self.market(), box=self.box())

    def radius_config(self) -> RadiusConfig:
        return RadiusConfig(
            c_scale=self.radius_scale,
            exponent=self.radius_exponent,
            p=self.wasserstein_order,
            n=self.n,
        )

    def sgda_config(self) -> SgdaConfig:
        return SgdaConfig(
            descent_step=self.sgda_descent_step,
            ascent_step=self.sgda_ascent_step,
            decay_horizon=self.sgda_decay_horizon,
            max_iters=self.sgda_max_iters,
            stall_window=self.sgda_stall_window,
            stall_tol=self.sgda_stall_tol,
            stall_patience=self.sgda_stall_patience,
            seed=self.seed,
            K=self.bernstein_degree,
            p=self.wasserstein_order,
            u_clamp=self.sgda_u_clamp,
            inner_steps=self.sgda_inner_steps,
            inner_step=self.sgda_inner_step,
            control_step_scale=self.sgda_control_step_scale,
            bernstein_step_scale=self.sgda_bernstein_step_scale,
        )

    def bundle(self) -> SolverBundle:
        return SolverBundle(
            scenario=self.scenario(),
            t0=self.t0_samples,
            design_count=self.design_points,
            alpha=self.alpha,
            moment_count=self.moment_count,
            radius=self.radius_config(),
            sgda=self.sgda_config(),
            qmc_points=self.qmc_points,
            gp_jitter=self.gp_jitter,
            gp_restarts=self.gp_restarts,
            gp_length_scale=self.gp_length_scale,
            nonconvergence_limit=self.nonconvergence_limit,
            warm_start_chunk=self.warm_start_chunk,
            workers=self.workers,
            seed=self.seed,
        )

    def solve_fingerprint(self, data_digest: str = "") -> str:
        """Identifies the solve a checkpoint belongs to."""
        payload = self.model_dump_json(exclude=NON_SOLVE_FIELDS) + data_digest
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]

    def with_overrides(self, **updates: Any) -> "RunConfig":
        """A validated copy; `None` values leave the field unchanged."""
        values = self.model_dump()
        values.update({k: v for k, v in updates.items() if v is not None})
        return _validate(values)


def _validate(values: dict[str, Any]) -> RunConfig:
    try:
        return RunConfig.model_validate(values)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']).upper() or 'CONFIG'}: {err['msg']}"
            for err in e.errors()
        )
        raise InvalidConfigError(problems) from e


def _format(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (tuple, list)):
        return ",".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def load_run_config(path: str | None) -> RunConfig:
    """Reads a KEY=VALUE run file; `None` gives the defaults."""
    if path is None:
        return RunConfig()
    if not os.path.isfile(path):
        raise InvalidConfigError(f"run config {path} does not exist")
    raw = dotenv_values(path)
    return _validate({key.lower(): value for key, value in raw.items()})


def save_run_config(cfg: RunConfig, path: str) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    lines = [f"{name.upper()}={_format(value)}" for name, value in cfg]
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
