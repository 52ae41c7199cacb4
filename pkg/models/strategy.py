from dataclasses import dataclass, field, replace
from enum import Enum

from models.copula import RadiusConfig
from models.market import Scenario
from models.solver import SgdaConfig, TransportMetric
from utils.custom_exceptions import InvalidConfigError


class StrategyKind(Enum):
    ADAPTIVE_ROBUST_COPULA = (0, "AdaptiveRobustCopula", "AR")
    ADAPTIVE_ROBUST_EMPIRICAL = (1, "AdaptiveRobustEmpirical", "AR (No Marginals)")
    TRUE_MODEL_OPTIMAL = (2, "TrueModelOptimal", "TR")

    def __init__(self, db_repr: int, str_repr: str, table_label: str) -> None:
        self.db_repr = db_repr
        self.str_repr = str_repr
        self.table_label = table_label

    @property
    def is_robust(self) -> bool:
        return self is not StrategyKind.TRUE_MODEL_OPTIMAL

    @property
    def uses_copula_features(self) -> bool:
        return self.is_robust

    @classmethod
    def from_db_repr(cls, db_repr: int) -> "StrategyKind":
        for kind in StrategyKind:
            if kind.db_repr == db_repr:
                return kind
        raise ValueError(f"No matching strategy for db_repr: {db_repr}")

    @classmethod
    def from_str_repr(cls, str_repr: str) -> "StrategyKind":
        for kind in StrategyKind:
            if kind.str_repr.lower() == str_repr.lower():
                return kind
        raise ValueError(f"No matching strategy for str_repr: {str_repr}")


@dataclass(frozen=True)
class SolverBundle:
    """All settings the backward recursion needs, already in per-period units."""

    scenario: Scenario
    t0: int
    design_count: int = 1000
    alpha: float = 0.1
    moment_count: int = 2
    radius: RadiusConfig = field(default_factory=RadiusConfig)
    sgda: SgdaConfig = field(default_factory=SgdaConfig)
    qmc_points: int = 256
    gp_jitter: float = 1e-6
    gp_restarts: int = 5
    gp_length_scale: float | None = None
    nonconvergence_limit: float = 0.2
    warm_start_chunk: int = 50
    workers: int = 1
    seed: int = 2024

    def __post_init__(self) -> None:
        if self.t0 < 1:
            raise InvalidConfigError(f"t0 must be at least 1, got {self.t0}")
        if self.design_count < 2:
            raise InvalidConfigError(
                f"design_count must be at least 2, got {self.design_count}"
            )
        if self.moment_count < 1:
            raise InvalidConfigError("moment_count must be at least 1")
        if not 0 <= self.nonconvergence_limit <= 1:
            raise InvalidConfigError("nonconvergence_limit must lie in [0, 1]")
        if self.warm_start_chunk < 1 or self.workers < 1:
            raise InvalidConfigError("warm_start_chunk and workers must be >= 1")

    @property
    def horizon(self) -> int:
        return self.scenario.market.horizon

    def with_trace(self) -> "SolverBundle":
        """The same bundle with SGDA iteration traces recorded."""
        return replace(self, sgda=replace(self.sgda, record_trace=True))

    def sgda_for(self, kind: StrategyKind) -> SgdaConfig:
        """The inner-solver settings of a robust strategy kind."""
        if kind is StrategyKind.ADAPTIVE_ROBUST_EMPIRICAL:
            return replace(self.sgda, freeze_g=True, metric=TransportMetric.NOISE)
        return replace(self.sgda, freeze_g=False, metric=TransportMetric.COPULA)
