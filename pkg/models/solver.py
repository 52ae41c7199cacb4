from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numpy.typing import NDArray

from utils.checks import require_in_unit_cube
from utils.custom_exceptions import InvalidConfigError, InvalidInputError


class TransportMetric(Enum):
    """Where the adversary's transport cost is measured."""

    COPULA = "copula"  # Euclidean on [0, 1]^n, i.e. d_{F*} on noise space
    NOISE = "noise"  # Euclidean on the noise space itself


@dataclass(frozen=True, eq=False)
class DualPoint:
    """Iterate (a, gamma, g, u) of the inner inf-sup problem."""

    a: NDArray[np.float64]
    gamma: float
    g: NDArray[np.float64]
    u: NDArray[np.float64]

    def __post_init__(self) -> None:
        a = np.array(self.a, dtype=float).reshape(-1)
        g = np.array(self.g, dtype=float)
        u = np.array(self.u, dtype=float).reshape(-1)
        if g.ndim != 2:
            raise InvalidInputError(f"g must be an (n, K+1) matrix, got {g.shape}")
        if not self.gamma >= 0:
            raise InvalidInputError(f"gamma must be nonnegative, got {self.gamma}")
        require_in_unit_cube("u", u)
        for arr in (a, g, u):
            arr.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "u", u)

    def __repr__(self) -> str:
        return (
            f"DualPoint(a={np.round(self.a, 6).tolist()}, gamma={self.gamma:.6g}, "
            f"|g|={np.abs(self.g).max(initial=0.0):.3g})"
        )


@dataclass(frozen=True)
class SgdaConfig:
    """
    Step schedule and stopping rule of the descent ascent loop.

    Step sizes decay as step / (1 + l / decay_horizon); the descent block
    (a, gamma, g) moves on `descent_step`, the ascent block u on `ascent_step`.
    Every `stall_window` iterations the full-sample objective is evaluated; the
    loop stops once it has improved by less than `stall_tol` (relative) for
    `stall_patience` consecutive checks.
    """

    descent_step: float = 0.2
    ascent_step: float = 0.5
    decay_horizon: float = 2000.0
    max_iters: int = 10000
    stall_window: int = 200
    stall_tol: float = 1e-5
    stall_patience: int = 3
    seed: int = 0
    K: int = 3
    p: float = 2.0
    u_clamp: float = 1e-4
    inner_steps: int = 30
    inner_step: float = 0.05
    control_step_scale: float = 0.1
    bernstein_step_scale: float = 0.5
    freeze_g: bool = False
    metric: TransportMetric = TransportMetric.COPULA
    record_trace: bool = False

    def __post_init__(self) -> None:
        if self.descent_step <= 0 or self.ascent_step <= 0:
            raise InvalidConfigError("SGDA step sizes must be positive")
        if self.decay_horizon <= 0:
            raise InvalidConfigError("decay_horizon must be positive")
        if self.max_iters < 1 or self.stall_window < 1 or self.stall_patience < 1:
            raise InvalidConfigError(
                "max_iters, stall_window and stall_patience must be at least 1"
            )
        if self.K < 0:
            raise InvalidConfigError(f"K must be nonnegative, got {self.K}")
        if self.p < 1:
            raise InvalidConfigError(f"p must be at least 1, got {self.p}")
        if not 0 < self.u_clamp < 0.5:
            raise InvalidConfigError(f"u_clamp {self.u_clamp} is outside (0, 0.5)")
        if self.inner_steps < 0 or self.inner_step <= 0:
            raise InvalidConfigError("inner_steps must be >= 0 and inner_step > 0")

    def step_sizes(self, iteration: int) -> tuple[float, float]:
        decay = 1.0 + iteration / self.decay_horizon
        return self.descent_step / decay, self.ascent_step / decay


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    objective: float
    gamma: float
    step: float


@dataclass(frozen=True)
class SgdaResult:
    point: DualPoint
    value: float
    iterations: int
    converged: bool
    trace: list[TraceRow] = field(default_factory=list)
