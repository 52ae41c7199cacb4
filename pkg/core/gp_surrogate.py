import logging
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.optimize import minimize
from scipy.spatial.distance import cdist

from config.constants import LOGGER_NAME
from models.market import ControlBox
from utils.checks import require_finite, require_min_count
from utils.custom_exceptions import ConditioningError, InvalidInputError

logger = logging.getLogger(LOGGER_NAME)

SQRT3 = np.sqrt(3.0)
LOG_SCALE_BOUNDS = (np.log(1e-2), np.log(1e2))
FIRST_START = np.log(0.3)
FAILED_FIT = 1e25


# --- Kernel ---


def matern32(x: ArrayLike, x2: ArrayLike, s: ArrayLike) -> float:
    """(1 + sqrt(3) d) exp(-sqrt(3) d), d the length-scale-weighted distance."""
    x = np.asarray(x, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    s = np.asarray(s, dtype=float)
    if x.shape != x2.shape:
        raise InvalidInputError(f"dimension mismatch: {x.shape} vs {x2.shape}")
    d = float(np.linalg.norm((x - x2) / s))
    return float((1.0 + SQRT3 * d) * np.exp(-SQRT3 * d))


def matern32_matrix(xa: NDArray, xb: NDArray, s: NDArray) -> NDArray[np.float64]:
    d = cdist(xa / s, xb / s)
    return (1.0 + SQRT3 * d) * np.exp(-SQRT3 * d)


# --- Fitted model ---


@dataclass(frozen=True, eq=False)
class GpSurrogate:
    """
    Matern-3/2 GP regression on standardized data.

    Inputs are mapped to [0, 1] per feature by the training ranges and targets
    are centered and scaled, so prediction is
    target_mean + target_scale * sum_j nu_j k(x, x_j).
    """

    training_inputs: NDArray[np.float64]
    targets: NDArray[np.float64]
    dual_weights: NDArray[np.float64]
    length_scales: NDArray[np.float64]
    jitter: float
    input_offset: NDArray[np.float64]
    input_span: NDArray[np.float64]
    target_mean: float
    target_scale: float

    @property
    def dim(self) -> int:
        return int(self.training_inputs.shape[1])

    def _scaled(self, x: ArrayLike) -> NDArray[np.float64]:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.dim:
            raise InvalidInputError(f"expected {self.dim} features, got {x.shape[1]}")
        return (x - self.input_offset) / self.input_span

    @property
    def _scaled_training(self) -> NDArray[np.float64]:
        return (self.training_inputs - self.input_offset) / self.input_span

    def value_batch(self, x: ArrayLike) -> NDArray[np.float64]:
        k = matern32_matrix(self._scaled(x), self._scaled_training, self.length_scales)
        return self.target_mean + self.target_scale * (k @ self.dual_weights)

    def gradient_batch(self, x: ArrayLike) -> NDArray[np.float64]:
        xs = self._scaled(x)
        train = self._scaled_training
        s = self.length_scales
        d = cdist(xs / s, train / s)
        # dk/dx = -3 exp(-sqrt(3) d) (x - x_j) / s^2
        coef = -3.0 * np.exp(-SQRT3 * d) * self.dual_weights
        grad = (coef.sum(axis=1)[:, None] * xs - coef @ train) / s**2
        return self.target_scale * grad / self.input_span

    def to_record(self) -> dict[str, NDArray]:
        return {
            "training_inputs": self.training_inputs,
            "targets": self.targets,
            "dual_weights": self.dual_weights,
            "length_scales": self.length_scales,
            "input_offset": self.input_offset,
            "input_span": self.input_span,
            "scalars": np.array([self.jitter, self.target_mean, self.target_scale]),
        }

    @classmethod
    def from_record(cls, record: dict[str, NDArray]) -> "GpSurrogate":
        jitter, mean, scale = (float(v) for v in record["scalars"])
        return cls(
            training_inputs=record["training_inputs"],
            targets=record["targets"],
            dual_weights=record["dual_weights"],
            length_scales=record["length_scales"],
            jitter=jitter,
            input_offset=record["input_offset"],
            input_span=record["input_span"],
            target_mean=mean,
            target_scale=scale,
        )

    def __repr__(self) -> str:
        return (
            f"GpSurrogate(N={self.training_inputs.shape[0]}, D={self.dim}, "
            f"length_scales={np.round(self.length_scales, 4).tolist()})"
        )


def predict(g: GpSurrogate, x: ArrayLike) -> float:
    return float(g.value_batch(np.asarray(x, dtype=float).reshape(1, -1))[0])


def predict_gradient(g: GpSurrogate, x: ArrayLike) -> NDArray[np.float64]:
    return g.gradient_batch(np.asarray(x, dtype=float).reshape(1, -1))[0]


# --- Fitting ---


def _negative_log_likelihood(
    log_s: NDArray, x: NDArray, y: NDArray, jitter: float
) -> tuple[float, NDArray]:
    s = np.exp(log_s)
    n = x.shape[0]
    d = cdist(x / s, x / s)
    decay = np.exp(-SQRT3 * d)
    k = (1.0 + SQRT3 * d) * decay + jitter * np.eye(n)
    try:
        factor = cho_factor(k, lower=True)
    except LinAlgError:
        return FAILED_FIT, np.zeros_like(log_s)
    alpha = cho_solve(factor, y)
    nll = (
        0.5 * y @ alpha
        + np.sum(np.log(np.diag(factor[0])))
        + 0.5 * n * np.log(2 * np.pi)
    )
    inner = np.outer(alpha, alpha) - cho_solve(factor, np.eye(n))
    grad = np.empty_like(log_s)
    for dim in range(x.shape[1]):
        diff = (x[:, dim, None] - x[None, :, dim]) / s[dim]
        # dK/dlog s_d = 3 exp(-sqrt(3) r) (delta_d / s_d)^2
        grad[dim] = -0.5 * np.sum(inner * 3.0 * decay * diff**2)
    return float(nll), grad


def _factorize(x: NDArray, y: NDArray, s: NDArray, jitter: float) -> NDArray:
    n = x.shape[0]
    k = matern32_matrix(x, x, s) + jitter * np.eye(n)
    try:
        factor = cho_factor(k, lower=True)
    except LinAlgError as e:
        raise ConditioningError(
            f"kernel matrix is not positive definite with jitter {jitter:g}; "
            f"retry with jitter {jitter * 10:g}",
            suggested_jitter=jitter * 10,
        ) from e
    nu = cho_solve(factor, y)
    nu = nu + cho_solve(factor, y - k @ nu)
    residual = np.max(np.abs(k @ nu - y))
    scale = np.max(np.abs(k)) * np.max(np.abs(nu)) + np.max(np.abs(y))
    if not np.isfinite(residual) or residual > 1e-8 * max(scale, 1.0):
        raise ConditioningError(
            f"kernel solve residual {residual:.3g} exceeds tolerance; "
            f"retry with jitter {jitter * 10:g}",
            suggested_jitter=jitter * 10,
        )
    return nu


def fit(
    inputs: ArrayLike,
    targets: ArrayLike,
    jitter: float = 1e-6,
    restarts: int = 5,
    rng: np.random.Generator | None = None,
    length_scales: ArrayLike | None = None,
) -> GpSurrogate:
    """
    Fits a GP surrogate, choosing length scales by maximum likelihood.

    The search runs L-BFGS-B on log length scales within [1e-2, 1e2] from a
    fixed start and `restarts - 1` random ones. Passing `length_scales` skips
    the search. `jitter` is added to the diagonal of the standardized kernel
    matrix, i.e. it equals jitter * var(targets) in target units.
    """
    x = require_finite("GP inputs", inputs)
    y = require_finite("GP targets", targets).reshape(-1)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    require_min_count("GP training set", x.shape[0], 2)
    if x.shape[0] != y.size:
        raise InvalidInputError(f"{x.shape[0]} inputs but {y.size} targets")
    if jitter <= 0:
        raise InvalidInputError(f"jitter must be positive, got {jitter}")
    rng = rng if rng is not None else np.random.default_rng(0)

    offset = x.min(axis=0)
    span = x.max(axis=0) - offset
    span[span <= 0] = 1.0
    xs = (x - offset) / span
    mean = float(y.mean())
    scale = float(y.std())
    if scale > 1e-12 * max(1.0, abs(mean)):
        ys = (y - mean) / scale
    else:
        # constant targets
        scale = 1.0
        ys = np.zeros_like(y)
    dim = x.shape[1]

    if length_scales is not None:
        s = np.broadcast_to(np.asarray(length_scales, dtype=float), (dim,)).copy()
        if np.any(s <= 0):
            raise InvalidInputError("length scales must be positive")
    elif not np.any(ys):
        s = np.full(dim, np.exp(FIRST_START))
    else:
        starts = [np.full(dim, FIRST_START)]
        starts += [
            rng.uniform(np.log(0.05), np.log(3.0), dim) for _ in range(restarts - 1)
        ]
        best_fun, best_x = np.inf, starts[0]
        for start in starts:
            res = minimize(
                _negative_log_likelihood,
                start,
                args=(xs, ys, jitter),
                jac=True,
                method="L-BFGS-B",
                bounds=[LOG_SCALE_BOUNDS] * dim,
            )
            if res.fun < best_fun:
                best_fun, best_x = float(res.fun), res.x
        if best_fun >= FAILED_FIT:
            raise ConditioningError(
                f"likelihood search failed at every start with jitter {jitter:g}",
                suggested_jitter=jitter * 10,
            )
        s = np.exp(best_x)
        logger.debug(f"GP fit: N={x.shape[0]} D={dim} nll={best_fun:.4f} s={s}")

    nu = _factorize(xs, ys, s, jitter)
    return GpSurrogate(
        training_inputs=x,
        targets=y,
        dual_weights=nu,
        length_scales=s,
        jitter=float(jitter),
        input_offset=offset,
        input_span=span,
        target_mean=mean,
        target_scale=scale,
    )


# --- Policy ---


@dataclass(frozen=True, eq=False)
class PolicySurrogate:
    """One GP per control coordinate; predictions are clamped to the control box."""

    components: tuple[GpSurrogate, ...]
    box: ControlBox

    def control_batch(self, x: ArrayLike) -> NDArray[np.float64]:
        raw = np.column_stack([g.value_batch(x) for g in self.components])
        return np.clip(raw, self.box.lower, self.box.upper)

    def control(self, x: ArrayLike) -> NDArray[np.float64]:
        return self.control_batch(np.asarray(x, dtype=float).reshape(1, -1))[0]


def fit_policy(
    inputs: ArrayLike,
    controls: ArrayLike,
    box: ControlBox,
    jitter: float = 1e-6,
    restarts: int = 5,
    rng: np.random.Generator | None = None,
    length_scales: ArrayLike | None = None,
) -> PolicySurrogate:
    controls = np.asarray(controls, dtype=float)
    if controls.ndim == 1:
        controls = controls[:, None]
    components = tuple(
        fit(inputs, controls[:, i], jitter, restarts, rng, length_scales)
        for i in range(controls.shape[1])
    )
    return PolicySurrogate(components=components, box=box)
