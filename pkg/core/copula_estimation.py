import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.stats import norm

from models.copula import CopulaSummary, RadiusConfig, WeightedSample, summary_dim
from models.market import TrueModel
from utils.checks import require_finite, require_open_unit
from utils.custom_exceptions import InvalidInputError


# --- Marginal change of variables ---


def pseudo_observe(z: ArrayLike, model: TrueModel) -> NDArray[np.float64]:
    """u = F*(z) componentwise; accepts a single vector or a (count, n) batch."""
    z = require_finite("noise", z)
    return norm.cdf(z, loc=model.mean, scale=model.std)


def noise_from_uniform(u: ArrayLike, model: TrueModel) -> NDArray[np.float64]:
    """Inverse of pseudo_observe: z = F*^{-1}(u)."""
    return norm.ppf(np.asarray(u, dtype=float), loc=model.mean, scale=model.std)


def noise_jacobian(u: ArrayLike, model: TrueModel) -> NDArray[np.float64]:
    """Diagonal of dz/du for z = F*^{-1}(u)."""
    q = norm.ppf(np.asarray(u, dtype=float))
    return model.std / norm.pdf(q)


# --- Empirical copula ---


def estimate_copula(data: ArrayLike, model: TrueModel) -> WeightedSample:
    """The t = 0 estimate from a (t0, n) block of historical log-returns."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    if data.shape[1] != model.n:
        raise InvalidInputError(
            f"data has {data.shape[1]} columns but the model has n={model.n}"
        )
    return WeightedSample(points=pseudo_observe(data, model), t0=data.shape[0], t=0)


def update_copula(c: WeightedSample, z: ArrayLike, model: TrueModel) -> WeightedSample:
    u = pseudo_observe(np.asarray(z, dtype=float).reshape(1, -1), model)
    return WeightedSample(points=np.vstack((c.points, u)), t0=c.t0, t=c.t + 1)


def empirical_cdf(c: WeightedSample, u: ArrayLike) -> NDArray[np.float64] | float:
    """C_hat(u) for a single point or a (count, n) batch of query points."""
    u = np.asarray(u, dtype=float)
    below = np.all(c.points[None, :, :] <= np.atleast_2d(u)[:, None, :], axis=-1)
    values = below.mean(axis=1)
    return float(values[0]) if u.ndim == 1 else values


def summarize(c: WeightedSample, m: int) -> CopulaSummary:
    if m < 1:
        raise InvalidInputError(f"moment count must be at least 1, got {m}")
    points = c.points
    powers = points[:, :, None] ** np.arange(1, m + 1)
    moments = powers.mean(axis=0)
    centered = points - points.mean(axis=0)
    rows, cols = np.triu_indices(c.n, k=1)
    pairs = (centered[:, rows] * centered[:, cols]).mean(axis=0)
    return CopulaSummary(marginal_moments=moments, pair_covariances=pairs)


def advance_summary(
    summary: ArrayLike, count: int, u: ArrayLike, n: int, m: int
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """
    Summary of the estimate after one more pseudo-observation, from the summary
    alone, together with its Jacobian with respect to the new observation.

    `summary` is one flattened summary or a batch aligned with `u` (batch, n);
    `count` is the number of points behind it. Returns arrays of shapes
    (batch, dim) and (batch, dim, n). The result equals
    summarize(update_copula(...)) up to rounding.
    """
    u = np.atleast_2d(np.asarray(u, dtype=float))
    batch = u.shape[0]
    dim = summary_dim(n, m)
    summary = np.broadcast_to(np.asarray(summary, dtype=float), (batch, dim))
    moments = summary[:, : n * m].reshape(batch, n, m)
    pairs = summary[:, n * m :]
    scale = 1.0 / (count + 1)
    orders = np.arange(1, m + 1)

    new_moments = (count * moments + u[:, :, None] ** orders) * scale
    jac = np.zeros((batch, dim, n))
    slope = orders * u[:, :, None] ** (orders - 1) * scale
    for i in range(n):
        jac[:, i * m : (i + 1) * m, i] = slope[:, i, :]

    rows, cols = np.triu_indices(n, k=1)
    m1 = moments[:, :, 0]
    new_m1 = new_moments[:, :, 0]
    cross = pairs + m1[:, rows] * m1[:, cols]
    new_cross = (count * cross + u[:, rows] * u[:, cols]) * scale
    new_pairs = new_cross - new_m1[:, rows] * new_m1[:, cols]
    for idx, (i, j) in enumerate(zip(rows, cols)):
        col = n * m + idx
        jac[:, col, i] = (u[:, j] - new_m1[:, j]) * scale
        jac[:, col, j] = (u[:, i] - new_m1[:, i]) * scale

    out = np.concatenate((new_moments.reshape(batch, n * m), new_pairs), axis=1)
    return out, jac


def radius(alpha: float, t0: int, t: int, cfg: RadiusConfig) -> float:
    """Radius r(alpha, t0, t) of the Wasserstein ball around the current estimate."""
    require_open_unit("alpha", alpha)
    count = t0 + t
    if count < 1:
        raise InvalidInputError(f"t0 + t must be at least 1, got {count}")
    return float(cfg.c_scale * count ** (-cfg.rate) * np.sqrt(np.log(1.0 / alpha)))


# --- Synthetic copula samples ---


def sample_gaussian_copula(
    correlation: float, count: int, n: int, rng: np.random.Generator
) -> NDArray[np.float64]:
    """`count` draws from the equicorrelated Gaussian copula on [0, 1]^n."""
    floor = -1.0 / (n - 1) + 1e-3 if n > 1 else 0.0
    rho = float(np.clip(correlation, floor, 0.999))
    corr = np.full((n, n), rho)
    np.fill_diagonal(corr, 1.0)
    chol = np.linalg.cholesky(corr)
    return norm.cdf(rng.standard_normal((count, n)) @ chol.T)
