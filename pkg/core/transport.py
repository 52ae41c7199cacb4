import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import sparse
from scipy.optimize import linprog
from scipy.spatial.distance import cdist

from core.copula_estimation import pseudo_observe
from models.market import TrueModel
from models.transport import DiscreteMeasure
from utils.custom_exceptions import CapacityError, InvalidInputError, SolverError

MAX_EXACT_ATOMS = 200


def transport_cost(a: DiscreteMeasure, b: DiscreteMeasure, p: float) -> float:
    """Optimal value of the discrete transport problem with cost |x - y|^p."""
    if a.size > MAX_EXACT_ATOMS or b.size > MAX_EXACT_ATOMS:
        raise CapacityError(
            f"exact transport supports at most {MAX_EXACT_ATOMS} atoms per measure, "
            f"got {a.size} and {b.size}"
        )
    if a.n != b.n:
        raise InvalidInputError(f"dimension mismatch: {a.n} vs {b.n}")
    if p < 1:
        raise InvalidInputError(f"order p must be at least 1, got {p}")
    cost = cdist(a.points, b.points) ** p
    rows, cols = cost.shape
    # plan is flattened row-major: pi[i, j] -> i * cols + j
    row_sums = sparse.kron(sparse.eye(rows), np.ones((1, cols)))
    col_sums = sparse.kron(np.ones((1, rows)), sparse.eye(cols))
    # one marginal constraint is implied by the others
    a_eq = sparse.vstack((row_sums, col_sums.tocsr()[:-1])).tocsc()
    b_eq = np.concatenate((a.weights, b.weights[:-1]))
    res = linprog(
        cost.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs"
    )
    if res.status != 0:
        raise SolverError(f"transport linear program failed: {res.message}")
    return max(float(res.fun), 0.0)


def wasserstein_p(a: DiscreteMeasure, b: DiscreteMeasure, p: float = 2.0) -> float:
    return transport_cost(a, b, p) ** (1.0 / p)


def premetric_dF(xi: ArrayLike, zeta: ArrayLike, model: TrueModel) -> float:
    """Euclidean distance between the marginal-CDF images of two noise vectors."""
    u = pseudo_observe(xi, model)
    v = pseudo_observe(zeta, model)
    return float(np.linalg.norm(u - v))


# Rank grids j / (k + offset), j = 1..k: the empirical copula marginal and the
# rescaled pseudo-observations.
RANK_GRID_OFFSETS = (0, 1)


def _kolmogorov(
    values: NDArray, weights: NDArray, grid: NDArray, tol: float
) -> float:
    """Kolmogorov distance between a weighted sample and equal mass on `grid`."""
    points = np.union1d(values, grid)
    mass = (values[None, :] <= points[:, None] + tol) @ weights
    reference = (grid[None, :] <= points[:, None] + tol).mean(axis=1)
    return float(np.max(np.abs(mass - reference)))


def marginal_mismatch(c: DiscreteMeasure, tol: float = 1e-9) -> float:
    """
    Sum over coordinates of the Kolmogorov distance between the marginal of `c`
    and the uniform law in the empirical-CDF sense.

    With k >= 2 distinct values in a coordinate the reference is equal mass on
    the rank grid {j / k} or on the rescaled grid {j / (k + 1)}, whichever is
    closer, so the term vanishes exactly on equally weighted rank grids. A
    coordinate with a single value u is a point mass and is compared with
    Uniform[0, 1], giving max(u, 1 - u).
    """
    total = 0.0
    for i in range(c.n):
        values = c.points[:, i]
        support = np.unique(values)
        k = support.size
        if k == 1:
            u = float(support[0])
            total += max(u, 1.0 - u)
            continue
        j = np.arange(1, k + 1)
        total += min(
            _kolmogorov(values, c.weights, j / (k + offset), tol)
            for offset in RANK_GRID_OFFSETS
        )
    return total
