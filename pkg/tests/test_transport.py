import itertools

import numpy as np
import pytest

from core.transport import (
    MAX_EXACT_ATOMS,
    marginal_mismatch,
    premetric_dF,
    transport_cost,
    wasserstein_p,
)
from models.market import TrueModel
from models.transport import DiscreteMeasure
from utils.custom_exceptions import CapacityError, InvalidInputError


def _brute_force_cost(a: DiscreteMeasure, b: DiscreteMeasure, p: float) -> float:
    """
    Minimum over every basic feasible plan: each choice of m + n - 1 cells whose
    marginal equations have a unique nonnegative solution.
    """
    rows, cols = a.size, b.size
    cost = np.linalg.norm(a.points[:, None] - b.points[None], axis=-1) ** p
    cells = list(itertools.product(range(rows), range(cols)))
    rhs = np.concatenate((a.weights, b.weights))
    best = np.inf
    for basis in itertools.combinations(cells, rows + cols - 1):
        system = np.zeros((rows + cols, len(basis)))
        for k, (i, j) in enumerate(basis):
            system[i, k] = 1.0
            system[rows + j, k] = 1.0
        if np.linalg.matrix_rank(system) < len(basis):
            continue
        plan, *_ = np.linalg.lstsq(system, rhs, rcond=None)
        if np.max(np.abs(system @ plan - rhs)) > 1e-12 or np.any(plan < -1e-12):
            continue
        best = min(best, sum(x * cost[i, j] for x, (i, j) in zip(plan, basis)))
    return best


def _random_measure(rng: np.random.Generator, size: int) -> DiscreteMeasure:
    weights = rng.dirichlet(np.ones(size))
    return DiscreteMeasure(points=rng.uniform(size=(size, 2)), weights=weights)


def test_identical_measures_are_at_distance_zero(rng):
    m = _random_measure(rng, 5)
    assert wasserstein_p(m, m, 2.0) == pytest.approx(0.0, abs=1e-7)


def test_point_masses_are_at_euclidean_distance():
    a = DiscreteMeasure.uniform([[0.1, 0.2]])
    b = DiscreteMeasure.uniform([[0.4, 0.6]])
    for p in (1.0, 2.0, 3.0):
        assert wasserstein_p(a, b, p) == pytest.approx(0.5, rel=1e-9)


def test_crossing_assignment_takes_the_cheaper_plan():
    a = DiscreteMeasure.uniform([[0.0, 0.0], [1.0, 0.0]])
    b = DiscreteMeasure.uniform([[1.0, 0.1], [0.0, 0.1]])
    # straight plan moves 0.1 per atom, the crossing one moves ~1
    assert wasserstein_p(a, b, 1.0) == pytest.approx(0.1, rel=1e-9)


@pytest.mark.parametrize("p", [1.0, 2.0])
def test_transport_matches_brute_force_on_small_measures(p):
    rng = np.random.default_rng(7)
    for _ in range(50):
        a = _random_measure(rng, int(rng.integers(1, 4)))
        b = _random_measure(rng, int(rng.integers(1, 4)))
        assert transport_cost(a, b, p) == pytest.approx(
            _brute_force_cost(a, b, p), abs=1e-9
        )


def test_transport_rejects_too_many_atoms(rng):
    big = DiscreteMeasure.uniform(rng.uniform(size=(MAX_EXACT_ATOMS + 1, 2)))
    small = DiscreteMeasure.uniform(rng.uniform(size=(3, 2)))
    with pytest.raises(CapacityError):
        wasserstein_p(big, small)


def test_transport_rejects_dimension_mismatch(rng):
    a = DiscreteMeasure.uniform(rng.uniform(size=(3, 2)))
    b = DiscreteMeasure.uniform(rng.uniform(size=(3, 3)))
    with pytest.raises(InvalidInputError):
        wasserstein_p(a, b)


def test_discrete_measure_rejects_bad_weights():
    with pytest.raises(InvalidInputError):
        DiscreteMeasure(points=[[0.1, 0.1], [0.2, 0.2]], weights=[0.7, 0.7])
    with pytest.raises(InvalidInputError):
        DiscreteMeasure(points=[[0.1, 0.1]], weights=[0.5, 0.5])


def test_premetric_identity_and_standard_normal_value():
    model = TrueModel(mean=[0.0, 0.0], covariance=np.eye(2))
    assert premetric_dF([0.3, -0.2], [0.3, -0.2], model) == 0.0
    value = premetric_dF([0.0, 0.0], [1.6449, 1.6449], model)
    assert value == pytest.approx(np.sqrt(2) * 0.45, abs=1e-3)


def test_premetric_is_bounded_by_unit_cube_diagonal(two_asset_model, rng):
    xi, zeta = two_asset_model.sample(rng, 2)
    assert 0.0 <= premetric_dF(xi * 50, -zeta * 50, two_asset_model) <= np.sqrt(2)


def _uniform_grid_measure(
    rng: np.random.Generator, k: int, offset: int = 0
) -> DiscreteMeasure:
    grid = np.arange(1, k + 1) / (k + offset)
    points = np.column_stack((grid, rng.permutation(grid)))
    return DiscreteMeasure.uniform(points)


@pytest.mark.parametrize("offset", [0, 1])
def test_marginal_mismatch_vanishes_on_uniform_marginals(rng, offset):
    for k in range(2, 22):
        measure = _uniform_grid_measure(rng, k, offset)
        assert marginal_mismatch(measure) == pytest.approx(0.0, abs=1e-12)


def test_marginal_mismatch_detects_distortion(rng):
    for k in range(2, 22):
        measure = _uniform_grid_measure(rng, k)
        distorted = measure.points.copy()
        distorted[:, 0] = np.clip(distorted[:, 0] - 0.1, 0.0, 1.0)
        assert marginal_mismatch(DiscreteMeasure.uniform(distorted)) > 0.0


def test_marginal_mismatch_detects_upward_distortion(rng):
    for k in range(2, 22):
        measure = _uniform_grid_measure(rng, k, offset=1)
        distorted = measure.points.copy()
        distorted[:, 1] = np.clip(distorted[:, 1] + 0.1, 0.0, 1.0)
        assert marginal_mismatch(DiscreteMeasure.uniform(distorted)) > 0.0


def test_marginal_mismatch_point_mass():
    assert marginal_mismatch(DiscreteMeasure.uniform([[0.3, 0.8]])) == pytest.approx(
        0.7 + 0.8
    )
    assert marginal_mismatch(DiscreteMeasure.uniform([[0.5, 1.0]])) == pytest.approx(
        1.5
    )


def test_marginal_mismatch_unequal_weights_on_a_rank_grid():
    grid = np.array([[1 / 3, 1 / 3], [2 / 3, 2 / 3], [1.0, 1.0]])
    measure = DiscreteMeasure(points=grid, weights=[0.5, 0.25, 0.25])
    # first jump is 1/2 instead of 1/3 in both coordinates
    assert marginal_mismatch(measure) == pytest.approx(2 * (0.5 - 1 / 3))


@pytest.mark.parametrize("p", [1.0, 2.0, 3.0])
def test_wasserstein_is_symmetric_and_satisfies_the_triangle_inequality(p):
    rng = np.random.default_rng(11)
    for _ in range(20):
        a, b, c = (_random_measure(rng, int(rng.integers(1, 6))) for _ in range(3))
        ab = wasserstein_p(a, b, p)
        assert ab == pytest.approx(wasserstein_p(b, a, p), abs=1e-7)
        assert wasserstein_p(a, c, p) <= ab + wasserstein_p(b, c, p) + 1e-7


@pytest.mark.parametrize("p", [1.5, 2.0, 4.0])
def test_first_order_distance_is_the_smallest(p):
    rng = np.random.default_rng(12)
    for _ in range(20):
        a = _random_measure(rng, int(rng.integers(1, 6)))
        b = _random_measure(rng, int(rng.integers(1, 6)))
        assert wasserstein_p(a, b, 1.0) <= wasserstein_p(a, b, p) + 1e-7
