from unittest.mock import patch

import numpy as np
import pytest
from scipy.linalg import LinAlgError

from core.gp_surrogate import (
    GpSurrogate,
    fit,
    fit_policy,
    matern32,
    matern32_matrix,
    predict,
    predict_gradient,
)
from models.market import ControlBox
from utils.custom_exceptions import ConditioningError, InvalidInputError


def _smooth_targets(x: np.ndarray) -> np.ndarray:
    return np.sin(3 * x[:, 0]) + 0.5 * np.cos(2 * x[:, 1]) + x[:, 0] * x[:, 1]


def test_matern32_values():
    assert matern32([0.2, 0.4], [0.2, 0.4], [1.0, 1.0]) == 1.0
    assert matern32([0.0], [1.0], [1.0]) == pytest.approx(0.4834, abs=1e-4)
    assert matern32([0.0, 0.0], [3.0, 4.0], [5.0, 5.0]) == pytest.approx(
        (1 + np.sqrt(3)) * np.exp(-np.sqrt(3)), rel=1e-12
    )
    assert 0.0 <= matern32([0.0], [1e3], [1.0]) < 1e-300


def test_matern32_rejects_dimension_mismatch():
    with pytest.raises(InvalidInputError):
        matern32([0.0, 1.0], [0.0], [1.0, 1.0])


def test_matern32_matrix_agrees_with_scalar_kernel(rng):
    xa, xb = rng.uniform(size=(4, 3)), rng.uniform(size=(5, 3))
    s = np.array([0.3, 1.0, 2.0])
    matrix = matern32_matrix(xa, xb, s)
    for i in range(4):
        for j in range(5):
            assert matrix[i, j] == pytest.approx(matern32(xa[i], xb[j], s), rel=1e-12)


def test_fit_constant_targets_predicts_the_constant(rng):
    x = rng.uniform(size=(12, 2))
    g = fit(x, np.full(12, -3.5))
    np.testing.assert_allclose(g.value_batch(x), -3.5, atol=1e-12)


def test_fit_interpolates_with_small_jitter(rng):
    x = np.linspace(0.0, 1.0, 10)[:, None]
    y = np.sin(4 * x[:, 0])
    g = fit(x, y, jitter=1e-10, length_scales=0.3)
    for xi, yi in zip(x, y):
        assert predict(g, xi) == pytest.approx(yi, abs=1e-6)


def test_prediction_far_from_data_is_the_target_mean(rng):
    x = rng.uniform(size=(15, 2))
    y = _smooth_targets(x)
    g = fit(x, y, rng=rng)
    assert predict(g, [1e4, -1e4]) == pytest.approx(y.mean(), abs=1e-12)


def test_fit_selects_length_scales_by_likelihood(rng):
    x = rng.uniform(size=(50, 2))
    g = fit(x, _smooth_targets(x), restarts=3, rng=rng)
    assert g.length_scales.shape == (2,)
    assert np.all((g.length_scales >= 1e-2) & (g.length_scales <= 1e2))
    held_out = rng.uniform(0.1, 0.9, size=(20, 2))
    error = g.value_batch(held_out) - _smooth_targets(held_out)
    assert np.max(np.abs(error)) < 0.15


def test_gradient_matches_central_differences():
    rng = np.random.default_rng(2024)
    h = 1e-5
    for _ in range(10):
        x = rng.uniform(size=(20, 2)) * [40.0, 1.0] + [80.0, 0.0]
        y = _smooth_targets((x - [80.0, 0.0]) / [40.0, 1.0])
        g = fit(x, y, length_scales=rng.uniform(0.2, 0.6, size=2))
        queries = rng.uniform(size=(10, 2)) * [40.0, 1.0] + [80.0, 0.0]
        for query in queries:
            numeric = np.empty(2)
            for d in range(2):
                step = np.zeros(2)
                step[d] = h * g.input_span[d]
                numeric[d] = (predict(g, query + step) - predict(g, query - step)) / (
                    2 * step[d]
                )
            analytic = predict_gradient(g, query)
            scale = np.abs(analytic).max()
            np.testing.assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-5 * scale)


def test_gradient_batch_agrees_with_single_point(rng):
    x = rng.uniform(size=(10, 3))
    g = fit(x, x.sum(axis=1) ** 2, length_scales=0.7)
    queries = rng.uniform(size=(4, 3))
    batch = g.gradient_batch(queries)
    for row, query in zip(batch, queries):
        np.testing.assert_allclose(
            row, predict_gradient(g, query), rtol=1e-12, atol=1e-12
        )


@pytest.mark.parametrize(
    "inputs, targets",
    [
        (np.zeros((3, 1)), [0.0, np.nan, 1.0]),
        (np.zeros((1, 1)), [0.0]),
        (np.zeros((3, 1)), [0.0, 1.0]),
    ],
)
def test_fit_rejects_bad_training_data(inputs, targets):
    with pytest.raises(InvalidInputError):
        fit(inputs, targets)


def test_fit_reports_suggested_jitter_when_factorization_fails(rng):
    x = rng.uniform(size=(5, 1))
    with patch("core.gp_surrogate.cho_factor", side_effect=LinAlgError("not PD")):
        with pytest.raises(ConditioningError) as excinfo:
            fit(x, x[:, 0], jitter=1e-6, length_scales=0.5)
    assert excinfo.value.suggested_jitter == pytest.approx(1e-5)
    assert excinfo.value.code == "ill_conditioned"


def test_record_round_trip_preserves_predictions(rng):
    x = rng.uniform(size=(8, 2))
    g = fit(x, _smooth_targets(x), length_scales=[0.4, 0.6])
    restored = GpSurrogate.from_record(g.to_record())
    queries = rng.uniform(size=(5, 2))
    np.testing.assert_array_equal(restored.value_batch(queries), g.value_batch(queries))


def test_policy_predictions_stay_in_the_box(rng):
    x = rng.uniform(size=(10, 1))
    controls = np.column_stack((x[:, 0], 1.0 - x[:, 0]))
    box = ControlBox(lower=[0.2, 0.2], upper=[0.5, 0.5])
    policy = fit_policy(x, controls, box, length_scales=0.3)
    predicted = policy.control_batch(np.linspace(-1.0, 2.0, 31)[:, None])
    assert predicted.shape == (31, 2)
    assert np.all(predicted >= 0.2) and np.all(predicted <= 0.5)
    np.testing.assert_allclose(policy.control([0.0]), predicted[10])
