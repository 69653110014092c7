import numpy as np
import pytest
from pydantic import ValidationError

from driftspec.algebra import ProjectivePoint, optimal_position, proj_distance
from driftspec.chart import (
    ChartPoint,
    chart_forward,
    chart_inverse,
    rotation_to_last_axis,
)
from driftspec.exceptions import ChartDomainError, DimensionMismatch, InvalidDimension
from tests.conftest import random_direction


@pytest.mark.parametrize("n", [2, 3, 8])
def test_rotation(rng: np.random.Generator, n: int) -> None:
    kappa0 = random_direction(rng, n)
    R = rotation_to_last_axis(kappa0)
    np.testing.assert_allclose(R.conj().T @ R, np.eye(n), atol=1e-13)
    target = np.zeros(n)
    target[-1] = 1
    np.testing.assert_allclose(R @ kappa0, target, atol=1e-13)


def test_rotation_of_last_axis_is_identity() -> None:
    np.testing.assert_allclose(rotation_to_last_axis([0, 0, 1]), np.eye(3), atol=1e-15)


def test_anchor_is_origin(rng: np.random.Generator) -> None:
    anchor = ProjectivePoint(rep=random_direction(rng, 5))
    point = chart_forward(anchor, anchor)
    assert point.x.shape == (8,)
    np.testing.assert_allclose(point.x, 0, atol=1e-14)
    # the representative does not matter
    rotated = chart_forward(np.exp(2j) * anchor.rep, anchor)
    np.testing.assert_allclose(rotated.x, 0, atol=1e-14)


def test_round_trip_and_distance(rng: np.random.Generator) -> None:
    anchor = ProjectivePoint(rep=random_direction(rng, 5))
    for _ in range(10):
        x = rng.standard_normal(8)
        point = chart_inverse(x, anchor)
        np.testing.assert_allclose(chart_forward(point, anchor).x, x, atol=1e-11)
        expected = 2 * (1 - 1 / np.sqrt(x @ x + 1))
        assert proj_distance(anchor, point) ** 2 == pytest.approx(expected, abs=1e-12)
        # chart_inverse returns the representative in optimal position
        aligned = optimal_position(anchor, point)
        np.testing.assert_allclose(point.rep, aligned.rep, atol=1e-12)


def test_outside_domain() -> None:
    anchor = ProjectivePoint(rep=[1, 0, 0])
    with pytest.raises(ChartDomainError):
        chart_forward([0, 1, 0], anchor)


def test_dimension_errors() -> None:
    anchor = ProjectivePoint(rep=[1, 0, 0])
    with pytest.raises(DimensionMismatch):
        chart_forward([1, 0], anchor)
    with pytest.raises(DimensionMismatch):
        chart_inverse(np.zeros(3), anchor)
    with pytest.raises(InvalidDimension):
        chart_forward([1], ProjectivePoint(rep=[1j]))


def test_chart_point_validation() -> None:
    anchor = ProjectivePoint(rep=[0.6, 0.8])
    with pytest.raises(ValidationError, match="does not map the anchor"):
        ChartPoint(x=np.zeros(2), anchor=anchor, R=np.eye(2))
    with pytest.raises(ValidationError, match="unitary"):
        ChartPoint(x=np.zeros(2), anchor=anchor, R=2 * np.eye(2))


def test_distance_at_norm_sqrt3(rng: np.random.Generator) -> None:
    anchor = ProjectivePoint(rep=random_direction(rng, 4))
    x = np.array([1.0, 1.0, 0.0, 0.0, 1.0, 0.0])
    point = chart_inverse(x, anchor)
    # 2(1 - 1/√(3 + 1)) = 1
    assert proj_distance(anchor, point) ** 2 == pytest.approx(1.0, abs=1e-12)
