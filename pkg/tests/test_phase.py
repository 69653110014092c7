import numpy as np
import pytest
from pydantic import ValidationError

from driftspec.algebra import ProjectivePoint
from driftspec.chart import chart_inverse
from driftspec.exceptions import (
    PhaseDegenerate,
    PreconditionError,
    SignDegenerate,
    SingularityM1M2,
)
from driftspec.phase import (
    ALL_PHASES,
    Band,
    extract_spectrum,
    jacobian_g,
    max_method_lambda,
)
from tests.conftest import peaked_kappa, random_direction

REAL_PEAK = np.array([0.1, 0.8, -0.3, 0.2, -0.4, 0.2])
REAL_PEAK = REAL_PEAK / np.linalg.norm(REAL_PEAK)


def test_max_method_lambda_makes_kappa_real() -> None:
    kappa = np.exp(-0.3j) * REAL_PEAK
    lambdas = max_method_lambda(kappa)
    assert lambdas != ALL_PHASES
    assert isinstance(lambdas, tuple)
    np.testing.assert_allclose(lambdas, [0.3, np.pi + 0.3], atol=1e-12)
    for lam in lambdas:
        np.testing.assert_allclose(np.imag(np.exp(1j * lam) * kappa), 0, atol=1e-12)


def test_max_method_all_phases() -> None:
    assert max_method_lambda(np.array([1, 1j]) / np.sqrt(2)) is ALL_PHASES


@pytest.mark.parametrize("phase", [0.0, 0.7, 2.5, -1.9])
def test_extract_spectrum_positive_peak(phase: float) -> None:
    result = extract_spectrum(np.exp(1j * phase) * REAL_PEAK)
    np.testing.assert_allclose(result.I, REAL_PEAK, atol=1e-12)
    np.testing.assert_allclose(result.omega, 0, atol=1e-12)
    assert 0 <= result.lambda_opt < 2 * np.pi
    assert not result.degenerate_flags.near_M1
    assert not result.degenerate_flags.near_M2


def test_extract_spectrum_flips_negative_peak() -> None:
    result = extract_spectrum(np.exp(0.4j) * -REAL_PEAK)
    np.testing.assert_allclose(result.I, REAL_PEAK, atol=1e-12)


def test_spectrum_is_phase_invariant(rng: np.random.Generator) -> None:
    kappa = random_direction(rng, 9)
    reference = extract_spectrum(kappa)
    for phase in rng.uniform(0, 2 * np.pi, 5):
        rotated = extract_spectrum(ProjectivePoint(rep=np.exp(1j * phase) * kappa))
        np.testing.assert_allclose(rotated.I, reference.I, atol=1e-12)
        np.testing.assert_allclose(rotated.omega, reference.omega, atol=1e-12)
        assert np.abs(reference.I).max() == reference.I.max()
        norm = np.linalg.norm(reference.I + 1j * reference.omega)
        assert norm == pytest.approx(1)


def test_phase_degenerate() -> None:
    kappa = np.array([1, 1j]) / np.sqrt(2)
    with pytest.raises(PhaseDegenerate):
        extract_spectrum(kappa)
    result = extract_spectrum(kappa, strict=False)
    assert result.degenerate_flags.near_M1
    np.testing.assert_array_equal(result.I, 0)


def test_sign_degenerate() -> None:
    kappa = np.array([0.5, -0.5, 0.5, -0.5]) * np.exp(1.1j)
    with pytest.raises(SignDegenerate):
        extract_spectrum(kappa)
    result = extract_spectrum(kappa, strict=False)
    assert result.degenerate_flags.near_M2
    assert not result.flipped
    assert abs(result.I.max()) == pytest.approx(abs(result.I.min()))


def test_not_unit_norm() -> None:
    with pytest.raises(PreconditionError, match="unit norm"):
        extract_spectrum([1.0, 2.0])


def test_jacobian_against_differences(rng: np.random.Generator) -> None:
    anchor = ProjectivePoint(rep=peaked_kappa(7))
    J = jacobian_g(anchor.rep)
    assert J.shape == (7, 12)
    step = 1e-6
    for j in range(12):
        e = np.zeros(12)
        e[j] = step
        numeric = (
            extract_spectrum(chart_inverse(e, anchor)).I
            - extract_spectrum(chart_inverse(-e, anchor)).I
        ) / (2 * step)
        np.testing.assert_allclose(J[:, j], numeric, atol=1e-6)


def test_jacobian_rank_at_last_axis() -> None:
    axis = np.zeros(5, dtype=np.complex128)
    axis[-1] = 1
    assert np.linalg.matrix_rank(jacobian_g(axis)) == 4


def test_jacobian_sign() -> None:
    kappa = peaked_kappa(6)
    np.testing.assert_allclose(
        jacobian_g(kappa, sign=-1), -jacobian_g(kappa, sign=1), atol=1e-15
    )


def test_jacobian_singular() -> None:
    with pytest.raises(SingularityM1M2):
        jacobian_g(np.array([1, 1j]) / np.sqrt(2))
    with pytest.raises(SingularityM1M2):
        jacobian_g(np.array([0.5, -0.5, 0.5, -0.5]))


def test_band() -> None:
    band = Band(lower=[0, 1], upper=[1, 3], level=0.9)
    np.testing.assert_array_equal(band.width, [1, 2])
    with pytest.raises(ValidationError, match="Lower bound exceeds"):
        Band(lower=[2, 1], upper=[1, 3], level=0.9)
    with pytest.raises(ValidationError):
        Band(lower=[0], upper=[1], level=1.0)
