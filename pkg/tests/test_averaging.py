import numpy as np
import pytest

from driftspec.averaging import AveragedSignal, average, averaging_spectrum
from driftspec.exceptions import DegenerateSpectrum, EmptyData
from tests.conftest import peaked_kappa


def test_average_is_column_mean() -> None:
    Y = np.array([[1, 2j, 3], [3, 0, 1 + 1j]])
    np.testing.assert_allclose(average(Y).Z, [2, 1j, 2 + 0.5j])
    with pytest.raises(EmptyData):
        average(np.zeros((0, 3)))


def test_fixed_phase() -> None:
    Z = np.array([1.0, 3.0, 2.0 + 1j])
    result = averaging_spectrum(Z, lam=0.0)
    np.testing.assert_allclose(result.I, [0, 1, 0.5])
    np.testing.assert_allclose(result.omega, [0, 0, 0.5])
    assert result.lambda_opt == 0


def test_auto_phase_recovers_shape() -> None:
    kappa = np.real(peaked_kappa(20, phase=0))
    Z = np.exp(-0.5j) * (4 + 2j + kappa)
    result = averaging_spectrum(AveragedSignal(Z=Z))
    expected = (kappa - kappa.min()) / (kappa.max() - kappa.min())
    np.testing.assert_allclose(result.I, expected, atol=1e-10)
    assert result.I.min() == 0
    assert result.I.max() == 1


def test_lambda_wraps() -> None:
    result = averaging_spectrum([1.0, 2.0, 3.0], lam=2 * np.pi + 0.25)
    assert result.lambda_opt == pytest.approx(0.25)
    result = averaging_spectrum([1.0, 2.0, 3.0], lam=-0.25)
    assert result.lambda_opt == pytest.approx(2 * np.pi - 0.25)


def test_constant_signal() -> None:
    with pytest.raises(DegenerateSpectrum):
        averaging_spectrum(np.full(4, 1 + 1j))
    with pytest.raises(DegenerateSpectrum):
        averaging_spectrum([1j, 2j, 3j], lam=0.0)


@pytest.mark.parametrize(("scale", "offset"), [(3.5, 0j), (1.0, 2 - 1j), (0.2, -4 + 0.5j)])
def test_spectrum_ignores_scale_and_offset(scale: float, offset: complex) -> None:
    rng = np.random.default_rng(7)
    Y = 1 + 1j + np.outer(np.exp(0.3j * rng.standard_normal(12)), peaked_kappa(16))
    Y += 0.01 * (rng.standard_normal(Y.shape) + 1j * rng.standard_normal(Y.shape))
    reference = averaging_spectrum(average(Y))
    moved = averaging_spectrum(average(scale * Y + offset))
    np.testing.assert_allclose(moved.I, reference.I, atol=1e-10)
