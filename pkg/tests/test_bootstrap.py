import numpy as np
import pytest

from driftspec import bootstrap
from driftspec.bootstrap import parametric_bootstrap
from driftspec.data import DataMatrix
from driftspec.exceptions import DimensionMismatch, OptimizerFailure, RefitFailure
from driftspec.hom import FitReport, fit_hom
from driftspec.phase import extract_spectrum
from driftspec.simulate import simulate
from tests.conftest import hom_spec


@pytest.fixture
def small_fit() -> tuple[DataMatrix, FitReport]:
    Y = simulate(hom_spec(30, 8))
    return Y, fit_hom(Y)


def test_bands_are_ordered(small_fit: tuple[DataMatrix, FitReport]) -> None:
    Y, fit = small_fit
    result = parametric_bootstrap(Y, fit, replicates=8, level=0.8, seed=3)
    assert result.replicates == 8
    assert result.n_failed == 0
    assert result.samples_I.shape == (8, 8)
    assert np.all(result.band_I.lower <= result.band_I.upper)
    assert np.all(result.band_omega.lower <= result.band_omega.upper)
    assert result.band_I.level == 0.8
    np.testing.assert_array_equal(result.point.I, extract_spectrum(fit.params.kappa).I)
    assert result.bias is None


def test_thread_count_does_not_change_result(
    small_fit: tuple[DataMatrix, FitReport],
) -> None:
    Y, fit = small_fit
    one = parametric_bootstrap(Y, fit, replicates=6, seed=17, threads=1)
    two = parametric_bootstrap(Y, fit, replicates=6, seed=17, threads=2)
    np.testing.assert_array_equal(one.samples_I, two.samples_I)
    np.testing.assert_array_equal(one.samples_omega, two.samples_omega)
    other = parametric_bootstrap(Y, fit, replicates=6, seed=18)
    assert not np.array_equal(one.samples_I, other.samples_I)


def test_bias_correction(small_fit: tuple[DataMatrix, FitReport]) -> None:
    Y, fit = small_fit
    result = parametric_bootstrap(
        Y, fit, replicates=4, bias_correct=True, pilot_replicates=5, seed=2
    )
    assert result.bias is not None
    assert result.bias.pilot_replicates == 5
    assert result.bias.sigma_additive.shape == (2, 2)
    assert result.bias.phi_multiplicative > 0


def test_shape_mismatch(small_fit: tuple[DataMatrix, FitReport]) -> None:
    Y, fit = small_fit
    with pytest.raises(DimensionMismatch):
        parametric_bootstrap(np.asarray(Y.values)[:, :-1], fit, replicates=2)


def test_refits_of_the_fit_collapse_the_bands(
    small_fit: tuple[DataMatrix, FitReport], monkeypatch: pytest.MonkeyPatch
) -> None:
    Y, fit = small_fit
    monkeypatch.setattr(bootstrap, "_refit", lambda values, params, options: params)
    result = parametric_bootstrap(Y, fit, replicates=5)
    np.testing.assert_array_equal(result.band_I.lower, result.point.I)
    np.testing.assert_array_equal(result.band_I.upper, result.point.I)


def test_occasional_failures_are_dropped(
    small_fit: tuple[DataMatrix, FitReport], monkeypatch: pytest.MonkeyPatch
) -> None:
    Y, fit = small_fit
    calls = []

    def flaky(values, params, options):  # type: ignore[no-untyped-def]
        calls.append(1)
        if len(calls) == 1:
            raise OptimizerFailure("did not converge")
        return params

    monkeypatch.setattr(bootstrap, "_refit", flaky)
    result = parametric_bootstrap(Y, fit, replicates=40)
    assert result.n_failed == 1
    assert result.samples_I.shape == (39, 8)


def test_too_many_failures(
    small_fit: tuple[DataMatrix, FitReport], monkeypatch: pytest.MonkeyPatch
) -> None:
    Y, fit = small_fit

    def failing(values, params, options):  # type: ignore[no-untyped-def]
        raise OptimizerFailure("did not converge")

    monkeypatch.setattr(bootstrap, "_refit", failing)
    with pytest.raises(RefitFailure) as excinfo:
        parametric_bootstrap(Y, fit, replicates=4)
    assert (excinfo.value.n_failed, excinfo.value.n_total) == (4, 4)
    assert excinfo.value.category == "convergence"


@pytest.mark.slow
def test_bands_have_width(hom_data: DataMatrix) -> None:
    fit = fit_hom(hom_data)
    result = parametric_bootstrap(hom_data, fit, replicates=100, level=0.9, seed=1, threads=4)
    width = result.band_I.upper - result.band_I.lower
    assert np.all(width >= 0)
    assert width.mean() > 0
    inside = (result.band_I.lower <= result.point.I) & (result.point.I <= result.band_I.upper)
    assert inside.mean() >= 0.5
