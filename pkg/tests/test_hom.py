import numpy as np
import pytest
import scipy.stats
from pydantic import ValidationError

from driftspec.algebra import ProjectivePoint, comp_of, proj_distance, vec_of
from driftspec.data import DataMatrix
from driftspec.exceptions import (
    DegenerateData,
    DimensionMismatch,
    InvalidDimension,
    ZeroDirection,
)
from driftspec.hom import (
    FitReport,
    HomParams,
    center,
    fit_hom,
    hom_loglik,
    kappa_mle,
    phi_mle,
    sigma_mle,
)
from driftspec.simulate import simulate
from tests.conftest import hom_spec, peaked_kappa, random_direction

SIGMA = np.array([[0.01, 0.002], [0.002, 0.015]])


def _distance(a: np.ndarray, b: np.ndarray) -> float:  # type: ignore[type-arg]
    return proj_distance(ProjectivePoint.from_vector(a), ProjectivePoint.from_vector(b))


def test_params_validation() -> None:
    kappa = peaked_kappa(5)
    HomParams(psi=np.ones(3), phi=np.ones(3), kappa=kappa, sigma=SIGMA)
    with pytest.raises(ValidationError, match="sum to zero"):
        HomParams(psi=np.ones(3), phi=np.ones(3), kappa=kappa + 0.1, sigma=SIGMA)
    with pytest.raises(ValidationError, match="unit norm"):
        HomParams(psi=np.ones(3), phi=np.ones(3), kappa=2 * kappa, sigma=SIGMA)
    with pytest.raises(ValidationError, match="batches"):
        HomParams(psi=np.ones(2), phi=np.ones(3), kappa=kappa, sigma=SIGMA)
    with pytest.raises(ValidationError, match="positive definite"):
        HomParams(psi=np.ones(3), phi=np.ones(3), kappa=kappa, sigma=np.zeros((2, 2)))


def test_center() -> None:
    Y = np.array([[1, 2, 6], [1j, 1j, 4j]])
    psi, centered = center(Y)
    np.testing.assert_allclose(psi, [3, 2j])
    np.testing.assert_allclose(centered.sum(axis=1), 0, atol=1e-15)


def test_closed_forms_on_exact_data(rng: np.random.Generator) -> None:
    phi = random_direction(rng, 6) * 3
    kappa = peaked_kappa(5)
    Yc = np.outer(phi, kappa)
    P = np.linalg.inv(SIGMA)
    np.testing.assert_allclose(phi_mle(kappa, P, Yc), phi, atol=1e-12)
    np.testing.assert_allclose(kappa_mle(phi, P, Yc), kappa, atol=1e-12)
    np.testing.assert_allclose(sigma_mle(phi, kappa, Yc), 0, atol=1e-28)


def test_closed_forms_reject_zero_direction() -> None:
    Yc = np.ones((3, 4))
    with pytest.raises(ZeroDirection):
        phi_mle(np.zeros(4), np.eye(2), Yc)
    with pytest.raises(ZeroDirection):
        kappa_mle(np.zeros(3), np.eye(2), Yc)
    with pytest.raises(DimensionMismatch):
        phi_mle(np.ones(5), np.eye(2), Yc)


def test_phi_mle_is_least_squares(rng: np.random.Generator) -> None:
    """
    φ̂_b minimises the P-weighted residual of its batch.
    """
    kappa = peaked_kappa(6)
    Yc = rng.standard_normal((3, 6)) + 1j * rng.standard_normal((3, 6))
    P = np.linalg.inv(SIGMA)
    phi = phi_mle(kappa, P, Yc)

    def cost(b: int, value: complex) -> float:
        r = Yc[b] - value * kappa
        pairs = np.stack([r.real, r.imag], axis=-1)
        return float(np.einsum("ni,ij,nj->", pairs, P, pairs))

    for b in range(3):
        for delta in (1e-3, 1e-3j, -1e-3, -1e-3j):
            assert cost(b, phi[b]) <= cost(b, phi[b] + delta)


def test_fit_recovers_simulated(hom_data: DataMatrix) -> None:
    spec = hom_spec()
    fit = fit_hom(hom_data)
    assert fit.converged
    assert fit.model == "hom"
    assert fit.n_iter == len(fit.loglik_trace)
    assert np.all(np.diff(fit.loglik_trace) >= -1e-9)
    assert _distance(fit.params.kappa, spec.kappa0) < 0.15
    np.testing.assert_allclose(fit.params.sigma, SIGMA, rtol=0.3, atol=2e-3)
    # the largest entry of κ̂ is real and positive
    largest = fit.params.kappa[np.argmax(np.abs(fit.params.kappa))]
    assert largest.real > 0
    assert largest.imag == pytest.approx(0, abs=1e-12)


def test_loglik_matches_trace(hom_data: DataMatrix) -> None:
    fit = fit_hom(hom_data)
    _, centered = center(hom_data)
    assert hom_loglik(centered, fit.params) == pytest.approx(fit.loglik, rel=1e-12)
    with pytest.raises(DimensionMismatch):
        hom_loglik(centered[:, :-1], fit.params)


def test_exact_fit() -> None:
    kappa = peaked_kappa(8)
    phi = np.exp(0.1j * np.arange(5)) * 2
    Y = (1 + 1j) + np.outer(phi, kappa)
    fit = fit_hom(Y)
    assert fit.converged
    assert fit.n_iter == 1
    assert _distance(fit.params.kappa, kappa) < 1e-8


def test_sigma_known(hom_data: DataMatrix) -> None:
    fit = fit_hom(hom_data, sigma_known=SIGMA)
    np.testing.assert_array_equal(fit.params.sigma, SIGMA)
    assert fit.converged


def test_warm_start(hom_data: DataMatrix) -> None:
    cold = fit_hom(hom_data, min_delta_loglik=1e-8)
    warm = fit_hom(hom_data, init=cold.params, min_delta_loglik=1e-8)
    assert warm.loglik == pytest.approx(cold.loglik, abs=1e-6)
    assert _distance(warm.params.kappa, cold.params.kappa) < 1e-4
    with pytest.raises(DimensionMismatch, match="Warm start"):
        fit_hom(np.asarray(hom_data.values)[:10], init=cold.params)


def test_maxiter_stops_early(hom_data: DataMatrix) -> None:
    fit = fit_hom(hom_data, maxiter=1)
    assert not fit.converged
    assert fit.n_iter == 1


@pytest.mark.parametrize("shape", [(1, 5), (4, 2)])
def test_too_small(shape: tuple[int, int]) -> None:
    with pytest.raises(InvalidDimension):
        fit_hom(np.ones(shape) + 1j * np.arange(shape[1]))


def test_degenerate_data() -> None:
    Y = np.repeat(np.array([[1.0], [2.0 + 1j], [3.0]]), 4, axis=1)
    with pytest.raises(DegenerateData):
        fit_hom(Y)


def test_report_rejects_decreasing_trace(hom_data: DataMatrix) -> None:
    params = fit_hom(hom_data).params
    with pytest.raises(ValidationError, match="decreased"):
        FitReport(params=params, loglik_trace=[1.0, 0.0], n_iter=2, converged=True)


@pytest.mark.slow
def test_fit_consistency_at_scale() -> None:
    """
    With B = 800 batches the fitted direction is close to the truth.
    """
    spec = hom_spec(800, 32, seed=3)
    fit = fit_hom(simulate(spec))
    assert _distance(fit.params.kappa, spec.kappa0) < 0.05


def test_phase_equivariance(hom_data: DataMatrix) -> None:
    lam = 0.7
    rotation = np.exp(1j * lam)
    # a fixed number of sweeps keeps both runs on the same path
    fit = fit_hom(hom_data, maxiter=30, min_delta_loglik=-np.inf)
    rotated = fit_hom(
        rotation * np.asarray(hom_data.values), maxiter=30, min_delta_loglik=-np.inf
    )
    assert _distance(rotated.params.kappa, fit.params.kappa) < 1e-8
    np.testing.assert_allclose(rotated.params.psi, rotation * fit.params.psi, atol=1e-12)
    np.testing.assert_allclose(rotated.params.phi, rotation * fit.params.phi, atol=1e-8)
    R = np.array([[np.cos(lam), -np.sin(lam)], [np.sin(lam), np.cos(lam)]])
    np.testing.assert_allclose(
        rotated.params.sigma, R @ fit.params.sigma @ R.T, rtol=1e-8, atol=1e-12
    )


def test_isotropic_sigma_gives_rank_one_svd(hom_data: DataMatrix) -> None:
    fit = fit_hom(hom_data, sigma_known=0.01 * np.eye(2))
    assert fit.converged
    _, centered = center(hom_data)
    U, s, Vh = np.linalg.svd(centered, full_matrices=False)
    assert _distance(fit.params.kappa, Vh[0]) < 1e-8
    assert np.linalg.norm(fit.params.phi) == pytest.approx(s[0], rel=1e-8)
    overlap = abs(np.vdot(U[:, 0], fit.params.phi)) / s[0]
    assert overlap == pytest.approx(1, abs=1e-8)
    np.testing.assert_allclose(
        np.outer(fit.params.phi, fit.params.kappa),
        s[0] * np.outer(U[:, 0], Vh[0]),
        atol=1e-8 * s[0],
    )


def _gaussian_loglik(Yc, phi, kappa, sigma) -> float:  # type: ignore[no-untyped-def]
    residual = vec_of(np.asarray(Yc) - np.outer(phi, kappa)).reshape(-1, 2)
    return float(scipy.stats.multivariate_normal(cov=sigma).logpdf(residual).sum())


def _fd_gradient(f, x: np.ndarray, h: float = 1e-6) -> np.ndarray:  # type: ignore[no-untyped-def, type-arg]
    grad = np.empty_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = h
        grad[i] = (f(x + step) - f(x - step)) / (2 * h)
    return grad


def _sym(entries: np.ndarray) -> np.ndarray:  # type: ignore[type-arg]
    return np.array([[entries[0], entries[1]], [entries[1], entries[2]]])


def test_conditional_updates_are_stationary(hom_data: DataMatrix) -> None:
    """
    Each closed-form update zeroes the finite-difference gradient of the
    log-likelihood in its own block.
    """
    params = fit_hom(hom_data).params
    _, Yc = center(hom_data)
    phi, kappa, sigma = params.phi, params.kappa, np.asarray(params.sigma)
    P = np.linalg.inv(sigma)

    def block_phi(x: np.ndarray) -> float:  # type: ignore[type-arg]
        return _gaussian_loglik(Yc, comp_of(x.reshape(-1, 2)), kappa, sigma)

    def block_kappa(x: np.ndarray) -> float:  # type: ignore[type-arg]
        return _gaussian_loglik(Yc, phi, comp_of(x.reshape(-1, 2)), sigma)

    def block_sigma(x: np.ndarray) -> float:  # type: ignore[type-arg]
        return _gaussian_loglik(Yc, phi, kappa, _sym(x))

    sigma_hat = sigma_mle(phi, kappa, Yc)
    blocks = [
        (block_phi, vec_of(phi_mle(kappa, P, Yc)).reshape(-1)),
        (block_kappa, vec_of(kappa_mle(phi, P, Yc)).reshape(-1)),
        (block_sigma, sigma_hat[[0, 0, 1], [0, 1, 1]]),
    ]
    for f, optimum in blocks:
        # gradient size 10% away from the optimum sets the scale
        scale = np.linalg.norm(_fd_gradient(f, 1.1 * optimum))
        assert np.linalg.norm(_fd_gradient(f, optimum)) < 1e-6 * scale
