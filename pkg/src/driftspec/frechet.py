"""
The loss ρ behind the homoscedastic fit, its Fréchet functions and the asymptotic
covariance of the fitted direction.

For a Helmertized, centered batch Y ∈ ℂᴺ, a direction [κ] and a precision P,

    ρ(Y, [κ]) = min_φ ‖Y - φκ‖²_P = ⟨Y, Y⟩_P - ⟨φ̂κ, Y⟩_P,

so the homoscedastic κ̂ is the minimiser of Σ_b ρ(Y_b, [κ]) at P = Σ̂⁻¹. Its
asymptotic covariance in the chart around [κ̂] is the sandwich ``H⁻¹ G H⁻¹``.
"""

from __future__ import annotations

import logging
from typing import Any

import numpy as np
import scipy.stats
from pydantic import Field

from driftspec._utils import ordered_map, replicate_rng
from driftspec.algebra import (
    ProjectivePoint,
    comp_of,
    dia,
    ensure_spd2,
    mat_of,
    proj_distance,
    spd2_eigenvalues,
    vec_of,
)
from driftspec.base import Base, RealMatrix
from driftspec.chart import rotation_to_last_axis
from driftspec.data import DataMatrix, as_values
from driftspec.exceptions import (
    DimensionMismatch,
    PreconditionError,
    SingularHessian,
)
from driftspec.helmert import helmert_matrix, helmertize
from driftspec.hom import FitReport
from driftspec.phase import Band, SpectrumResult, extract_spectrum, jacobian_g

__all__ = [
    "AsymptoticResult",
    "FrechetDecomposition",
    "MonteCarloEstimate",
    "SandwichCov",
    "check_lipschitz",
    "clt_bands",
    "inconsistency_gradient",
    "noise_part_exact",
    "population_F_decomposition",
    "profile_frechet_function",
    "rho",
    "rho_batch",
    "rho_dot_bound",
    "sandwich_covariance",
    "spectrum_asymptotics",
]

logger = logging.getLogger(__name__)

MIN_EPS_MC = 10_000
_CHUNK = 1 << 14
_GRAD_STEP = 1e-5
_HESS_STEP = 1e-4
_RICHARDSON_RTOL = 1e-4


class SandwichCov(Base):
    """
    Sandwich covariance of the chart coordinates of κ̂ and its push-forward to the
    spectrum (in Helmert coordinates).
    """

    H_hat: RealMatrix
    G_hat: RealMatrix
    cov_beta: RealMatrix
    cov_I: RealMatrix
    n_batches: int = Field(ge=1)


class MonteCarloEstimate(Base):
    """
    A Monte-Carlo mean and its standard error.
    """

    mean: float
    se: float = Field(ge=0)
    n_draws: int = Field(ge=1)


class FrechetDecomposition(Base):
    """
    ``F([κ]) = E ρ(ε, [κ]) + E ρ(φκ⁰, [κ])`` split into its noise and signal parts.
    """

    noise_part: float
    noise_se: float = Field(ge=0)
    noise_part_exact: float
    signal_part: float = Field(ge=0)
    signal_lower_bound: float
    eta: float = Field(ge=0)


class AsymptoticResult(Base):
    """
    Delta-method uncertainty of a homoscedastic spectrum on the full frequency axis.
    """

    spectrum: SpectrumResult
    sandwich: SandwichCov
    cov_I_full: RealMatrix
    band: Band


def _kappa_array(kappa: Any) -> np.ndarray:  # type: ignore[type-arg]
    return np.asarray(getattr(kappa, "rep", kappa), dtype=np.complex128)


def _rho_values(
    values: np.ndarray,  # type: ignore[type-arg]
    kappa: np.ndarray,  # type: ignore[type-arg]
    P: np.ndarray,  # type: ignore[type-arg]
) -> np.ndarray:  # type: ignore[type-arg]
    # ‖Y‖²_P - rᵀ(κ ⋄_P κ)⁻¹ r with r = κ ●_P Y, for Y stacked on leading axes
    pairs = vec_of(values)
    total = np.einsum("...ni,ij,...nj->...", pairs, P, pairs)
    rhs = np.einsum("nji,jk,...nk->...i", mat_of(kappa), P, pairs)
    gram = dia(kappa, P, kappa)
    explained = np.einsum("...i,ij,...j->...", rhs, np.linalg.inv(gram), rhs)
    return total - explained  # type: ignore[no-any-return]


def _check_lengths(values: np.ndarray, kappa: np.ndarray) -> None:  # type: ignore[type-arg]
    if values.shape[-1] != kappa.shape[0]:
        msg = f"Y has {values.shape[-1]} coordinates but κ has {kappa.shape[0]}."
        raise DimensionMismatch(msg)


def rho(Y: Any, kappa: ProjectivePoint | Any, P: Any) -> float:
    """
    The loss ``ρ(Y, [κ]) = ⟨Y, Y⟩_P - ⟨φ̂κ, Y⟩_P`` with
    ``φ̂ = comp((κ ⋄_P κ)⁻¹ (κ ●_P Y))``.

    It does not depend on the representative of [κ].

    Raises
    ------
    DimensionMismatch
        If Y and κ have different lengths.
    """
    values = np.asarray(Y, dtype=np.complex128)
    kappa = _kappa_array(kappa)
    _check_lengths(values, kappa)
    return float(_rho_values(values, kappa, ensure_spd2(P)))


def rho_batch(Y_batches: Any, kappa: ProjectivePoint | Any, P: Any) -> np.ndarray:  # type: ignore[type-arg]
    """
    `rho` for every row of a B×N matrix.
    """
    values = np.asarray(Y_batches, dtype=np.complex128)
    kappa = _kappa_array(kappa)
    _check_lengths(values, kappa)
    return _rho_values(values, kappa, ensure_spd2(P))


def rho_dot_bound(Y: Any, P: Any) -> float:
    """
    Lipschitz prefactor of ``[κ] ↦ ρ(Y, [κ])`` with respect to the projective
    distance:

    ``√λ₁ q ((λ₁ + 2)√(2N) + 8√2 N + 32√2 N q) ‖Y‖²``,  ``q = (λ₁² + λ₂²)/(λ₁λ₂)``.

    Raises
    ------
    PreconditionError
        If P does not have two distinct eigenvalues.
    """
    values = np.asarray(Y, dtype=np.complex128)
    lam1, lam2 = spd2_eigenvalues(ensure_spd2(P))
    if lam1 - lam2 <= 1e-12 * lam1:
        msg = f"P needs two distinct eigenvalues, got {lam1} and {lam2}."
        raise PreconditionError(msg)
    n = values.shape[-1]
    q = (lam1**2 + lam2**2) / (lam1 * lam2)
    root2 = np.sqrt(2)
    factor = (lam1 + 2) * np.sqrt(2 * n) + 8 * root2 * n + 32 * root2 * n * q
    return float(np.sqrt(lam1) * q * factor * np.vdot(values, values).real)


def check_lipschitz(
    Y: Any,
    P: Any,
    kappa_pairs: list[tuple[ProjectivePoint, ProjectivePoint]],
) -> bool:
    """
    Whether ``|ρ(Y, [κ]) - ρ(Y, [κ'])| ≤ ρ̇(Y, P) d([κ], [κ'])`` for every pair.
    """
    bound = rho_dot_bound(Y, P)
    for a, b in kappa_pairs:
        gap = abs(rho(Y, a, P) - rho(Y, b, P))
        if gap > bound * proj_distance(a, b):
            logger.info("Lipschitz bound violated: gap %.6g, bound %.6g.", gap, bound)
            return False
    return True


def _noise_pairs(
    rng: np.random.Generator, n_draws: int, n: int, chol: np.ndarray  # type: ignore[type-arg]
) -> np.ndarray:  # type: ignore[type-arg]
    return rng.standard_normal((n_draws, n, 2)) @ chol.T  # type: ignore[no-any-return]


def _chunks(total: int) -> list[tuple[int, int]]:
    starts = range(0, total, _CHUNK)
    return [(i, min(_CHUNK, total - start)) for i, start in enumerate(starts)]


def _monte_carlo(
    draw: Any, n_draws: int, seed: int, threads: int
) -> MonteCarloEstimate:
    # draw(rng, size) -> sample values; chunk i uses stream seed XOR i
    def run(chunk: tuple[int, int]) -> tuple[float, float]:
        index, size = chunk
        sample = draw(replicate_rng(seed, index), size)
        return float(sample.sum()), float(np.sum(sample**2))

    sums = ordered_map(run, _chunks(n_draws), threads)
    total = sum(s for s, _ in sums)
    total_sq = sum(s for _, s in sums)
    mean = total / n_draws
    variance = max(total_sq / n_draws - mean**2, 0.0) * n_draws / max(n_draws - 1, 1)
    return MonteCarloEstimate(mean=mean, se=float(np.sqrt(variance / n_draws)), n_draws=n_draws)


def noise_part_exact(kappa: ProjectivePoint | Any, P: Any, sigma: Any) -> float:
    """
    ``E ρ(ε, [κ]) = N tr(ΣP) - tr((κ ⋄_P κ)⁻¹ (κ ⋄_{PΣP} κ))`` for
    ``vec(ε_n) ~ N(0, Σ)`` i.i.d.

    At ``P = Σ⁻¹`` this is ``2N - 2`` for every [κ].
    """
    kappa = _kappa_array(kappa)
    P, sigma = ensure_spd2(P), ensure_spd2(sigma)
    sandwich = P @ sigma @ P
    n = kappa.shape[0]
    return float(
        n * np.trace(sigma @ P)
        - np.trace(np.linalg.solve(dia(kappa, P, kappa), dia(kappa, sandwich, kappa)))
    )


def population_F_decomposition(
    kappa: ProjectivePoint | Any,
    kappa0: ProjectivePoint | Any,
    sigma: Any,
    phi_samples: Any,
    eps_mc: int,
    *,
    seed: int = 0,
    threads: int = 1,
) -> FrechetDecomposition:
    """
    Monte-Carlo decomposition of the Fréchet function ``E ρ(φκ⁰ + ε, [κ])`` at
    ``P = Σ⁻¹``.

    The noise part is estimated from ``eps_mc`` draws of ε and reported with its
    closed form. The signal part is the exact average of ``ρ(φκ⁰, [κ])`` over
    ``phi_samples`` and is bounded below by ``(η² - η⁴/4) λ₂ E|φ|²`` with η the
    projective distance between [κ] and [κ⁰] and λ₂ the small eigenvalue of P.

    Raises
    ------
    PreconditionError
        If ``eps_mc < 10⁴``.
    """
    if eps_mc < MIN_EPS_MC:
        msg = f"Need at least {MIN_EPS_MC} noise draws, got {eps_mc}."
        raise PreconditionError(msg)
    point = kappa if isinstance(kappa, ProjectivePoint) else ProjectivePoint.from_vector(kappa)
    anchor = (
        kappa0 if isinstance(kappa0, ProjectivePoint) else ProjectivePoint.from_vector(kappa0)
    )
    sigma = ensure_spd2(sigma)
    P = np.linalg.inv(sigma)
    chol = np.linalg.cholesky(sigma)
    n = point.dim
    if anchor.dim != n:
        msg = f"κ has {n} coordinates but κ⁰ has {anchor.dim}."
        raise DimensionMismatch(msg)

    def draw(rng: np.random.Generator, size: int) -> np.ndarray:  # type: ignore[type-arg]
        return _rho_values(comp_of(_noise_pairs(rng, size, n, chol)), point.rep, P)

    noise = _monte_carlo(draw, eps_mc, seed, threads)
    phi = np.asarray(phi_samples, dtype=np.complex128).reshape(-1)
    signal = _rho_values(phi[:, None] * anchor.rep[None, :], point.rep, P)
    eta = proj_distance(point, anchor)
    lam2 = spd2_eigenvalues(P)[1]
    return FrechetDecomposition(
        noise_part=noise.mean,
        noise_se=noise.se,
        noise_part_exact=noise_part_exact(point, P, sigma),
        signal_part=max(float(signal.mean()), 0.0),
        signal_lower_bound=(eta**2 - eta**4 / 4) * lam2 * float(np.mean(np.abs(phi) ** 2)),
        eta=eta,
    )


def profile_frechet_function(
    kappa: ProjectivePoint | Any,
    P: Any,
    kappa0: ProjectivePoint | Any,
    sigma: Any,
    phi_samples: Any,
    eps_mc: int,
    *,
    seed: int = 0,
    threads: int = 1,
) -> MonteCarloEstimate:
    """
    Monte-Carlo estimate of the profile Fréchet function
    ``F([κ], P) = E ρ_P(φκ⁰ + ε, [κ]) - N log det P``.

    The same ``seed`` gives the same noise draws for every (κ, P), so finite
    differences in P have only the Monte-Carlo error of the difference.
    """
    kappa, anchor = _kappa_array(kappa), _kappa_array(kappa0)
    P, sigma = ensure_spd2(P), ensure_spd2(sigma)
    chol = np.linalg.cholesky(sigma)
    n = kappa.shape[0]
    phi = np.asarray(phi_samples, dtype=np.complex128).reshape(-1)
    log_det = n * float(np.log(np.linalg.det(P)))

    def draw(rng: np.random.Generator, size: int) -> np.ndarray:  # type: ignore[type-arg]
        noise = comp_of(_noise_pairs(rng, size, n, chol))
        scale = phi[rng.integers(phi.size, size=size)]
        return _rho_values(scale[:, None] * anchor[None, :] + noise, kappa, P) - log_det

    return _monte_carlo(draw, eps_mc, seed, threads)


def inconsistency_gradient(kappa0: ProjectivePoint | Any, P0: Any) -> np.ndarray:  # type: ignore[type-arg]
    """
    Derivative of the profile Fréchet function in P at ``([κ⁰], P⁰)`` with
    ``P⁰ = Σ⁻¹``:

    ``-(2A - diag A)``,  ``A = κ̄⁰ ⋄_{(κ⁰ ⋄_{P⁰} κ⁰)⁻¹} κ̄⁰``.

    Entry (i, j) is the derivative in the free entry ``P_ij`` of a symmetric P, so
    the off-diagonal derivative moves both ``P_12`` and ``P_21``. A nonzero value
    means P⁰ is not a critical point of the population profile loss.
    """
    kappa = _kappa_array(kappa0)
    P = ensure_spd2(P0)
    inv_gram = np.linalg.inv(dia(kappa, P, kappa))
    A = dia(np.conj(kappa), inv_gram, np.conj(kappa))
    A = (A + A.T) / 2
    return -(2 * A - np.diag(np.diag(A)))  # type: ignore[no-any-return]


def _lift(R_star: np.ndarray, x: np.ndarray) -> np.ndarray:  # type: ignore[type-arg]
    # chart inverse for stacked coordinates x (..., 2(N-1))
    coords = comp_of(x.reshape(*x.shape[:-1], -1, 2))
    ones = np.ones((*x.shape[:-1], 1), dtype=np.complex128)
    lifted = np.concatenate([coords, ones], axis=-1)
    lifted /= np.linalg.norm(lifted, axis=-1, keepdims=True)
    return lifted @ R_star.T  # type: ignore[no-any-return]


def _central_gradients(
    values: np.ndarray,  # type: ignore[type-arg]
    R_star: np.ndarray,  # type: ignore[type-arg]
    P: np.ndarray,  # type: ignore[type-arg]
    step: float,
) -> np.ndarray:  # type: ignore[type-arg]
    dim = 2 * (R_star.shape[0] - 1)
    grads = np.empty((values.shape[0], dim))
    for j in range(dim):
        e = np.zeros(dim)
        e[j] = step
        plus = _rho_values(values, _lift(R_star, e), P)
        minus = _rho_values(values, _lift(R_star, -e), P)
        grads[:, j] = (plus - minus) / (2 * step)
    return grads


def _mean_hessian(
    values: np.ndarray,  # type: ignore[type-arg]
    R_star: np.ndarray,  # type: ignore[type-arg]
    P: np.ndarray,  # type: ignore[type-arg]
    step: float,
) -> np.ndarray:  # type: ignore[type-arg]
    dim = 2 * (R_star.shape[0] - 1)

    def mean_rho(x: np.ndarray) -> float:  # type: ignore[type-arg]
        return float(_rho_values(values, _lift(R_star, x), P).mean())

    center = mean_rho(np.zeros(dim))
    hessian = np.empty((dim, dim))
    basis = np.eye(dim) * step
    for j in range(dim):
        hessian[j, j] = (
            mean_rho(basis[j]) - 2 * center + mean_rho(-basis[j])
        ) / step**2
        for k in range(j):
            value = (
                mean_rho(basis[j] + basis[k])
                - mean_rho(basis[j] - basis[k])
                - mean_rho(-basis[j] + basis[k])
                + mean_rho(-basis[j] - basis[k])
            ) / (4 * step**2)
            hessian[j, k] = hessian[k, j] = value
    return hessian


def sandwich_covariance(
    Y_batches: Any, kappa_hat: ProjectivePoint | Any, P: Any
) -> SandwichCov:
    """
    Sandwich covariance ``H⁻¹ G H⁻¹`` of ``√B β([κ̂])`` and its push-forward
    ``cov_I = J cov_beta Jᵀ / B`` to the spectrum.

    H is the Hessian of the batch mean of ``x ↦ ρ(Y_b, β⁻¹(x))`` at x = 0 and G the
    covariance of the per-batch gradients, both by central finite differences in
    the chart around [κ̂]. The gradients are cross-checked by Richardson
    extrapolation.

    Parameters
    ----------
    Y_batches :
        Helmertized, centered data, shape B×N.
    kappa_hat :
        The fitted direction in Helmert coordinates.
    P :
        The precision matrix used by the fit.

    Raises
    ------
    SingularHessian
        If the mean Hessian is not positive definite.
    SingularityM1M2
        If the spectrum map is not differentiable at κ̂.
    """
    values = np.asarray(Y_batches, dtype=np.complex128)
    anchor = (
        kappa_hat
        if isinstance(kappa_hat, ProjectivePoint)
        else ProjectivePoint.from_vector(kappa_hat)
    )
    _check_lengths(values, anchor.rep)
    P = ensure_spd2(P)
    n_batches = values.shape[0]
    R_star = rotation_to_last_axis(anchor.rep).conj().T

    grads = _central_gradients(values, R_star, P, _GRAD_STEP)
    half = _central_gradients(values, R_star, P, _GRAD_STEP / 2)
    extrapolated = (4 * half - grads) / 3
    scale = float(np.max(np.abs(extrapolated))) or 1.0
    discrepancy = float(np.max(np.abs(extrapolated - grads))) / scale
    if discrepancy > _RICHARDSON_RTOL:
        logger.warning("Finite-difference gradients disagree by %.3g.", discrepancy)

    hessian = _mean_hessian(values, R_star, P, _HESS_STEP)
    hessian = (hessian + hessian.T) / 2
    try:
        np.linalg.cholesky(hessian)
    except np.linalg.LinAlgError as err:
        msg = "The mean Hessian of ρ is not positive definite."
        raise SingularHessian(msg) from err
    G = np.atleast_2d(np.cov(extrapolated, rowvar=False))
    inv_h = np.linalg.inv(hessian)
    cov_beta = inv_h @ G @ inv_h
    cov_beta = (cov_beta + cov_beta.T) / 2
    # the covariance does not depend on the sign convention
    jacobian = jacobian_g(anchor.rep, sign=1)
    cov_I = jacobian @ cov_beta @ jacobian.T / n_batches
    return SandwichCov(
        H_hat=hessian,
        G_hat=G,
        cov_beta=cov_beta,
        cov_I=(cov_I + cov_I.T) / 2,
        n_batches=n_batches,
    )


def clt_bands(spectrum: SpectrumResult | Any, cov_I: Any, level: float = 0.95) -> Band:
    """
    Pointwise normal intervals ``I ± z sqrt(diag cov_I)``.
    """
    center = np.asarray(getattr(spectrum, "I", spectrum), dtype=np.float64)
    cov = np.asarray(cov_I, dtype=np.float64)
    if cov.shape != (center.size, center.size):
        msg = f"Covariance of shape {cov.shape} for a spectrum of length {center.size}."
        raise DimensionMismatch(msg)
    z = float(scipy.stats.norm.ppf(0.5 + level / 2))
    half_width = z * np.sqrt(np.clip(np.diag(cov), 0, None))
    return Band(lower=center - half_width, upper=center + half_width, level=level)


def spectrum_asymptotics(
    Y: DataMatrix | Any, fit: FitReport, *, level: float = 0.95
) -> AsymptoticResult:
    """
    Spectrum, sandwich covariance and normal bands of a homoscedastic fit on the
    full frequency axis.

    The Helmert-coordinate covariance is mapped back by ``Hᵀ cov_I H``; the sign
    convention is the one of the full-axis spectrum.
    """
    values = as_values(Y)
    basis = helmert_matrix(values.shape[1])
    params = fit.params
    spectrum = extract_spectrum(params.kappa)
    centered = helmertize(values - params.psi[:, None], basis)
    kappa_helmert = helmertize(params.kappa, basis)
    sandwich = sandwich_covariance(centered, kappa_helmert, np.linalg.inv(params.sigma))
    cov_full = basis.H.T @ sandwich.cov_I @ basis.H
    return AsymptoticResult(
        spectrum=spectrum,
        sandwich=sandwich,
        cov_I_full=cov_full,
        band=clt_bands(spectrum, cov_full, level),
    )
