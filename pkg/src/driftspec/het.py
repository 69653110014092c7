"""
The heteroscedastic drift model

    Y_{b,ν} = ψ_b + φ_b (κ_ν + c) + ε_{b,ν},   vec(ε_{b,ν}) ~ N(0, Σ_b),
    Σ_b = Σ₀ + σ̃² vec(iψ_b) vec(iψ_b)ᵀ.

The rank-one term is the linearised effect of phase noise ``e^{iσ̃ξ}`` on the echo
ψ_b: it adds variance only in the direction orthogonal to ψ_b.
"""

from __future__ import annotations

import logging
from typing import Any, Literal

try:
    from typing import Self
except ImportError:  # Python < 3.11
    from typing_extensions import Self

import numpy as np
import scipy.optimize
from pydantic import Field, model_validator

from driftspec._simplex import batched_nelder_mead
from driftspec.algebra import Spd2, comp_of, ensure_spd2, mat_of, vec_of
from driftspec.base import Base, ComplexScalar, ComplexVector
from driftspec.data import DataMatrix, as_values
from driftspec.exceptions import (
    DegenerateFirstBatch,
    DimensionMismatch,
    IndexOutOfRange,
    InvalidDimension,
    OptimizerFailure,
    SingularSigma,
)
from driftspec.hom import FitReport, HomParams, Kappa, LoglikTrace, fit_hom

__all__ = [
    "BoundaryKstar",
    "HetFitReport",
    "HetParams",
    "TruncationReport",
    "boundary_kstar",
    "boundary_sequence_loglik",
    "fit_het",
    "het_grad_sigma",
    "het_loglik",
    "sigma_b",
    "truncation_check",
]

logger = logging.getLogger(__name__)

_LOG_2PI = float(np.log(2 * np.pi))
DELTA = 1e-20
LBFGS_MAXITER = 50
LBFGS_MEMORY = 10
SIMPLEX_MAXFEV = 200
SIMPLEX_XRTOL = 1e-8


class HetParams(Base):
    """
    Parameters of the heteroscedastic drift model.
    """

    psi: ComplexVector
    phi: ComplexVector
    kappa: Kappa
    c: ComplexScalar = 0j
    sigma_tilde: float = Field(ge=0)
    sigma0: Spd2

    @model_validator(mode="after")
    def _ensure_batch_lengths(self) -> Self:
        if self.psi.shape != self.phi.shape:
            msg = f"psi has {self.psi.size} batches but phi has {self.phi.size}."
            raise ValueError(msg)
        return self

    @classmethod
    def from_hom(cls, params: HomParams) -> Self:
        """
        Embed homoscedastic parameters with σ̃ = 0 and c = 0.
        """
        return cls(
            psi=params.psi,
            phi=params.phi,
            kappa=params.kappa,
            sigma_tilde=0.0,
            sigma0=params.sigma,
        )

    @property
    def kappa_breve(self) -> np.ndarray:  # type: ignore[type-arg]
        """
        The uncentered direction κ + c.
        """
        return self.kappa + self.c  # type: ignore[no-any-return]

    def sigmas(self) -> np.ndarray:  # type: ignore[type-arg]
        """
        All per-batch covariances Σ_b, shape (B, 2, 2).
        """
        return _batch_sigmas(self.psi, self.sigma_tilde**2, self.sigma0)


class HetFitReport(Base):
    """
    Result of `fit_het`.
    """

    model: Literal["het"] = "het"
    params: HetParams
    loglik_trace: LoglikTrace
    n_iter: int = Field(ge=0)
    converged: bool
    boundary_warning: bool = False

    @property
    def loglik(self) -> float:
        """
        Log-likelihood of the returned parameters.
        """
        return self.loglik_trace[-1]


class TruncationReport(Base):
    """
    Size of the neglected second-order phase-noise term against the smallest
    marginal variance along the echo direction.
    """

    min_marginal: float
    max_quadratic: float
    ratio: float


class BoundaryKstar(Base):
    """
    Where the divergent boundary sequence overtakes a fitted log-likelihood.
    """

    log10_kstar: float
    log10_min_eig_sigma0: float


def _batch_sigmas(
    psi: np.ndarray,  # type: ignore[type-arg]
    sigma_tilde_sq: float | np.ndarray,  # type: ignore[type-arg]
    sigma0: np.ndarray,  # type: ignore[type-arg]
) -> np.ndarray:  # type: ignore[type-arg]
    v = vec_of(1j * np.asarray(psi))
    return sigma0 + np.asarray(sigma_tilde_sq)[..., None, None] * (
        v[..., :, None] * v[..., None, :]
    )


def _inv_det(sigmas: np.ndarray) -> tuple[np.ndarray, np.ndarray]:  # type: ignore[type-arg]
    det = sigmas[..., 0, 0] * sigmas[..., 1, 1] - sigmas[..., 0, 1] * sigmas[..., 1, 0]
    if np.any(~(det > 0)):
        msg = "A per-batch covariance Σ_b is singular."
        raise SingularSigma(msg)
    inv = np.empty_like(sigmas)
    inv[..., 0, 0] = sigmas[..., 1, 1]
    inv[..., 1, 1] = sigmas[..., 0, 0]
    inv[..., 0, 1] = -sigmas[..., 0, 1]
    inv[..., 1, 0] = -sigmas[..., 1, 0]
    return inv / det[..., None, None], det


def _residuals(
    values: np.ndarray,  # type: ignore[type-arg]
    psi: np.ndarray,  # type: ignore[type-arg]
    phi: np.ndarray,  # type: ignore[type-arg]
    kappa_breve: np.ndarray,  # type: ignore[type-arg]
) -> np.ndarray:  # type: ignore[type-arg]
    return values - psi[:, None] - phi[:, None] * kappa_breve[None, :]  # type: ignore[no-any-return]


def _scatter(residual: np.ndarray) -> np.ndarray:  # type: ignore[type-arg]
    pairs = vec_of(residual)
    return np.einsum("bni,bnj->bij", pairs, pairs)  # type: ignore[no-any-return]


def _batch_logliks(
    scatter: np.ndarray,  # type: ignore[type-arg]
    sigmas: np.ndarray,  # type: ignore[type-arg]
    n_freq: int,
) -> np.ndarray:  # type: ignore[type-arg]
    precision, det = _inv_det(sigmas)
    quad = np.einsum("bij,bji->b", precision, scatter)
    return -0.5 * (quad + n_freq * (np.log(det) + 2 * _LOG_2PI))  # type: ignore[no-any-return]


def _check_shapes(values: np.ndarray, params: HetParams) -> None:  # type: ignore[type-arg]
    if values.shape != (params.phi.size, params.kappa.size):
        msg = (
            f"Data of shape {values.shape} do not match parameters "
            f"with B={params.phi.size}, N+1={params.kappa.size}."
        )
        raise DimensionMismatch(msg)


def sigma_b(params: HetParams, b: int) -> np.ndarray:  # type: ignore[type-arg]
    """
    The covariance ``Σ_b = Σ₀ + σ̃² vec(iψ_b) vec(iψ_b)ᵀ`` of batch ``b``.

    Raises
    ------
    IndexOutOfRange
        If ``b`` is not in ``0..B-1``.
    """
    if not 0 <= b < params.psi.size:
        msg = f"Batch index {b} outside 0..{params.psi.size - 1}."
        raise IndexOutOfRange(msg)
    return ensure_spd2(
        _batch_sigmas(params.psi[b], params.sigma_tilde**2, params.sigma0)
    )


def het_loglik(Y: DataMatrix | Any, params: HetParams) -> float:
    """
    Sum over batches of the bivariate normal log-densities of the residuals
    ``Y_{b,ν} - ψ_b - φ_b (κ_ν + c)`` under Σ_b.

    Raises
    ------
    SingularSigma
        If some Σ_b is singular.
    """
    values = as_values(Y)
    _check_shapes(values, params)
    residual = _residuals(values, params.psi, params.phi, params.kappa_breve)
    return float(
        _batch_logliks(_scatter(residual), params.sigmas(), values.shape[1]).sum()
    )


def _sigma_gradients(
    scatter: np.ndarray,  # type: ignore[type-arg]
    psi: np.ndarray,  # type: ignore[type-arg]
    sigma_tilde_sq: float,
    chol: np.ndarray,  # type: ignore[type-arg]
    n_freq: int,
) -> tuple[float, float, np.ndarray]:  # type: ignore[type-arg]
    # log-likelihood, derivative in σ̃², derivative in the Cholesky factor of Σ₀
    sigmas = _batch_sigmas(psi, sigma_tilde_sq, chol @ chol.T)
    precision, det = _inv_det(sigmas)
    quad = np.einsum("bij,bji->b", precision, scatter)
    loglik = float(np.sum(-0.5 * (quad + n_freq * (np.log(det) + 2 * _LOG_2PI))))
    # dℓ/dΣ_b = ½ (P_b S_b P_b - (N+1) P_b)
    grad_sigma = 0.5 * (precision @ scatter @ precision - n_freq * precision)
    v = vec_of(1j * psi)
    d_sigma_tilde_sq = float(np.einsum("bi,bij,bj->", v, grad_sigma, v))
    d_chol = np.tril(2 * grad_sigma.sum(axis=0) @ chol)
    return loglik, d_sigma_tilde_sq, d_chol


def het_grad_sigma(Y: DataMatrix | Any, params: HetParams) -> np.ndarray:  # type: ignore[type-arg]
    """
    Gradient of `het_loglik` in ``(σ̃, L₁₁, L₂₁, L₂₂)`` where ``Σ₀ = L Lᵀ`` is the
    Cholesky factorisation.
    """
    values = as_values(Y)
    _check_shapes(values, params)
    residual = _residuals(values, params.psi, params.phi, params.kappa_breve)
    chol = np.linalg.cholesky(params.sigma0)
    _, d_sq, d_chol = _sigma_gradients(
        _scatter(residual),
        params.psi,
        params.sigma_tilde**2,
        chol,
        values.shape[1],
    )
    return np.array(
        [2 * params.sigma_tilde * d_sq, d_chol[0, 0], d_chol[1, 0], d_chol[1, 1]]
    )


class _State:
    """
    Mutable working copy of the parameters during `fit_het`.
    """

    def __init__(
        self,
        values: np.ndarray,  # type: ignore[type-arg]
        psi: np.ndarray,  # type: ignore[type-arg]
        phi: np.ndarray,  # type: ignore[type-arg]
        kappa_breve: np.ndarray,  # type: ignore[type-arg]
        sigma_tilde_sq: float,
        sigma0: np.ndarray,  # type: ignore[type-arg]
    ) -> None:
        self.values = values
        self.psi = np.array(psi, dtype=np.complex128)
        self.phi = np.array(phi, dtype=np.complex128)
        self.kappa_breve = np.array(kappa_breve, dtype=np.complex128)
        self.sigma_tilde_sq = float(sigma_tilde_sq)
        self.sigma0 = np.array(sigma0, dtype=np.float64)

    @property
    def n_freq(self) -> int:
        return int(self.values.shape[1])

    def sigmas(self) -> np.ndarray:  # type: ignore[type-arg]
        return _batch_sigmas(self.psi, self.sigma_tilde_sq, self.sigma0)

    def residual(self) -> np.ndarray:  # type: ignore[type-arg]
        return _residuals(self.values, self.psi, self.phi, self.kappa_breve)

    def loglik(self) -> float:
        return float(
            _batch_logliks(_scatter(self.residual()), self.sigmas(), self.n_freq).sum()
        )


def _regression_start(
    residual: np.ndarray,  # type: ignore[type-arg]
    psi: np.ndarray,  # type: ignore[type-arg]
    delta: float,
) -> tuple[float, np.ndarray]:  # type: ignore[type-arg]
    # per-batch S_b ≈ Σ₀ + σ̃² Ψ_b, fitted on the entries (11, 12, 22)
    n_batches, n_freq = residual.shape
    scatter = _scatter(residual) / n_freq
    v = vec_of(1j * psi)
    outer = v[:, :, None] * v[:, None, :]
    entries = [(0, 0), (0, 1), (1, 1)]
    design = np.zeros((3 * n_batches, 4))
    target = np.empty(3 * n_batches)
    for j, (r, c) in enumerate(entries):
        design[j::3, j] = 1
        design[j::3, 3] = outer[:, r, c]
        target[j::3] = scatter[:, r, c]
    coef, *_ = np.linalg.lstsq(design, target, rcond=None)
    slope = float(coef[3])
    if slope < 0:
        logger.warning("Regression start gave σ̃² = %.3g < 0; clamping to 0.", slope)
        slope = 0.0
        coef[:3] = [target[j::3].mean() for j in range(3)]
    sigma0 = np.array([[coef[0], coef[1]], [coef[1], coef[2]]])
    values, vectors = np.linalg.eigh(sigma0)
    floor = max(delta, 1e-12 * max(float(np.trace(scatter.mean(axis=0))), 0.0))
    values = np.maximum(values, floor)
    return slope, (vectors * values) @ vectors.T


def _update_sigma(state: _State, delta: float) -> None:
    scatter = _scatter(state.residual())
    scale = float(np.sqrt(max(np.trace(state.sigma0) / 2, delta)))
    psi_rms = float(np.sqrt(np.mean(np.abs(state.psi) ** 2))) or 1.0
    tilde_scale = (scale / psi_rms) ** 2
    lower = np.sqrt(delta) / scale

    chol = np.linalg.cholesky(state.sigma0)
    x0 = np.array(
        [
            state.sigma_tilde_sq / tilde_scale,
            max(chol[0, 0] / scale, lower),
            chol[1, 0] / scale,
            max(chol[1, 1] / scale, lower),
        ]
    )

    def negative_loglik(x: np.ndarray) -> tuple[float, np.ndarray]:  # type: ignore[type-arg]
        L = np.array([[x[1], 0.0], [x[2], x[3]]]) * scale
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            try:
                loglik, d_sq, d_chol = _sigma_gradients(
                    scatter, state.psi, x[0] * tilde_scale, L, state.n_freq
                )
            except SingularSigma:
                return np.inf, np.zeros(4)
        grad = np.array(
            [
                d_sq * tilde_scale,
                d_chol[0, 0] * scale,
                d_chol[1, 0] * scale,
                d_chol[1, 1] * scale,
            ]
        )
        if not (np.isfinite(loglik) and np.all(np.isfinite(grad))):
            return np.inf, np.zeros(4)
        return -loglik, -grad

    before = -negative_loglik(x0)[0]
    result = scipy.optimize.minimize(
        negative_loglik,
        x0,
        jac=True,
        method="L-BFGS-B",
        bounds=[(0, None), (lower, None), (None, None), (lower, None)],
        options={"maxiter": LBFGS_MAXITER, "maxcor": LBFGS_MEMORY},
    )
    if not np.all(np.isfinite(result.x)):
        msg = "L-BFGS-B returned non-finite covariance parameters."
        raise OptimizerFailure(
            msg, diagnostics={"message": str(result.message), "x": result.x.tolist()}
        )
    if -result.fun > before:
        x = result.x
        L = np.array([[x[1], 0.0], [x[2], x[3]]]) * scale
        state.sigma_tilde_sq = float(x[0] * tilde_scale)
        state.sigma0 = L @ L.T


def _update_phi(state: _State) -> None:
    precision, _ = _inv_det(state.sigmas())
    Mk = mat_of(state.kappa_breve)
    shifted = vec_of(state.values - state.psi[:, None])
    gram = np.einsum("nji,bjk,nkl->bil", Mk, precision, Mk)
    rhs = np.einsum("nji,bjk,bnk->bi", Mk, precision, shifted)
    state.phi = comp_of(np.linalg.solve(gram, rhs[..., None])[..., 0])


def _update_kappa(state: _State) -> None:
    precision, _ = _inv_det(state.sigmas())
    Mp = mat_of(state.phi)
    shifted = vec_of(state.values - state.psi[:, None])
    gram = np.einsum("bji,bjk,bkl->il", Mp, precision, Mp)
    rhs = np.einsum("bji,bjk,bnk->ni", Mp, precision, shifted)
    state.kappa_breve = comp_of(np.linalg.solve(gram, rhs.T).T)


def _renormalise(state: _State) -> None:
    norm = float(np.linalg.norm(state.kappa_breve - state.kappa_breve.mean()))
    state.kappa_breve = state.kappa_breve / norm
    state.phi = state.phi * norm


def _psi_objective(state: _State) -> Any:
    fitted = state.phi[:, None] * state.kappa_breve[None, :]

    def objective(points: np.ndarray) -> np.ndarray:  # type: ignore[type-arg]
        psi = comp_of(points)
        residual = state.values - psi[:, None] - fitted
        sigmas = _batch_sigmas(psi, state.sigma_tilde_sq, state.sigma0)
        return -_batch_logliks(_scatter(residual), sigmas, state.n_freq)

    return objective


def _update_psi(state: _State) -> None:
    objective = _psi_objective(state)
    start = vec_of(state.psi).copy()
    step = np.sqrt(np.trace(state.sigmas(), axis1=1, axis2=2) / state.n_freq)
    best, best_values = batched_nelder_mead(
        objective, start, step, maxfev=SIMPLEX_MAXFEV, xrtol=SIMPLEX_XRTOL
    )
    if not np.all(np.isfinite(best_values)):
        msg = "Simplex search for ψ produced non-finite values."
        raise OptimizerFailure(msg, diagnostics={"values": best_values.tolist()})
    state.psi = comp_of(best)


def _update_offset(state: _State) -> None:
    # ψ - Δφ and κ̆ + Δ leave the residuals unchanged and only move Σ_b
    scatter = _scatter(state.residual())

    def objective(x: np.ndarray) -> float:  # type: ignore[type-arg]
        shift = complex(x[0], x[1])
        sigmas = _batch_sigmas(
            state.psi - shift * state.phi, state.sigma_tilde_sq, state.sigma0
        )
        try:
            return -float(_batch_logliks(scatter, sigmas, state.n_freq).sum())
        except SingularSigma:
            return np.inf

    step = 0.01 / np.sqrt(state.n_freq)
    before = objective(np.zeros(2))
    result = scipy.optimize.minimize(
        objective,
        np.zeros(2),
        method="Nelder-Mead",
        options={
            "maxfev": SIMPLEX_MAXFEV,
            "xatol": SIMPLEX_XRTOL * step,
            "fatol": 1e-10,
            "initial_simplex": np.array([[0.0, 0.0], [step, 0.0], [0.0, step]]),
        },
    )
    if result.fun < before:
        shift = complex(result.x[0], result.x[1])
        state.psi = state.psi - shift * state.phi
        state.kappa_breve = state.kappa_breve + shift


def _to_params(state: _State) -> tuple[HetParams, bool]:
    c = complex(state.kappa_breve.mean())
    kappa = state.kappa_breve - c
    norm = float(np.linalg.norm(kappa))
    kappa, phi = kappa / norm, state.phi * norm
    largest = kappa[np.argmax(np.abs(kappa))]
    rotation = np.conj(largest) / abs(largest)
    eigen = np.linalg.eigvalsh(state.sigma0)
    boundary = bool(eigen[0] < DELTA)
    sigma0 = state.sigma0
    if eigen[0] <= 1e-14 * eigen.sum():
        boundary = True
        values, vectors = np.linalg.eigh(sigma0)
        sigma0 = (vectors * np.maximum(values, 2e-14 * values.sum())) @ vectors.T
    params = HetParams(
        psi=state.psi,
        phi=phi / rotation,
        kappa=kappa * rotation,
        c=c * rotation,
        sigma_tilde=float(np.sqrt(state.sigma_tilde_sq)),
        sigma0=sigma0,
    )
    return params, boundary


def fit_het(
    Y: DataMatrix | Any,
    *,
    maxiter: int = 200,
    min_delta_loglik: float = 1e-4,
    start_c_opt: int = 25,
    delta: float = DELTA,
    init: HetParams | None = None,
    hom_fit: FitReport | None = None,
) -> HetFitReport:
    """
    Maximum likelihood fit of the heteroscedastic drift model.

    Starting from the homoscedastic fit, every sweep updates

    1. (σ̃², Σ₀) by L-BFGS-B with the analytic gradient, Σ₀ through its Cholesky
       factor with diagonal bounded below by √delta,
    2. φ and κ̆ = κ + c by their generalised least squares solutions,
    3. the scale split between φ and κ̆ so that ``‖κ̆ - mean(κ̆)‖ = 1``,
    4. each ψ_b by a 2-d simplex search,
    5. after ``start_c_opt`` sweeps, the offset Δ in ``(ψ - Δφ, κ̆ + Δ)``,

    and convergence is checked after the whole sweep.

    Parameters
    ----------
    Y :
        Data matrix with B ≥ 2 batches and N+1 ≥ 3 frequencies.
    maxiter, min_delta_loglik :
        Sweep cap and convergence threshold on the log-likelihood gain.
    start_c_opt :
        First sweep (1-based) after which the offset step runs.
    delta :
        Eigenvalue floor of Σ₀; a fit ending below it is flagged.
    init :
        Warm start; skips the homoscedastic initialisation.
    hom_fit :
        A homoscedastic fit of the same data to initialise from.

    Raises
    ------
    OptimizerFailure
        If an inner optimiser returns non-finite values.
    """
    values = as_values(Y)
    n_batches, n_freq = values.shape
    if n_batches < 2 or n_freq < 3:
        msg = f"Need B >= 2 and N+1 >= 3, got shape {values.shape}."
        raise InvalidDimension(msg)

    if init is not None:
        if init.phi.shape != (n_batches,) or init.kappa.shape != (n_freq,):
            msg = "Warm start does not match the data shape."
            raise DimensionMismatch(msg)
        state = _State(
            values,
            init.psi,
            init.phi,
            init.kappa_breve,
            init.sigma_tilde**2,
            init.sigma0,
        )
    else:
        hom = hom_fit or fit_hom(
            values, maxiter=maxiter, min_delta_loglik=min_delta_loglik
        )
        start = hom.params
        state = _State(values, start.psi, start.phi, start.kappa, 0.0, start.sigma)
        nested = state.loglik()
        slope, sigma0 = _regression_start(state.residual(), state.psi, delta)
        candidate = _State(values, start.psi, start.phi, start.kappa, slope, sigma0)
        if candidate.loglik() > nested:
            state = candidate
        logger.debug(
            "het start: nested %.10g, regression %.10g", nested, candidate.loglik()
        )

    trace = [state.loglik()]
    converged = False
    n_iter = 0
    for n_iter in range(1, maxiter + 1):
        _update_sigma(state, delta)
        _update_phi(state)
        _update_kappa(state)
        _renormalise(state)
        _update_psi(state)
        if n_iter > start_c_opt:
            _update_offset(state)
        loglik = state.loglik()
        if not np.isfinite(loglik):
            msg = "Log-likelihood became non-finite."
            raise OptimizerFailure(msg, diagnostics={"sweep": n_iter})
        logger.debug(
            "het sweep %d: loglik %.10g, sigma_tilde %.4g",
            n_iter,
            loglik,
            np.sqrt(state.sigma_tilde_sq),
        )
        trace.append(loglik)
        if trace[-1] - trace[-2] < min_delta_loglik:
            converged = True
            break
    if not converged:
        logger.warning("fit_het stopped after %d sweeps without converging.", maxiter)

    params, boundary = _to_params(state)
    if boundary:
        logger.warning("Σ₀ reached the eigenvalue floor; the fit is at a boundary.")
    return HetFitReport(
        params=params,
        loglik_trace=trace,
        n_iter=n_iter,
        converged=converged,
        boundary_warning=boundary,
    )


def truncation_check(params: HetParams) -> TruncationReport:
    """
    Compare ``min_b vec(ψ_b/|ψ_b|)ᵀ Σ₀ vec(ψ_b/|ψ_b|)`` with the largest neglected
    second-order phase-noise variance ``max_b |ψ_b|² σ̃⁴ / 2``.
    """
    moduli = np.abs(params.psi)
    directions = vec_of(params.psi[moduli > 0] / moduli[moduli > 0])
    if directions.size:
        marginal = np.einsum("bi,ij,bj->b", directions, params.sigma0, directions)
        min_marginal = float(marginal.min())
    else:
        min_marginal = float(np.linalg.eigvalsh(params.sigma0)[0])
    max_quadratic = float(np.max(moduli**2) * params.sigma_tilde**4 / 2)
    ratio = min_marginal / max_quadratic if max_quadratic > 0 else float("inf")
    return TruncationReport(
        min_marginal=min_marginal, max_quadratic=max_quadratic, ratio=ratio
    )


def _first_batch(values: np.ndarray) -> tuple[complex, np.ndarray, float]:  # type: ignore[type-arg]
    psi1 = complex(values[0].mean())
    if abs(psi1) == 0:
        msg = "The first batch sums to zero."
        raise DegenerateFirstBatch(msg)
    deviation = values[0] - psi1
    norm = float(np.linalg.norm(deviation))
    if norm == 0:
        msg = "The first batch is constant."
        raise DegenerateFirstBatch(msg)
    return psi1, deviation / norm, norm


def _boundary_logliks(values: np.ndarray, log_k: float) -> np.ndarray:  # type: ignore[type-arg]
    # per-batch log-likelihoods of the divergent sequence at k = exp(log_k)
    n_batches, n_freq = values.shape
    psi1, kappa, phi1 = _first_batch(values)
    inv_k = float(np.exp(-log_k))
    along, across = vec_of(psi1), vec_of(1j * psi1)
    sigma0 = inv_k * np.outer(along, along) + np.outer(across, across)
    psi = np.full(n_batches, -1j * np.sqrt(1 - inv_k) * psi1)
    psi[0] = psi1
    phi = np.full(n_batches, -1j * phi1)
    phi[0] = phi1
    residual = _residuals(values, psi, phi, kappa)
    with np.errstate(divide="ignore"):
        return _batch_logliks(_scatter(residual), _batch_sigmas(psi, 1.0, sigma0), n_freq)


def boundary_sequence_loglik(Y: DataMatrix | Any, k: float) -> float:
    """
    Log-likelihood of the explicit parameter sequence along which the
    heteroscedastic likelihood is unbounded.

    Batch 1 is fitted exactly with ``Σ₀ = (1/k) vec(ψ₁)vec(ψ₁)ᵀ + vec(iψ₁)vec(iψ₁)ᵀ``
    and σ̃ = 1, contributing ``((N+1)/2) log(k / (2|ψ₁|⁴)) - (N+1) log 2π``. The other
    batches use ``ψ_b = -i sqrt(1 - 1/k) ψ₁`` and ``φ_b = -i φ₁`` so that their
    covariance is ``|ψ₁|² Id``.

    Raises
    ------
    DegenerateFirstBatch
        If the first batch sums to zero or is constant.
    """
    if k < 1:
        msg = f"k must be at least 1, got {k}."
        raise InvalidDimension(msg)
    return float(_boundary_logliks(as_values(Y), float(np.log(k))).sum())


def boundary_kstar(loglik_fit: float, Y: DataMatrix | Any) -> BoundaryKstar:
    """
    Solve ``boundary_sequence_loglik(Y, k*) = loglik_fit``.

    k* usually overflows binary64, so the equation is solved in ``log k`` with the
    first batch handled analytically.
    """
    values = as_values(Y)
    n_freq = values.shape[1]
    psi1, _, _ = _first_batch(values)
    log_mod4 = float(np.log(2 * abs(psi1) ** 4))

    def total(log_k: float) -> float:
        first = 0.5 * n_freq * (log_k - log_mod4) - n_freq * _LOG_2PI
        return first + float(_boundary_logliks(values, log_k)[1:].sum())

    if total(0.0) >= loglik_fit:
        log_k = 0.0
    else:
        upper = 1.0
        while total(upper) < loglik_fit:
            upper *= 2
        log_k = float(scipy.optimize.brentq(lambda t: total(t) - loglik_fit, 0.0, upper))
    log10_k = log_k / np.log(10)
    return BoundaryKstar(
        log10_kstar=log10_k,
        log10_min_eig_sigma0=float(np.log10(abs(psi1) ** 2) - log10_k),
    )
