"""
The homoscedastic drift model

    Y_{b,ν} = ψ_b + φ_b κ_ν + ε_{b,ν},   vec(ε) ~ N(0, Σ) i.i.d.,

with Σ_ν κ_ν = 0 and ‖κ‖ = 1. Given any two of (φ, κ, Σ) the third has a closed
form maximum likelihood estimate; `fit_hom` alternates them.
"""

from __future__ import annotations

import logging
from typing import Annotated, Any, Literal

try:
    from typing import Self
except ImportError:  # Python < 3.11
    from typing_extensions import Self

import numpy as np
from pydantic import AfterValidator, Field, model_validator

from driftspec.algebra import Spd2, comp_of, dia, ensure_spd2, mat_of, vec_of
from driftspec.base import Base, ComplexVector
from driftspec.data import DataMatrix, as_values
from driftspec.exceptions import (
    DegenerateData,
    DimensionMismatch,
    InvalidDimension,
    SingularSigma,
    ZeroDirection,
)

__all__ = [
    "FitReport",
    "HomParams",
    "center",
    "fit_hom",
    "hom_loglik",
    "kappa_mle",
    "phi_mle",
    "sigma_mle",
]

logger = logging.getLogger(__name__)

_KAPPA_ATOL = 1e-10
_TRACE_SLACK = 1e-9
# residual variance below this fraction of the signal variance is an exact fit
_EXACT_FIT_RTOL = 1e-20
_LOG_2PI = float(np.log(2 * np.pi))


def _ensure_mean_zero_unit(kappa: np.ndarray) -> np.ndarray:  # type: ignore[type-arg]
    if abs(kappa.sum()) > _KAPPA_ATOL:
        msg = f"κ must sum to zero, got sum {kappa.sum()}."
        raise ValueError(msg)
    norm = float(np.linalg.norm(kappa))
    if abs(norm - 1) > _KAPPA_ATOL:
        msg = f"κ must have unit norm, got norm {norm}."
        raise ValueError(msg)
    return kappa


Kappa = Annotated[ComplexVector, AfterValidator(_ensure_mean_zero_unit)]


class HomParams(Base):
    """
    Parameters of the homoscedastic drift model.
    """

    psi: ComplexVector
    phi: ComplexVector
    kappa: Kappa
    sigma: Spd2

    @model_validator(mode="after")
    def _ensure_batch_lengths(self) -> Self:
        if self.psi.shape != self.phi.shape:
            msg = f"psi has {self.psi.size} batches but phi has {self.phi.size}."
            raise ValueError(msg)
        return self


def _ensure_non_decreasing(trace: list[float]) -> list[float]:
    for before, after in zip(trace, trace[1:], strict=False):
        if after < before - _TRACE_SLACK - 1e-12 * abs(before):
            msg = f"Log-likelihood decreased from {before} to {after}."
            raise ValueError(msg)
    return trace


LoglikTrace = Annotated[list[float], AfterValidator(_ensure_non_decreasing)]


class FitReport(Base):
    """
    Result of `fit_hom`.
    """

    model: Literal["hom"] = "hom"
    params: HomParams
    loglik_trace: LoglikTrace
    n_iter: int = Field(ge=0)
    converged: bool

    @property
    def loglik(self) -> float:
        """
        Log-likelihood of the returned parameters.
        """
        return self.loglik_trace[-1]


def center(Y: DataMatrix | Any) -> tuple[np.ndarray, np.ndarray]:  # type: ignore[type-arg]
    """
    Row means ψ̂ (divisor N+1) and the row-centered matrix ``Y - ψ̂``.
    """
    values = as_values(Y)
    psi = values.mean(axis=1)
    return psi, values - psi[:, None]


def _check_direction(z: np.ndarray, name: str) -> None:  # type: ignore[type-arg]
    norm = float(np.linalg.norm(z))
    if not np.isfinite(norm) or norm <= np.finfo(float).tiny:
        msg = f"{name} is numerically zero."
        raise ZeroDirection(msg)


def _solve_pairs(gram: np.ndarray, rhs: np.ndarray) -> np.ndarray:  # type: ignore[type-arg]
    if np.linalg.det(gram) <= 0:
        msg = "The conditioning vector gives a singular normal matrix."
        raise ZeroDirection(msg)
    return comp_of(np.linalg.solve(gram, rhs.T).T)


def kappa_mle(phi: Any, P: Any, Yc: DataMatrix | Any) -> np.ndarray:  # type: ignore[type-arg]
    """
    Closed-form κ̂ given φ and the precision P:
    ``κ̂_ν = comp((φ ⋄_P φ)⁻¹ (φ ●_P Ỹ_{:,ν}))``.

    Raises
    ------
    ZeroDirection
        If φ is numerically zero.
    """
    values = as_values(Yc)
    phi = np.asarray(phi, dtype=np.complex128)
    if phi.shape != (values.shape[0],):
        msg = f"phi has shape {phi.shape}, data have {values.shape[0]} batches."
        raise DimensionMismatch(msg)
    _check_direction(phi, "phi")
    P = np.asarray(P, dtype=np.float64)
    rhs = np.einsum("bji,jk,bnk->ni", mat_of(phi), P, vec_of(values))
    return _solve_pairs(dia(phi, P, phi), rhs)


def phi_mle(kappa: Any, P: Any, Yc: DataMatrix | Any) -> np.ndarray:  # type: ignore[type-arg]
    """
    Closed-form φ̂ given κ and the precision P:
    ``φ̂_b = comp((κ ⋄_P κ)⁻¹ (κ ●_P Ỹ_{b,:}))``.

    Raises
    ------
    ZeroDirection
        If κ is numerically zero.
    """
    values = as_values(Yc)
    kappa = np.asarray(kappa, dtype=np.complex128)
    if kappa.shape != (values.shape[1],):
        msg = f"kappa has shape {kappa.shape}, data have {values.shape[1]} frequencies."
        raise DimensionMismatch(msg)
    _check_direction(kappa, "kappa")
    P = np.asarray(P, dtype=np.float64)
    rhs = np.einsum("nji,jk,bnk->bi", mat_of(kappa), P, vec_of(values))
    return _solve_pairs(dia(kappa, P, kappa), rhs)


def sigma_mle(phi: Any, kappa: Any, Yc: DataMatrix | Any) -> np.ndarray:  # type: ignore[type-arg]
    """
    Residual second-moment matrix ``Σ_{b,ν} vec(r)vec(r)ᵀ / (B(N+1))`` with
    ``r = Ỹ_{b,ν} - φ_b κ_ν``.

    The result is not checked for definiteness; it is zero for noiseless data.
    """
    values = as_values(Yc)
    residual = vec_of(values - np.outer(phi, kappa)).reshape(-1, 2)
    return residual.T @ residual / residual.shape[0]  # type: ignore[no-any-return]


def _loglik(values: np.ndarray, phi: np.ndarray, kappa: np.ndarray, sigma: np.ndarray) -> float:  # type: ignore[type-arg]
    det = float(np.linalg.det(sigma))
    if not det > 0:
        msg = f"Σ = {sigma.tolist()} is singular."
        raise SingularSigma(msg)
    residual = vec_of(values - np.outer(phi, kappa))
    quad = float(np.einsum("bnj,jk,bnk->", residual, np.linalg.inv(sigma), residual))
    n_cells = values.size
    return -0.5 * n_cells * (2 * _LOG_2PI + np.log(det)) - 0.5 * quad


def hom_loglik(Yc: DataMatrix | Any, params: HomParams) -> float:
    """
    Log-likelihood of row-centered data:

    ``-(B(N+1)/2) log((2π)² det Σ) - ½ Σ_b ‖Ỹ_{b,:} - φ_b κ‖²_P``.

    ``params.psi`` is not used; center the data with `center` first.
    """
    values = as_values(Yc)
    if values.shape != (params.phi.size, params.kappa.size):
        msg = (
            f"Data of shape {values.shape} do not match parameters "
            f"with B={params.phi.size}, N+1={params.kappa.size}."
        )
        raise DimensionMismatch(msg)
    return _loglik(values, params.phi, params.kappa, params.sigma)


def _floor_sigma(sigma: np.ndarray, scale: float) -> np.ndarray:  # type: ignore[type-arg]
    eigen = np.linalg.eigvalsh(sigma)
    trace = float(eigen.sum())
    if trace > 0 and eigen[0] > 1e-14 * trace:
        return sigma
    floor = _EXACT_FIT_RTOL * scale + 1e-13 * max(trace, 0.0)
    logger.info("Residual covariance is singular; adding %.3g to its diagonal.", floor)
    return sigma + floor * np.eye(2)


def _gauge(phi: np.ndarray, kappa: np.ndarray) -> tuple[np.ndarray, np.ndarray]:  # type: ignore[type-arg]
    kappa = kappa - kappa.mean()
    norm = float(np.linalg.norm(kappa))
    kappa, phi = kappa / norm, phi * norm
    largest = kappa[np.argmax(np.abs(kappa))]
    rotation = np.conj(largest) / abs(largest)
    return phi / rotation, kappa * rotation


def _svd_start(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:  # type: ignore[type-arg]
    U, s, Vh = np.linalg.svd(values, full_matrices=False)
    if s.size > 1 and s[1] >= (1 - 1e-10) * s[0]:
        logger.warning(
            "Leading singular values tie (%.6g, %.6g); using the first factor.",
            s[0],
            s[1],
        )
    return U[:, 0] * s[0], Vh[0]


def fit_hom(
    Y: DataMatrix | Any,
    *,
    maxiter: int = 200,
    min_delta_loglik: float = 1e-4,
    sigma_known: Any = None,
    init: HomParams | None = None,
) -> FitReport:
    """
    Maximum likelihood fit of the homoscedastic drift model.

    ψ̂ is the row mean. The alternation starts from the rank-1 SVD of the centered
    data, or from ``init``, and repeats Σ̂ → φ̂ → κ̂ → renormalise until the
    log-likelihood gain drops below ``min_delta_loglik`` or ``maxiter`` sweeps
    were made.

    Parameters
    ----------
    Y :
        Data matrix with B ≥ 2 batches and N+1 ≥ 3 frequencies.
    maxiter :
        Maximum number of sweeps.
    min_delta_loglik :
        Stop when a sweep gains less than this.
    sigma_known :
        Fixed noise covariance; Σ is then not updated.
    init :
        Warm start for (φ, κ).

    Returns
    -------
    FitReport
        The Σ̂ returned is the one used for the last log-likelihood in the trace.

    Raises
    ------
    EmptyData
        If there is no data.
    DegenerateData
        If the centered data matrix is numerically zero.
    """
    values = as_values(Y)
    n_batches, n_freq = values.shape
    if n_batches < 2 or n_freq < 3:
        msg = f"Need B >= 2 and N+1 >= 3, got shape {values.shape}."
        raise InvalidDimension(msg)
    psi, centered = center(values)
    scale = float(np.mean(np.abs(centered) ** 2))
    if scale <= 1e-28 * max(float(np.mean(np.abs(values) ** 2)), np.finfo(float).tiny):
        msg = "Centered data are numerically zero."
        raise DegenerateData(msg)

    if init is None:
        phi, kappa = _svd_start(centered)
    else:
        if init.phi.shape != (n_batches,) or init.kappa.shape != (n_freq,):
            msg = "Warm start does not match the data shape."
            raise DimensionMismatch(msg)
        phi, kappa = np.array(init.phi), np.array(init.kappa)
    fixed_sigma = None if sigma_known is None else ensure_spd2(sigma_known)

    trace: list[float] = []
    converged = False
    n_iter = 0
    sigma = fixed_sigma
    for n_iter in range(1, maxiter + 1):
        if fixed_sigma is None:
            raw = sigma_mle(phi, kappa, centered)
            exact = float(np.trace(raw)) <= _EXACT_FIT_RTOL * scale
            sigma = _floor_sigma(raw, scale)
        else:
            exact = False
        assert sigma is not None
        precision = np.linalg.inv(sigma)
        phi = phi_mle(kappa, precision, centered)
        kappa = kappa_mle(phi, precision, centered)
        norm = float(np.linalg.norm(kappa))
        kappa, phi = kappa / norm, phi * norm
        loglik = _loglik(centered, phi, kappa, sigma)
        logger.debug("hom sweep %d: loglik %.10g", n_iter, loglik)
        trace.append(loglik)
        if exact or (len(trace) > 1 and trace[-1] - trace[-2] < min_delta_loglik):
            converged = True
            break
    if not converged:
        logger.warning("fit_hom stopped after %d sweeps without converging.", maxiter)

    phi, kappa = _gauge(phi, kappa)
    params = HomParams(psi=psi, phi=phi, kappa=kappa, sigma=sigma)
    return FitReport(
        params=params, loglik_trace=trace, n_iter=n_iter, converged=converged
    )
