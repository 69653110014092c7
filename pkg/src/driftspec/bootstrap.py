"""
Parametric bootstrap bands for the spectrum of a drift-model fit.

Data sets are simulated from the fitted parameters, refitted with the original fit
as warm start, phase-corrected and sign-aligned with the original spectrum. The
bands are per-frequency quantiles of I and ω, taken separately.

With ``bias_correct=True`` a pilot round first estimates the bias of the noise
covariance (additive) and of ‖φ‖ (multiplicative), and the main round simulates
from the corrected parameters. Replicate ``i`` always uses the random stream
``seed XOR i``; pilot replicates continue the index after the main ones.
"""

from __future__ import annotations

import logging
from typing import Any

import numpy as np
from pydantic import Field

from driftspec._utils import ordered_map, replicate_rng
from driftspec.base import Base, RealMatrix
from driftspec.config import FitOptions
from driftspec.data import DataMatrix, as_values
from driftspec.exceptions import DimensionMismatch, DriftSpecError, RefitFailure
from driftspec.het import HetFitReport, HetParams, fit_het
from driftspec.hom import FitReport, HomParams, fit_hom
from driftspec.phase import Band, SpectrumResult, extract_spectrum
from driftspec.simulate import draw_from_params

__all__ = ["BiasCorrection", "BootstrapResult", "parametric_bootstrap"]

logger = logging.getLogger(__name__)

MAX_FAILURE_RATE = 0.05
_EIGEN_FLOOR = 1e-12


class BiasCorrection(Base):
    """
    Bias estimates from the pilot round.

    ``sigma_additive`` is ``mean(Σ̂*) - Σ̂`` and is usually negative definite;
    ``phi_multiplicative`` is ``mean(‖φ̂*‖) / ‖φ̂‖``.
    """

    sigma_additive: RealMatrix
    phi_multiplicative: float = Field(gt=0)
    pilot_replicates: int = Field(ge=1)


class BootstrapResult(Base):
    """
    Per-frequency bootstrap bands around the spectrum of a fit.
    """

    replicates: int = Field(ge=1)
    seed: int
    point: SpectrumResult
    band_I: Band
    band_omega: Band
    bias: BiasCorrection | None = None
    n_failed: int = Field(default=0, ge=0)
    samples_I: RealMatrix
    samples_omega: RealMatrix


def _noise_matrix(params: HomParams | HetParams) -> np.ndarray:  # type: ignore[type-arg]
    return params.sigma0 if isinstance(params, HetParams) else params.sigma


def _refit(
    values: np.ndarray,  # type: ignore[type-arg]
    params: HomParams | HetParams,
    options: FitOptions,
) -> HomParams | HetParams:
    if isinstance(params, HetParams):
        return fit_het(
            values,
            maxiter=options.maxiter,
            min_delta_loglik=options.min_delta_loglik,
            start_c_opt=options.start_c_opt,
            delta=options.delta,
            init=params,
        ).params
    hom_init = HomParams(
        psi=values.mean(axis=1), phi=params.phi, kappa=params.kappa, sigma=params.sigma
    )
    return fit_hom(
        values,
        maxiter=options.maxiter,
        min_delta_loglik=options.min_delta_loglik,
        init=hom_init,
    ).params


def _clamp_spd(matrix: np.ndarray) -> np.ndarray:  # type: ignore[type-arg]
    symmetric = (matrix + matrix.T) / 2
    values, vectors = np.linalg.eigh(symmetric)
    floor = _EIGEN_FLOOR * max(float(np.trace(symmetric)), float(np.abs(values).max()))
    return (vectors * np.maximum(values, floor)) @ vectors.T  # type: ignore[no-any-return]


def _corrected(
    params: HomParams | HetParams, bias: BiasCorrection
) -> HomParams | HetParams:
    sigma = _clamp_spd(_noise_matrix(params) - bias.sigma_additive)
    phi = params.phi / bias.phi_multiplicative
    if isinstance(params, HetParams):
        return HetParams(**{**dict(params), "sigma0": sigma, "phi": phi})
    return HomParams(**{**dict(params), "sigma": sigma, "phi": phi})


def _aligned(spectrum: SpectrumResult, reference: np.ndarray) -> tuple[np.ndarray, np.ndarray]:  # type: ignore[type-arg]
    # the sign of (I, ω) closest to the reference spectrum
    I, omega = spectrum.I, spectrum.omega
    if np.linalg.norm(I + reference) < np.linalg.norm(I - reference):
        return -I, -omega
    return I, omega


def _run_replicates(
    params: HomParams | HetParams,
    warm_start: HomParams | HetParams,
    indices: range,
    seed: int,
    threads: int,
    options: FitOptions,
) -> list[HomParams | HetParams | None]:
    def one(index: int) -> HomParams | HetParams | None:
        values = draw_from_params(params, replicate_rng(seed, index))
        try:
            return _refit(values, warm_start, options)
        except DriftSpecError as err:
            logger.info("Bootstrap replicate %d failed: %s", index, err)
            return None

    return ordered_map(one, list(indices), threads)


def _check_failures(n_failed: int, n_total: int, stage: str) -> None:
    if n_failed > MAX_FAILURE_RATE * n_total:
        msg = f"{n_failed} of {n_total} {stage} refits failed."
        raise RefitFailure(msg, n_failed=n_failed, n_total=n_total)
    if n_failed:
        logger.warning("%d of %d %s refits failed and were dropped.", n_failed, n_total, stage)


def parametric_bootstrap(
    Y: DataMatrix | Any,
    fit: FitReport | HetFitReport,
    *,
    replicates: int = 200,
    level: float = 0.95,
    bias_correct: bool = False,
    pilot_replicates: int = 50,
    seed: int = 0,
    threads: int = 1,
    options: FitOptions | None = None,
) -> BootstrapResult:
    """
    Parametric bootstrap bands for the spectrum of ``fit``.

    Parameters
    ----------
    Y :
        The data the fit was computed from; only its shape is used.
    fit :
        A homoscedastic or heteroscedastic fit.
    replicates :
        Number of main-round replicates R.
    level :
        Nominal coverage of the bands; quantiles ``(1 - level)/2`` and
        ``(1 + level)/2`` are reported.
    bias_correct :
        Run a pilot round of ``pilot_replicates`` refits and simulate from
        bias-corrected Σ̂ (or Σ̂₀) and φ̂.
    seed, threads :
        Master seed and worker threads. The result does not depend on ``threads``.
    options :
        Optimiser constants for the refits.

    Raises
    ------
    RefitFailure
        If more than 5% of the refits in a round fail.
    """
    values = as_values(Y)
    params = fit.params
    if values.shape != (params.phi.size, params.kappa.size):
        msg = f"Data of shape {values.shape} do not match the fit."
        raise DimensionMismatch(msg)
    options = options or FitOptions()
    point = extract_spectrum(params.kappa)

    bias = None
    simulate_from = params
    if bias_correct:
        pilot = _run_replicates(
            params,
            params,
            range(replicates, replicates + pilot_replicates),
            seed,
            threads,
            options,
        )
        done = [p for p in pilot if p is not None]
        _check_failures(pilot_replicates - len(done), pilot_replicates, "pilot")
        mean_sigma = np.mean([_noise_matrix(p) for p in done], axis=0)
        mean_norm = float(np.mean([np.linalg.norm(p.phi) for p in done]))
        bias = BiasCorrection(
            sigma_additive=mean_sigma - _noise_matrix(params),
            phi_multiplicative=mean_norm / float(np.linalg.norm(params.phi)),
            pilot_replicates=len(done),
        )
        logger.info(
            "Bias estimates: Σ additive %s, φ multiplicative %.6g",
            bias.sigma_additive.tolist(),
            bias.phi_multiplicative,
        )
        simulate_from = _corrected(params, bias)

    refits = _run_replicates(
        simulate_from, params, range(replicates), seed, threads, options
    )
    spectra_I, spectra_omega = [], []
    n_failed = 0
    for refit in refits:
        if refit is None:
            n_failed += 1
            continue
        try:
            spectrum = extract_spectrum(refit.kappa)
        except DriftSpecError as err:
            logger.info("Dropping a degenerate bootstrap spectrum: %s", err)
            n_failed += 1
            continue
        I, omega = _aligned(spectrum, point.I)
        spectra_I.append(I)
        spectra_omega.append(omega)
    _check_failures(n_failed, replicates, "bootstrap")

    samples_I, samples_omega = np.array(spectra_I), np.array(spectra_omega)
    quantiles = [(1 - level) / 2, (1 + level) / 2]
    low_I, high_I = np.quantile(samples_I, quantiles, axis=0)
    low_omega, high_omega = np.quantile(samples_omega, quantiles, axis=0)
    return BootstrapResult(
        replicates=replicates,
        seed=seed,
        point=point,
        band_I=Band(lower=low_I, upper=high_I, level=level),
        band_omega=Band(lower=low_omega, upper=high_omega, level=level),
        bias=bias,
        n_failed=n_failed,
        samples_I=samples_I,
        samples_omega=samples_omega,
    )
