"""
Goodness of fit, noise level over flat frequency regions and side-by-side model
comparison.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from typing import Any, Literal

try:
    from typing import Self
except ImportError:  # Python < 3.11
    from typing_extensions import Self

import numpy as np
import scipy.stats
from pydantic import Field, model_validator

from driftspec.algebra import inv_sqrt_spd2, vec_of
from driftspec.averaging import average, averaging_spectrum
from driftspec.base import Base, RealVector
from driftspec.config import FitOptions
from driftspec.data import DataMatrix, as_values
from driftspec.exceptions import (
    DegenerateSpectrum,
    DimensionMismatch,
    RegionOutOfRange,
    TooFewSamples,
)
from driftspec.het import HetParams, fit_het
from driftspec.hom import HomParams, fit_hom
from driftspec.phase import extract_spectrum

__all__ = [
    "FlatRegions",
    "GofReport",
    "KsResult",
    "ModelComparison",
    "ModelSummary",
    "compare_models",
    "goodness_of_fit",
    "ks_test",
    "snr_flat_std",
    "standardized_residuals",
]

logger = logging.getLogger(__name__)

MIN_KS_SAMPLES = 8
Normalize = Literal["minmax", "none"]
ModelName = Literal["averaging", "hom", "het"]


def _ensure_disjoint(regions: list[tuple[int, int]]) -> list[tuple[int, int]]:
    if not regions:
        msg = "At least one flat region is needed."
        raise ValueError(msg)
    for start, stop in regions:
        if not 0 <= start < stop:
            msg = f"Region [{start}, {stop}) is empty or negative."
            raise ValueError(msg)
    ordered = sorted(regions)
    for (_, stop), (start, _) in zip(ordered, ordered[1:], strict=False):
        if start < stop:
            msg = f"Regions {ordered} overlap."
            raise ValueError(msg)
    return regions


class FlatRegions(Base):
    """
    Half-open index intervals ``[start, stop)`` where the true spectrum is flat.
    """

    regions: list[tuple[int, int]]

    @model_validator(mode="after")
    def _ensure_valid(self) -> Self:
        _ensure_disjoint(self.regions)
        return self

    @classmethod
    def parse(cls, text: str) -> Self:
        """
        Parse ``"0:5,20:26"`` into regions ``[(0, 5), (20, 26)]``.
        """
        regions = []
        for part in text.split(","):
            start, sep, stop = part.strip().partition(":")
            if not sep:
                msg = f"Region {part!r} is not of the form start:stop."
                raise ValueError(msg)
            regions.append((int(start), int(stop)))
        return cls(regions=regions)

    def indices(self, n: int) -> np.ndarray:  # type: ignore[type-arg]
        """
        Sorted indices covered by the regions on a spectrum of length ``n``.

        Raises
        ------
        RegionOutOfRange
            If a region ends after ``n``.
        """
        for start, stop in self.regions:
            if stop > n:
                msg = f"Region [{start}, {stop}) exceeds spectrum length {n}."
                raise RegionOutOfRange(msg)
        return np.concatenate([np.arange(a, b) for a, b in sorted(self.regions)])


class KsResult(Base):
    """
    One-sample Kolmogorov-Smirnov test against the standard normal law.
    """

    statistic: float = Field(ge=0, le=1)
    p_value: float = Field(ge=0, le=1)
    n: int


class GofReport(Base):
    """
    KS tests of the pooled real and imaginary standardized residual components.
    """

    p_real: float = Field(ge=0, le=1)
    p_imag: float = Field(ge=0, le=1)
    ks_stat_real: float
    ks_stat_imag: float
    n: int


class ModelSummary(Base):
    """
    One row of a model comparison.
    """

    model: ModelName
    spectrum: RealVector
    flat_std: float
    gof: GofReport | None = None
    loglik: float | None = None


class ModelComparison(Base):
    """
    Spectra, fit quality and flat-region noise of several models on the same data.
    """

    normalize: Normalize
    regions: FlatRegions
    models: list[ModelSummary]

    def summary(self, model: ModelName) -> ModelSummary:
        """
        The row of ``model``.
        """
        for row in self.models:
            if row.model == model:
                return row
        msg = f"Model {model!r} was not compared."
        raise KeyError(msg)


def standardized_residuals(
    Y: DataMatrix | Any, params: HomParams | HetParams
) -> np.ndarray:  # type: ignore[type-arg]
    """
    Residual pairs ``Σ^{-1/2} vec(Y_{b,ν} - ψ_b - φ_b κ_ν)``, shape B×(N+1)×2.

    For heteroscedastic parameters the per-batch Σ_b is used and κ is shifted by c.

    Raises
    ------
    SingularSigma
        If a covariance is not positive definite.
    """
    values = as_values(Y)
    if values.shape != (params.phi.size, params.kappa.size):
        msg = f"Data of shape {values.shape} do not match the parameters."
        raise DimensionMismatch(msg)
    if isinstance(params, HetParams):
        residual = values - params.psi[:, None] - np.outer(params.phi, params.kappa_breve)
        whitening = inv_sqrt_spd2(params.sigmas())
        return np.einsum("bij,bnj->bni", whitening, vec_of(residual))  # type: ignore[no-any-return]
    residual = values - params.psi[:, None] - np.outer(params.phi, params.kappa)
    return vec_of(residual) @ inv_sqrt_spd2(params.sigma).T  # type: ignore[no-any-return]


def ks_test(sample: Any) -> KsResult:
    """
    One-sample KS test against N(0, 1) with the asymptotic Kolmogorov p-value.

    Raises
    ------
    TooFewSamples
        If fewer than 8 values are given.
    """
    values = np.asarray(sample, dtype=np.float64).reshape(-1)
    if values.size < MIN_KS_SAMPLES:
        msg = f"KS test needs at least {MIN_KS_SAMPLES} values, got {values.size}."
        raise TooFewSamples(msg)
    result = scipy.stats.ks_1samp(values, scipy.stats.norm.cdf, method="asymp")
    return KsResult(
        statistic=float(result.statistic),
        p_value=float(np.clip(result.pvalue, 0, 1)),
        n=int(values.size),
    )


def goodness_of_fit(Y: DataMatrix | Any, params: HomParams | HetParams) -> GofReport:
    """
    KS tests of the real and imaginary standardized residual components, each
    pooled over batches and frequencies.

    Estimated parameters are plugged in without a Lilliefors-type correction, so
    the p-values are conservative.
    """
    pairs = standardized_residuals(Y, params).reshape(-1, 2)
    real, imag = ks_test(pairs[:, 0]), ks_test(pairs[:, 1])
    return GofReport(
        p_real=real.p_value,
        p_imag=imag.p_value,
        ks_stat_real=real.statistic,
        ks_stat_imag=imag.statistic,
        n=real.n,
    )


def _minmax(spectrum: np.ndarray) -> np.ndarray:  # type: ignore[type-arg]
    spread = float(spectrum.max() - spectrum.min())
    if not spread > 0:
        msg = "A constant spectrum cannot be min-max normalised."
        raise DegenerateSpectrum(msg)
    return (spectrum - spectrum.min()) / spread  # type: ignore[no-any-return]


def snr_flat_std(
    I: Any, regions: FlatRegions, normalize: Normalize = "minmax"
) -> float:
    """
    Sample standard deviation (divisor n - 1) of the spectrum over the flat regions.

    Parameters
    ----------
    I :
        Real spectrum.
    regions :
        Flat frequency regions.
    normalize :
        ``"minmax"`` rescales the whole spectrum to [0, 1] first.

    Raises
    ------
    RegionOutOfRange
        If a region reaches beyond the spectrum.
    TooFewSamples
        If the regions cover fewer than two frequencies.
    """
    spectrum = np.asarray(I, dtype=np.float64)
    index = regions.indices(spectrum.size)
    if index.size < 2:
        msg = "Flat regions must cover at least two frequencies."
        raise TooFewSamples(msg)
    if normalize == "minmax":
        spectrum = _minmax(spectrum)
    return float(np.std(spectrum[index], ddof=1))


def compare_models(
    Y: DataMatrix | Any,
    regions: FlatRegions,
    *,
    models: Sequence[ModelName] = ("averaging", "hom"),
    normalize: Normalize = "minmax",
    options: FitOptions | None = None,
) -> ModelComparison:
    """
    Fit each model and report its spectrum, KS p-values and flat-region std.

    Spectra are min-max rescaled to [0, 1] when ``normalize="minmax"`` so that the
    averaging spectrum and the unit-norm drift spectra share a scale.
    """
    options = options or FitOptions()
    rows = []
    hom = None
    for model in models:
        gof: GofReport | None = None
        loglik: float | None = None
        if model == "averaging":
            spectrum = averaging_spectrum(average(Y)).I
        else:
            if hom is None:
                hom = fit_hom(
                    Y,
                    maxiter=options.maxiter,
                    min_delta_loglik=options.min_delta_loglik,
                )
            params: HomParams | HetParams = hom.params
            loglik = hom.loglik
            if model == "het":
                het = fit_het(
                    Y,
                    maxiter=options.maxiter,
                    min_delta_loglik=options.min_delta_loglik,
                    start_c_opt=options.start_c_opt,
                    delta=options.delta,
                    hom_fit=hom,
                )
                params, loglik = het.params, het.loglik
            spectrum = extract_spectrum(params.kappa).I
            gof = goodness_of_fit(Y, params)
        if normalize == "minmax":
            spectrum = _minmax(spectrum)
        rows.append(
            ModelSummary(
                model=model,
                spectrum=spectrum,
                flat_std=snr_flat_std(spectrum, regions, "none"),
                gof=gof,
                loglik=loglik,
            )
        )
        logger.info("%s: flat-region std %.4g", model, rows[-1].flat_std)
    return ModelComparison(normalize=normalize, regions=regions, models=rows)
