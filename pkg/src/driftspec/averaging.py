"""
The averaging model: average the batches, phase-correct, min-max normalise.
"""

from __future__ import annotations

import logging
from typing import Any, Literal

import numpy as np

from driftspec.base import Base, ComplexVector
from driftspec.data import DataMatrix, as_values
from driftspec.exceptions import DegenerateSpectrum
from driftspec.phase import SpectrumResult, extract_spectrum

__all__ = ["AveragedSignal", "average", "averaging_spectrum"]

logger = logging.getLogger(__name__)


class AveragedSignal(Base):
    """
    The batch average ``Z_ν = (1/B) Σ_b Y_{b,ν}``.
    """

    Z: ComplexVector


def average(Y: DataMatrix | Any) -> AveragedSignal:
    """
    Column means of the data matrix.

    Raises
    ------
    EmptyData
        If there are no batches.
    """
    return AveragedSignal(Z=as_values(Y).mean(axis=0))


def _auto_phase(Z: np.ndarray) -> float:  # type: ignore[type-arg]
    centered = Z - Z.mean()
    norm = float(np.linalg.norm(centered))
    if norm == 0:
        msg = "The averaged signal is constant."
        raise DegenerateSpectrum(msg)
    result = extract_spectrum(centered / norm, strict=False)
    if result.degenerate_flags.near_M1:
        logger.warning("Averaged signal has no preferred phase; using λ = 0.")
    return result.lambda_opt


def averaging_spectrum(
    Z: AveragedSignal | Any, lam: float | Literal["auto"] = "auto"
) -> SpectrumResult:
    """
    The min-max normalised real part ``I = (Ĩ - min Ĩ) / (max Ĩ - min Ĩ)`` of
    ``Ĩ = Re(e^{iλ} Z)``.

    Parameters
    ----------
    Z :
        The averaged signal or a complex vector.
    lam :
        Phase in radians, or ``"auto"`` for the maximum method applied to the
        centered, normalised signal.

    Returns
    -------
    SpectrumResult
        ``omega`` is ``Im(e^{iλ} Z)`` scaled by the same factor as I.

    Raises
    ------
    DegenerateSpectrum
        If ``max Ĩ = min Ĩ``.
    """
    values = np.asarray(getattr(Z, "Z", Z), dtype=np.complex128)
    phase = _auto_phase(values) if lam == "auto" else float(lam)
    rotated = np.exp(1j * phase) * values
    real = rotated.real
    spread = float(real.max() - real.min())
    if not spread > 0:
        msg = "The phase-corrected average is constant."
        raise DegenerateSpectrum(msg)
    return SpectrumResult(
        I=(real - real.min()) / spread,
        omega=rotated.imag / spread,
        lambda_opt=float(np.mod(phase, 2 * np.pi)),
    )
