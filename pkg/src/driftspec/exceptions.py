"""
Errors raised by driftspec.

Every error derives from `DriftSpecError`. The `category` class attribute tells the
command line interface which exit code to use: ``"usage"`` errors exit with 1,
``"data"`` errors with 2 and ``"convergence"`` errors with 3.
"""

from __future__ import annotations

from typing import Any, ClassVar, Literal

__all__ = [
    "ChartDomainError",
    "ConfigError",
    "DegenerateData",
    "DegenerateFirstBatch",
    "DegenerateSpectrum",
    "DimensionMismatch",
    "DriftSpecError",
    "EmptyData",
    "IncompleteGrid",
    "IndexOutOfRange",
    "InvalidDimension",
    "InvalidSpec",
    "IoError",
    "NonMonotoneFrequency",
    "OptimizerFailure",
    "ParseError",
    "PhaseDegenerate",
    "PreconditionError",
    "RefitFailure",
    "RegionOutOfRange",
    "SignDegenerate",
    "SingularHessian",
    "SingularSigma",
    "SingularSigmaB",
    "SingularityM1M2",
    "TooFewSamples",
    "ZeroDirection",
]

ErrorCategory = Literal["usage", "data", "convergence"]


class DriftSpecError(Exception):
    """
    Base class for all driftspec errors.
    """

    category: ClassVar[ErrorCategory] = "data"


class DimensionMismatch(DriftSpecError, ValueError):
    """
    Operands have incompatible lengths or shapes.
    """


class InvalidDimension(DriftSpecError, ValueError):
    """
    A dimension is outside the range an operation supports.
    """


class EmptyData(DriftSpecError, ValueError):
    """
    The data matrix has no batches or no frequencies.
    """


class DegenerateData(DriftSpecError, ValueError):
    """
    The centered data matrix is numerically zero.
    """


class DegenerateSpectrum(DriftSpecError, ValueError):
    """
    A spectrum is constant, so min-max normalisation is undefined.
    """


class SingularSigma(DriftSpecError, ValueError):
    """
    A noise covariance matrix is not symmetric positive definite.
    """


SingularSigmaB = SingularSigma


class ZeroDirection(DriftSpecError, ValueError):
    """
    A conditioning vector of a closed-form update is numerically zero.
    """


class PhaseDegenerate(DriftSpecError, ValueError):
    """
    κᵀκ vanishes, so every phase maximises the real part equally.
    """


class SignDegenerate(DriftSpecError, ValueError):
    """
    The largest and smallest spectrum entries have equal modulus.
    """


class SingularityM1M2(DriftSpecError, ValueError):
    """
    The spectrum map is not differentiable at the requested point.
    """


class IndexOutOfRange(DriftSpecError, IndexError):
    """
    A batch index is outside ``0..B-1``.
    """


class PreconditionError(DriftSpecError, ValueError):
    """
    An input violates a modelling assumption of the operation.
    """


class ChartDomainError(DriftSpecError, ValueError):
    """
    A projective point lies outside the domain of the chart.
    """


class SingularHessian(DriftSpecError, ValueError):
    """
    The mean Hessian of the loss is not positive definite.
    """


class DegenerateFirstBatch(DriftSpecError, ValueError):
    """
    The first batch cannot seed the boundary-maximum sequence.
    """


class InvalidSpec(DriftSpecError, ValueError):
    """
    A simulation specification is inconsistent.
    """


class TooFewSamples(DriftSpecError, ValueError):
    """
    A statistical test received too few observations.
    """


class RegionOutOfRange(DriftSpecError, ValueError):
    """
    A flat region reaches beyond the spectrum.
    """


class IoError(DriftSpecError, OSError):
    """
    Reading or writing a file failed.
    """


class ParseError(DriftSpecError, ValueError):
    """
    A CSV row could not be parsed.

    Parameters
    ----------
    line :
        1-based line number in the file (the header is line 1).
    """

    def __init__(self, msg: str, *, line: int) -> None:
        super().__init__(msg)
        self.line = line


class IncompleteGrid(DriftSpecError, ValueError):
    """
    The long-format CSV does not cover every (batch, frequency) cell.
    """

    def __init__(self, msg: str, *, missing: list[tuple[int, int]]) -> None:
        super().__init__(msg)
        self.missing = missing


class NonMonotoneFrequency(DriftSpecError, ValueError):
    """
    The frequency axis is not strictly monotone.
    """


class OptimizerFailure(DriftSpecError):
    """
    An inner optimiser returned a non-finite or failed result.
    """

    category = "convergence"

    def __init__(self, msg: str, *, diagnostics: dict[str, Any] | None = None) -> None:
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


class RefitFailure(DriftSpecError):
    """
    Too many bootstrap refits failed.
    """

    category = "convergence"

    def __init__(self, msg: str, *, n_failed: int, n_total: int) -> None:
        super().__init__(msg)
        self.n_failed = n_failed
        self.n_total = n_total


class ConfigError(DriftSpecError, ValueError):
    """
    A configuration file or setting is invalid.
    """

    category = "usage"
