"""
Phase correction of a complex direction κ into a real spectrum.

The maximum method picks the phase λ maximising ``‖Re(e^{iλ} κ)‖``. Since
``‖Re(e^{iλ}κ)‖² = (‖κ‖² + Re(e^{2iλ} κᵀκ)) / 2`` the maximisers are
``-Arg(κᵀκ)/2`` modulo π. The remaining sign ambiguity is settled by flipping the
spectrum so that its largest entry in modulus is positive.

The map fails to be defined on two singular sets: κᵀκ = 0, where every phase is
optimal, and ``|max I| = |min I|``, where the sign flip is ambiguous.
"""

from __future__ import annotations

import enum
from typing import Any, Literal

try:
    from typing import Self
except ImportError:  # Python < 3.11
    from typing_extensions import Self

import numpy as np
from pydantic import Field, model_validator

from driftspec.base import Base, RealVector
from driftspec.chart import rotation_to_last_axis
from driftspec.exceptions import (
    InvalidDimension,
    PhaseDegenerate,
    PreconditionError,
    SignDegenerate,
    SingularityM1M2,
)

__all__ = [
    "ALL_PHASES",
    "Band",
    "DegeneracyFlags",
    "PhaseMarker",
    "SpectrumResult",
    "extract_spectrum",
    "jacobian_g",
    "max_method_lambda",
]

TOL_M1 = 1e-12
TOL_M2 = 1e-12
_UNIT_NORM_ATOL = 1e-8
_TWO_PI = 2 * np.pi


class PhaseMarker(enum.Enum):
    """
    In-band marker for the case where every phase is a maximiser.
    """

    ALL_PHASES = "all-phases"


ALL_PHASES = PhaseMarker.ALL_PHASES


class DegeneracyFlags(Base):
    """
    Which singular set a direction is numerically close to.
    """

    near_M1: bool = False
    near_M2: bool = False


class SpectrumResult(Base):
    """
    A phase-corrected spectrum I and the orthogonal wave ω.
    """

    I: RealVector
    omega: RealVector
    lambda_opt: float = Field(ge=0, lt=_TWO_PI)
    flipped: bool = False
    degenerate_flags: DegeneracyFlags = Field(default_factory=DegeneracyFlags)


class Band(Base):
    """
    Pointwise interval per frequency at a nominal level.
    """

    lower: RealVector
    upper: RealVector
    level: float = Field(gt=0, lt=1)

    @model_validator(mode="after")
    def _ensure_ordered(self) -> Self:
        if self.lower.shape != self.upper.shape:
            msg = f"Bounds of shapes {self.lower.shape} and {self.upper.shape}."
            raise ValueError(msg)
        if np.any(self.lower > self.upper):
            msg = "Lower bound exceeds upper bound."
            raise ValueError(msg)
        return self

    @property
    def width(self) -> np.ndarray:  # type: ignore[type-arg]
        """
        Upper minus lower bound.
        """
        return self.upper - self.lower  # type: ignore[no-any-return]


def _unit_kappa(kappa: Any) -> np.ndarray:  # type: ignore[type-arg]
    k = np.asarray(getattr(kappa, "rep", kappa), dtype=np.complex128)
    if k.ndim != 1 or k.size == 0:
        msg = f"Expected a non-empty complex vector, got shape {k.shape}."
        raise InvalidDimension(msg)
    norm = float(np.linalg.norm(k))
    if abs(norm - 1) > _UNIT_NORM_ATOL:
        msg = f"κ must have unit norm, got {norm}."
        raise PreconditionError(msg)
    return k


def _wrap(angle: float) -> float:
    wrapped = float(np.mod(angle, _TWO_PI))
    # np.mod can round up to exactly 2π
    return 0.0 if wrapped >= _TWO_PI else wrapped


def max_method_lambda(
    kappa: Any, *, tol: float = TOL_M1
) -> tuple[float, float] | PhaseMarker:
    """
    The phases maximising ``‖Re(e^{iλ} κ)‖``.

    Returns
    -------
    The two maximisers ``{π - Arg(κᵀκ)/2, 2π - Arg(κᵀκ)/2}`` reduced to [0, 2π),
    or `ALL_PHASES` when ``|κᵀκ| < tol ‖κ‖²``.
    """
    k = _unit_kappa(kappa)
    s = complex(np.sum(k * k))
    if abs(s) < tol * float(np.vdot(k, k).real):
        return ALL_PHASES
    alpha = _wrap(np.angle(s))
    return _wrap(np.pi - alpha / 2), _wrap(_TWO_PI - alpha / 2)


def _flip_sign(spectrum: np.ndarray) -> int:  # type: ignore[type-arg]
    return -1 if abs(spectrum.max()) < abs(spectrum.min()) else 1


def extract_spectrum(
    kappa: Any,
    *,
    tol_m1: float = TOL_M1,
    tol_m2: float = TOL_M2,
    strict: bool = True,
) -> SpectrumResult:
    """
    Phase-correct a unit direction κ into a spectrum with positive dominant peak.

    Parameters
    ----------
    kappa :
        Unit-norm complex vector, or a `ProjectivePoint`.
    tol_m1, tol_m2 :
        Tolerances for the two singular sets.
    strict :
        Raise on degenerate input. With ``strict=False`` the flags are set instead;
        the spectrum is zero near M₁ and left unflipped near M₂.

    Raises
    ------
    PhaseDegenerate
        If ``|κᵀκ| < tol_m1``.
    SignDegenerate
        If ``||max I| - |min I|| < tol_m2``.
    """
    k = _unit_kappa(kappa)
    s = complex(np.sum(k * k))
    if abs(s) < tol_m1 * float(np.vdot(k, k).real):
        if strict:
            msg = f"|κᵀκ| = {abs(s):.3g}; no phase is preferred."
            raise PhaseDegenerate(msg)
        zeros = np.zeros(k.shape[0])
        return SpectrumResult(
            I=zeros,
            omega=zeros,
            lambda_opt=0.0,
            degenerate_flags=DegeneracyFlags(near_M1=True),
        )

    lam = -_wrap(np.angle(s)) / 2
    spectrum = np.real(np.exp(1j * lam) * k)
    near_m2 = abs(abs(spectrum.max()) - abs(spectrum.min())) < tol_m2
    if near_m2 and strict:
        msg = "The largest and smallest spectrum entries have equal modulus."
        raise SignDegenerate(msg)
    flipped = (not near_m2) and _flip_sign(spectrum) < 0
    if flipped:
        lam += np.pi
    lambda_opt = _wrap(lam)
    rotated = np.exp(1j * lambda_opt) * k
    return SpectrumResult(
        I=rotated.real,
        omega=rotated.imag,
        lambda_opt=lambda_opt,
        flipped=flipped,
        degenerate_flags=DegeneracyFlags(near_M2=near_m2),
    )


def _pattern_matrix(n: int) -> np.ndarray:  # type: ignore[type-arg]
    # derivative of (x₁ + i x₂, …, x_{2N-3} + i x_{2N-2}, 1) in x
    A = np.zeros((n, 2 * (n - 1)), dtype=np.complex128)
    for k in range(n - 1):
        A[k, 2 * k] = 1
        A[k, 2 * k + 1] = 1j
    return A


def jacobian_g(kappa0: Any, *, sign: Literal[1, -1] | None = None) -> np.ndarray:  # type: ignore[type-arg]
    """
    Jacobian at ``x = 0`` of the spectrum as a function of the chart coordinates
    around [κ⁰].

    With ``s = κ⁰ᵀκ⁰ = r e^{iα}`` and ``A`` the derivative of the chart lift,

    ``J = ±Re(e^{-iα/2} (-i κ⁰ Im(s̄ κ⁰ᵀ R* A) / r² + R* A))``.

    Parameters
    ----------
    kappa0 :
        Unit-norm anchor of length N ≥ 2 (Helmert coordinates).
    sign :
        The sign flip to apply. By default the flip of ``extract_spectrum(kappa0)``;
        pass it explicitly when the flip is decided in another basis.

    Returns
    -------
    Real N×2(N-1) matrix.

    Raises
    ------
    SingularityM1M2
        If κ⁰ is numerically on one of the singular sets.
    """
    k = _unit_kappa(kappa0)
    n = k.shape[0]
    if n < 2:
        msg = "The Jacobian needs at least two coordinates."
        raise InvalidDimension(msg)
    if sign is None:
        try:
            spectrum = extract_spectrum(k)
        except (PhaseDegenerate, SignDegenerate) as err:
            raise SingularityM1M2(str(err)) from err
        sign = -1 if spectrum.flipped else 1
    s = complex(np.sum(k * k))
    r = abs(s)
    if r < TOL_M1:
        msg = f"|κ⁰ᵀκ⁰| = {r:.3g} is on the singular set."
        raise SingularityM1M2(msg)
    alpha = _wrap(np.angle(s))
    lift = rotation_to_last_axis(k).conj().T @ _pattern_matrix(n)
    d_arg = 2 * np.imag(np.conj(s) * (k @ lift)) / r**2
    inner = -0.5j * np.outer(k, d_arg) + lift
    return sign * np.real(np.exp(-0.5j * alpha) * inner)  # type: ignore[no-any-return]
