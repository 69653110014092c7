"""
A local chart of complex projective space around an anchor [κ⁰].

A unitary R with ``R κ⁰ = e_N`` moves the anchor to the last axis. A point [κ] with
``(Rκ)_N ≠ 0`` then has the chart coordinates ``x = (Re, Im)`` of
``(Rκ)_k / (Rκ)_N`` for ``k < N``, interleaved, so ``x ∈ ℝ^{2(N-1)}`` and the
anchor sits at ``x = 0``.
"""

from __future__ import annotations

from typing import Annotated, Any

try:
    from typing import Self
except ImportError:  # Python < 3.11
    from typing_extensions import Self

import numpy as np
from pydantic import AfterValidator, model_validator

from driftspec.algebra import ProjectivePoint, comp_of, vec_of
from driftspec.base import Base, ComplexMatrix, RealVector
from driftspec.exceptions import ChartDomainError, DimensionMismatch, InvalidDimension

__all__ = ["ChartPoint", "chart_forward", "chart_inverse", "rotation_to_last_axis"]

_DOMAIN_RTOL = 1e-12


def rotation_to_last_axis(kappa0: Any) -> np.ndarray:  # type: ignore[type-arg]
    """
    A unitary R with ``R κ⁰ = e_N`` for a unit vector κ⁰.

    R is a complex Householder reflection followed by a phase on the last axis, so
    it is a deterministic function of κ⁰.
    """
    k = np.asarray(kappa0, dtype=np.complex128)
    n = k.shape[0]
    last = k[-1]
    gamma = last / abs(last) if abs(last) > 0 else 1.0 + 0.0j
    v = k.copy()
    v[-1] -= gamma
    vv = float(np.vdot(v, v).real)
    householder = np.eye(n, dtype=np.complex128)
    if vv > 1e-30:
        householder -= 2 * np.outer(v, v.conj()) / vv
    phase = np.ones(n, dtype=np.complex128)
    phase[-1] = np.conj(gamma)
    return phase[:, None] * householder  # type: ignore[no-any-return]


def _ensure_unitary(R: np.ndarray) -> np.ndarray:  # type: ignore[type-arg]
    n = R.shape[0]
    if R.shape != (n, n) or not np.allclose(
        R.conj().T @ R, np.eye(n), rtol=0, atol=1e-10
    ):
        msg = "R must be a square unitary matrix."
        raise ValueError(msg)
    return R


class ChartPoint(Base):
    """
    Chart coordinates of a projective point relative to an anchor.
    """

    x: RealVector
    anchor: ProjectivePoint
    R: Annotated[ComplexMatrix, AfterValidator(_ensure_unitary)]

    @model_validator(mode="after")
    def _ensure_anchor_rotation(self) -> Self:
        n = self.anchor.dim
        if self.R.shape != (n, n):
            msg = f"R has shape {self.R.shape}, expected ({n}, {n})."
            raise ValueError(msg)
        target = np.zeros(n)
        target[-1] = 1
        if not np.allclose(self.R @ self.anchor.rep, target, rtol=0, atol=1e-10):
            msg = "R does not map the anchor to the last axis."
            raise ValueError(msg)
        if self.x.shape != (2 * (n - 1),):
            msg = f"Chart coordinates need length {2 * (n - 1)}, got {self.x.shape[0]}."
            raise ValueError(msg)
        return self


def _as_point(kappa: ProjectivePoint | Any) -> ProjectivePoint:
    if isinstance(kappa, ProjectivePoint):
        return kappa
    return ProjectivePoint.from_vector(kappa)


def chart_forward(kappa: ProjectivePoint | Any, anchor: ProjectivePoint) -> ChartPoint:
    """
    Chart coordinates of [κ] around ``anchor``.

    Raises
    ------
    ChartDomainError
        If the rotated last coordinate of κ vanishes.
    """
    point = _as_point(kappa)
    if point.dim != anchor.dim:
        msg = f"Point of dimension {point.dim} and anchor of dimension {anchor.dim}."
        raise DimensionMismatch(msg)
    if anchor.dim < 2:
        msg = "A chart needs at least two complex coordinates."
        raise InvalidDimension(msg)
    R = rotation_to_last_axis(anchor.rep)
    rotated = R @ point.rep
    if abs(rotated[-1]) <= _DOMAIN_RTOL:
        msg = "The point is orthogonal to the anchor and outside the chart domain."
        raise ChartDomainError(msg)
    x = vec_of(rotated[:-1] / rotated[-1]).reshape(-1)
    return ChartPoint(x=x, anchor=anchor, R=R)


def chart_inverse(x: Any, anchor: ProjectivePoint) -> ProjectivePoint:
    """
    The projective point with chart coordinates ``x`` around ``anchor``.

    The representative ``R* x̃ / ‖x̃‖`` with ``x̃ = (x₁ + i x₂, …, 1)`` is returned; it
    is in optimal position with ``anchor.rep``.

    Its squared projective distance to the anchor is ``2(1 - 1/√(‖x‖² + 1))``,
    since ``‖a - b‖² = 2(1 - Re a*b)`` for unit vectors. For ``‖x‖ = √3`` that is
    1, not the 0.5 obtained when the factor 2 is dropped.
    """
    coords = np.asarray(x, dtype=np.float64)
    if coords.shape != (2 * (anchor.dim - 1),):
        msg = f"Chart coordinates need length {2 * (anchor.dim - 1)}, got {coords.shape}."
        raise DimensionMismatch(msg)
    R = rotation_to_last_axis(anchor.rep)
    lifted = np.append(comp_of(coords.reshape(-1, 2)), 1.0 + 0.0j)
    return ProjectivePoint(rep=R.conj().T @ lifted / np.linalg.norm(lifted))
