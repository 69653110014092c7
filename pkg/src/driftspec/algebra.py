"""
Real-matrix representation of complex arithmetic, Mahalanobis pairings and the
geometry of complex projective space.

A complex number z is identified with the real pair ``vec(z) = (Re z, Im z)`` and
with the rotation-scaling matrix ``M(z) = [[Re z, -Im z], [Im z, Re z]]`` so that
``vec(z w) = M(z) vec(w)``. For complex vectors z, w and a 2×2 matrix A:

* ``dia(z, A, w) = Σ_n M(z_n)ᵀ A M(w_n)``  (a 2×2 matrix)
* ``bul(z, A, w) = Σ_n M(z_n)ᵀ A vec(w_n)``  (a real pair)
* ``mahal_inner(z, A, w) = Σ_n vec(z_n)ᵀ A vec(w_n)``
"""

from __future__ import annotations

from typing import Annotated, Any

try:
    from typing import Self
except ImportError:  # Python < 3.11
    from typing_extensions import Self

import numpy as np
from pydantic import (
    AfterValidator,
    BeforeValidator,
    PlainSerializer,
    WithJsonSchema,
)

from driftspec.base import Base, ComplexVector, freeze
from driftspec.exceptions import DimensionMismatch, SingularSigma, ZeroDirection

__all__ = [
    "ProjectivePoint",
    "Spd2",
    "bul",
    "comp_of",
    "dia",
    "ensure_spd2",
    "inv_sqrt_spd2",
    "mahal_dist",
    "mahal_inner",
    "mat_of",
    "optimal_position",
    "proj_distance",
    "spd2_eigenvalues",
    "swap_eigenvalues",
    "vec_of",
]

_SYMMETRY_RTOL = 1e-12
_EIGEN_RTOL = 1e-14
_UNIT_NORM_ATOL = 1e-12


def vec_of(z: Any) -> np.ndarray:  # type: ignore[type-arg]
    """
    Real pairs ``(Re z, Im z)`` along a new trailing axis.

    For a contiguous complex128 input the result is a view.
    """
    array = np.asarray(z, dtype=np.complex128)
    if not array.flags.c_contiguous:
        array = array.copy()
    return array.reshape(-1).view(np.float64).reshape(*array.shape, 2)


def mat_of(z: Any) -> np.ndarray:  # type: ignore[type-arg]
    """
    Rotation-scaling matrices ``[[Re z, -Im z], [Im z, Re z]]`` along two new
    trailing axes.
    """
    array = np.asarray(z, dtype=np.complex128)
    out = np.empty((*array.shape, 2, 2))
    out[..., 0, 0] = array.real
    out[..., 0, 1] = -array.imag
    out[..., 1, 0] = array.imag
    out[..., 1, 1] = array.real
    return out


def comp_of(v: Any) -> np.ndarray:  # type: ignore[type-arg]
    """
    Inverse of `vec_of`: complex numbers from real pairs on the trailing axis.
    """
    pairs = np.asarray(v, dtype=np.float64)
    if pairs.shape[-1:] != (2,):
        msg = f"Expected real pairs on the last axis, got shape {pairs.shape}."
        raise DimensionMismatch(msg)
    return pairs[..., 0] + 1j * pairs[..., 1]  # type: ignore[no-any-return]


def _same_length(z: np.ndarray, w: np.ndarray) -> None:  # type: ignore[type-arg]
    if z.shape != w.shape:
        msg = f"Length mismatch: {z.shape} and {w.shape}."
        raise DimensionMismatch(msg)


def dia(z: Any, A: Any, w: Any) -> np.ndarray:  # type: ignore[type-arg]
    """
    The matrix pairing ``z ⋄_A w = Σ_n M(z_n)ᵀ A M(w_n)``.

    Parameters
    ----------
    z, w :
        Complex vectors of equal length.
    A :
        A real 2×2 matrix.
    """
    z = np.atleast_1d(np.asarray(z, dtype=np.complex128))
    w = np.atleast_1d(np.asarray(w, dtype=np.complex128))
    _same_length(z, w)
    return np.einsum("nji,jk,nkl->il", mat_of(z), np.asarray(A), mat_of(w))  # type: ignore[no-any-return]


def bul(z: Any, A: Any, w: Any) -> np.ndarray:  # type: ignore[type-arg]
    """
    The vector pairing ``z ●_A w = Σ_n M(z_n)ᵀ A vec(w_n)``.
    """
    z = np.atleast_1d(np.asarray(z, dtype=np.complex128))
    w = np.atleast_1d(np.asarray(w, dtype=np.complex128))
    _same_length(z, w)
    return np.einsum("nji,jk,nk->i", mat_of(z), np.asarray(A), vec_of(w))  # type: ignore[no-any-return]


def mahal_inner(z: Any, A: Any, w: Any) -> float:
    """
    The Mahalanobis inner product ``⟨z, w⟩_A = Σ_n vec(z_n)ᵀ A vec(w_n)``.
    """
    z = np.atleast_1d(np.asarray(z, dtype=np.complex128))
    w = np.atleast_1d(np.asarray(w, dtype=np.complex128))
    _same_length(z, w)
    return float(np.einsum("nj,jk,nk->", vec_of(z), np.asarray(A), vec_of(w)))


def mahal_dist(z: Any, A: Any, w: Any) -> float:
    """
    The Mahalanobis distance ``sqrt(⟨z - w, z - w⟩_A)``.
    """
    diff = np.atleast_1d(np.asarray(z, dtype=np.complex128)) - np.atleast_1d(
        np.asarray(w, dtype=np.complex128)
    )
    return float(np.sqrt(max(mahal_inner(diff, A, diff), 0.0)))


def _spd2_problem(m: np.ndarray) -> str | None:  # type: ignore[type-arg]
    if m.shape != (2, 2):
        return f"Expected a 2x2 matrix, got shape {m.shape}."
    if not np.all(np.isfinite(m)):
        return f"Matrix {m.tolist()} has non-finite entries."
    scale = float(np.max(np.abs(m)))
    if abs(m[0, 1] - m[1, 0]) > _SYMMETRY_RTOL * scale:
        return f"Matrix {m.tolist()} is not symmetric."
    trace = float(np.trace(m))
    if trace <= 0 or float(np.min(np.linalg.eigvalsh(m))) <= _EIGEN_RTOL * trace:
        return f"Matrix {m.tolist()} is not positive definite."
    return None


def _ensure_spd2(value: Any) -> np.ndarray:  # type: ignore[type-arg]
    m = np.asarray(value, dtype=np.float64)
    if (msg := _spd2_problem(m)) is not None:
        raise ValueError(msg)
    # store the exactly symmetric part
    return freeze((m + m.T) / 2)


def ensure_spd2(value: Any) -> np.ndarray:  # type: ignore[type-arg]
    """
    Validate a symmetric positive definite 2×2 matrix.

    Raises
    ------
    SingularSigma
        If the matrix is not symmetric to 1e-12 relative or an eigenvalue is not
        above 1e-14 times the trace.
    """
    try:
        return _ensure_spd2(value)
    except ValueError as err:
        raise SingularSigma(str(err)) from err


Spd2 = Annotated[
    np.ndarray,  # type: ignore[type-arg]
    BeforeValidator(_ensure_spd2),
    PlainSerializer(lambda m: np.asarray(m).tolist(), when_used="json"),
    WithJsonSchema(
        {
            "type": "array",
            "items": {
                "type": "array",
                "items": {"type": "number"},
                "minItems": 2,
                "maxItems": 2,
            },
            "minItems": 2,
            "maxItems": 2,
        }
    ),
]


def spd2_eigenvalues(m: Any) -> tuple[float, float]:
    """
    Eigenvalues ``(λ₁, λ₂)`` of a symmetric 2×2 matrix, largest first.
    """
    low, high = np.linalg.eigvalsh(np.asarray(m, dtype=np.float64))
    return float(high), float(low)


def swap_eigenvalues(m: Any) -> np.ndarray:  # type: ignore[type-arg]
    """
    The matrix with the same eigenvectors as ``m`` and its two eigenvalues swapped.

    For a symmetric 2×2 matrix this is ``tr(m) Id - m``.
    """
    m = np.asarray(m, dtype=np.float64)
    return np.trace(m) * np.eye(2) - m  # type: ignore[no-any-return]


def inv_sqrt_spd2(m: Any) -> np.ndarray:  # type: ignore[type-arg]
    """
    Inverse symmetric square root of SPD 2×2 matrices stacked on the leading axes.
    """
    m = np.asarray(m, dtype=np.float64)
    values, vectors = np.linalg.eigh(m)
    if np.any(values <= 0):
        msg = "Covariance is not positive definite."
        raise SingularSigma(msg)
    scaled = vectors / np.sqrt(values)[..., None, :]
    return scaled @ np.swapaxes(vectors, -1, -2)  # type: ignore[no-any-return]


def _ensure_unit_norm(rep: np.ndarray) -> np.ndarray:  # type: ignore[type-arg]
    norm = float(np.linalg.norm(rep))
    if abs(norm - 1) > _UNIT_NORM_ATOL:
        msg = f"Representative must have unit norm, got norm {norm}."
        raise ValueError(msg)
    return rep


class ProjectivePoint(Base):
    """
    A point [κ] of complex projective space, stored as a unit-norm representative.

    Every consumer of a `ProjectivePoint` is invariant under ``rep ↦ e^{iλ} rep``.
    """

    rep: Annotated[ComplexVector, AfterValidator(_ensure_unit_norm)]

    @classmethod
    def from_vector(cls, z: Any) -> Self:
        """
        Normalise a non-zero complex vector into a projective point.
        """
        z = np.asarray(z, dtype=np.complex128)
        norm = float(np.linalg.norm(z))
        if norm == 0 or not np.isfinite(norm):
            msg = "Cannot build a projective point from a zero vector."
            raise ZeroDirection(msg)
        return cls(rep=z / norm)

    @property
    def dim(self) -> int:
        """
        Number of complex coordinates.
        """
        return int(self.rep.shape[0])


def _check_dims(a: ProjectivePoint, b: ProjectivePoint) -> None:
    if a.dim != b.dim:
        msg = f"Projective points live in different spaces ({a.dim} and {b.dim})."
        raise DimensionMismatch(msg)


def _alignment(a: ProjectivePoint, b: ProjectivePoint) -> complex:
    # unit phase rotating b into optimal position with a
    inner = complex(np.vdot(b.rep, a.rep))
    if abs(inner) == 0:
        return 1.0 + 0.0j
    return inner / abs(inner)


def proj_distance(a: ProjectivePoint, b: ProjectivePoint) -> float:
    """
    Distance ``min_λ ‖a - e^{iλ} b‖`` between two projective points.

    The minimum is attained at the phase of ``b* a``; when ``b* a = 0`` every phase
    is optimal and the distance is √2.
    """
    _check_dims(a, b)
    return float(np.linalg.norm(a.rep - _alignment(a, b) * b.rep))


def optimal_position(a: ProjectivePoint, b: ProjectivePoint) -> ProjectivePoint:
    """
    The representative of [b] closest to ``a.rep``.

    After rotation ``b* a`` is real and non-negative. If ``b* a = 0`` the input is
    returned unchanged.
    """
    _check_dims(a, b)
    return ProjectivePoint(rep=_alignment(a, b) * b.rep)
