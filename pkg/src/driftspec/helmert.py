"""
The Helmert sub-matrix.

Its rows form an orthonormal basis of the mean-zero subspace of ℝ^{N+1}. Applying
it along the frequency axis drops the mean-zero constraint on κ, and it maps
row-centered i.i.d. noise back to i.i.d. noise of the same covariance.
"""

from __future__ import annotations

from typing import Annotated, Any

try:
    from typing import Self
except ImportError:  # Python < 3.11
    from typing_extensions import Self

import numpy as np
import scipy.linalg
from pydantic import AfterValidator

from driftspec.base import Base, RealMatrix
from driftspec.exceptions import InvalidDimension

__all__ = ["HelmertBasis", "dehelmertize", "helmert_matrix", "helmertize"]


def _ensure_orthonormal_contrasts(H: np.ndarray) -> np.ndarray:  # type: ignore[type-arg]
    n, n_plus_1 = H.shape
    if n_plus_1 != n + 1:
        msg = f"Expected an N x (N+1) matrix, got shape {H.shape}."
        raise ValueError(msg)
    if not np.allclose(H @ H.T, np.eye(n), rtol=0, atol=1e-12):
        msg = "Rows are not orthonormal."
        raise ValueError(msg)
    if not np.allclose(H.sum(axis=1), 0, rtol=0, atol=1e-12):
        msg = "Rows do not sum to zero."
        raise ValueError(msg)
    return H


class HelmertBasis(Base):
    """
    An N×(N+1) Helmert sub-matrix.
    """

    H: Annotated[RealMatrix, AfterValidator(_ensure_orthonormal_contrasts)]

    @classmethod
    def build(cls, n_plus_1: int) -> Self:
        """
        Build the sub-matrix whose row j is ``(Σ_{k≤j} e_k - j e_{j+1}) / sqrt(j(j+1))``.
        """
        if n_plus_1 < 2:
            msg = f"Need at least 2 frequencies, got {n_plus_1}."
            raise InvalidDimension(msg)
        return cls(H=scipy.linalg.helmert(n_plus_1, full=False))

    @property
    def n(self) -> int:
        """
        Dimension N of the reduced frequency axis.
        """
        return int(self.H.shape[0])


def helmert_matrix(n_plus_1: int) -> HelmertBasis:
    """
    The Helmert sub-matrix for ``n_plus_1`` frequencies.

    Raises
    ------
    InvalidDimension
        If ``n_plus_1 < 2``.
    """
    return HelmertBasis.build(n_plus_1)


def helmertize(x: Any, basis: HelmertBasis | None = None) -> np.ndarray:  # type: ignore[type-arg]
    """
    Apply the Helmert sub-matrix along the last (frequency) axis.

    Parameters
    ----------
    x :
        A vector of length N+1, a B×(N+1) matrix, or a `DataMatrix`.
    basis :
        A pre-built basis; built from the last dimension of ``x`` if omitted.

    Returns
    -------
    Array with the last axis reduced from N+1 to N.
    """
    values = np.asarray(getattr(x, "values", x))
    if values.ndim == 0 or values.shape[-1] < 2:
        msg = f"The frequency axis needs at least 2 entries, got shape {values.shape}."
        raise InvalidDimension(msg)
    basis = basis or helmert_matrix(values.shape[-1])
    if basis.H.shape[1] != values.shape[-1]:
        msg = f"Basis for {basis.H.shape[1]} frequencies applied to {values.shape[-1]}."
        raise InvalidDimension(msg)
    return values @ basis.H.T  # type: ignore[no-any-return]


def dehelmertize(x: Any, basis: HelmertBasis | None = None) -> np.ndarray:  # type: ignore[type-arg]
    """
    Map Helmert coordinates back to the mean-zero subspace of the full frequency axis.

    This is the exact inverse of `helmertize` on mean-zero inputs.
    """
    values = np.asarray(x)
    if values.ndim == 0 or values.shape[-1] < 1:
        msg = f"Expected at least one Helmert coordinate, got shape {values.shape}."
        raise InvalidDimension(msg)
    basis = basis or helmert_matrix(values.shape[-1] + 1)
    if basis.n != values.shape[-1]:
        msg = f"Basis with N={basis.n} applied to {values.shape[-1]} coordinates."
        raise InvalidDimension(msg)
    return values @ basis.H  # type: ignore[no-any-return]
