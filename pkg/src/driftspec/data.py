"""
The batched measurement matrix.
"""

from __future__ import annotations

from typing import Any

try:
    from typing import Self
except ImportError:  # Python < 3.11
    from typing_extensions import Self

import numpy as np
from pydantic import Field, model_validator

from driftspec.base import Base, ComplexMatrix, IntVector, RealVector
from driftspec.exceptions import EmptyData, NonMonotoneFrequency

__all__ = ["DataMatrix", "as_values"]


def _strictly_monotone(freq: np.ndarray) -> bool:  # type: ignore[type-arg]
    if freq.size < 2:
        return True
    steps = np.diff(freq)
    return bool(np.all(steps > 0) or np.all(steps < 0))


class DataMatrix(Base):
    """
    A complex B×(N+1) matrix of echo integrals: one row per batch, one column per
    RF frequency.
    """

    values: ComplexMatrix
    freq_hz: RealVector
    batch_ids: IntVector
    meta: dict[str, str] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _ensure_consistent_shape(self) -> Self:
        n_batches, n_freq = self.values.shape
        if self.freq_hz.shape != (n_freq,):
            msg = (
                f"freq_hz has {self.freq_hz.shape[0]} entries "
                f"but the matrix has {n_freq} columns."
            )
            raise ValueError(msg)
        if self.batch_ids.shape != (n_batches,):
            msg = (
                f"batch_ids has {self.batch_ids.shape[0]} entries "
                f"but the matrix has {n_batches} rows."
            )
            raise ValueError(msg)
        if not _strictly_monotone(self.freq_hz):
            msg = "freq_hz must be strictly monotone."
            raise ValueError(msg)
        return self

    @classmethod
    def from_values(
        cls,
        values: Any,
        *,
        freq_hz: Any = None,
        batch_ids: Any = None,
        meta: dict[str, str] | None = None,
    ) -> Self:
        """
        Build a data matrix, defaulting the frequency axis and batch ids to indices.

        Raises
        ------
        EmptyData
            If the matrix has no rows or no columns.
        NonMonotoneFrequency
            If ``freq_hz`` is not strictly monotone.
        """
        array = np.asarray(values, dtype=np.complex128)
        if array.ndim != 2 or 0 in array.shape:
            msg = f"Expected a non-empty B x (N+1) matrix, got shape {array.shape}."
            raise EmptyData(msg)
        freq = np.arange(array.shape[1], dtype=float) if freq_hz is None else freq_hz
        if not _strictly_monotone(np.asarray(freq, dtype=float)):
            msg = f"Frequencies {np.asarray(freq).tolist()} are not strictly monotone."
            raise NonMonotoneFrequency(msg)
        ids = np.arange(array.shape[0]) if batch_ids is None else batch_ids
        return cls(values=array, freq_hz=freq, batch_ids=ids, meta=meta or {})

    def with_values(self, values: Any) -> Self:
        """
        A data matrix with the same axes and new values.
        """
        return type(self)(
            values=values,
            freq_hz=self.freq_hz,
            batch_ids=self.batch_ids,
            meta=self.meta,
        )

    @property
    def n_batches(self) -> int:
        """
        Number of batches B.
        """
        return int(self.values.shape[0])

    @property
    def n_freq(self) -> int:
        """
        Number of RF frequencies N+1.
        """
        return int(self.values.shape[1])


def as_values(Y: DataMatrix | Any) -> np.ndarray:  # type: ignore[type-arg]
    """
    The complex B×(N+1) array behind a `DataMatrix` or array-like.

    Raises
    ------
    EmptyData
        If there are no batches or no frequencies.
    """
    values = np.asarray(Y.values if isinstance(Y, DataMatrix) else Y, dtype=np.complex128)
    if values.ndim != 2 or 0 in values.shape:
        msg = f"Expected a non-empty B x (N+1) matrix, got shape {values.shape}."
        raise EmptyData(msg)
    return values
