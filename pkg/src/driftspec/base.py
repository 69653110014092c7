"""
The pydantic base model and the array field types shared by every value type.

Arrays are held as read-only numpy arrays. In JSON a complex array is written as
nested ``[re, im]`` pairs and a real array as nested lists of numbers.
"""

from __future__ import annotations

from functools import partial
from typing import Annotated, Any

import numpy as np
from pydantic import (
    BaseModel,
    BeforeValidator,
    ConfigDict,
    PlainSerializer,
    PlainValidator,
    WithJsonSchema,
)

__all__ = [
    "Base",
    "ComplexMatrix",
    "ComplexScalar",
    "ComplexVector",
    "IntVector",
    "RealMatrix",
    "RealVector",
    "complex_to_pairs",
    "freeze",
]


class Base(BaseModel):
    """
    The base pydantic model for all driftspec value types
    """

    model_config = ConfigDict(
        validate_assignment=True,
        extra="forbid",
        populate_by_name=True,
        frozen=True,
        # numpy arrays are validated by the annotated field types below
        arbitrary_types_allowed=True,
    )


def freeze(array: np.ndarray) -> np.ndarray:  # type: ignore[type-arg]
    """
    Return a read-only copy of ``array``.
    """
    out = np.array(array, copy=True)
    out.flags.writeable = False
    return out


def _check_shape(array: np.ndarray, ndim: int) -> None:  # type: ignore[type-arg]
    if array.ndim != ndim:
        msg = f"Expected a {ndim}-dimensional array, got shape {array.shape}."
        raise ValueError(msg)
    if not np.all(np.isfinite(array)):
        msg = "Array contains non-finite entries."
        raise ValueError(msg)


def _as_complex_array(value: Any, *, ndim: int) -> np.ndarray:  # type: ignore[type-arg]
    array = np.asarray(value)
    if array.dtype == object:
        array = array.astype(np.complex128)
    if np.iscomplexobj(array):
        out = array.astype(np.complex128)
    elif array.ndim == ndim + 1 and array.shape[-1] == 2:
        # [re, im] pairs, as written by `complex_to_pairs`
        pairs = array.astype(np.float64)
        out = pairs[..., 0] + 1j * pairs[..., 1]
    else:
        out = array.astype(np.complex128)
    _check_shape(out, ndim)
    return freeze(out)


def _as_complex_scalar(value: Any) -> complex:
    if isinstance(value, list | tuple):
        if len(value) != 2:
            msg = f"Expected an [re, im] pair, got {value}."
            raise ValueError(msg)
        value = complex(float(value[0]), float(value[1]))
    out = complex(value)
    if not (np.isfinite(out.real) and np.isfinite(out.imag)):
        msg = f"Expected a finite complex number, got {out}."
        raise ValueError(msg)
    return out


def _as_real_array(value: Any, *, ndim: int) -> np.ndarray:  # type: ignore[type-arg]
    array = np.asarray(value)
    if np.iscomplexobj(array):
        msg = "Expected a real array, got complex entries."
        raise ValueError(msg)
    out = array.astype(np.float64)
    _check_shape(out, ndim)
    return freeze(out)


def _as_int_array(value: Any) -> np.ndarray:  # type: ignore[type-arg]
    array = np.asarray(value)
    if array.ndim != 1:
        msg = f"Expected a 1-dimensional array, got shape {array.shape}."
        raise ValueError(msg)
    if array.size and not np.issubdtype(array.dtype, np.integer):
        if not np.all(np.equal(np.mod(array, 1), 0)):
            msg = f"Expected integers, got {array.tolist()}."
            raise ValueError(msg)
    return freeze(array.astype(np.int64))


def complex_to_pairs(array: np.ndarray) -> list[Any]:  # type: ignore[type-arg]
    """
    Convert a complex array into nested ``[re, im]`` lists.
    """
    array = np.asarray(array, dtype=np.complex128)
    return np.stack([array.real, array.imag], axis=-1).tolist()  # type: ignore[no-any-return]


def _real_to_list(array: np.ndarray) -> list[Any]:  # type: ignore[type-arg]
    return np.asarray(array).tolist()  # type: ignore[no-any-return]


_PAIR_SCHEMA: dict[str, Any] = {
    "type": "array",
    "items": {"type": "number"},
    "minItems": 2,
    "maxItems": 2,
}

ComplexScalar = Annotated[
    complex,
    PlainValidator(_as_complex_scalar),
    PlainSerializer(lambda z: [z.real, z.imag], when_used="json"),
    WithJsonSchema(_PAIR_SCHEMA),
]
ComplexVector = Annotated[
    np.ndarray,  # type: ignore[type-arg]
    BeforeValidator(partial(_as_complex_array, ndim=1)),
    PlainSerializer(complex_to_pairs, when_used="json"),
    WithJsonSchema({"type": "array", "items": _PAIR_SCHEMA}),
]
ComplexMatrix = Annotated[
    np.ndarray,  # type: ignore[type-arg]
    BeforeValidator(partial(_as_complex_array, ndim=2)),
    PlainSerializer(complex_to_pairs, when_used="json"),
    WithJsonSchema(
        {"type": "array", "items": {"type": "array", "items": _PAIR_SCHEMA}}
    ),
]
RealVector = Annotated[
    np.ndarray,  # type: ignore[type-arg]
    BeforeValidator(partial(_as_real_array, ndim=1)),
    PlainSerializer(_real_to_list, when_used="json"),
    WithJsonSchema({"type": "array", "items": {"type": "number"}}),
]
RealMatrix = Annotated[
    np.ndarray,  # type: ignore[type-arg]
    BeforeValidator(partial(_as_real_array, ndim=2)),
    PlainSerializer(_real_to_list, when_used="json"),
    WithJsonSchema(
        {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}
    ),
]
IntVector = Annotated[
    np.ndarray,  # type: ignore[type-arg]
    BeforeValidator(_as_int_array),
    PlainSerializer(_real_to_list, when_used="json"),
    WithJsonSchema({"type": "array", "items": {"type": "integer"}}),
]
