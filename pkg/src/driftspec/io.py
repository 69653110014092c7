"""
Reading and writing data matrices and result files.

Data are long-format CSV with header ``batch,freq_index,freq_hz,re,im`` and one row
per cell. Results are JSON, or a "csv-bundle" directory holding one CSV per array
and a ``manifest.json`` with everything else. Floats are written with 17
significant digits so binary64 values survive a round trip exactly.
"""

from __future__ import annotations

import json
import logging
import re
from importlib.resources import files
from pathlib import Path
from typing import Any, Literal

import numpy as np
import pandas as pd
import pydantic
from pydantic import Field, JsonValue

from driftspec import __version__
from driftspec._utils import duplicates
from driftspec.averaging import AveragedSignal
from driftspec.base import Base, ComplexVector, RealVector
from driftspec.data import DataMatrix, as_values
from driftspec.exceptions import (
    DriftSpecError,
    EmptyData,
    IncompleteGrid,
    IoError,
    NonMonotoneFrequency,
    ParseError,
)
from driftspec.het import HetFitReport, HetParams, truncation_check
from driftspec.hom import FitReport, HomParams
from driftspec.phase import Band, SpectrumResult, extract_spectrum

__all__ = [
    "CSV_COLUMNS",
    "ResultFile",
    "read_csv",
    "read_result",
    "result_from_average",
    "result_from_error",
    "result_from_fit",
    "result_json_schema",
    "write_csv",
    "write_result",
]

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["batch", "freq_index", "freq_hz", "re", "im"]
FLOAT_FORMAT = "%.17g"
MANIFEST = "manifest.json"
ResultFormat = Literal["json", "csv-bundle"]
ModelKind = Literal["averaging", "hom", "het"]


class ResultFile(Base):
    """
    Everything a command writes about a fit.
    """

    schema_version: Literal[1] = 1
    driftspec_version: str = __version__
    model: ModelKind
    converged: bool = True
    error: str | None = None
    n_iter: int | None = Field(default=None, ge=0)
    params: HomParams | HetParams | None = None
    averaged: ComplexVector | None = None
    spectrum: SpectrumResult | None = None
    loglik_trace: list[float] = Field(default_factory=list)
    diagnostics: dict[str, JsonValue] | None = None
    bands: dict[str, Band] | None = None
    freq_hz: RealVector | None = None


def result_json_schema() -> dict[str, Any]:
    """
    The JSON schema shipped with the package for result files.
    """
    text = files("driftspec").joinpath("schemas/result.schema.json").read_text("utf-8")
    return json.loads(text)  # type: ignore[no-any-return]


def _spectrum_or_none(kappa: np.ndarray) -> SpectrumResult:  # type: ignore[type-arg]
    spectrum = extract_spectrum(kappa, strict=False)
    flags = spectrum.degenerate_flags
    if flags.near_M1 or flags.near_M2:
        logger.warning("The fitted direction is close to a singular set: %s", flags)
    return spectrum


def result_from_fit(
    fit: FitReport | HetFitReport,
    *,
    freq_hz: Any = None,
    spectrum: SpectrumResult | None = None,
    bands: dict[str, Band] | None = None,
    diagnostics: dict[str, JsonValue] | None = None,
) -> ResultFile:
    """
    Collect a fit, its spectrum and optional bands into a result file.

    Heteroscedastic fits add the boundary warning and the truncation check to the
    diagnostics.
    """
    extra: dict[str, JsonValue] = dict(diagnostics or {})
    if isinstance(fit, HetFitReport):
        extra["boundary_warning"] = fit.boundary_warning
        extra["truncation"] = truncation_check(fit.params).model_dump(mode="json")
    return ResultFile(
        model=fit.model,
        converged=fit.converged,
        n_iter=fit.n_iter,
        params=fit.params,
        spectrum=spectrum or _spectrum_or_none(fit.params.kappa),
        loglik_trace=list(fit.loglik_trace),
        diagnostics=extra or None,
        bands=bands,
        freq_hz=freq_hz,
    )


def result_from_average(
    averaged: AveragedSignal, spectrum: SpectrumResult, *, freq_hz: Any = None
) -> ResultFile:
    """
    Result file of the averaging model.
    """
    return ResultFile(
        model="averaging", averaged=averaged.Z, spectrum=spectrum, freq_hz=freq_hz
    )


def result_from_error(model: ModelKind, error: BaseException) -> ResultFile:
    """
    Result file recording a failed fit.
    """
    detail: dict[str, JsonValue] = {"error_type": type(error).__name__}
    if hasattr(error, "diagnostics"):
        detail["optimizer"] = json.loads(json.dumps(error.diagnostics, default=str))
    return ResultFile(
        model=model,
        converged=False,
        error=str(error),
        diagnostics=detail,
    )


def _line_of(err: Exception) -> int:
    found = re.search(r"line (\d+)", str(err))
    return int(found.group(1)) if found else 0


def _numeric(frame: pd.DataFrame) -> pd.DataFrame:
    parsed = frame.apply(pd.to_numeric, errors="coerce")
    bad = ~np.isfinite(parsed.to_numpy(dtype=np.float64)).all(axis=1)
    bad = pd.Series(bad, index=parsed.index)
    integral = parsed[["batch", "freq_index"]]
    bad |= (integral != integral.round()).any(axis=1)
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        msg = f"Row {row + 2} has a non-numeric or non-integral entry: {frame.iloc[row].tolist()}"
        raise ParseError(msg, line=row + 2)
    return parsed


def read_csv(path: str | Path) -> DataMatrix:
    """
    Read a long-format data CSV into a dense `DataMatrix`.

    Rows may appear in any order; they are sorted by (batch, freq_index).

    Raises
    ------
    IoError
        If the file cannot be read.
    ParseError
        On a wrong header, unparsable or duplicate rows; ``line`` is 1-based with
        the header on line 1.
    IncompleteGrid
        If some (batch, freq_index) cell is missing.
    NonMonotoneFrequency
        If ``freq_hz`` is not strictly monotone in ``freq_index``, or differs
        between batches.
    """
    try:
        frame = pd.read_csv(
            path,
            dtype=str,
            keep_default_na=False,
            encoding="utf-8",
            skipinitialspace=True,
        )
    except OSError as err:
        msg = f"Cannot read {path}: {err}"
        raise IoError(msg) from err
    except (pd.errors.ParserError, UnicodeDecodeError) as err:
        raise ParseError(f"Cannot parse {path}: {err}", line=_line_of(err)) from err
    except pd.errors.EmptyDataError as err:
        raise ParseError(f"{path} is empty.", line=1) from err
    if list(frame.columns) != CSV_COLUMNS:
        msg = f"Expected header {','.join(CSV_COLUMNS)}, got {','.join(frame.columns)}."
        raise ParseError(msg, line=1)
    if frame.empty:
        msg = f"{path} has a header but no rows."
        raise EmptyData(msg)

    parsed = _numeric(frame)
    # float() parsing is correctly rounded, so 17-digit text is bit-exact
    for column in ("freq_hz", "re", "im"):
        parsed[column] = frame[column].str.strip().map(float)
    parsed["batch"] = parsed["batch"].astype(np.int64)
    parsed["freq_index"] = parsed["freq_index"].astype(np.int64)

    cells = list(zip(parsed["batch"], parsed["freq_index"], strict=True))
    repeated = duplicates(cells)
    if repeated:
        row = int(np.flatnonzero(parsed.duplicated(["batch", "freq_index"]).to_numpy())[0])
        msg = f"Duplicate cells {sorted(repeated)}; first repeat on line {row + 2}."
        raise ParseError(msg, line=row + 2)

    batches = np.sort(parsed["batch"].unique())
    freq_index = np.arange(int(parsed["freq_index"].max()) + 1)
    if parsed["freq_index"].min() < 0:
        row = int(np.argmin(parsed["freq_index"].to_numpy()))
        msg = f"Negative freq_index on line {row + 2}."
        raise ParseError(msg, line=row + 2)
    present = set(cells)
    missing = [
        (int(b), int(n)) for b in batches for n in freq_index if (b, n) not in present
    ]
    if missing:
        msg = f"Missing cells (batch, freq_index): {missing[:20]}"
        raise IncompleteGrid(msg, missing=missing)

    parsed = parsed.sort_values(["batch", "freq_index"], kind="stable")
    freq_table = parsed.pivot(index="batch", columns="freq_index", values="freq_hz")
    if (freq_table.nunique(axis=0) > 1).any():
        msg = "freq_hz differs between batches for the same freq_index."
        raise NonMonotoneFrequency(msg)
    real = parsed.pivot(index="batch", columns="freq_index", values="re").to_numpy()
    imag = parsed.pivot(index="batch", columns="freq_index", values="im").to_numpy()
    return DataMatrix.from_values(
        real + 1j * imag,
        freq_hz=freq_table.iloc[0].to_numpy(),
        batch_ids=batches,
        meta={"source": str(path)},
    )


def write_csv(Y: DataMatrix | Any, path: str | Path) -> None:
    """
    Write a data matrix as long-format CSV with 17 significant digits.

    Raises
    ------
    IoError
        If the file cannot be written.
    """
    values = as_values(Y)
    n_batches, n_freq = values.shape
    if isinstance(Y, DataMatrix):
        batch_ids, freq_hz = Y.batch_ids, Y.freq_hz
    else:
        batch_ids, freq_hz = np.arange(n_batches), np.arange(n_freq, dtype=float)
    frame = pd.DataFrame(
        {
            "batch": np.repeat(batch_ids, n_freq),
            "freq_index": np.tile(np.arange(n_freq), n_batches),
            "freq_hz": np.tile(freq_hz, n_batches),
            "re": values.real.reshape(-1),
            "im": values.imag.reshape(-1),
        }
    )
    try:
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    except OSError as err:
        msg = f"Cannot write {path}: {err}"
        raise IoError(msg) from err


def _split_arrays(node: Any, name: str, directory: Path) -> Any:
    # numeric lists go to <name>.csv; the manifest keeps a reference and the shape
    if isinstance(node, dict):
        return {
            key: _split_arrays(value, f"{name}.{key}" if name else key, directory)
            for key, value in node.items()
        }
    if isinstance(node, list) and node:
        try:
            array = np.asarray(node)
        except ValueError:
            return node
        if array.dtype.kind in "fi":
            file_name = f"{name}.csv"
            table = array.reshape(array.shape[0], -1)
            columns = [f"c{i}" for i in range(table.shape[1])]
            pd.DataFrame(table.astype(np.float64), columns=columns).to_csv(
                directory / file_name, index=False, float_format=FLOAT_FORMAT
            )
            return {"$csv": file_name, "shape": list(array.shape)}
    return node


def _join_arrays(node: Any, directory: Path) -> Any:
    if isinstance(node, dict):
        if "$csv" in node:
            table = pd.read_csv(directory / node["$csv"], float_precision="round_trip")
            return table.to_numpy(dtype=np.float64).reshape(node["shape"]).tolist()
        return {key: _join_arrays(value, directory) for key, value in node.items()}
    return node


def write_result(
    result: ResultFile, path: str | Path, format: ResultFormat = "json"
) -> None:
    """
    Write a result file as JSON, or as a csv-bundle directory at ``path``.

    Raises
    ------
    IoError
        If the output cannot be written.
    """
    path = Path(path)
    try:
        if format == "json":
            path.write_text(result.model_dump_json(indent=2), encoding="utf-8")
            return
        path.mkdir(parents=True, exist_ok=True)
        manifest = _split_arrays(result.model_dump(mode="json"), "", path)
        (path / MANIFEST).write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    except OSError as err:
        msg = f"Cannot write result to {path}: {err}"
        raise IoError(msg) from err


def read_result(path: str | Path) -> ResultFile:
    """
    Read a result file written by `write_result` in either format.

    Raises
    ------
    IoError
        If the file is missing, unreadable or not a valid result file.
    """
    path = Path(path)
    try:
        if path.is_dir():
            manifest = json.loads((path / MANIFEST).read_text(encoding="utf-8"))
            return ResultFile.model_validate(_join_arrays(manifest, path))
        return ResultFile.model_validate_json(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError, pd.errors.ParserError) as err:
        msg = f"Cannot read result {path}: {err}"
        raise IoError(msg) from err
    except (pydantic.ValidationError, DriftSpecError) as err:
        msg = f"{path} is not a valid result file: {err}"
        raise IoError(msg) from err
