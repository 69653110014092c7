from pathlib import Path

import numpy as np
import pytest

from driftspec.averaging import average, averaging_spectrum
from driftspec.exceptions import (
    EmptyData,
    IncompleteGrid,
    IoError,
    NonMonotoneFrequency,
    OptimizerFailure,
    ParseError,
)
from driftspec.het import HetFitReport, HetParams
from driftspec.hom import fit_hom
from driftspec.io import (
    CSV_COLUMNS,
    ResultFile,
    read_csv,
    read_result,
    result_from_average,
    result_from_error,
    result_from_fit,
    result_json_schema,
    write_csv,
    write_result,
)
from driftspec.phase import Band
from driftspec.simulate import simulate
from tests.conftest import data_path, hom_spec, peaked_kappa


def test_read_csv() -> None:
    Y = read_csv(data_path("two_batches.csv"))
    np.testing.assert_array_equal(
        Y.values,
        [[1 + 0.5j, 2 - 0.25j, 3 + 0j], [-1 + 1j, 0.125 + 2.5j, 0.25 - 1.5j]],
    )
    np.testing.assert_array_equal(Y.freq_hz, [1e7, 1.1e7, 1.2e7])
    np.testing.assert_array_equal(Y.batch_ids, [0, 1])
    assert Y.meta["source"].endswith("two_batches.csv")


def test_missing_cell() -> None:
    with pytest.raises(IncompleteGrid) as excinfo:
        read_csv(data_path("missing_cell.csv"))
    assert excinfo.value.missing == [(1, 2)]


@pytest.mark.parametrize(
    ("fname", "line"), [("duplicate_cell.csv", 4), ("bad_number.csv", 3)]
)
def test_parse_errors(fname: str, line: int) -> None:
    with pytest.raises(ParseError) as excinfo:
        read_csv(data_path(fname))
    assert excinfo.value.line == line


def test_bad_files(tmp_path: Path) -> None:
    with pytest.raises(IoError):
        read_csv(tmp_path / "missing.csv")

    path = tmp_path / "data.csv"
    path.write_text("batch,freq,freq_hz,re,im\n0,0,1.0,1.0,0.0\n")
    with pytest.raises(ParseError) as excinfo:
        read_csv(path)
    assert excinfo.value.line == 1

    path.write_text(",".join(CSV_COLUMNS) + "\n")
    with pytest.raises(EmptyData):
        read_csv(path)

    path.write_text(
        ",".join(CSV_COLUMNS)
        + "\n0,0,1.0,1.0,0.0\n0,1,2.0,1.0,0.0\n1,0,1.0,1.0,0.0\n1,1,3.0,1.0,0.0\n"
    )
    with pytest.raises(NonMonotoneFrequency):
        read_csv(path)

    path.write_text(",".join(CSV_COLUMNS) + "\n0,0,2.0,1.0,0.0\n0,1,2.0,1.0,0.0\n")
    with pytest.raises(NonMonotoneFrequency):
        read_csv(path)


def test_csv_is_bit_exact(tmp_path: Path) -> None:
    Y = simulate(hom_spec(7, 5))
    path = tmp_path / "data.csv"
    write_csv(Y, path)
    back = read_csv(path)
    np.testing.assert_array_equal(back.values, Y.values)
    np.testing.assert_array_equal(back.freq_hz, Y.freq_hz)
    np.testing.assert_array_equal(back.batch_ids, Y.batch_ids)


@pytest.mark.parametrize("format", ["json", "csv-bundle"])
def test_result_round_trip(tmp_path: Path, format: str) -> None:
    Y = simulate(hom_spec(20, 6))
    fit = fit_hom(Y)
    spectrum = result_from_fit(fit).spectrum
    assert spectrum is not None
    band = Band(lower=spectrum.I - 0.1, upper=spectrum.I + 0.1, level=0.9)
    result = result_from_fit(fit, freq_hz=Y.freq_hz, bands={"I": band})
    path = tmp_path / "result"
    write_result(result, path, format)  # type: ignore[arg-type]
    back = read_result(path)
    assert back.model == "hom"
    assert back.loglik_trace == result.loglik_trace
    assert back.params is not None
    assert result.params is not None
    np.testing.assert_array_equal(back.params.kappa, result.params.kappa)
    np.testing.assert_array_equal(back.params.psi, result.params.psi)
    np.testing.assert_array_equal(back.params.sigma, result.params.sigma)  # type: ignore[union-attr]
    assert back.spectrum is not None
    np.testing.assert_array_equal(back.spectrum.I, spectrum.I)
    assert back.bands is not None
    np.testing.assert_array_equal(back.bands["I"].upper, band.upper)


def test_averaging_result(tmp_path: Path) -> None:
    Y = simulate(hom_spec(10, 6))
    averaged = average(Y)
    result = result_from_average(averaged, averaging_spectrum(averaged), freq_hz=Y.freq_hz)
    assert result.params is None
    write_result(result, tmp_path / "avg.json")
    back = read_result(tmp_path / "avg.json")
    np.testing.assert_array_equal(back.averaged, averaged.Z)


def test_error_result() -> None:
    err = OptimizerFailure("stalled", diagnostics={"step": 3, "fun": float("nan")})
    result = result_from_error("hom", err)
    assert not result.converged
    assert result.error == "stalled"
    assert result.diagnostics is not None
    assert result.diagnostics["error_type"] == "OptimizerFailure"
    optimizer = result.diagnostics["optimizer"]
    assert isinstance(optimizer, dict)
    assert optimizer["step"] == 3


def test_het_diagnostics() -> None:
    params = HetParams(
        psi=np.full(3, 2 + 0j),
        phi=np.ones(3),
        kappa=peaked_kappa(5),
        sigma_tilde=0.1,
        sigma0=[[0.01, 0.0], [0.0, 0.01]],
    )
    fit = HetFitReport(params=params, loglik_trace=[1.0, 2.0], n_iter=2, converged=True)
    result = result_from_fit(fit)
    assert result.model == "het"
    assert result.diagnostics is not None
    assert result.diagnostics["boundary_warning"] is False
    assert isinstance(result.diagnostics["truncation"], dict)


def test_read_result_errors(tmp_path: Path) -> None:
    with pytest.raises(IoError):
        read_result(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text('{"model": "quadratic"}')
    with pytest.raises(IoError):
        read_result(bad)


def test_schema_matches_result_file() -> None:
    schema = result_json_schema()
    assert set(schema["properties"]) == set(ResultFile.model_fields)
    assert schema["required"] == ["model"]
