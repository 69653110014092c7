import json
from pathlib import Path

import numpy as np
import pytest

from driftspec.cli import EXIT_CONVERGENCE, EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from driftspec.diagnostics import ModelComparison
from driftspec.io import ResultFile, read_csv, read_result
from driftspec.theory import TheoryReport
from tests.conftest import data_path


@pytest.fixture
def data_csv(tmp_path: Path) -> Path:
    path = tmp_path / "data.csv"
    assert main(["simulate", "--spec", str(data_path("sim_spec.json")), "--out", str(path)]) == 0
    return path


def test_simulate(data_csv: Path, tmp_path: Path) -> None:
    Y = read_csv(data_csv)
    assert Y.values.shape == (40, 8)
    # --seed replaces the seed of the spec
    other = tmp_path / "other.csv"
    args = ["--seed", "99", "simulate", "--spec", str(data_path("sim_spec.json"))]
    assert main([*args, "--out", str(other)]) == EXIT_OK
    assert not np.array_equal(read_csv(other).values, Y.values)


def test_average_to_stdout(data_csv: Path, capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["average", str(data_csv)]) == EXIT_OK
    result = ResultFile.model_validate_json(capsys.readouterr().out)
    assert result.model == "averaging"
    assert result.spectrum is not None
    assert result.spectrum.I.shape == (8,)


def test_fit_hom(data_csv: Path, tmp_path: Path) -> None:
    out = tmp_path / "hom.json"
    assert main(["fit-hom", str(data_csv), "--out", str(out)]) == EXIT_OK
    result = read_result(out)
    assert result.model == "hom"
    assert result.converged
    bundle = tmp_path / "bundle"
    assert main(["fit-hom", str(data_csv), "--out", str(bundle), "--format", "csv-bundle"]) == 0
    assert (bundle / "manifest.json").exists()


def test_fit_hom_not_converged(data_csv: Path, tmp_path: Path) -> None:
    out = tmp_path / "hom.json"
    assert main(["fit-hom", str(data_csv), "--maxiter", "1", "--out", str(out)]) == (
        EXIT_CONVERGENCE
    )
    assert not read_result(out).converged


def test_fit_het(data_csv: Path, tmp_path: Path) -> None:
    out = tmp_path / "het.json"
    code = main(["fit-het", str(data_csv), "--maxiter", "5", "--out", str(out)])
    assert code in (EXIT_OK, EXIT_CONVERGENCE)
    result = read_result(out)
    assert result.model == "het"
    assert result.diagnostics is not None
    if result.error is None:
        assert "truncation" in result.diagnostics


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["fit-hom"],
        ["compare", "data.csv", "--models", "averaging,quartic"],
        ["snr", "data.csv", "--regions", "0-5"],
        ["validate-theory", "--only", "astrology"],
        ["-v", "-q", "average", "data.csv"],
    ],
)
def test_usage_errors(argv: list[str]) -> None:
    assert main(argv) == EXIT_USAGE


def test_usage_errors_after_parsing(data_csv: Path, tmp_path: Path) -> None:
    assert main(["snr", str(data_csv)]) == EXIT_USAGE
    assert main(["average", str(data_csv), "--format", "csv-bundle"]) == EXIT_USAGE
    config = tmp_path / "config.json"
    config.write_text('{"model": "quartic"}')
    assert main(["--config", str(config), "average", str(data_csv)]) == EXIT_USAGE
    assert main(["--threads", "0", "average", str(data_csv)]) == EXIT_USAGE


def test_data_errors(tmp_path: Path) -> None:
    assert main(["average", str(data_path("missing_cell.csv"))]) == EXIT_DATA
    assert main(["fit-hom", str(data_path("bad_number.csv"))]) == EXIT_DATA
    assert main(["average", str(tmp_path / "missing.csv")]) == EXIT_DATA


def test_snr(data_csv: Path, capsys: pytest.CaptureFixture[str]) -> None:
    argv = ["snr", str(data_csv), "--regions", "4:8", "--model", "averaging"]
    assert main(argv) == EXIT_OK
    value = float(capsys.readouterr().out)
    assert 0 <= value <= 1


def test_snr_regions_from_config(data_csv: Path, capsys: pytest.CaptureFixture[str]) -> None:
    # the configured regions reach index 10 on an 8-frequency matrix
    config = str(data_path("run_config.json"))
    assert main(["--config", config, "snr", str(data_csv)]) == EXIT_DATA
    assert capsys.readouterr().out == ""


def test_compare(data_csv: Path, tmp_path: Path) -> None:
    out = tmp_path / "compare.json"
    argv = ["compare", str(data_csv), "--regions", "4:8", "--out", str(out)]
    assert main(argv) == EXIT_OK
    comparison = ModelComparison.model_validate_json(out.read_text())
    assert [row.model for row in comparison.models] == ["averaging", "hom"]


def test_bootstrap(data_csv: Path, tmp_path: Path) -> None:
    out = tmp_path / "boot.json"
    argv = ["--seed", "5", "bootstrap", str(data_csv), "--replicates", "4", "--out", str(out)]
    assert main(argv) == EXIT_OK
    result = read_result(out)
    assert result.bands is not None
    assert set(result.bands) == {"I", "omega"}
    assert result.diagnostics is not None
    assert result.diagnostics["seed"] == 5


def test_asymptotics(data_csv: Path, tmp_path: Path) -> None:
    out = tmp_path / "asym.json"
    assert main(["asymptotics", str(data_csv), "--level", "0.9", "--out", str(out)]) == 0
    result = read_result(out)
    assert result.bands is not None
    assert result.bands["I"].level == 0.9


def test_gof(data_csv: Path, capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["gof", str(data_csv)]) == EXIT_OK
    assert "Goodness of fit" in capsys.readouterr().out


def test_validate_theory(tmp_path: Path) -> None:
    out = tmp_path / "theory.json"
    argv = ["validate-theory", "--only", "chart_distance", "max_method", "--out", str(out)]
    assert main(argv) == EXIT_OK
    report = TheoryReport.model_validate_json(out.read_text())
    assert [check.name for check in report.checks] == ["chart_distance", "max_method"]
    assert json.loads(out.read_text())["profile"] == "quick"


def test_version(capsys: pytest.CaptureFixture[str]) -> None:
    with pytest.raises(SystemExit) as excinfo:
        main(["--version"])
    assert excinfo.value.code == 0
    assert capsys.readouterr().out.strip()
