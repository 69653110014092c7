"""
The ``driftspec`` command line interface.

Exit codes: 0 on success, 1 on usage errors, 2 on data errors and 3 when a fit,
a bootstrap or the theory suite does not converge or pass.
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import NoReturn, get_args

import pydantic
from pydantic import JsonValue
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from driftspec import __version__
from driftspec.averaging import average, averaging_spectrum
from driftspec.bootstrap import parametric_bootstrap
from driftspec.config import (
    FitOptions,
    RunConfig,
    load_config,
    resolve_seed,
    resolve_threads,
)
from driftspec.data import DataMatrix
from driftspec.diagnostics import (
    FlatRegions,
    ModelName,
    compare_models,
    goodness_of_fit,
    snr_flat_std,
)
from driftspec.exceptions import ConfigError, DriftSpecError
from driftspec.frechet import spectrum_asymptotics
from driftspec.het import HetFitReport, boundary_kstar, fit_het
from driftspec.hom import FitReport, fit_hom
from driftspec.io import (
    ResultFile,
    read_csv,
    result_from_average,
    result_from_error,
    result_from_fit,
    write_csv,
    write_result,
)
from driftspec.phase import extract_spectrum
from driftspec.simulate import load_sim_spec, simulate
from driftspec.theory import CHECKS, TheoryReport, run_theory_suite

__all__ = ["EXIT_CONVERGENCE", "EXIT_DATA", "EXIT_OK", "EXIT_USAGE", "main"]

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_CONVERGENCE = 3
_EXIT_CODES = {"usage": EXIT_USAGE, "data": EXIT_DATA, "convergence": EXIT_CONVERGENCE}
_HANDLER_NAME = "driftspec-cli"


class UsageError(Exception):
    """
    The command line is malformed.
    """


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def _model_list(text: str) -> list[ModelName]:
    names = [name.strip() for name in text.split(",") if name.strip()]
    allowed = get_args(ModelName)
    unknown = [name for name in names if name not in allowed]
    if unknown or not names:
        msg = f"models must be a comma separated subset of {', '.join(allowed)}"
        raise argparse.ArgumentTypeError(msg)
    return names  # type: ignore[return-value]


def _regions(text: str) -> FlatRegions:
    try:
        return FlatRegions.parse(text)
    except ValueError as err:
        raise argparse.ArgumentTypeError(str(err)) from err


def _add_output(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", type=Path, help="Result path (default: stdout)")
    parser.add_argument(
        "--format",
        choices=["json", "csv-bundle"],
        default="json",
        help="Result file format (default: json)",
    )


def _add_fit_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--maxiter", type=int, help="Maximum number of sweeps")
    parser.add_argument(
        "--min-delta-loglik", type=float, help="Convergence threshold on the gain"
    )


def build_parser() -> argparse.ArgumentParser:
    """
    The argument parser of the ``driftspec`` command.
    """
    parser = _Parser(
        prog="driftspec",
        description="Drift models and phase-corrected spectra for batched ENDOR data.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--seed", type=int, help="Master random seed")
    parser.add_argument("--threads", type=int, help="Worker threads")
    parser.add_argument("--config", type=Path, help="JSON run configuration")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="Warnings only")
    commands = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    cmd = commands.add_parser("average", help="Averaging-model spectrum")
    cmd.add_argument("data", type=Path)
    cmd.add_argument(
        "--lambda", dest="lam", type=float, help="Fixed phase (default: maximum method)"
    )
    _add_output(cmd)

    cmd = commands.add_parser("fit-hom", help="Fit the homoscedastic drift model")
    cmd.add_argument("data", type=Path)
    _add_fit_options(cmd)
    _add_output(cmd)

    cmd = commands.add_parser("fit-het", help="Fit the heteroscedastic drift model")
    cmd.add_argument("data", type=Path)
    _add_fit_options(cmd)
    cmd.add_argument("--start-c-opt", type=int, help="Sweep at which Δ updates start")
    cmd.add_argument("--delta", type=float, help="Eigenvalue floor of Σ₀")
    cmd.add_argument(
        "--boundary",
        action="store_true",
        help="Report where the divergent boundary sequence overtakes the fit",
    )
    _add_output(cmd)

    cmd = commands.add_parser("simulate", help="Simulate a data matrix")
    cmd.add_argument("--spec", type=Path, required=True, help="Simulation spec (JSON)")
    cmd.add_argument("--out", type=Path, required=True, help="Output CSV")

    cmd = commands.add_parser("bootstrap", help="Parametric bootstrap bands")
    cmd.add_argument("data", type=Path)
    cmd.add_argument("--model", choices=["hom", "het"])
    cmd.add_argument("--replicates", type=int)
    cmd.add_argument("--level", type=float)
    cmd.add_argument("--bias-correct", action="store_true", default=None)
    cmd.add_argument("--pilot-replicates", type=int)
    _add_output(cmd)

    cmd = commands.add_parser("asymptotics", help="Delta-method bands of the hom fit")
    cmd.add_argument("data", type=Path)
    cmd.add_argument("--level", type=float, default=0.95)
    _add_output(cmd)

    cmd = commands.add_parser("gof", help="KS tests on standardized residuals")
    cmd.add_argument("data", type=Path)
    cmd.add_argument("--model", choices=["hom", "het"])
    _add_output(cmd)

    cmd = commands.add_parser("snr", help="Spectrum std over flat regions")
    cmd.add_argument("data", type=Path)
    cmd.add_argument("--regions", type=_regions, help='e.g. "0:5,20:26"')
    cmd.add_argument("--model", choices=list(get_args(ModelName)))
    cmd.add_argument("--normalize", choices=["minmax", "none"])

    cmd = commands.add_parser("compare", help="Compare models on the same data")
    cmd.add_argument("data", type=Path)
    cmd.add_argument("--regions", type=_regions, help='e.g. "0:5,20:26"')
    cmd.add_argument(
        "--models", type=_model_list, default=["averaging", "hom"], help="e.g. averaging,hom,het"
    )
    cmd.add_argument("--normalize", choices=["minmax", "none"])
    cmd.add_argument("--out", type=Path, help="Comparison report (JSON)")

    cmd = commands.add_parser("validate-theory", help="Monte-Carlo self checks")
    cmd.add_argument("--profile", choices=["quick", "full"], default="quick")
    cmd.add_argument("--only", nargs="+", choices=list(CHECKS), metavar="CHECK")
    cmd.add_argument("--out", type=Path, help="Report (JSON)")
    return parser


def _configure_logging(args: argparse.Namespace) -> None:
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    package = logging.getLogger("driftspec")
    for handler in list(package.handlers):
        if handler.get_name() == _HANDLER_NAME:
            package.removeHandler(handler)
    handler = RichHandler(console=Console(stderr=True), show_path=False)
    handler.set_name(_HANDLER_NAME)
    handler.setFormatter(logging.Formatter("%(message)s"))
    package.addHandler(handler)
    package.setLevel(level)


class _Context:
    """
    Resolved global settings of one invocation.
    """

    def __init__(self, args: argparse.Namespace) -> None:
        self.args = args
        self.config: RunConfig = load_config(args.config)
        self.threads = resolve_threads(args.threads, self.config)
        self.seed = resolve_seed(args.seed, self.config)

    def fit_options(self) -> FitOptions:
        overrides = {
            name: getattr(self.args, name)
            for name in FitOptions.model_fields
            if getattr(self.args, name, None) is not None
        }
        try:
            return FitOptions(**{**dict(self.config.fit), **overrides})
        except pydantic.ValidationError as err:
            raise ConfigError(str(err)) from err

    def model(self, allowed: Sequence[str]) -> str:
        model: str = getattr(self.args, "model", None) or self.config.model
        if model not in allowed:
            msg = f"Model {model!r} is not available here; choose from {', '.join(allowed)}."
            raise UsageError(msg)
        return model

    def regions(self) -> FlatRegions:
        if self.args.regions is not None:
            return self.args.regions  # type: ignore[no-any-return]
        if not self.config.flat_regions:
            msg = "No flat regions given; pass --regions or set flat_regions in the config."
            raise UsageError(msg)
        try:
            return FlatRegions(regions=self.config.flat_regions)
        except pydantic.ValidationError as err:
            raise ConfigError(str(err)) from err

    def output(self) -> Path | None:
        out: Path | None = getattr(self.args, "out", None)
        return out if out is not None else self.config.output


def _emit(result: ResultFile, ctx: _Context) -> None:
    out = ctx.output()
    if out is None:
        if ctx.args.format != "json":
            msg = "--format csv-bundle needs --out."
            raise UsageError(msg)
        sys.stdout.write(result.model_dump_json(indent=2) + "\n")
        return
    write_result(result, out, ctx.args.format)
    logger.info("Wrote %s", out)


def _fit(model: str, Y: DataMatrix, ctx: _Context) -> FitReport | HetFitReport:
    options = ctx.fit_options()
    try:
        if model == "het":
            return fit_het(
                Y,
                maxiter=options.maxiter,
                min_delta_loglik=options.min_delta_loglik,
                start_c_opt=options.start_c_opt,
                delta=options.delta,
            )
        return fit_hom(
            Y, maxiter=options.maxiter, min_delta_loglik=options.min_delta_loglik
        )
    except DriftSpecError as err:
        if err.category == "convergence" and getattr(ctx.args, "format", None):
            _emit(result_from_error(model, err), ctx)  # type: ignore[arg-type]
        raise


def _fit_exit(fit: FitReport | HetFitReport) -> int:
    if not fit.converged:
        logger.warning("The %s fit did not converge in %d sweeps.", fit.model, fit.n_iter)
        return EXIT_CONVERGENCE
    return EXIT_OK


def run_average(ctx: _Context) -> int:
    """
    ``driftspec average``.
    """
    Y = read_csv(ctx.args.data)
    averaged = average(Y)
    spectrum = averaging_spectrum(averaged, "auto" if ctx.args.lam is None else ctx.args.lam)
    _emit(result_from_average(averaged, spectrum, freq_hz=Y.freq_hz), ctx)
    return EXIT_OK


def run_fit_hom(ctx: _Context) -> int:
    """
    ``driftspec fit-hom``.
    """
    Y = read_csv(ctx.args.data)
    fit = _fit("hom", Y, ctx)
    _emit(result_from_fit(fit, freq_hz=Y.freq_hz), ctx)
    return _fit_exit(fit)


def run_fit_het(ctx: _Context) -> int:
    """
    ``driftspec fit-het``.
    """
    Y = read_csv(ctx.args.data)
    fit = _fit("het", Y, ctx)
    diagnostics = None
    if ctx.args.boundary:
        kstar = boundary_kstar(fit.loglik, Y)
        diagnostics = {"boundary_kstar": kstar.model_dump(mode="json")}
    _emit(result_from_fit(fit, freq_hz=Y.freq_hz, diagnostics=diagnostics), ctx)
    return _fit_exit(fit)


def run_simulate(ctx: _Context) -> int:
    """
    ``driftspec simulate``; ``--seed`` overrides the seed of the spec.
    """
    spec = load_sim_spec(ctx.args.spec)
    if ctx.args.seed is not None:
        spec = spec.model_copy(update={"seed": ctx.seed})
    write_csv(simulate(spec), ctx.args.out)
    logger.info("Wrote %d x %d matrix to %s", spec.B, spec.N_plus_1, ctx.args.out)
    return EXIT_OK


def run_bootstrap(ctx: _Context) -> int:
    """
    ``driftspec bootstrap``.
    """
    args, settings = ctx.args, ctx.config.bootstrap
    Y = read_csv(args.data)
    fit = _fit(ctx.model(["hom", "het"]), Y, ctx)
    result = parametric_bootstrap(
        Y,
        fit,
        replicates=args.replicates or settings.replicates,
        level=args.level or settings.level,
        bias_correct=settings.bias_correct if args.bias_correct is None else args.bias_correct,
        pilot_replicates=args.pilot_replicates or settings.pilot_replicates,
        seed=ctx.seed,
        threads=ctx.threads,
        options=ctx.fit_options(),
    )
    diagnostics: dict[str, JsonValue] = {
        "replicates": result.replicates,
        "seed": result.seed,
        "n_failed": result.n_failed,
    }
    if result.bias is not None:
        diagnostics["bias"] = result.bias.model_dump(mode="json")
    _emit(
        result_from_fit(
            fit,
            freq_hz=Y.freq_hz,
            spectrum=result.point,
            bands={"I": result.band_I, "omega": result.band_omega},
            diagnostics=diagnostics,
        ),
        ctx,
    )
    return _fit_exit(fit)


def run_asymptotics(ctx: _Context) -> int:
    """
    ``driftspec asymptotics``.
    """
    Y = read_csv(ctx.args.data)
    fit = _fit("hom", Y, ctx)
    if not isinstance(fit, FitReport):  # pragma: no cover
        raise TypeError(type(fit))
    asymptotic = spectrum_asymptotics(Y, fit, level=ctx.args.level)
    _emit(
        result_from_fit(
            fit,
            freq_hz=Y.freq_hz,
            spectrum=asymptotic.spectrum,
            bands={"I": asymptotic.band},
            diagnostics={"cov_I": asymptotic.cov_I_full.tolist()},
        ),
        ctx,
    )
    return _fit_exit(fit)


def run_gof(ctx: _Context) -> int:
    """
    ``driftspec gof``.
    """
    Y = read_csv(ctx.args.data)
    fit = _fit(ctx.model(["hom", "het"]), Y, ctx)
    report = goodness_of_fit(Y, fit.params)
    table = Table(title=f"Goodness of fit ({fit.model})")
    for column in ("component", "KS statistic", "p-value", "n"):
        table.add_column(column)
    table.add_row("real", f"{report.ks_stat_real:.4g}", f"{report.p_real:.4g}", str(report.n))
    table.add_row("imag", f"{report.ks_stat_imag:.4g}", f"{report.p_imag:.4g}", str(report.n))
    Console().print(table)
    if ctx.output() is not None:
        _emit(
            result_from_fit(
                fit, freq_hz=Y.freq_hz, diagnostics={"gof": report.model_dump(mode="json")}
            ),
            ctx,
        )
    return _fit_exit(fit)


def run_snr(ctx: _Context) -> int:
    """
    ``driftspec snr``: prints the flat-region standard deviation.
    """
    regions = ctx.regions()
    normalize = ctx.args.normalize or ctx.config.normalize
    Y = read_csv(ctx.args.data)
    model = ctx.model(get_args(ModelName))
    if model == "averaging":
        spectrum = averaging_spectrum(average(Y)).I
    else:
        spectrum = extract_spectrum(_fit(model, Y, ctx).params.kappa).I
    sys.stdout.write(f"{snr_flat_std(spectrum, regions, normalize):.17g}\n")
    return EXIT_OK


def run_compare(ctx: _Context) -> int:
    """
    ``driftspec compare``.
    """
    regions = ctx.regions()
    Y = read_csv(ctx.args.data)
    comparison = compare_models(
        Y,
        regions,
        models=ctx.args.models,
        normalize=ctx.args.normalize or ctx.config.normalize,
        options=ctx.fit_options(),
    )
    table = Table(title="Model comparison")
    for column in ("model", "flat std", "p real", "p imag", "log-likelihood"):
        table.add_column(column)
    for row in comparison.models:
        gof = row.gof
        table.add_row(
            row.model,
            f"{row.flat_std:.4g}",
            "-" if gof is None else f"{gof.p_real:.3g}",
            "-" if gof is None else f"{gof.p_imag:.3g}",
            "-" if row.loglik is None else f"{row.loglik:.6g}",
        )
    Console().print(table)
    out = ctx.output()
    if out is not None:
        out.write_text(comparison.model_dump_json(indent=2), encoding="utf-8")
    return EXIT_OK


def _theory_table(report: TheoryReport) -> Table:
    table = Table(title=f"Theory checks ({report.profile} profile, seed {report.seed})")
    for column in ("check", "result", "value", "threshold", "detail"):
        table.add_column(column)
    for check in report.checks:
        table.add_row(
            check.name,
            "[green]pass[/green]" if check.passed else "[red]FAIL[/red]",
            "-" if check.value is None else f"{check.value:.4g}",
            "-" if check.threshold is None else f"{check.threshold:.4g}",
            check.detail,
        )
    return table


def run_validate_theory(ctx: _Context) -> int:
    """
    ``driftspec validate-theory``.
    """
    report = run_theory_suite(
        ctx.args.profile, seed=ctx.seed, threads=ctx.threads, only=ctx.args.only
    )
    Console().print(_theory_table(report))
    if ctx.args.out is not None:
        ctx.args.out.write_text(report.model_dump_json(indent=2), encoding="utf-8")
    return EXIT_OK if report.passed else EXIT_CONVERGENCE


COMMANDS: dict[str, Callable[[_Context], int]] = {
    "average": run_average,
    "fit-hom": run_fit_hom,
    "fit-het": run_fit_het,
    "simulate": run_simulate,
    "bootstrap": run_bootstrap,
    "asymptotics": run_asymptotics,
    "gof": run_gof,
    "snr": run_snr,
    "compare": run_compare,
    "validate-theory": run_validate_theory,
}


def _fail(message: str) -> None:
    Console(stderr=True).print(
        f"driftspec: error: {message}", style="red", markup=False, highlight=False
    )


def main(argv: Sequence[str] | None = None) -> int:
    """
    Run the command line and return its exit code.
    """
    try:
        args = build_parser().parse_args(argv)
    except UsageError as err:
        _fail(str(err))
        return EXIT_USAGE
    _configure_logging(args)
    try:
        return COMMANDS[args.command](_Context(args))
    except UsageError as err:
        _fail(str(err))
        return EXIT_USAGE
    except DriftSpecError as err:
        _fail(f"{type(err).__name__}: {err}")
        return _EXIT_CODES[err.category]
    except (pydantic.ValidationError, ValueError) as err:
        _fail(str(err))
        return EXIT_DATA
