"""
Run configuration read from JSON.

Every field has a default, so ``{}`` is a valid configuration. Explicit command
line flags take precedence over the file.
"""

from __future__ import annotations

import json
import os
from collections.abc import Mapping
from pathlib import Path
from typing import Literal

import pydantic
from pydantic import Field

from driftspec.base import Base
from driftspec.exceptions import ConfigError, IoError

__all__ = [
    "THREADS_ENV_VAR",
    "BootstrapConfig",
    "FitOptions",
    "RunConfig",
    "load_config",
    "resolve_seed",
    "resolve_threads",
]

THREADS_ENV_VAR = "DRIFTSPEC_THREADS"


class FitOptions(Base):
    """
    Optimiser constants shared by the drift-model fits.
    """

    maxiter: int = Field(default=200, gt=0)
    min_delta_loglik: float = Field(default=1e-4, gt=0)
    start_c_opt: int = Field(default=25, gt=0)
    delta: float = Field(default=1e-20, gt=0)


class BootstrapConfig(Base):
    """
    Parametric bootstrap settings.
    """

    replicates: int = Field(default=200, gt=0)
    level: float = Field(default=0.95, gt=0, lt=1)
    seed: int = Field(default=0, ge=0, lt=1 << 64)
    bias_correct: bool = False
    pilot_replicates: int = Field(default=50, gt=0)


class RunConfig(Base):
    """
    Configuration of a command line run.
    """

    model: Literal["averaging", "hom", "het"] = "hom"
    fit: FitOptions = Field(default_factory=FitOptions)
    bootstrap: BootstrapConfig = Field(default_factory=BootstrapConfig)
    flat_regions: list[tuple[int, int]] = Field(default_factory=list)
    normalize: Literal["minmax", "none"] = "minmax"
    threads: int | None = Field(default=None, gt=0)
    output: Path | None = None


def load_config(path: str | Path | None) -> RunConfig:
    """
    Read a `RunConfig`; ``None`` gives the defaults.

    Raises
    ------
    IoError
        If the file cannot be read.
    ConfigError
        If the file is not JSON or does not validate.
    """
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        msg = f"Cannot read config {path}: {err}"
        raise IoError(msg) from err
    try:
        return RunConfig.model_validate(json.loads(text))
    except (json.JSONDecodeError, pydantic.ValidationError) as err:
        msg = f"Invalid config {path}: {err}"
        raise ConfigError(msg) from err


def resolve_threads(
    flag: int | None,
    config: RunConfig,
    environ: Mapping[str, str] = os.environ,
) -> int:
    """
    Worker threads: the flag, then the config, then ``DRIFTSPEC_THREADS``, then 1.

    Raises
    ------
    ConfigError
        If the chosen value is not a positive integer.
    """
    if flag is not None:
        value: int | str = flag
    elif config.threads is not None:
        value = config.threads
    elif environ.get(THREADS_ENV_VAR):
        value = environ[THREADS_ENV_VAR]
    else:
        return 1
    try:
        threads = int(value)
    except ValueError as err:
        msg = f"{THREADS_ENV_VAR}={value!r} is not an integer."
        raise ConfigError(msg) from err
    if threads < 1:
        msg = f"Thread count must be positive, got {threads}."
        raise ConfigError(msg)
    return threads


def resolve_seed(flag: int | None, config: RunConfig) -> int:
    """
    Master seed: the flag, then the bootstrap seed of the config.
    """
    if flag is None:
        return config.bootstrap.seed
    if flag < 0:
        msg = f"Seeds must be non-negative, got {flag}."
        raise ConfigError(msg)
    return flag
