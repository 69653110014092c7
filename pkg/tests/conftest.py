from __future__ import annotations

from pathlib import Path
from typing import TypeVar

import numpy as np
import pytest

from driftspec.base import Base
from driftspec.data import DataMatrix
from driftspec.simulate import ConstantGen, HomNoise, RandomWalkGen, SimSpec, simulate

T = TypeVar("T", bound=Base)

DATA_DIR = Path(__file__).parent / "data"


def pytest_addoption(parser: pytest.Parser) -> None:
    parser.addoption(
        "--runslow",
        action="store_true",
        default=False,
        help="run full-size Monte-Carlo acceptance tests",
    )


def pytest_collection_modifyitems(
    config: pytest.Config, items: list[pytest.Item]
) -> None:
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def read_in_json(*, json_fname: str, model_cls: type[T]) -> T:
    with open(DATA_DIR / json_fname) as f:
        return model_cls.model_validate_json(f.read())


def data_path(fname: str) -> Path:
    return DATA_DIR / fname


def random_direction(rng: np.random.Generator, n: int) -> np.ndarray:  # type: ignore[type-arg]
    z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return z / np.linalg.norm(z)  # type: ignore[no-any-return]


def random_kappa(rng: np.random.Generator, n: int) -> np.ndarray:  # type: ignore[type-arg]
    """
    A random mean-zero unit-norm direction.
    """
    z = random_direction(rng, n)
    z = z - z.mean()
    return z / np.linalg.norm(z)  # type: ignore[no-any-return]


def peaked_kappa(n_freq: int, phase: float = 0.4) -> np.ndarray:  # type: ignore[type-arg]
    """
    A mean-zero unit direction with one dominant positive line.
    """
    grid = np.linspace(0, 1, n_freq)
    lines = np.exp(-(((grid - 0.3) / 0.1) ** 2)) + 0.5 * np.exp(
        -(((grid - 0.7) / 0.08) ** 2)
    )
    z = (lines + 0.1j * np.sin(2 * np.pi * grid)) * np.exp(1j * phase)
    z = z - z.mean()
    return z / np.linalg.norm(z)  # type: ignore[no-any-return]


def hom_spec(
    n_batches: int = 60,
    n_freq: int = 12,
    *,
    sigma: list[list[float]] | None = None,
    seed: int = 1,
    phase_step: float = 0.05,
) -> SimSpec:
    return SimSpec(
        B=n_batches,
        N_plus_1=n_freq,
        psi_gen=ConstantGen(value=2 + 0.5j),
        phi_gen=RandomWalkGen(start=1 + 0j, amplitude_step=0.01, phase_step=phase_step),
        kappa0=peaked_kappa(n_freq),
        noise=HomNoise(sigma=sigma or [[0.01, 0.002], [0.002, 0.015]]),
        seed=seed,
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20241019)


@pytest.fixture
def hom_data() -> DataMatrix:
    return simulate(hom_spec())
