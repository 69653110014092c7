"""
Simulation of the drift models from a declarative specification.

A `SimSpec` names generators for the echo ψ and the drift φ, the direction κ⁰ and
a noise model. With ``noise.kind == "hom"`` the data follow

    Y_{b,ν} = ψ_b + φ_b (κ⁰_ν + c) + ε_{b,ν},   vec(ε) ~ N(0, Σ),

and with ``noise.kind == "het"`` the noise covariance of batch b is
``Σ₀ + σ̃² vec(iψ_b) vec(iψ_b)ᵀ``, or, with ``phase_noise="exact"``, the echo is
multiplied by ``e^{iσ̃ξ_{b,ν}}`` instead.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Annotated, Any, Literal

try:
    from typing import Self
except ImportError:  # Python < 3.11
    from typing_extensions import Self

import numpy as np
import pydantic
from pydantic import Field, model_validator

from driftspec.algebra import Spd2, vec_of
from driftspec.base import Base, ComplexScalar, ComplexVector, RealVector
from driftspec.data import DataMatrix
from driftspec.exceptions import InvalidSpec, IoError
from driftspec.het import HetParams
from driftspec.hom import HomParams, Kappa

__all__ = [
    "ConstantGen",
    "Generator",
    "HetNoise",
    "HomNoise",
    "IidGen",
    "PhaseRampGen",
    "RandomWalkGen",
    "SimSpec",
    "VectorGen",
    "draw_from_params",
    "load_sim_spec",
    "simulate",
]

logger = logging.getLogger(__name__)

_SEED_MAX = (1 << 64) - 1


class ConstantGen(Base):
    """
    The same value for every batch.
    """

    kind: Literal["constant"] = "constant"
    value: ComplexScalar = 1 + 0j

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:  # type: ignore[type-arg]
        return np.full(n, self.value, dtype=np.complex128)


class VectorGen(Base):
    """
    A user-supplied value per batch.
    """

    kind: Literal["vector"] = "vector"
    values: ComplexVector

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:  # type: ignore[type-arg]
        if self.values.size != n:
            msg = f"Vector generator has {self.values.size} values for {n} batches."
            raise InvalidSpec(msg)
        return np.array(self.values)


class IidGen(Base):
    """
    Independent complex normal values ``mean + scale (ξ + iη)/√2``.
    """

    kind: Literal["iid"] = "iid"
    mean: ComplexScalar = 1 + 0j
    scale: float = Field(default=0.1, ge=0)

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:  # type: ignore[type-arg]
        z = rng.standard_normal((n, 2)) @ np.array([1.0, 1j]) / np.sqrt(2)
        return self.mean + self.scale * z  # type: ignore[no-any-return]


class RandomWalkGen(Base):
    """
    A drift whose log-amplitude and phase follow independent Gaussian random walks
    started at ``start``.
    """

    kind: Literal["random-walk"] = "random-walk"
    start: ComplexScalar = 1 + 0j
    amplitude_step: float = Field(default=0.01, ge=0)
    phase_step: float = Field(default=0.05, ge=0)

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:  # type: ignore[type-arg]
        steps = rng.standard_normal((n, 2)) * [self.amplitude_step, self.phase_step]
        steps[0] = 0
        walk = np.cumsum(steps, axis=0)
        return self.start * np.exp(walk[:, 0] + 1j * walk[:, 1])  # type: ignore[no-any-return]


class PhaseRampGen(Base):
    """
    ``amplitude · e^{i rate b / B}``: a slow deterministic phase drift.
    """

    kind: Literal["phase-ramp"] = "phase-ramp"
    amplitude: float = 1.0
    rate: float = 1.0

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:  # type: ignore[type-arg]
        return self.amplitude * np.exp(1j * self.rate * np.arange(n) / n)  # type: ignore[no-any-return]


Generator = Annotated[
    ConstantGen | VectorGen | IidGen | RandomWalkGen | PhaseRampGen,
    Field(discriminator="kind"),
]


class HomNoise(Base):
    """
    I.i.d. noise with covariance Σ.
    """

    kind: Literal["hom"] = "hom"
    sigma: Spd2


class HetNoise(Base):
    """
    Phase noise of size σ̃ on the echo on top of i.i.d. noise with covariance Σ₀.
    """

    kind: Literal["het"] = "het"
    sigma0: Spd2
    sigma_tilde: float = Field(ge=0)
    phase_noise: Literal["linear", "exact"] = "linear"


class SimSpec(Base):
    """
    A complete, seeded simulation specification.
    """

    B: int = Field(ge=1)
    N_plus_1: int = Field(ge=2)
    psi_gen: Generator = Field(default_factory=ConstantGen)
    phi_gen: Generator = Field(default_factory=ConstantGen)
    kappa0: Kappa
    c: ComplexScalar = 0j
    noise: Annotated[HomNoise | HetNoise, Field(discriminator="kind")]
    seed: int = Field(default=0, ge=0, le=_SEED_MAX)
    freq_hz: RealVector | None = None

    @model_validator(mode="after")
    def _ensure_consistent_lengths(self) -> Self:
        if self.kappa0.size != self.N_plus_1:
            msg = f"kappa0 has {self.kappa0.size} entries, expected {self.N_plus_1}."
            raise ValueError(msg)
        for name, gen in (("psi_gen", self.psi_gen), ("phi_gen", self.phi_gen)):
            if isinstance(gen, VectorGen) and gen.values.size != self.B:
                msg = f"{name} has {gen.values.size} values, expected {self.B}."
                raise ValueError(msg)
        if self.freq_hz is not None and self.freq_hz.size != self.N_plus_1:
            msg = f"freq_hz has {self.freq_hz.size} entries, expected {self.N_plus_1}."
            raise ValueError(msg)
        return self

    @classmethod
    def from_dict(cls, data: Any) -> Self:
        """
        Validate a specification, raising `InvalidSpec` on any problem.
        """
        try:
            return cls.model_validate(data)
        except pydantic.ValidationError as err:
            raise InvalidSpec(str(err)) from err


def load_sim_spec(path: str | Path) -> SimSpec:
    """
    Read a `SimSpec` from a JSON file.

    Raises
    ------
    IoError
        If the file cannot be read or is not JSON.
    InvalidSpec
        If the content is not a valid specification.
    """
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as err:
        msg = f"Cannot read simulation spec {path}: {err}"
        raise IoError(msg) from err
    return SimSpec.from_dict(data)


def _gaussian_pairs(
    rng: np.random.Generator,
    shape: tuple[int, ...],
    sigma: np.ndarray,  # type: ignore[type-arg]
) -> np.ndarray:  # type: ignore[type-arg]
    # complex noise with vec covariance sigma; sigma may vary along the first axis
    chol = np.linalg.cholesky(sigma)
    z = rng.standard_normal((*shape, 2))
    if chol.ndim == 2:
        pairs = z @ chol.T
    else:
        pairs = np.einsum("bij,bnj->bni", chol, z)
    return pairs[..., 0] + 1j * pairs[..., 1]  # type: ignore[no-any-return]


def _het_sigmas(
    psi: np.ndarray, sigma0: np.ndarray, sigma_tilde: float  # type: ignore[type-arg]
) -> np.ndarray:  # type: ignore[type-arg]
    v = vec_of(1j * psi)
    return sigma0 + sigma_tilde**2 * (v[:, :, None] * v[:, None, :])  # type: ignore[no-any-return]


def simulate(spec: SimSpec | Any) -> DataMatrix:
    """
    Draw a data matrix from ``spec``.

    The same spec, seed included, always gives the same matrix.

    Raises
    ------
    InvalidSpec
        If the spec does not validate or a generator produces non-finite values.
    """
    if not isinstance(spec, SimSpec):
        spec = SimSpec.from_dict(spec)
    rng = np.random.default_rng(spec.seed)
    shape = (spec.B, spec.N_plus_1)
    psi = spec.psi_gen.draw(rng, spec.B)
    phi = spec.phi_gen.draw(rng, spec.B)
    if not (np.all(np.isfinite(psi)) and np.all(np.isfinite(phi))):
        msg = "A generator produced non-finite values."
        raise InvalidSpec(msg)
    signal = np.outer(phi, spec.kappa0 + spec.c)

    noise = spec.noise
    if isinstance(noise, HomNoise):
        values = psi[:, None] + signal + _gaussian_pairs(rng, shape, noise.sigma)
    elif noise.phase_noise == "linear":
        sigmas = _het_sigmas(psi, noise.sigma0, noise.sigma_tilde)
        values = psi[:, None] + signal + _gaussian_pairs(rng, shape, sigmas)
    else:
        phase = noise.sigma_tilde * rng.standard_normal(shape)
        echo = psi[:, None] * np.exp(1j * phase)
        values = echo + signal + _gaussian_pairs(rng, shape, noise.sigma0)

    logger.debug("Simulated %d x %d matrix with seed %d.", *shape, spec.seed)
    return DataMatrix.from_values(
        values,
        freq_hz=spec.freq_hz,
        meta={"source": "simulate", "seed": str(spec.seed)},
    )


def draw_from_params(
    params: HomParams | HetParams, rng: np.random.Generator
) -> np.ndarray:  # type: ignore[type-arg]
    """
    One data matrix from fitted parameters.
    """
    shape = (params.phi.size, params.kappa.size)
    if isinstance(params, HetParams):
        signal = np.outer(params.phi, params.kappa_breve)
        noise = _gaussian_pairs(rng, shape, params.sigmas())
    else:
        signal = np.outer(params.phi, params.kappa)
        noise = _gaussian_pairs(rng, shape, params.sigma)
    return params.psi[:, None] + signal + noise  # type: ignore[no-any-return]
