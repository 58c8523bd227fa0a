"""Dipole-trap light shifts and the thermal atom ensemble.

Energies are in kelvin (E/k_B). The differential light shift of an atom
with total energy E is delta_ls(E) = delta0 + eta * E / (2 hbar), with
delta0 = -eta * U0 / hbar < 0 for an atom resting at the trap bottom.
"""
import logging
import math
from typing import Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator
from scipy import stats

from core.constants import CESIUM, HBAR, K_OVER_HBAR, KB, T2STAR_FACTOR
from core.errors import ConfigurationError

logger = logging.getLogger(__name__)

# Atoms per independently seeded random stream.
ATOM_BLOCK = 8192

# Truncated sampling refuses to run below this acceptance probability.
MIN_ACCEPTANCE = 0.01


class TrapConfig(BaseModel):
    """Standing-wave dipole trap parameters.

    Either `depth` (kelvin) or `intensity_ratio` (I/I0) determines U0.
    """
    depth: Optional[float] = Field(default=None, gt=0.0)
    eta: float = Field(default=CESIUM.eta, gt=0.0)
    effective_detuning: float = CESIUM.effective_detuning
    hyperfine_splitting: float = Field(default=CESIUM.hyperfine_in_linewidths, gt=0.0)
    laser_wavelength: float = Field(default=CESIUM.trap_wavelength, gt=0.0)
    linewidth: float = Field(default=CESIUM.linewidth, gt=0.0)
    intensity_ratio: Optional[float] = Field(default=None, ge=0.0)

    @field_validator("effective_detuning")
    @classmethod
    def _nonzero_detuning(cls, value: float) -> float:
        if value == 0:
            raise ValueError("effective_detuning must be non-zero")
        return value

    def resolved_depth(self) -> float:
        """U0 in kelvin, from `depth` or else from the intensity."""
        if self.depth is not None:
            return self.depth
        return trap_depth_from_intensity(self)

    def eta_from_detunings(self) -> float:
        """|omega_hfs / Delta_eff| for the configured detunings."""
        return abs(self.hyperfine_splitting / self.effective_detuning)

    def delta0(self) -> float:
        return delta0_max(self.resolved_depth(), self.eta)


class EnsembleSpec(BaseModel):
    """Thermal ensemble: temperature (K), atom count, optional energy cut."""
    temperature: float = Field(gt=0.0)
    atom_count: int = Field(default=100_000, ge=1)
    truncation_energy: Optional[float] = Field(default=None, gt=0.0)
    rng_seed: int = Field(default=0, ge=0)

    @property
    def block_count(self) -> int:
        return math.ceil(self.atom_count / ATOM_BLOCK)

    def block_size(self, block: int) -> int:
        start = block * ATOM_BLOCK
        return max(0, min(ATOM_BLOCK, self.atom_count - start))


class LightShiftDistribution(BaseModel):
    """Gamma-shaped distribution of differential light shifts above delta0."""
    delta0: float = Field(le=0.0)
    K: float = Field(gt=0.0)

    @classmethod
    def from_temperature(cls, delta0: float, temperature: float, eta: float) -> "LightShiftDistribution":
        """K = 2 hbar / (eta k_B T)."""
        if temperature <= 0:
            raise ValueError(f"temperature must be positive, got {temperature}")
        return cls(delta0=delta0, K=2.0 / (eta * K_OVER_HBAR * temperature))

    def offset_distribution(self):
        """scipy distribution of delta_ls - delta0."""
        return stats.gamma(a=3.0, scale=1.0 / self.K)


def trap_depth_from_intensity(cfg: TrapConfig) -> float:
    """Two-level light-shift depth |U0| = (hbar Gamma / 8)(I/I0)(Gamma/Delta) in kelvin."""
    if cfg.intensity_ratio is None:
        raise ConfigurationError("trap depth needs either depth or intensity_ratio", field="intensity_ratio")
    energy = HBAR * cfg.linewidth / 8.0 * cfg.intensity_ratio * cfg.linewidth / cfg.effective_detuning
    return abs(energy) / KB


def intensity_for_depth(depth: float, cfg: TrapConfig) -> float:
    """I/I0 that produces a trap of the given depth (kelvin)."""
    if depth < 0:
        raise ValueError(f"depth must be >= 0, got {depth}")
    per_unit = HBAR * cfg.linewidth ** 2 / (8.0 * abs(cfg.effective_detuning)) / KB
    return depth / per_unit


def delta0_max(depth: float, eta: float) -> float:
    """Maximum differential light shift delta0 = -eta U0 / hbar in rad/s."""
    if depth < 0:
        raise ValueError(f"depth must be >= 0, got {depth}")
    return -eta * K_OVER_HBAR * depth


def depth_from_delta0(delta0: float, eta: float) -> float:
    """Trap depth (kelvin) implied by a measured delta0."""
    return -delta0 / (eta * K_OVER_HBAR)


def boltzmann_pdf(energy, temperature: float):
    """Three-dimensional harmonic-trap energy density E^2 exp(-E/kT) / (2 (kT)^3)."""
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    return stats.gamma.pdf(energy, a=3.0, scale=temperature)


def delta_ls_of_energy(energy, delta0: float, eta: float):
    """Average differential light shift of an atom with energy E (kelvin).

    Half of the total energy is potential energy on average.
    """
    energy = np.asarray(energy, dtype=float)
    if np.any(energy < 0):
        raise ValueError("energy must be >= 0")
    result = delta0 + eta * K_OVER_HBAR * energy / 2.0
    return float(result) if result.ndim == 0 else result


def energy_of_delta_ls(delta_ls, delta0: float, eta: float):
    result = 2.0 * (np.asarray(delta_ls, dtype=float) - delta0) / (eta * K_OVER_HBAR)
    return float(result) if result.ndim == 0 else result


def lightshift_pdf(delta_ls, dist: LightShiftDistribution):
    """(K^3/2)(d - d0)^2 exp(-K (d - d0)); zero below delta0."""
    return dist.offset_distribution().pdf(np.asarray(delta_ls, dtype=float) - dist.delta0)


def thermal_validity_ok(temperature: float, depth: float) -> bool:
    """The harmonic approximation holds while k_B T <= U0 / 4."""
    return temperature <= depth / 4.0


def block_generator(seed: int, block: int) -> np.random.Generator:
    """Random stream of one atom block; independent of how blocks are scheduled."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(block,)))


def check_truncation(spec: EnsembleSpec, depth: Optional[float]) -> None:
    if spec.truncation_energy is None:
        return
    if depth is not None and spec.truncation_energy > depth:
        raise ConfigurationError(
            f"truncation energy {spec.truncation_energy:g} K exceeds trap depth {depth:g} K",
            field="truncation_energy",
        )
    acceptance = stats.gamma.cdf(spec.truncation_energy, a=3.0, scale=spec.temperature)
    if acceptance < MIN_ACCEPTANCE:
        raise ConfigurationError(
            f"truncation at {spec.truncation_energy:g} K keeps only {acceptance:.2e} of the "
            f"thermal distribution (minimum {MIN_ACCEPTANCE})",
            field="truncation_energy",
        )


def draw_energies(
    rng: np.random.Generator,
    count: int,
    temperature: float,
    truncation_energy: Optional[float] = None,
) -> np.ndarray:
    """Draw `count` energies from the 3D Boltzmann distribution.

    A shape-3 gamma variate is the sum of three exponential variates;
    energies above `truncation_energy` are rejected and redrawn.
    """
    if count <= 0:
        return np.empty(0)
    if truncation_energy is None:
        return rng.exponential(temperature, size=(3, count)).sum(axis=0)

    accepted = np.empty(0)
    acceptance = stats.gamma.cdf(truncation_energy, a=3.0, scale=temperature)
    while accepted.size < count:
        missing = count - accepted.size
        batch = int(math.ceil(missing / acceptance * 1.1)) + 16
        draws = rng.exponential(temperature, size=(3, batch)).sum(axis=0)
        accepted = np.concatenate([accepted, draws[draws <= truncation_energy]])
    return accepted[:count]


def sample_block(spec: EnsembleSpec, block: int) -> np.ndarray:
    """Energies of the atoms in one block."""
    check_truncation(spec, None)
    rng = block_generator(spec.rng_seed, block)
    return draw_energies(rng, spec.block_size(block), spec.temperature, spec.truncation_energy)


def sample_ensemble(spec: EnsembleSpec, depth: Optional[float] = None) -> np.ndarray:
    """Draw the energies (kelvin) of all atoms of the ensemble.

    Args:
        spec: Ensemble specification
        depth: Trap depth U0 in kelvin, used for validation only

    Returns:
        Array of atom_count energies, deterministic for a fixed seed
    """
    check_truncation(spec, depth)
    if depth is not None and not thermal_validity_ok(spec.temperature, depth):
        logger.warning(
            "k_B T = %.3g mK exceeds U0/4 = %.3g mK; the harmonic approximation degrades",
            spec.temperature * 1e3, depth * 1e3 / 4.0,
        )
    blocks = [sample_block(spec, b) for b in range(spec.block_count)]
    return np.concatenate(blocks)


def t2star_from_temperature(temperature: float, eta: float, factor: float = T2STAR_FACTOR) -> float:
    """T2* = factor * 2 hbar / (eta k_B T)."""
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    return factor * 2.0 / (eta * K_OVER_HBAR * temperature)


def temperature_from_t2star(t2star: float, eta: float, factor: float = T2STAR_FACTOR) -> float:
    """Inverse of t2star_from_temperature."""
    if t2star <= 0:
        raise ValueError(f"t2star must be positive, got {t2star}")
    return factor * 2.0 / (eta * K_OVER_HBAR * t2star)
