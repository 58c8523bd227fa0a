"""Physical constants and unit conversions shared by every module.

Energies are carried in kelvin (E/k_B) and angular frequencies in rad/s.
Hz only appears at the CLI and report boundary.
"""
import math
from dataclasses import dataclass

from scipy import constants as sc

HBAR = sc.hbar
KB = sc.k
C = sc.c

# k_B / hbar: converts an energy in kelvin to an angular frequency in rad/s.
K_OVER_HBAR = KB / HBAR

# 1/e time of the thermal envelope in units of K = 2 hbar / (eta k_B T).
T2STAR_FACTOR = math.sqrt(math.exp(2.0 / 3.0) - 1.0)
ENVELOPE_COEFF = T2STAR_FACTOR ** 2

# Two-digit values as they are usually quoted.
T2STAR_FACTOR_ROUNDED = 0.97
ENVELOPE_COEFF_ROUNDED = 0.95

MILLIKELVIN = 1e-3
MICROTESLA = 1e-6
MILLISECOND = 1e-3


def hz_to_rad(frequency_hz: float) -> float:
    """Convert a frequency nu in Hz to an angular frequency 2*pi*nu."""
    return 2.0 * math.pi * frequency_hz


def rad_to_hz(omega: float) -> float:
    """Convert an angular frequency in rad/s to Hz."""
    return omega / (2.0 * math.pi)


def wavelength_to_omega(wavelength: float) -> float:
    """Angular optical frequency of light with the given vacuum wavelength."""
    if wavelength <= 0:
        raise ValueError(f"wavelength must be positive, got {wavelength}")
    return 2.0 * math.pi * C / wavelength


@dataclass(frozen=True)
class CesiumConstants:
    """Cesium clock-transition and trap defaults.

    Construct another instance to override individual values.
    """
    mass: float = 2.2069e-25                      # kg
    d1_wavelength: float = 894.6e-9               # m, 6P_1/2
    d2_wavelength: float = 852.3e-9               # m, 6P_3/2
    linewidth: float = 2.0 * math.pi * 5.22e6     # rad/s, D2 natural linewidth
    hyperfine_splitting: float = 2.0 * math.pi * 9.192631770e9  # rad/s
    eta: float = 1.45e-4
    effective_detuning_linewidths: float = -1.2e7
    hyperfine_linewidths: float = 2.0e3
    quadratic_zeeman: float = 2.0 * math.pi * 43e-3 / MICROTESLA ** 2  # rad/s per T^2
    trap_wavelength: float = 1064e-9              # m
    scattering_rate_anchor: float = 11.0          # 1/s at the anchor depth
    scattering_depth_anchor: float = 1.0 * MILLIKELVIN  # K

    @property
    def effective_detuning(self) -> float:
        """Effective trap-laser detuning in rad/s (negative: red detuned)."""
        return self.effective_detuning_linewidths * self.linewidth

    @property
    def hyperfine_in_linewidths(self) -> float:
        """Hyperfine splitting expressed through the linewidth, in rad/s."""
        return self.hyperfine_linewidths * self.linewidth


CESIUM = CesiumConstants()
