"""Closed-form Ramsey and spin-echo signals of a thermal ensemble.

The inhomogeneous average over the light-shift distribution gives an
envelope alpha(t, T2*) and a phase kappa(t, T2*). Quadrature versions of
the same averages are provided as independent references.
"""
import math
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field
from scipy import integrate, stats

from core.constants import ENVELOPE_COEFF, T2STAR_FACTOR
from core.trap import LightShiftDistribution


class RabiParams(BaseModel):
    """Resonant Rabi flopping: P3 = (C/2)(1 - cos Omega_R t)."""
    rabi_frequency: float = Field(ge=0.0)
    contrast: float = Field(default=1.0, ge=0.0, le=1.0)


class RamseyParams(BaseModel):
    """Ramsey fringe parameters; frequencies in rad/s."""
    amplitude: float
    offset: float
    detuning: float
    t2star: float = Field(gt=0.0)
    phase: float = 0.0

    @classmethod
    def from_detunings(
        cls,
        delta_synth: float,
        delta_b: float,
        delta0: float,
        **kwargs,
    ) -> "RamseyParams":
        """delta' = delta_synth - delta_B - delta0."""
        return cls(detuning=delta_synth - delta_b - delta0, **kwargs)

    @property
    def visibility(self) -> float:
        return self.amplitude / self.offset


class EchoParams(RamseyParams):
    """Spin-echo parameters: pi pulse at tau_pi, echo phase psi."""
    tau_pi: float = Field(ge=0.0)
    echo_phase: float = 0.0


class HomogeneousNoise(BaseModel):
    """Standard deviation of the detuning difference between the two echo intervals."""
    sigma: float = Field(default=0.0, ge=0.0)


def _scalar_or_array(result: np.ndarray):
    return float(result) if np.ndim(result) == 0 else result


def envelope_alpha(t, t2star: float, coeff: float = ENVELOPE_COEFF):
    """alpha = [1 + coeff (t/T2*)^2]^(-3/2); even in t."""
    if t2star <= 0:
        raise ValueError(f"t2star must be positive, got {t2star}")
    x = np.asarray(t, dtype=float) / t2star
    return _scalar_or_array((1.0 + coeff * x * x) ** -1.5)


def phase_kappa(t, t2star: float, factor: float = T2STAR_FACTOR):
    """kappa = -3 arctan(factor t / T2*); odd in t."""
    if t2star <= 0:
        raise ValueError(f"t2star must be positive, got {t2star}")
    x = np.asarray(t, dtype=float) / t2star
    return _scalar_or_array(-3.0 * np.arctan(factor * x))


def ramsey_p3(t, p: RamseyParams, coeff: float = ENVELOPE_COEFF, factor: float = T2STAR_FACTOR):
    """P3 = B + alpha A cos(delta' t + kappa + phi)."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("Ramsey times must be >= 0")
    alpha = envelope_alpha(t, p.t2star, coeff)
    kappa = phase_kappa(t, p.t2star, factor)
    return _scalar_or_array(p.offset + alpha * p.amplitude * np.cos(p.detuning * t + kappa + p.phase))


def echo_p3(
    t,
    p: EchoParams,
    sigma: float = 0.0,
    coeff: float = ENVELOPE_COEFF,
    factor: float = T2STAR_FACTOR,
):
    """P3 = B - alpha(|s|) A cos(delta' s + kappa(s) + psi) with s = t - 2 tau_pi.

    A non-zero `sigma` multiplies the fringe by exp[-sigma^2 (t - tau_pi)^2 / 2],
    the Gaussian average over a detuning jump in the second interval.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < p.tau_pi):
        raise ValueError(f"echo times must be >= tau_pi = {p.tau_pi}")
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    s = t - 2.0 * p.tau_pi
    alpha = envelope_alpha(s, p.t2star, coeff)
    kappa = phase_kappa(s, p.t2star, factor)
    damping = np.exp(-0.5 * (sigma * (t - p.tau_pi)) ** 2)
    fringe = np.cos(p.detuning * s + kappa + p.echo_phase)
    return _scalar_or_array(p.offset - alpha * damping * p.amplitude * fringe)


def visibility_hom(tau_pi: float, sigma: float, v0: float = 1.0) -> float:
    """Echo visibility V(2 tau_pi) = V0 exp(-tau_pi^2 sigma^2 / 2)."""
    if tau_pi < 0:
        raise ValueError(f"tau_pi must be >= 0, got {tau_pi}")
    return v0 * math.exp(-0.5 * (tau_pi * sigma) ** 2)


def physical_cutoff(dist: LightShiftDistribution) -> float:
    """Largest light shift an atom bound in the trap can see: delta0 / 2."""
    return dist.delta0 / 2.0


def lightshift_characteristic(t: float, dist: LightShiftDistribution, cutoff: Optional[float] = None) -> complex:
    """Average of exp[-i (delta_ls - delta0) t] over the light-shift distribution.

    Args:
        t: Time in seconds, >= 0
        dist: Light-shift distribution
        cutoff: Upper integration limit in delta_ls (rad/s); None integrates to infinity

    Returns:
        Complex average; its modulus is the envelope and its argument the phase
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    pdf = dist.offset_distribution().pdf
    upper = math.inf if cutoff is None else cutoff - dist.delta0
    if upper <= 0:
        return 0j
    if t == 0:
        total = 1.0 if cutoff is None else float(dist.offset_distribution().cdf(upper))
        return complex(total, 0.0)
    if math.isinf(upper):
        re, _ = integrate.quad(pdf, 0.0, upper, weight="cos", wvar=t)
        im, _ = integrate.quad(pdf, 0.0, upper, weight="sin", wvar=t)
    else:
        re, _ = integrate.quad(pdf, 0.0, upper, weight="cos", wvar=t, limit=500)
        im, _ = integrate.quad(pdf, 0.0, upper, weight="sin", wvar=t, limit=500)
    return complex(re, -im)


def _signed_characteristic(s: float, dist: LightShiftDistribution, cutoff: Optional[float]) -> complex:
    value = lightshift_characteristic(abs(s), dist, cutoff)
    return value if s >= 0 else value.conjugate()


def ramsey_w_inhomogeneous(
    t: float,
    delta_prime: float,
    dist: LightShiftDistribution,
    cutoff: Optional[float] = None,
    phase: float = 0.0,
) -> float:
    """Ensemble-averaged Ramsey w-component by quadrature."""
    chi = lightshift_characteristic(t, dist, cutoff)
    return (np.exp(1j * (delta_prime * t + phase)) * chi).real


def echo_w_inhomogeneous(
    t: float,
    delta_prime: float,
    dist: LightShiftDistribution,
    tau_pi: float,
    cutoff: Optional[float] = None,
    phase: float = 0.0,
) -> float:
    """Ensemble-averaged echo w-component by quadrature."""
    if t < tau_pi:
        raise ValueError(f"t must be >= tau_pi = {tau_pi}")
    s = t - 2.0 * tau_pi
    chi = _signed_characteristic(s, dist, cutoff)
    return -(np.exp(1j * (delta_prime * s + phase)) * chi).real


def envelope_and_phase(t: float, dist: LightShiftDistribution, cutoff: Optional[float] = None) -> Tuple[float, float]:
    """(alpha, kappa) read off the quadrature average."""
    chi = lightshift_characteristic(t, dist, cutoff)
    return abs(chi), math.atan2(chi.imag, chi.real)


def gaussian_average_echo_w(tau_pi: float, sigma: float) -> float:
    """Average of -cos(dd tau_pi) over dd ~ N(0, sigma^2), by quadrature."""
    if tau_pi < 0 or sigma < 0:
        raise ValueError("tau_pi and sigma must be >= 0")
    if sigma == 0 or tau_pi == 0:
        return -1.0
    pdf = stats.norm(scale=sigma).pdf
    half, _ = integrate.quad(
        pdf, 0.0, 14.0 * sigma, weight="cos", wvar=tau_pi,
        epsabs=1e-14, epsrel=1e-13, limit=500,
    )
    return -2.0 * half
