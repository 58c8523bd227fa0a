"""Irreversible dephasing mechanisms expressed as detuning fluctuations.

Every mechanism yields sigma(tau_pi), the standard deviation of the
detuning difference between the two free-precession intervals of a spin
echo with the pi pulse at tau_pi, in rad/s. Allan-based mechanisms average
over windows of length tau_pi. Budget rows quote sigma(T2') for the
Allan-based and magnetic rows and sigma(T2'/2) for heating and photon
scattering.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import allantools
import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field
from scipy import integrate, stats

from analysis.fitting import t2prime_from_sigma
from core.constants import CESIUM, HBAR, K_OVER_HBAR, KB, rad_to_hz, wavelength_to_omega
from core.errors import ConfigurationError, InputDataError
from core.trap import TrapConfig

logger = logging.getLogger(__name__)

LINE_FREQUENCY = 50.0
_SINE_WINDOWS = 256


@dataclass
class TimeSeries:
    """Evenly sampled record, e.g. photodiode voltage or beat amplitude."""
    sample_interval: float
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.sample_interval <= 0:
            raise InputDataError(f"sample interval must be positive, got {self.sample_interval}")
        if self.values.ndim != 1:
            raise InputDataError("time series values must be one-dimensional")

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    def normalized(self) -> "TimeSeries":
        """Copy scaled to unit mean."""
        mean = self.mean
        if mean == 0:
            raise InputDataError("cannot normalize a series with zero mean")
        return TimeSeries(self.sample_interval, self.values / mean)

    @classmethod
    def from_csv(cls, path: str) -> "TimeSeries":
        """Read a two-column CSV (time_s, value) with uniform sampling."""
        try:
            frame = pd.read_csv(path, comment="#")
        except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
            raise InputDataError(f"cannot parse {path}: {exc}") from exc
        if frame.shape[1] < 2:
            raise InputDataError(f"{path}: expected two columns (time_s, value)")
        t = _numeric_column(frame.iloc[:, 0])
        values = _numeric_column(frame.iloc[:, 1])
        if t.size < 2:
            raise InputDataError(f"{path}: need at least two samples")
        steps = np.diff(t)
        dt = float(np.median(steps))
        if dt <= 0:
            raise InputDataError(f"{path}: time column must increase")
        irregular = np.flatnonzero(np.abs(steps - dt) > 1e-6 * dt)
        if irregular.size:
            raise InputDataError("time step differs from the sampling interval", row=int(irregular[0]) + 2)
        return cls(dt, values)


def _numeric_column(column: pd.Series) -> np.ndarray:
    converted = pd.to_numeric(column, errors="coerce")
    bad = np.flatnonzero(converted.isna().to_numpy())
    if bad.size:
        raise InputDataError(f"non-numeric value {column.iloc[bad[0]]!r}", row=int(bad[0]) + 1)
    return converted.to_numpy(dtype=float)


def window_length(series: TimeSeries, tau: float) -> int:
    """Samples per averaging window; tau must be a whole number of samples."""
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    ratio = tau / series.sample_interval
    m = int(round(ratio))
    if m < 1 or abs(ratio - m) > 1e-6 * max(1.0, ratio):
        raise ValueError(f"tau = {tau:g} s is not a multiple of the sampling interval {series.sample_interval:g} s")
    return m


def allan_deviation(series: TimeSeries, tau: float, normalize: bool = True) -> float:
    """Allan deviation over adjacent, non-overlapping windows of length tau.

    Args:
        series: Evenly sampled record
        tau: Averaging time, a whole number of sample intervals
        normalize: Divide by the record mean first

    Returns:
        sigma_A(tau), dimensionless for a normalized series
    """
    m = window_length(series, tau)
    minimum = 2 * m
    if len(series) < minimum:
        raise InputDataError(
            f"Allan deviation at tau = {tau:g} s needs at least {minimum} samples, got {len(series)}"
        )
    data = series.normalized() if normalize else series
    rate = 1.0 / data.sample_interval
    _, adev, _, _ = allantools.adev(data.values, rate=rate, data_type="freq", taus=np.array([m / rate]))
    if len(adev) == 0:
        raise InputDataError(f"no complete window pair at tau = {tau:g} s")
    return float(adev[0])


def default_taus(series: TimeSeries) -> List[float]:
    """Powers of two times the sample interval while two windows still fit."""
    taus = []
    m = 1
    while 2 * m <= len(series):
        taus.append(m * series.sample_interval)
        m *= 2
    return taus


def allan_curve(series: TimeSeries, taus: Optional[Sequence[float]] = None, normalize: bool = True) -> List[Tuple[float, float]]:
    taus = default_taus(series) if taus is None else list(taus)
    return [(tau, allan_deviation(series, tau, normalize)) for tau in taus]


def allan_at(series: TimeSeries, tau: float, normalize: bool = True) -> float:
    """Allan deviation at the whole number of samples closest to tau."""
    m = max(1, int(round(tau / series.sample_interval)))
    return allan_deviation(series, m * series.sample_interval, normalize)


def sigma_from_allan(sigma_a: float, delta0: float) -> float:
    """Detuning fluctuation sqrt(2) |delta0| sigma_A of two independent intervals."""
    return abs(math.sqrt(2.0) * delta0 * sigma_a)


class HeatingModel(BaseModel):
    """Constant heating rate (K/s) of an ensemble at temperature T (K)."""
    heating_rate: float = Field(ge=0.0)
    temperature: float = Field(gt=0.0)
    dimension: Literal[1, 2, 3] = 3
    mass: float = Field(default=CESIUM.mass, gt=0.0)


def heating_sigma_at(model: HeatingModel, tau_pi: float, eta: float) -> float:
    """sigma^2 = (eta/hbar)^2 n k_B T Edot tau_pi, averaged over the n-dimensional energy distribution."""
    if tau_pi < 0:
        raise ValueError(f"tau_pi must be >= 0, got {tau_pi}")
    return eta * K_OVER_HBAR * math.sqrt(model.dimension * model.temperature * model.heating_rate * tau_pi)


def heating_sigma(model: HeatingModel, t2_prime: float, eta: float) -> float:
    """Heating-induced sigma at tau_pi = T2'/2: (eta/hbar) sqrt((n/2) Edot T2' k_B T)."""
    if t2_prime <= 0:
        raise ValueError(f"t2_prime must be positive, got {t2_prime}")
    return eta * K_OVER_HBAR * math.sqrt(0.5 * model.dimension * model.heating_rate * t2_prime * model.temperature)


def heating_sigma_mixture(model: HeatingModel, t2_prime: float, eta: float) -> float:
    """Same quantity as heating_sigma, by integrating the Gaussian detuning
    spread of each energy over the thermal energy distribution."""
    tau_pi = t2_prime / 2.0
    energy_pdf = stats.gamma(a=model.dimension, scale=model.temperature).pdf

    def second_moment(energy: float) -> float:
        width = eta * K_OVER_HBAR * math.sqrt(energy * model.heating_rate * tau_pi)
        if width == 0:
            return 0.0
        gauss = stats.norm(scale=width).pdf
        value, _ = integrate.quad(lambda d: d * d * gauss(d), -12.0 * width, 12.0 * width,
                                  epsabs=0.0, epsrel=1e-11, limit=200)
        return value

    variance, _ = integrate.quad(lambda e: second_moment(e) * energy_pdf(e), 0.0, 80.0 * model.temperature,
                                 epsabs=0.0, epsrel=1e-9, limit=200)
    return math.sqrt(variance)


def photon_heating_rate(wavelength: float, mass: float, tau_pi: float) -> float:
    """Heating rate (K/s) of one scattered photon per tau_pi: hbar^2 k^2 / (m tau_pi)."""
    if tau_pi <= 0:
        raise ValueError(f"tau_pi must be positive, got {tau_pi}")
    k = 2.0 * math.pi / wavelength
    return (HBAR * k) ** 2 / (mass * tau_pi) / KB


def single_photon_sigma(temperature: float, wavelength: float, mass: float, eta: float) -> float:
    """eta k sqrt(3 k_B T / m)."""
    k = 2.0 * math.pi / wavelength
    return eta * k * math.sqrt(3.0 * KB * temperature / mass)


def multi_photon_sigma(photons: float, temperature: float, wavelength: float, mass: float, eta: float) -> float:
    if photons < 0:
        raise ValueError(f"photon number must be >= 0, got {photons}")
    return math.sqrt(photons) * single_photon_sigma(temperature, wavelength, mass, eta)


def photon_recoil_sigma(
    temperature: float,
    scattering_rate: float,
    tau_pi: float,
    wavelength: float = CESIUM.trap_wavelength,
    mass: float = CESIUM.mass,
    eta: float = CESIUM.eta,
) -> float:
    """Recoil dephasing with Poissonian photon number, at most one photon:
    eta k sqrt(3 k_B T Gamma_s tau_pi / m) exp(-Gamma_s tau_pi / 2)."""
    if temperature <= 0 or tau_pi < 0 or scattering_rate < 0:
        raise ValueError("temperature must be positive, rates and times non-negative")
    n = scattering_rate * tau_pi
    return single_photon_sigma(temperature, wavelength, mass, eta) * math.sqrt(n) * math.exp(-n / 2.0)


def scattering_rate_for_depth(
    depth: float,
    anchor_rate: float = CESIUM.scattering_rate_anchor,
    anchor_depth: float = CESIUM.scattering_depth_anchor,
) -> float:
    """Photon scattering rate scaled linearly with the trap depth."""
    if depth < 0:
        raise ValueError(f"depth must be >= 0, got {depth}")
    return anchor_rate * depth / anchor_depth


def quadratic_zeeman_shift(b0: float, coeff: float = CESIUM.quadratic_zeeman) -> float:
    """Clock-transition shift coeff * B0^2 in rad/s."""
    return coeff * b0 * b0


def magnetic_shift(b0: float, delta_b: float, coeff: float = CESIUM.quadratic_zeeman) -> float:
    """Linearized quadratic Zeeman fluctuation 2 coeff B0 dB in rad/s."""
    return 2.0 * coeff * b0 * delta_b


def sine_series(tau: float, frequency: float = LINE_FREQUENCY, windows: int = _SINE_WINDOWS) -> TimeSeries:
    """Unit-amplitude sine sampled so that tau is a whole number of samples."""
    m = min(4096, max(64, int(round(tau / 1e-5))))
    dt = tau / m
    t = np.arange((windows + 1) * m) * dt
    return TimeSeries(dt, np.sin(2.0 * math.pi * frequency * t))


def magnetic_sigma(tau: float, delta_omega: float, line_freq: float = LINE_FREQUENCY) -> float:
    """sqrt(2) dOmega sigma_A(tau) of a unit sine at the line frequency."""
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    series = sine_series(tau, line_freq)
    return math.sqrt(2.0) * abs(delta_omega) * allan_deviation(series, tau, normalize=False)


def microwave_jitter(rel_rabi: float, rel_duration: float) -> float:
    """Phase error dphi/2pi from relative Rabi-frequency and pulse-length jitter."""
    if rel_rabi < 0 or rel_duration < 0:
        raise ValueError("relative fluctuations must be non-negative")
    return math.hypot(rel_rabi, rel_duration)


def timing_phase_error(delta_prime: float, tau_pi: float, rel_jitter: float) -> float:
    """Phase error delta' tau_pi dtau/tau of a clock inaccuracy."""
    return abs(delta_prime * tau_pi * rel_jitter)


def line_detunings(
    wavelength: float,
    d1_wavelength: float = CESIUM.d1_wavelength,
    d2_wavelength: float = CESIUM.d2_wavelength,
) -> Tuple[float, float]:
    """Laser detunings (rad/s) from the P1/2 and P3/2 lines."""
    omega = wavelength_to_omega(wavelength)
    delta_half = omega - wavelength_to_omega(d1_wavelength)
    delta_three_half = omega - wavelength_to_omega(d2_wavelength)
    if min(abs(delta_half), abs(delta_three_half)) < 1e-9 * omega:
        raise ValueError(f"trap wavelength {wavelength:g} m is resonant with a D line")
    return delta_half, delta_three_half


def suppression_factor(delta_half: float, delta_fs: float) -> float:
    """beta = |Delta_fs / (3 Delta_1/2)|^2."""
    if delta_half == 0:
        raise ValueError("resonant with the P1/2 line")
    return (delta_fs / (3.0 * delta_half)) ** 2


def raman_suppression_beta(
    wavelength: float,
    d1_wavelength: float = CESIUM.d1_wavelength,
    d2_wavelength: float = CESIUM.d2_wavelength,
) -> float:
    """Raman to Rayleigh suppression factor for a trap at `wavelength`."""
    delta_half, delta_three_half = line_detunings(wavelength, d1_wavelength, d2_wavelength)
    return suppression_factor(delta_half, delta_three_half - delta_half)


def kramers_heisenberg_rates(delta_half: float, delta_three_half: float) -> Tuple[float, float]:
    """Relative Rayleigh and Raman rates from the two-line amplitude sum.

    Rayleigh amplitudes add (a_3/2 = 2 a_1/2); Raman amplitudes cancel
    (a_3/2 = -a_1/2). Rates are in units of |a_1/2|^2.
    """
    rayleigh = (1.0 / delta_half + 2.0 / delta_three_half) ** 2
    raman = (1.0 / delta_half - 1.0 / delta_three_half) ** 2
    return rayleigh, raman


def t1_from_scattering(scattering_rate: float, beta: float) -> float:
    """T1 = 1 / (beta Gamma_s)."""
    if scattering_rate <= 0:
        raise ValueError(f"scattering rate must be positive, got {scattering_rate}")
    if beta <= 0:
        return math.inf
    return 1.0 / (beta * scattering_rate)


class MechanismId(str, Enum):
    """Rows of the dephasing budget, in report order."""
    MEASURED = "sigma_exp"
    INTENSITY = "intensity"
    POINTING_BEST = "pointing_best"
    POINTING_WORST = "pointing_worst"
    HEATING = "heating"
    PHOTON = "photon"
    MAGNETIC = "magnetic"


MECHANISM_LABELS = {
    MechanismId.MEASURED: "sigma_exp (meas.)",
    MechanismId.INTENSITY: "(1) intensity fluctuations",
    MechanismId.POINTING_BEST: "(2) pointing instability, best case",
    MechanismId.POINTING_WORST: "(2) pointing instability, worst case",
    MechanismId.HEATING: "(3a) heating (upper limit)",
    MechanismId.PHOTON: "(3b) photon scattering",
    MechanismId.MAGNETIC: "(4) magnetic field fluctuations",
}


class Provenance(str, Enum):
    MEASURED = "measured"
    MEASURED_SERIES = "measured-series"
    MODEL = "model"


class PointingCase(str, Enum):
    """The two pointing rows bound one mechanism; a total uses one of them."""
    BEST = "best"
    WORST = "worst"


_POINTING_ROWS = {
    PointingCase.BEST: MechanismId.POINTING_BEST,
    PointingCase.WORST: MechanismId.POINTING_WORST,
}


@dataclass
class NoiseBudgetEntry:
    """One budget row; sigma in rad/s at the evaluation time."""
    mechanism: MechanismId
    sigma: float
    provenance: Provenance
    reference_hz: Optional[float] = None

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")

    @property
    def sigma_hz(self) -> float:
        return rad_to_hz(self.sigma)

    @property
    def label(self) -> str:
        return MECHANISM_LABELS[self.mechanism]


class AllanSource(BaseModel):
    """Relative fluctuations given directly or as a measured record."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    sigma_allan: Optional[float] = Field(default=None, ge=0.0)
    series: Optional[TimeSeries] = None

    def sigma_a(self, tau: float) -> Tuple[float, Provenance]:
        if self.series is not None:
            return allan_at(self.series, tau), Provenance.MEASURED_SERIES
        if self.sigma_allan is None:
            raise ConfigurationError("needs sigma_allan or a series file", field="sigma_allan")
        return self.sigma_allan, Provenance.MODEL


class PhotonScattering(BaseModel):
    temperature: float = Field(gt=0.0)
    scattering_rate: Optional[float] = Field(default=None, ge=0.0)
    wavelength: float = Field(default=CESIUM.trap_wavelength, gt=0.0)
    mass: float = Field(default=CESIUM.mass, gt=0.0)


class MagneticField(BaseModel):
    b0: float
    delta_b: float = Field(ge=0.0)
    line_freq: float = Field(default=LINE_FREQUENCY, gt=0.0)
    quad_coeff: float = CESIUM.quadratic_zeeman


class BudgetInputs(BaseModel):
    """Mechanism inputs for one trap configuration.

    `t2_prime` sets the evaluation time; without it T2' follows from sigma_exp.
    `delta0` (rad/s) overrides the value derived from the trap.
    """
    t2_prime: Optional[float] = Field(default=None, gt=0.0)
    delta0: Optional[float] = None
    sigma_exp: Optional[float] = Field(default=None, ge=0.0)
    intensity: Optional[AllanSource] = None
    pointing_best: Optional[AllanSource] = None
    pointing_worst: Optional[AllanSource] = None
    heating: Optional[HeatingModel] = None
    photon: Optional[PhotonScattering] = None
    magnetic: Optional[MagneticField] = None
    references_hz: Dict[MechanismId, float] = Field(default_factory=dict)

    def configured(self) -> List[MechanismId]:
        return [m for m in MechanismId if getattr(self, m.value) is not None]

    def evaluation_time(self) -> float:
        if self.t2_prime is not None:
            return self.t2_prime
        if self.sigma_exp is not None and self.sigma_exp > 0:
            return t2prime_from_sigma(self.sigma_exp)
        raise ConfigurationError("the budget needs t2_prime or a non-zero sigma_exp", field="t2_prime")


def _resolve_delta0(trap: TrapConfig, inputs: BudgetInputs) -> float:
    if inputs.delta0 is not None:
        return inputs.delta0
    return trap.delta0()


def mechanism_sigma(mechanism: MechanismId, trap: TrapConfig, inputs: BudgetInputs, tau_pi: float) -> Tuple[float, Provenance]:
    """sigma(tau_pi) of one mechanism for a pi pulse at tau_pi."""
    if mechanism is MechanismId.MEASURED:
        return inputs.sigma_exp, Provenance.MEASURED
    if mechanism in (MechanismId.INTENSITY, MechanismId.POINTING_BEST, MechanismId.POINTING_WORST):
        source: AllanSource = getattr(inputs, mechanism.value)
        sigma_a, provenance = source.sigma_a(tau_pi)
        return sigma_from_allan(sigma_a, _resolve_delta0(trap, inputs)), provenance
    if mechanism is MechanismId.HEATING:
        return heating_sigma_at(inputs.heating, tau_pi, trap.eta), Provenance.MODEL
    if mechanism is MechanismId.PHOTON:
        photon = inputs.photon
        rate = photon.scattering_rate
        if rate is None:
            rate = scattering_rate_for_depth(trap.resolved_depth())
        sigma = photon_recoil_sigma(photon.temperature, rate, tau_pi, photon.wavelength, photon.mass, trap.eta)
        return sigma, Provenance.MODEL
    if mechanism is MechanismId.MAGNETIC:
        mag = inputs.magnetic
        shift = magnetic_shift(mag.b0, mag.delta_b, mag.quad_coeff)
        return magnetic_sigma(tau_pi, shift, mag.line_freq), Provenance.MODEL
    raise ValueError(f"unknown mechanism {mechanism}")


def row_tau(mechanism: MechanismId, t2_prime: float) -> float:
    """Argument of sigma(.) quoted in a budget row."""
    if mechanism in (MechanismId.HEATING, MechanismId.PHOTON):
        return t2_prime / 2.0
    return t2_prime


def budget_report(trap: TrapConfig, inputs: BudgetInputs) -> List[NoiseBudgetEntry]:
    """One entry per configured mechanism, evaluated at T2'."""
    present = inputs.configured()
    if not present:
        raise ConfigurationError("no dephasing mechanism configured")
    t2_prime = inputs.evaluation_time()
    entries = []
    for mechanism in present:
        sigma, provenance = mechanism_sigma(mechanism, trap, inputs, row_tau(mechanism, t2_prime))
        entries.append(NoiseBudgetEntry(mechanism, sigma, provenance, inputs.references_hz.get(mechanism)))
        logger.debug("%s: sigma/2pi = %.4g Hz", mechanism.value, rad_to_hz(sigma))
    return entries


def total_mechanisms(present: Sequence[MechanismId], case: PointingCase) -> List[MechanismId]:
    """Modelled mechanisms entering the total of one pointing case.

    A case keeps its own pointing row and drops the other one; with a single
    pointing row configured, both cases use it.
    """
    own = _POINTING_ROWS[case]
    other = _POINTING_ROWS[PointingCase.WORST if case is PointingCase.BEST else PointingCase.BEST]
    chosen = [m for m in present if m is not MechanismId.MEASURED]
    if own in chosen:
        chosen = [m for m in chosen if m is not other]
    return chosen


def quadrature_total(entries: Sequence[NoiseBudgetEntry], case: PointingCase = PointingCase.WORST) -> float:
    """sqrt(sum sigma_i^2) over the modelled mechanisms of one pointing case."""
    counted = total_mechanisms([e.mechanism for e in entries], case)
    return math.sqrt(sum(e.sigma ** 2 for e in entries if e.mechanism in counted))


@dataclass
class NoiseBudget:
    """Budget rows at T2' plus the inputs needed to re-evaluate at other times."""
    trap: TrapConfig
    inputs: BudgetInputs
    entries: List[NoiseBudgetEntry] = field(default_factory=list)
    evaluation_time: float = 0.0

    @classmethod
    def from_inputs(cls, trap: TrapConfig, inputs: BudgetInputs) -> "NoiseBudget":
        entries = budget_report(trap, inputs)
        return cls(trap, inputs, entries, inputs.evaluation_time())

    @property
    def totals(self) -> Tuple[float, float]:
        """(best, worst) pointing-case quadrature totals at T2'."""
        return (
            quadrature_total(self.entries, PointingCase.BEST),
            quadrature_total(self.entries, PointingCase.WORST),
        )

    @property
    def t2_prime_measured(self) -> Optional[float]:
        if self.inputs.sigma_exp is None:
            return None
        return t2prime_from_sigma(self.inputs.sigma_exp)

    def total_at(self, tau_pi: float, case: PointingCase = PointingCase.WORST) -> float:
        """Quadrature total sigma(tau_pi) of the modelled mechanisms of one pointing case."""
        if tau_pi <= 0:
            return 0.0
        sigmas = [
            mechanism_sigma(m, self.trap, self.inputs, tau_pi)[0]
            for m in total_mechanisms(self.inputs.configured(), case)
        ]
        return math.sqrt(sum(s * s for s in sigmas))

    def visibility_curve(
        self,
        tau_pis: Sequence[float],
        c0: float = 1.0,
        case: PointingCase = PointingCase.WORST,
    ) -> List[Tuple[float, float]]:
        """Predicted echo visibility V(2 tau_pi) = C0 exp[-tau_pi^2 sigma(tau_pi)^2 / 2].

        With no modelled mechanism the measured sigma_exp is used.
        """
        modelled = total_mechanisms(self.inputs.configured(), case)
        curve = []
        for tau_pi in tau_pis:
            if modelled:
                sigma = self.total_at(tau_pi, case)
            else:
                sigma = self.inputs.sigma_exp or 0.0
            curve.append((tau_pi, c0 * math.exp(-0.5 * (tau_pi * sigma) ** 2)))
        return curve
