from typing import List, Dict, Any, Optional
from dataclasses import dataclass, field

import numpy as np

from analysis.noise_budget import (
    AllanSource,
    BudgetInputs,
    HeatingModel,
    MagneticField,
    MechanismId,
    PhotonScattering,
)
from core.constants import MICROTESLA, MILLIKELVIN, MILLISECOND, hz_to_rad
from core.errors import ConfigurationError
from core.trap import EnsembleSpec, TrapConfig, temperature_from_t2star
from sim.model import EnsembleSimulationModel, SequenceKind, SequenceParams
from sim.signals import EchoParams, HomogeneousNoise, RabiParams, RamseyParams

# Operating point of the magnetic-field rows: bias field and 50 Hz ripple amplitude.
BIAS_FIELD = 97.9 * MICROTESLA
FIELD_RIPPLE = 0.13 * MICROTESLA


@dataclass
class ScenarioConfig:
    """A simulation and/or noise-budget setup."""
    name: str
    description: str
    trap: TrapConfig
    kind: Optional[SequenceKind] = None
    params: Optional[SequenceParams] = None
    ensemble: Optional[EnsembleSpec] = None
    noise: HomogeneousNoise = field(default_factory=HomogeneousNoise)
    times: Optional[np.ndarray] = None
    budget: Optional[BudgetInputs] = None
    expected_outcome: str = ""
    workers: int = 1

    @property
    def has_sequence(self) -> bool:
        return self.kind is not None

    @property
    def has_budget(self) -> bool:
        return self.budget is not None

    def with_seed(self, seed: int) -> "ScenarioConfig":
        """Copy of the scenario with another ensemble seed."""
        if self.ensemble is None:
            return self
        ensemble = self.ensemble.model_copy(update={'rng_seed': seed})
        return ScenarioConfig(
            name=self.name,
            description=self.description,
            trap=self.trap,
            kind=self.kind,
            params=self.params,
            ensemble=ensemble,
            noise=self.noise,
            times=self.times,
            budget=self.budget,
            expected_outcome=self.expected_outcome,
            workers=self.workers,
        )

    def build_model(self) -> EnsembleSimulationModel:
        """Ensemble model for the configured sequence."""
        if not self.has_sequence:
            raise ConfigurationError(f"scenario '{self.name}' has no [sequence] section", field="sequence")
        return EnsembleSimulationModel(
            self.kind,
            self.params,
            ensemble=self.ensemble,
            trap=self.trap,
            noise=self.noise,
            workers=self.workers,
            scenario_name=self.name,
            scenario_description=self.description,
        )

    def get_metadata(self) -> Dict[str, Any]:
        """Get scenario metadata."""
        metadata: Dict[str, Any] = {
            'name': self.name,
            'description': self.description,
            'sequence': self.kind.value if self.kind else None,
            'depth_mk': None if self.trap.depth is None else self.trap.depth / MILLIKELVIN,
            'eta': self.trap.eta,
            'expected_outcome': self.expected_outcome,
        }
        if self.ensemble is not None:
            metadata['temperature_mk'] = self.ensemble.temperature / MILLIKELVIN
            metadata['atoms'] = self.ensemble.atom_count
            metadata['seed'] = self.ensemble.rng_seed
        if self.times is not None:
            metadata['points'] = int(self.times.size)
        if self.budget is not None:
            metadata['mechanisms'] = [m.value for m in self.budget.configured()]
        return metadata


def time_grid(start: float, stop: float, points: int) -> np.ndarray:
    """Evenly spaced, increasing time grid in seconds."""
    if points < 1:
        raise ConfigurationError("time grid needs at least one point", field="points")
    if points > 1 and not stop > start:
        raise ConfigurationError("time grid stop must exceed start", field="t_stop_ms")
    if start < 0:
        raise ConfigurationError("time grid must start at t >= 0", field="t_start_ms")
    return np.linspace(start, stop, points)


def thermal_ensemble(trap: TrapConfig, t2star: float, atoms: int = 100_000, seed: int = 0) -> EnsembleSpec:
    """Ensemble whose temperature reproduces the given T2*."""
    return EnsembleSpec(
        temperature=temperature_from_t2star(t2star, trap.eta),
        atom_count=atoms,
        rng_seed=seed,
    )


def create_rabi_flopping() -> ScenarioConfig:
    """Resonant Rabi flopping of a single atom with reduced detection contrast."""
    return ScenarioConfig(
        name="Rabi flopping",
        description="""Resonant microwave drive, Omega_R/2pi = 14.60 kHz.
        Detection contrast C = 0.604 from imperfect state selection.""",
        trap=TrapConfig(depth=1.0 * MILLIKELVIN),
        kind=SequenceKind.RABI,
        params=RabiParams(rabi_frequency=hz_to_rad(14.60e3), contrast=0.604),
        times=time_grid(0.0, 150e-6, 45),
        expected_outcome="P3 oscillates between 0 and 0.604 with a 68.5 us period",
    )


def create_ramsey_0_1mk() -> ScenarioConfig:
    """Ramsey fringe in a shallow trap, T2* = 4.4 ms."""
    trap = TrapConfig(depth=0.1 * MILLIKELVIN)
    t2star = 4.4 * MILLISECOND
    params = RamseyParams.from_detunings(
        hz_to_rad(2250.0), hz_to_rad(412.1), trap.delta0(),
        amplitude=0.287, offset=0.305, t2star=t2star, phase=0.35,
    )
    return ScenarioConfig(
        name="Ramsey fringe (U0 = 0.1 mK)",
        description="""Ramsey sequence with delta_synth = 2250 Hz and delta_B = 412.1 Hz.
        Atoms at about 23 uK give T2* = 4.4 ms.""",
        trap=trap,
        kind=SequenceKind.RAMSEY,
        params=params,
        ensemble=thermal_ensemble(trap, t2star),
        times=time_grid(0.0, 12.0 * MILLISECOND, 200),
        expected_outcome="Damped fringe at about 2.14 kHz, visibility 0.94",
    )


def create_ramsey_0_04mk() -> ScenarioConfig:
    """Ramsey fringe in a very shallow trap, T2* = 20.4 ms."""
    trap = TrapConfig(depth=0.04 * MILLIKELVIN)
    t2star = 20.4 * MILLISECOND
    params = RamseyParams.from_detunings(
        hz_to_rad(1050.0), hz_to_rad(412.1), trap.delta0(),
        amplitude=0.136, offset=0.138, t2star=t2star, phase=0.13,
    )
    return ScenarioConfig(
        name="Ramsey fringe (U0 = 0.04 mK)",
        description="""Ramsey sequence with delta_synth = 1050 Hz after adiabatic lowering.
        Atoms at about 5 uK give T2* = 20.4 ms.""",
        trap=trap,
        kind=SequenceKind.RAMSEY,
        params=params,
        ensemble=thermal_ensemble(trap, t2star),
        times=time_grid(0.0, 60.0 * MILLISECOND, 300),
        expected_outcome="Damped fringe at about 0.76 kHz, visibility 0.99",
    )


def create_echo_0_1mk() -> ScenarioConfig:
    """Spin echo with homogeneous detuning noise."""
    trap = TrapConfig(depth=0.1 * MILLIKELVIN)
    t2star = 2.9 * MILLISECOND
    params = EchoParams.from_detunings(
        hz_to_rad(1500.0), hz_to_rad(412.1), trap.delta0(),
        amplitude=0.25, offset=0.30, t2star=t2star, tau_pi=5.0 * MILLISECOND,
    )
    return ScenarioConfig(
        name="Spin echo (U0 = 0.1 mK)",
        description="""pi pulse at tau_pi = 5 ms, echo revival at 10 ms.
        Homogeneous detuning noise sigma/2pi = 6.6 Hz reduces the echo visibility.""",
        trap=trap,
        kind=SequenceKind.ECHO,
        params=params,
        ensemble=thermal_ensemble(trap, t2star),
        noise=HomogeneousNoise(sigma=hz_to_rad(6.6)),
        times=time_grid(5.0 * MILLISECOND, 15.0 * MILLISECOND, 101),
        expected_outcome="Echo maximum at t = 10 ms, attenuated by exp(-(sigma tau_pi)^2/2) = 0.96",
    )


def _budget_inputs(
    t2_prime_ms: float,
    sigma_exp_hz: float,
    delta0_hz: Optional[float],
    allan: Dict[str, float],
    temperature_mk: float,
    heating_mk_per_s: float,
    scattering_rate: float,
    references: Dict[str, float],
) -> BudgetInputs:
    temperature = temperature_mk * MILLIKELVIN
    return BudgetInputs(
        t2_prime=t2_prime_ms * MILLISECOND,
        sigma_exp=hz_to_rad(sigma_exp_hz),
        delta0=None if delta0_hz is None else hz_to_rad(delta0_hz),
        intensity=AllanSource(sigma_allan=allan['intensity']),
        pointing_best=AllanSource(sigma_allan=allan['pointing_best']),
        pointing_worst=AllanSource(sigma_allan=allan['pointing_worst']),
        heating=HeatingModel(heating_rate=heating_mk_per_s * MILLIKELVIN, temperature=temperature),
        photon=PhotonScattering(temperature=temperature, scattering_rate=scattering_rate),
        magnetic=MagneticField(b0=BIAS_FIELD, delta_b=FIELD_RIPPLE),
        references_hz={MechanismId(k): v for k, v in references.items()},
    )


def create_budget_1mk() -> ScenarioConfig:
    """Dephasing budget at U0 = 1.0 mK."""
    return ScenarioConfig(
        name="Dephasing budget (U0 = 1.0 mK)",
        description="""Measured sigma_exp/2pi = 22.0 Hz, T2' = 10.2 ms.
        Intensity and pointing Allan deviations scaled by delta0/2pi = -3.02 kHz.""",
        trap=TrapConfig(depth=1.0 * MILLIKELVIN),
        budget=_budget_inputs(
            10.2, 22.0, None,
            {'intensity': 0.00138, 'pointing_best': 0.00248, 'pointing_worst': 0.00506},
            temperature_mk=0.1, heating_mk_per_s=2e-2, scattering_rate=10.6,
            references={'sigma_exp': 22.0, 'intensity': 5.9, 'pointing_best': 10.6,
                        'pointing_worst': 21.6, 'heating': 5.3, 'photon': 4.5, 'magnetic': 1.7},
        ),
        expected_outcome="Pointing instability dominates; heating row exceeds the quoted 5.3 Hz",
    )


def create_budget_0_1mk() -> ScenarioConfig:
    """Dephasing budget at U0 = 0.1 mK."""
    return ScenarioConfig(
        name="Dephasing budget (U0 = 0.1 mK)",
        description="""Measured sigma_exp/2pi = 6.6 Hz, T2' = 33.9 ms.
        Measured delta0/2pi = -268 Hz after adiabatic lowering.""",
        trap=TrapConfig(depth=0.1 * MILLIKELVIN),
        budget=_budget_inputs(
            33.9, 6.6, -268.0,
            {'intensity': 0.00177, 'pointing_best': 0.00633, 'pointing_worst': 0.01768},
            temperature_mk=0.06, heating_mk_per_s=2e-3, scattering_rate=1.06,
            references={'sigma_exp': 6.6, 'intensity': 0.67, 'pointing_best': 2.4,
                        'pointing_worst': 6.7, 'heating': 1.6, 'photon': 1.5, 'magnetic': 0.35},
        ),
        expected_outcome="Pointing instability, worst case, accounts for sigma_exp",
    )


def create_budget_0_04mk() -> ScenarioConfig:
    """Dephasing budget at U0 = 0.04 mK."""
    return ScenarioConfig(
        name="Dephasing budget (U0 = 0.04 mK)",
        description="""Measured sigma_exp/2pi = 1.54 Hz, T2' = 146.2 ms.
        Measured delta0/2pi = -78 Hz.""",
        trap=TrapConfig(depth=0.04 * MILLIKELVIN),
        budget=_budget_inputs(
            146.2, 1.54, -78.0,
            {'intensity': 0.00154, 'pointing_best': 0.01179, 'pointing_worst': 0.03354},
            temperature_mk=0.02, heating_mk_per_s=8e-4, scattering_rate=0.41,
            references={'sigma_exp': 1.54, 'intensity': 0.17, 'pointing_best': 1.3,
                        'pointing_worst': 3.7, 'heating': 2.0, 'photon': 1.4, 'magnetic': 0.17},
        ),
        expected_outcome="Modelled mechanisms bracket the measured 1.54 Hz",
    )


SCENARIOS = {
    'rabi_flopping': create_rabi_flopping,
    'ramsey_0_1mk': create_ramsey_0_1mk,
    'ramsey_0_04mk': create_ramsey_0_04mk,
    'echo_0_1mk': create_echo_0_1mk,
    'budget_1mk': create_budget_1mk,
    'budget_0_1mk': create_budget_0_1mk,
    'budget_0_04mk': create_budget_0_04mk,
}


def get_scenario(name: str) -> ScenarioConfig:
    """
    Get a scenario configuration by name.

    Args:
        name: Scenario identifier

    Returns:
        ScenarioConfig object
    """
    if name not in SCENARIOS:
        raise ConfigurationError(f"unknown scenario '{name}'; available: {', '.join(SCENARIOS)}", field="scenario")
    return SCENARIOS[name]()


def list_scenarios() -> List[Dict[str, Any]]:
    """
    List all available scenarios with metadata.

    Returns:
        List of scenario metadata dictionaries
    """
    scenarios = []
    for scenario_id, scenario_func in SCENARIOS.items():
        config = scenario_func()
        metadata = config.get_metadata()
        metadata['id'] = scenario_id
        scenarios.append(metadata)
    return scenarios
