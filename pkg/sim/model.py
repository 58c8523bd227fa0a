from enum import Enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Tuple, Union
import logging
import math

import numpy as np

from core.bloch import (
    BlochVector,
    DampingParams,
    TorqueParams,
    PulseProgram,
    integrate_damped_bloch,
    p3_from_w,
    propagate,
    rabi_p3,
)
from core.constants import K_OVER_HBAR
from core.trap import (
    ATOM_BLOCK,
    EnsembleSpec,
    TrapConfig,
    block_generator,
    check_truncation,
    draw_energies,
    thermal_validity_ok,
)
from sim.signals import (
    EchoParams,
    HomogeneousNoise,
    RabiParams,
    RamseyParams,
    echo_p3,
    ramsey_p3,
)

logger = logging.getLogger(__name__)


class SequenceKind(str, Enum):
    """Microwave sequences the simulator can run."""
    RABI = "rabi"
    RAMSEY = "ramsey"
    ECHO = "echo"


SequenceParams = Union[RabiParams, RamseyParams, EchoParams]


@dataclass
class SignalResult:
    """Simulated P3 on a time grid."""
    times: np.ndarray
    analytic: np.ndarray
    montecarlo: np.ndarray
    stderr: np.ndarray
    atom_count: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            't_s': self.times.tolist(),
            'p3_analytic': self.analytic.tolist(),
            'p3_montecarlo': self.montecarlo.tolist(),
            'mc_stderr': self.stderr.tolist(),
        }


@dataclass
class _BlockSums:
    count: int
    total: np.ndarray
    total_sq: np.ndarray


class EnsembleSimulationModel:
    """
    Monte Carlo model of a thermal atom ensemble under a microwave sequence.

    Every atom gets an energy from the Boltzmann distribution, hence its
    own light shift; echo sequences additionally draw one detuning jump
    per atom for the second free interval. Atoms are processed in blocks
    with independent seeds, so results do not depend on `workers`.
    """

    def __init__(
        self,
        kind: SequenceKind,
        params: SequenceParams,
        ensemble: Optional[EnsembleSpec] = None,
        trap: Optional[TrapConfig] = None,
        noise: Optional[HomogeneousNoise] = None,
        energies: Optional[Sequence[float]] = None,
        workers: int = 1,
        scenario_name: str = "Unnamed Scenario",
        scenario_description: str = "",
    ):
        """
        Initialize the ensemble model.

        Args:
            kind: Sequence type
            params: Sequence parameters matching `kind`
            ensemble: Temperature, atom count and seed (not needed for Rabi)
            trap: Trap configuration supplying eta and the depth
            noise: Homogeneous detuning noise for echo sequences
            energies: Fixed atom energies in kelvin, replacing the thermal draw
            workers: Threads used over atom blocks
            scenario_name: Name of the scenario being run
            scenario_description: Description of the scenario
        """
        self.kind = SequenceKind(kind)
        self.params = params
        self.ensemble = ensemble
        self.trap = trap or TrapConfig()
        self.noise = noise or HomogeneousNoise()
        self.fixed_energies = None if energies is None else np.asarray(energies, dtype=float)
        self.workers = max(1, int(workers))
        self.scenario_name = scenario_name
        self.scenario_description = scenario_description
        self.last_result: Optional[SignalResult] = None

        self._check_params()

    def _check_params(self):
        expected = {
            SequenceKind.RABI: RabiParams,
            SequenceKind.RAMSEY: RamseyParams,
            SequenceKind.ECHO: EchoParams,
        }[self.kind]
        if not isinstance(self.params, expected):
            raise TypeError(f"{self.kind.value} sequence needs {expected.__name__}")
        if self.kind is SequenceKind.RAMSEY and isinstance(self.params, EchoParams):
            raise TypeError("ramsey sequence got echo parameters")
        if self.kind is not SequenceKind.RABI:
            if self.fixed_energies is None and self.ensemble is None:
                raise ValueError("an ensemble or explicit energies are required")
            if self.fixed_energies is not None and self.fixed_energies.size == 0:
                raise ValueError("ensemble is empty")

    @property
    def atom_count(self) -> int:
        if self.kind is SequenceKind.RABI:
            return 1
        if self.fixed_energies is not None:
            return int(self.fixed_energies.size)
        return self.ensemble.atom_count

    @property
    def seed(self) -> int:
        return 0 if self.ensemble is None else self.ensemble.rng_seed

    def analytic(self, times: np.ndarray) -> np.ndarray:
        """Closed-form P3 for the configured sequence."""
        if self.kind is SequenceKind.RABI:
            return np.asarray(rabi_p3(self.params.rabi_frequency, times, self.params.contrast))
        if self.kind is SequenceKind.RAMSEY:
            return np.asarray(ramsey_p3(times, self.params))
        return np.asarray(echo_p3(times, self.params, sigma=self.noise.sigma))

    def _block_count(self) -> int:
        return math.ceil(self.atom_count / ATOM_BLOCK)

    def _block_energies(self, block: int, rng: np.random.Generator) -> np.ndarray:
        if self.fixed_energies is not None:
            return self.fixed_energies[block * ATOM_BLOCK:(block + 1) * ATOM_BLOCK]
        spec = self.ensemble
        return draw_energies(rng, spec.block_size(block), spec.temperature, spec.truncation_energy)

    def _run_block(self, block: int, times: np.ndarray) -> _BlockSums:
        rng = block_generator(self.seed, block)
        energies = self._block_energies(block, rng)
        n = energies.size
        # delta_ls - delta0 for every atom
        shifts = self.trap.eta * K_OVER_HBAR * energies / 2.0
        jumps = None
        if self.kind is SequenceKind.ECHO and self.noise.sigma > 0:
            jumps = rng.normal(0.0, self.noise.sigma, size=n)

        p = self.params
        start = np.tile(BlochVector.lower().as_array()[:, None], (1, n))
        total = np.zeros(times.size)
        total_sq = np.zeros(times.size)
        for i, t in enumerate(times):
            if self.kind is SequenceKind.RAMSEY:
                program = PulseProgram.ramsey(p.detuning, t, p.phase)
                offsets = [None, -shifts, None]
            else:
                program = PulseProgram.echo(p.detuning, t, p.tau_pi, p.echo_phase)
                late = -shifts if jumps is None else -shifts + jumps
                offsets = [None, -shifts, None, late, None]
            w = propagate(program, start, offsets)[2]
            p3 = p3_from_w(w, p.amplitude, p.offset)
            total[i] = p3.sum()
            total_sq[i] = np.square(p3).sum()
        return _BlockSums(n, total, total_sq)

    def _run_rabi(self, times: np.ndarray, dt_max: float) -> np.ndarray:
        torque = TorqueParams(rabi_frequency=self.params.rabi_frequency)
        damping = DampingParams()
        c = self.params.contrast
        values = []
        for t in times:
            w = integrate_damped_bloch(torque, damping, BlochVector.lower(), float(t), dt_max).w
            values.append(p3_from_w(w, c / 2.0, c / 2.0))
        return np.asarray(values)

    def run(self, times: Sequence[float], rabi_dt_max: float = 2e-7) -> SignalResult:
        """
        Simulate P3 at the given times.

        Args:
            times: Increasing time grid in seconds
            rabi_dt_max: Integrator step bound for Rabi sequences

        Returns:
            SignalResult with closed-form and Monte Carlo columns
        """
        times = np.asarray(times, dtype=float)
        if times.ndim != 1 or times.size == 0:
            raise ValueError("time grid must be a non-empty 1-D sequence")
        if np.any(np.diff(times) < 0):
            raise ValueError("time grid must be sorted")

        analytic = self.analytic(times)
        if self.kind is SequenceKind.RABI:
            numeric = self._run_rabi(times, rabi_dt_max)
            result = SignalResult(times, analytic, numeric, np.zeros_like(numeric), 1)
            self.last_result = result
            return result

        if self.fixed_energies is None:
            depth = self.trap.depth
            check_truncation(self.ensemble, depth)
            if depth is not None and not thermal_validity_ok(self.ensemble.temperature, depth):
                logger.warning(
                    "k_B T = %.3g mK exceeds U0/4 = %.3g mK; the harmonic approximation degrades",
                    self.ensemble.temperature * 1e3, depth * 1e3 / 4.0,
                )

        blocks = range(self._block_count())
        logger.debug("simulating %d atoms in %d blocks on %d worker(s)",
                     self.atom_count, len(blocks), self.workers)
        if self.workers > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                partial = list(pool.map(lambda b: self._run_block(b, times), blocks))
        else:
            partial = [self._run_block(b, times) for b in blocks]

        # combine in block order so the sum does not depend on scheduling
        count = 0
        total = np.zeros(times.size)
        total_sq = np.zeros(times.size)
        for sums in partial:
            count += sums.count
            total += sums.total
            total_sq += sums.total_sq

        mean = total / count
        if count > 1:
            variance = np.maximum(total_sq - count * mean ** 2, 0.0) / (count - 1)
            stderr = np.sqrt(variance / count)
        else:
            stderr = np.zeros_like(mean)
        result = SignalResult(times, analytic, mean, stderr, count)
        self.last_result = result
        return result

    def get_state(self) -> Dict[str, Any]:
        """
        Get a description of the model and its last run.

        Returns:
            Dictionary with scenario, sequence and ensemble information
        """
        state: Dict[str, Any] = {
            'scenario_name': self.scenario_name,
            'scenario_description': self.scenario_description,
            'sequence': self.kind.value,
            'params': self.params.model_dump(),
            'atom_count': self.atom_count,
            'seed': self.seed,
            'workers': self.workers,
            'sigma': self.noise.sigma,
        }
        if self.last_result is not None:
            state['points'] = int(self.last_result.times.size)
        return state


def monte_carlo_signal(
    kind: SequenceKind,
    params: SequenceParams,
    ensemble: EnsembleSpec,
    trap: TrapConfig,
    noise: HomogeneousNoise,
    times: Sequence[float],
    workers: int = 1,
) -> Tuple[np.ndarray, np.ndarray]:
    """Monte Carlo P3 and its standard error; amplitude/offset come from `params`."""
    model = EnsembleSimulationModel(kind, params, ensemble=ensemble, trap=trap, noise=noise, workers=workers)
    result = model.run(times)
    return result.montecarlo, result.stderr
