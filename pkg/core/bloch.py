"""Bloch-vector algebra for the clock transition.

Sign convention: |F=4, m_F=0> is (0, 0, -1) and |F=3, m_F=0> is (0, 0, +1).
Microwave pulses are instantaneous rotations; free precession rotates
about the w-axis by the accumulated phase delta * t.
"""
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np

_NORM_DRIFT_LIMIT = 1e-6


@dataclass(frozen=True)
class BlochVector:
    """Pseudo-spin state (u, v, w) of one atom or an ensemble average."""
    u: float
    v: float
    w: float

    @classmethod
    def lower(cls) -> "BlochVector":
        """|F=4, m_F=0>, the state every sequence starts from."""
        return cls(0.0, 0.0, -1.0)

    @classmethod
    def upper(cls) -> "BlochVector":
        """|F=3, m_F=0>."""
        return cls(0.0, 0.0, 1.0)

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "BlochVector":
        u, v, w = (float(x) for x in values)
        return cls(u, v, w)

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.v, self.w], dtype=float)

    def norm(self) -> float:
        return math.sqrt(self.u * self.u + self.v * self.v + self.w * self.w)


@dataclass(frozen=True)
class TorqueParams:
    """Torque vector (Omega_R, 0, delta) of the driven Bloch equations."""
    rabi_frequency: float
    detuning: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.rabi_frequency) and math.isfinite(self.detuning)):
            raise ValueError("torque parameters must be finite")
        if self.rabi_frequency < 0:
            raise ValueError(f"rabi_frequency must be >= 0, got {self.rabi_frequency}")


@dataclass(frozen=True)
class DampingParams:
    """Transverse (T2) and longitudinal (T1) decay with stationary w_st.

    math.inf switches a decay channel off.
    """
    t2: float = math.inf
    t1: float = math.inf
    w_stationary: float = 0.0

    def __post_init__(self):
        for name in ("t2", "t1", "w_stationary"):
            if math.isnan(getattr(self, name)):
                raise ValueError(f"{name} must not be NaN")
        if self.t2 <= 0 or self.t1 <= 0:
            raise ValueError("decay times must be positive")
        if abs(self.w_stationary) > 1.0:
            raise ValueError(f"|w_stationary| must be <= 1, got {self.w_stationary}")

    @classmethod
    def from_dephasing_times(
        cls,
        t2_prime: float,
        t2_star: float,
        t1: float = math.inf,
        w_stationary: float = 0.0,
    ) -> "DampingParams":
        """Combine irreversible and reversible dephasing: 1/T2 = 1/T2' + 1/T2*."""
        if t2_prime <= 0 or t2_star <= 0:
            raise ValueError("dephasing times must be positive")
        rate = 1.0 / t2_prime + 1.0 / t2_star
        return cls(t2=1.0 / rate, t1=t1, w_stationary=w_stationary)

    @property
    def transverse_rate(self) -> float:
        return 0.0 if math.isinf(self.t2) else 1.0 / self.t2

    @property
    def longitudinal_rate(self) -> float:
        return 0.0 if math.isinf(self.t1) else 1.0 / self.t1


def pi2_matrix() -> np.ndarray:
    """Rotation of an ideal pi/2 pulse: (u, v, w) -> (u, w, -v)."""
    return np.array([[1.0, 0.0, 0.0],
                     [0.0, 0.0, 1.0],
                     [0.0, -1.0, 0.0]])


def pi_matrix() -> np.ndarray:
    """Rotation of an ideal pi pulse: (u, v, w) -> (u, -v, -w)."""
    return np.diag([1.0, -1.0, -1.0])


def free_matrix(detuning: float, duration: float, phase: float = 0.0) -> np.ndarray:
    """Free precession about the w-axis by phi = detuning * duration + phase.

    Args:
        detuning: Microwave detuning delta in rad/s
        duration: Precession time in seconds, must be >= 0
        phase: Extra constant phase in rad

    Returns:
        3x3 rotation matrix
    """
    if duration < 0:
        raise ValueError(f"duration must be >= 0, got {duration}")
    phi = detuning * duration + phase
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[c, s, 0.0],
                     [-s, c, 0.0],
                     [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class HalfPiPulse:
    def matrix(self) -> np.ndarray:
        return pi2_matrix()

    def apply(self, vectors: np.ndarray, offsets: Optional[np.ndarray] = None) -> np.ndarray:
        return np.stack([vectors[0], vectors[2], -vectors[1]])


@dataclass(frozen=True)
class PiPulse:
    def matrix(self) -> np.ndarray:
        return pi_matrix()

    def apply(self, vectors: np.ndarray, offsets: Optional[np.ndarray] = None) -> np.ndarray:
        return np.stack([vectors[0], -vectors[1], -vectors[2]])


@dataclass(frozen=True)
class FreeEvolution:
    """Free precession for `duration` at `detuning`, plus a constant `phase`."""
    duration: float
    detuning: float = 0.0
    phase: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.duration) or self.duration < 0:
            raise ValueError(f"free evolution duration must be finite and >= 0, got {self.duration}")

    def matrix(self) -> np.ndarray:
        return free_matrix(self.detuning, self.duration, self.phase)

    def apply(self, vectors: np.ndarray, offsets: Optional[np.ndarray] = None) -> np.ndarray:
        """Rotate a (3, N) batch; `offsets` adds a per-atom detuning in rad/s."""
        detuning = self.detuning if offsets is None else self.detuning + offsets
        phi = detuning * self.duration + self.phase
        c, s = np.cos(phi), np.sin(phi)
        u, v, w = vectors
        return np.stack([u * c + v * s, -u * s + v * c, w])


PulseElement = Union[HalfPiPulse, PiPulse, FreeEvolution]


@dataclass(frozen=True)
class PulseProgram:
    """Pulse elements in time order; the first element acts first."""
    elements: tuple

    def __post_init__(self):
        elements = tuple(self.elements)
        for element in elements:
            if not isinstance(element, (HalfPiPulse, PiPulse, FreeEvolution)):
                raise TypeError(f"unsupported program element: {element!r}")
        object.__setattr__(self, "elements", elements)

    @classmethod
    def ramsey(cls, detuning: float, t: float, phase: float = 0.0) -> "PulseProgram":
        """pi/2 - free(t) - pi/2."""
        return cls((HalfPiPulse(), FreeEvolution(t, detuning, phase), HalfPiPulse()))

    @classmethod
    def echo(
        cls,
        detuning: float,
        t: float,
        tau_pi: float,
        phase: float = 0.0,
        second_detuning: Optional[float] = None,
    ) -> "PulseProgram":
        """pi/2 - free(tau_pi) - pi - free(t - tau_pi) - pi/2.

        `second_detuning` replaces the detuning of the second interval.
        `phase` is added to the second interval only.
        """
        if t < tau_pi:
            raise ValueError(f"echo time t={t} precedes the pi pulse at {tau_pi}")
        late = detuning if second_detuning is None else second_detuning
        return cls((
            HalfPiPulse(),
            FreeEvolution(tau_pi, detuning),
            PiPulse(),
            FreeEvolution(t - tau_pi, late, phase),
            HalfPiPulse(),
        ))

    def matrix(self) -> np.ndarray:
        """Total rotation; later elements multiply from the left."""
        total = np.eye(3)
        for element in self.elements:
            total = element.matrix() @ total
        return total

    @property
    def duration(self) -> float:
        return sum(e.duration for e in self.elements if isinstance(e, FreeEvolution))

    def free_indices(self) -> List[int]:
        return [i for i, e in enumerate(self.elements) if isinstance(e, FreeEvolution)]


def apply_program(program: PulseProgram, u0: BlochVector) -> BlochVector:
    """Apply the program's matrix product to a single Bloch vector."""
    result = program.matrix() @ u0.as_array()
    return BlochVector.from_array(result)


def propagate(
    program: PulseProgram,
    vectors: np.ndarray,
    element_offsets: Optional[Sequence[Optional[np.ndarray]]] = None,
) -> np.ndarray:
    """Apply a program to a (3, N) batch of Bloch vectors.

    Args:
        program: Pulse program
        vectors: Array of shape (3, N)
        element_offsets: One entry per program element; for free evolutions
            an array of N per-atom detuning offsets (rad/s) or None

    Returns:
        Array of shape (3, N)
    """
    state = np.asarray(vectors, dtype=float)
    if state.ndim != 2 or state.shape[0] != 3:
        raise ValueError(f"expected a (3, N) array, got shape {state.shape}")
    if element_offsets is not None and len(element_offsets) != len(program.elements):
        raise ValueError("element_offsets must have one entry per program element")

    norms_before = np.linalg.norm(state, axis=0)
    for i, element in enumerate(program.elements):
        offsets = None if element_offsets is None else element_offsets[i]
        state = element.apply(state, offsets)
    drift = np.max(np.abs(np.linalg.norm(state, axis=0) - norms_before), initial=0.0)
    assert drift <= _NORM_DRIFT_LIMIT, f"Bloch norm drifted by {drift:.3e}"
    return state


def echo_w_perturbed(delta_delta: float, tau_pi: float) -> float:
    """w after pi/2 - tau_pi - pi - tau_pi - pi/2 when the second interval
    sees the detuning shifted by delta_delta. The common detuning cancels."""
    if tau_pi < 0:
        raise ValueError(f"tau_pi must be >= 0, got {tau_pi}")
    return -math.cos(delta_delta * tau_pi)


def _bloch_rhs(state: np.ndarray, torque: TorqueParams, damping: DampingParams) -> np.ndarray:
    u, v, w = state
    g2 = damping.transverse_rate
    g1 = damping.longitudinal_rate
    return np.array([
        torque.detuning * v - g2 * u,
        -torque.detuning * u + torque.rabi_frequency * w - g2 * v,
        -torque.rabi_frequency * v - g1 * (w - damping.w_stationary),
    ])


def integrate_damped_bloch(
    torque: TorqueParams,
    damping: DampingParams,
    u0: BlochVector,
    t: float,
    dt_max: float = 1e-6,
) -> BlochVector:
    """Integrate the damped Bloch equations with fixed-step classical RK4.

    The step is t / ceil(t / dt_max), so it never exceeds dt_max.

    Args:
        torque: Rabi frequency and detuning in rad/s
        damping: T2, T1 and stationary w
        u0: Initial Bloch vector
        t: Integration time in seconds
        dt_max: Largest allowed step in seconds

    Returns:
        Bloch vector at time t
    """
    if not math.isfinite(t) or t < 0:
        raise ValueError(f"t must be finite and >= 0, got {t}")
    if not math.isfinite(dt_max) or dt_max <= 0:
        raise ValueError(f"dt_max must be finite and > 0, got {dt_max}")
    state = u0.as_array()
    if not np.all(np.isfinite(state)):
        raise ValueError("initial Bloch vector must be finite")
    if t == 0:
        return u0

    steps = max(1, math.ceil(t / dt_max))
    h = t / steps
    for _ in range(steps):
        k1 = _bloch_rhs(state, torque, damping)
        k2 = _bloch_rhs(state + 0.5 * h * k1, torque, damping)
        k3 = _bloch_rhs(state + 0.5 * h * k2, torque, damping)
        k4 = _bloch_rhs(state + h * k3, torque, damping)
        state = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return BlochVector.from_array(state)


def rabi_p3(rabi_frequency, t, contrast: float = 1.0):
    """P3(t) = (C/2)(1 - cos(Omega_R t)); accepts scalars or arrays of t."""
    if not 0.0 <= contrast <= 1.0:
        raise ValueError(f"contrast must lie in [0, 1], got {contrast}")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("t must be >= 0")
    result = 0.5 * contrast * (1.0 - np.cos(rabi_frequency * t_arr))
    return float(result) if result.ndim == 0 else result


def p3_from_w(w, amplitude: float = 0.5, offset: float = 0.5):
    """Detection probability in F=3: P3 = offset + amplitude * w.

    The defaults give the ideal mapping (w + 1) / 2.
    """
    result = offset + amplitude * np.asarray(w, dtype=float)
    return float(result) if result.ndim == 0 else result


def w_from_p3(p3, amplitude: float = 0.5, offset: float = 0.5):
    if amplitude == 0:
        raise ValueError("amplitude must be non-zero")
    result = (np.asarray(p3, dtype=float) - offset) / amplitude
    return float(result) if result.ndim == 0 else result


def pulse_phase_offset(t_half_pi: float, delta_prime: float) -> float:
    """Precession accumulated during the two finite pi/2 pulses: 2 t_pi/2 delta'."""
    if t_half_pi < 0:
        raise ValueError(f"t_half_pi must be >= 0, got {t_half_pi}")
    return 2.0 * t_half_pi * delta_prime
