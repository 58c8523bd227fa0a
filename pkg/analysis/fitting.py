"""Least-squares fits of Rabi, Ramsey, spin-echo and echo-visibility data.

Each model class provides its value, analytic Jacobian and an automatic
initial guess. `fit_model` drives scipy's Levenberg-Marquardt solver.
Positive parameters (T2*, Omega_R, sigma_exp) are optimized as their
logarithm; phases are wrapped to (-pi, pi] after the fit.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import least_squares
from scipy.signal import find_peaks, lombscargle

from core.constants import ENVELOPE_COEFF, T2STAR_FACTOR, rad_to_hz
from core.errors import ConvergenceError, InputDataError

logger = logging.getLogger(__name__)

MAX_ITERATIONS = 500
X_TOL = 1e-10
F_TOL = 1e-12

_T2STAR_GRID = 16
_OVERSAMPLE = 8
_PEAK_CANDIDATES = 3
_REFINE_BINS = 3
_MAX_PERIODOGRAM = 20_000


@dataclass
class Dataset:
    """Measured or simulated points (t, p3) with optional weights."""
    t: np.ndarray
    p3: np.ndarray
    weight: Optional[np.ndarray] = None

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.p3 = np.asarray(self.p3, dtype=float)
        if self.t.shape != self.p3.shape or self.t.ndim != 1:
            raise InputDataError("t and p3 must be one-dimensional and of equal length")
        if self.weight is not None:
            self.weight = np.asarray(self.weight, dtype=float)
            if self.weight.shape != self.t.shape:
                raise InputDataError("weight column length differs from t")
            bad = np.flatnonzero(~(self.weight > 0))
            if bad.size:
                raise InputDataError("weights must be positive", row=int(bad[0]) + 1)
        not_finite = np.flatnonzero(~(np.isfinite(self.t) & np.isfinite(self.p3)))
        if not_finite.size:
            raise InputDataError("non-finite value", row=int(not_finite[0]) + 1)
        steps = np.flatnonzero(np.diff(self.t) <= 0)
        if steps.size:
            raise InputDataError("t must be strictly increasing", row=int(steps[0]) + 2)
        outside = np.count_nonzero((self.p3 < 0) | (self.p3 > 1))
        if outside:
            logger.warning("%d point(s) have p3 outside [0, 1]", outside)

    def __len__(self) -> int:
        return int(self.t.size)

    @property
    def span(self) -> float:
        return float(self.t[-1] - self.t[0]) if len(self) > 1 else 0.0

    @classmethod
    def from_points(cls, points: Sequence[Tuple[float, ...]]) -> "Dataset":
        rows = [tuple(p) for p in points]
        t = [r[0] for r in rows]
        p3 = [r[1] for r in rows]
        weight = [r[2] for r in rows] if rows and all(len(r) > 2 for r in rows) else None
        return cls(np.array(t), np.array(p3), None if weight is None else np.array(weight))

    @classmethod
    def from_csv(cls, path: str) -> "Dataset":
        """Read `t_s,p3[,weight]`; row numbers in errors count data rows from 1.

        The first two columns are time and signal whatever their names;
        weights are only taken from a column named `weight`.
        """
        try:
            frame = pd.read_csv(path, comment="#")
        except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
            raise InputDataError(f"cannot parse {path}: {exc}") from exc
        if frame.shape[1] < 2:
            raise InputDataError(f"{path}: expected columns t_s,p3[,weight]")
        indices = [0, 1]
        if "weight" in frame.columns[2:]:
            indices.append(list(frame.columns).index("weight"))
        columns = []
        for i in indices:
            converted = pd.to_numeric(frame.iloc[:, i], errors="coerce")
            bad = np.flatnonzero(converted.isna().to_numpy())
            if bad.size:
                raise InputDataError(
                    f"column {frame.columns[i]!r}: cannot read {frame.iloc[bad[0], i]!r}", row=int(bad[0]) + 1
                )
            columns.append(converted.to_numpy(dtype=float))
        weight = columns[2] if len(columns) > 2 else None
        return cls(columns[0], columns[1], weight)


@dataclass
class FitResult:
    """Fitted parameters with standard errors."""
    model: str
    params: Dict[str, float]
    errors: Dict[str, float]
    covariance: np.ndarray
    rss: float
    converged: bool
    iterations: int
    n_points: int
    degenerate: bool = False
    fixed: Dict[str, float] = field(default_factory=dict)

    def __getitem__(self, name: str) -> float:
        return self.params[name]

    def error(self, name: str) -> float:
        return self.errors[name]

    def visibility(self) -> Tuple[float, float]:
        """V = A/B with first-order propagated error."""
        if "amplitude" not in self.params or "offset" not in self.params:
            raise ValueError(f"{self.model} fit has no amplitude/offset")
        names = list(self.params)
        ia, ib = names.index("amplitude"), names.index("offset")
        a, b = self.params["amplitude"], self.params["offset"]
        if b == 0:
            return math.inf, math.inf
        grad = np.zeros(len(names))
        grad[ia] = 1.0 / b
        grad[ib] = -a / b ** 2
        variance = float(grad @ self.covariance @ grad)
        error = math.sqrt(variance) if np.isfinite(variance) and variance >= 0 else math.inf
        return a / b, error

    def t2_prime(self) -> Tuple[float, float]:
        """T2' = sqrt(2)/sigma_exp with propagated error (visibility fits)."""
        sigma = self.params["sigma"]
        if sigma == 0:
            return math.inf, math.inf
        value = t2prime_from_sigma(sigma)
        return value, value * self.errors["sigma"] / sigma

    def to_dict(self) -> Dict[str, object]:
        data: Dict[str, object] = {
            "model": self.model,
            "converged": self.converged,
            "degenerate": self.degenerate,
            "iterations": self.iterations,
            "n_points": self.n_points,
            "rss": self.rss,
        }
        for name, value in self.params.items():
            data[name] = value
            data[f"{name}_err"] = self.errors[name]
        for name, value in self.fixed.items():
            data[name] = value
        if "amplitude" in self.params and "offset" in self.params:
            data["visibility"], data["visibility_err"] = self.visibility()
        if self.model == "visibility":
            data["t2_prime"], data["t2_prime_err"] = self.t2_prime()
        return data

    def summary(self) -> str:
        """Human-readable summary in Hz and ms."""
        lines = [f"{self.model} fit: {'converged' if self.converged else 'NOT converged'}"
                 f" after {self.iterations} evaluations, rss = {self.rss:.3e}"]
        for name, value in self.params.items():
            err = self.errors[name]
            unit, scale = _DISPLAY_UNITS.get(name, ("", None))
            if scale is not None:
                value, err = scale(value), scale(err)
            lines.append(f"  {name:<15} {value:>14.6g} +/- {err:<11.3g} {unit}".rstrip())
        for name, value in self.fixed.items():
            unit, scale = _DISPLAY_UNITS.get(name, ("", None))
            shown = scale(value) if scale else value
            lines.append(f"  {name:<15} {shown:>14.6g} (fixed) {unit}".rstrip())
        if "amplitude" in self.params and "offset" in self.params:
            v, dv = self.visibility()
            lines.append(f"  {'visibility':<15} {v:>14.4f} +/- {dv:.2g}")
        if self.model == "visibility":
            t2, dt2 = self.t2_prime()
            lines.append(f"  {'T2_prime':<15} {t2 * 1e3:>14.4g} +/- {dt2 * 1e3:.2g} ms")
        if self.degenerate:
            lines.append("  warning: degenerate fit, some parameters are not determined by the data")
        return "\n".join(lines)


_DISPLAY_UNITS = {
    "detuning": ("Hz (/2pi)", rad_to_hz),
    "rabi_frequency": ("Hz (/2pi)", rad_to_hz),
    "sigma": ("Hz (/2pi)", rad_to_hz),
    "t2star": ("ms", lambda x: x * 1e3),
    "tau_pi": ("ms", lambda x: x * 1e3),
}


def t2prime_from_sigma(sigma_exp: float) -> float:
    """T2' = sqrt(2) / sigma_exp; infinite when sigma_exp is zero."""
    if sigma_exp < 0:
        raise ValueError(f"sigma_exp must be >= 0, got {sigma_exp}")
    if sigma_exp == 0:
        return math.inf
    return math.sqrt(2.0) / sigma_exp


def wrap_phase(phase: float) -> float:
    """Map a phase to (-pi, pi]."""
    wrapped = math.atan2(math.sin(phase), math.cos(phase))
    return math.pi if wrapped == -math.pi else wrapped


class FitModel:
    """Base class: subclasses define names, value, jacobian and autoguess."""
    name = ""
    positive: Tuple[str, ...] = ()
    phases: Tuple[str, ...] = ()
    amplitude_name = "amplitude"
    min_points = 3

    @classmethod
    def names(cls) -> Tuple[str, ...]:
        raise NotImplementedError

    def value(self, t: np.ndarray, params: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, t: np.ndarray, params: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def autoguess(self, t: np.ndarray, y: np.ndarray, man_guess: Dict[str, float]) -> Dict[str, float]:
        raise NotImplementedError

    def degenerate_guess(self, y: np.ndarray) -> Dict[str, float]:
        """Parameters for data without any variation."""
        raise NotImplementedError

    def check_data(self, data: Dataset) -> None:
        if len(data) < self.min_points:
            raise InputDataError(f"{self.name} fit needs at least {self.min_points} points, got {len(data)}")

    def fixed(self) -> Dict[str, float]:
        return {}


def _envelope_parts(x: np.ndarray, t2star: float):
    """alpha, kappa and their T2* derivatives at x = t / T2*."""
    a, c = ENVELOPE_COEFF, T2STAR_FACTOR
    base = 1.0 + a * x * x
    alpha = base ** -1.5
    kappa = -3.0 * np.arctan(c * x)
    d_alpha = 3.0 * a * x * x / t2star * base ** -2.5
    d_kappa = 3.0 * c * x / (t2star * (1.0 + c * c * x * x))
    return alpha, kappa, d_alpha, d_kappa


def _centered_grid(t: np.ndarray, center: float) -> np.ndarray:
    """Trial frequencies within 30% of a given center."""
    step = 2.0 * math.pi / (_OVERSAMPLE * float(t[-1] - t[0]))
    low, high = sorted((0.7 * center, 1.3 * center))
    return np.arange(low, high + step / 4, step / 2)


def _is_uniform(t: np.ndarray) -> bool:
    steps = np.diff(t)
    return bool(np.allclose(steps, steps[0], rtol=1e-6, atol=0.0))


def _spectrum(t: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Angular frequencies and power of the mean-subtracted signal, oversampled 8x.

    Uniform grids use a zero-padded FFT; others a Lomb-Scargle periodogram.
    """
    y = y - np.mean(y)
    if _is_uniform(t):
        n_fft = _OVERSAMPLE * t.size
        power = np.abs(np.fft.rfft(y, n_fft)) ** 2
        freqs = 2.0 * math.pi * np.fft.rfftfreq(n_fft, float(t[1] - t[0]))
        return freqs[1:], power[1:]
    step = 2.0 * math.pi / (_OVERSAMPLE * float(t[-1] - t[0]))
    nyquist = math.pi / float(np.median(np.diff(t)))
    freqs = np.arange(step, nyquist, step)[:_MAX_PERIODOGRAM]
    return freqs, lombscargle(t, y, freqs)


def _peak_frequencies(t: np.ndarray, y: np.ndarray, count: int = _PEAK_CANDIDATES) -> List[float]:
    """The `count` strongest spectral peaks, at least two bins apart."""
    freqs, power = _spectrum(t, y)
    peaks, _ = find_peaks(power, distance=2 * _OVERSAMPLE)
    # the global maximum may sit on an edge of the band
    peaks = np.union1d(peaks, [int(np.argmax(power))])
    strongest = peaks[np.argsort(power[peaks])[::-1][:count]]
    return [float(freqs[k]) for k in strongest]


def _seed_frequencies(t: np.ndarray, y: np.ndarray, signed: bool = False) -> np.ndarray:
    """Fine grids of +-_REFINE_BINS bins around the strongest spectral peaks."""
    bin_width = 2.0 * math.pi / float(t[-1] - t[0])
    offsets = np.linspace(-_REFINE_BINS, _REFINE_BINS, 2 * _OVERSAMPLE * _REFINE_BINS + 1) * bin_width
    grids = []
    for center in _peak_frequencies(t, y):
        local = center + offsets
        local = local[local > 0]
        grids.append(np.concatenate([-local[::-1], local]) if signed else local)
    return np.unique(np.concatenate(grids))


def _solve_linear(basis: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Least squares of y on stacked bases of shape (K, p, m); returns coefficients and RSS."""
    normal = np.einsum("kpm,kqm->kpq", basis, basis)
    rhs = np.einsum("kpm,m->kp", basis, y)
    normal += np.eye(normal.shape[-1]) * 1e-14 * np.trace(normal, axis1=1, axis2=2)[:, None, None]
    coeff = np.linalg.solve(normal, rhs[..., None])[..., 0]
    fitted = np.einsum("kp,kpm->km", coeff, basis)
    rss = np.sum((fitted - y) ** 2, axis=1)
    return coeff, rss


def _fringe_search(
    s: np.ndarray,
    y: np.ndarray,
    envelope_arg: np.ndarray,
    t2_candidates: Sequence[float],
    frequencies: np.ndarray,
) -> Tuple[float, float, np.ndarray]:
    """Matched-filter grid over (delta', T2*): fit y ~ c0 + alpha (a cos + b sin) linearly."""
    best = (math.inf, 0.0, 0.0, None)
    ones = np.ones_like(s)
    for t2 in t2_candidates:
        x = envelope_arg / t2
        alpha, kappa, _, _ = _envelope_parts(x, t2)
        phase = frequencies[:, None] * s[None, :] + kappa[None, :]
        basis = np.stack([
            np.broadcast_to(ones, phase.shape),
            alpha * np.cos(phase),
            alpha * np.sin(phase),
        ], axis=1)
        coeff, rss = _solve_linear(basis, y)
        k = int(np.argmin(rss))
        if rss[k] < best[0]:
            best = (float(rss[k]), float(frequencies[k]), float(t2), coeff[k])
    _, freq, t2, coeff = best
    return freq, t2, coeff


class RabiModel(FitModel):
    """P3 = (C/2)(1 - cos Omega_R t)."""
    name = "rabi"
    positive = ("rabi_frequency",)
    amplitude_name = "contrast"
    min_points = 4

    @classmethod
    def names(cls):
        return ("contrast", "rabi_frequency")

    def value(self, t, params):
        c, omega = params
        return 0.5 * c * (1.0 - np.cos(omega * t))

    def jacobian(self, t, params):
        c, omega = params
        return np.column_stack([
            0.5 * (1.0 - np.cos(omega * t)),
            0.5 * c * t * np.sin(omega * t),
        ])

    def autoguess(self, t, y, man_guess):
        center = man_guess.get("rabi_frequency")
        frequencies = _centered_grid(t, center) if center else _seed_frequencies(t, y)
        basis = 0.5 * (1.0 - np.cos(frequencies[:, None] * t[None, :]))
        coeff, rss = _solve_linear(basis[:, None, :], y)
        k = int(np.argmin(rss))
        guess = {"contrast": float(coeff[k, 0]), "rabi_frequency": float(frequencies[k])}
        guess.update({k2: v for k2, v in man_guess.items() if k2 in guess})
        return guess

    def degenerate_guess(self, y):
        return {"contrast": 0.0, "rabi_frequency": 0.0}


class RamseyModel(FitModel):
    """P3 = B + alpha(t) A cos(delta' t + kappa(t) + phi)."""
    name = "ramsey"
    positive = ("t2star",)
    phases = ("phase",)
    min_points = 10

    @classmethod
    def names(cls):
        return ("amplitude", "offset", "detuning", "t2star", "phase")

    def _arg(self, t):
        return t

    def _sign(self) -> float:
        return 1.0

    def value(self, t, params):
        a, b, d, t2, ph = params
        s = self._arg(t)
        alpha, kappa, _, _ = _envelope_parts(s / t2, t2)
        return b + self._sign() * alpha * a * np.cos(d * s + kappa + ph)

    def jacobian(self, t, params):
        a, b, d, t2, ph = params
        s = self._arg(t)
        alpha, kappa, d_alpha, d_kappa = _envelope_parts(s / t2, t2)
        theta = d * s + kappa + ph
        cos, sin = np.cos(theta), np.sin(theta)
        sign = self._sign()
        return sign * np.column_stack([
            alpha * cos,
            sign * np.ones_like(s),
            -alpha * a * s * sin,
            a * (d_alpha * cos - alpha * sin * d_kappa),
            -alpha * a * sin,
        ])

    def autoguess(self, t, y, man_guess):
        s = self._arg(t)
        span = float(np.max(np.abs(s)))
        if "t2star" in man_guess:
            t2_candidates = [man_guess["t2star"]]
        else:
            t2_candidates = np.geomspace(span / 20.0, span * 5.0, _T2STAR_GRID)
        if man_guess.get("detuning"):
            frequencies = _centered_grid(t, man_guess["detuning"])
        else:
            frequencies = _seed_frequencies(t, y, signed=True)
        freq, t2, coeff = _fringe_search(s, y, s, t2_candidates, frequencies)
        c0, ca, cb = coeff
        # c0 + alpha (ca cos + cb sin) == B + sign alpha A cos(. + ph)
        sign = self._sign()
        amplitude = math.hypot(ca, cb)
        phase = math.atan2(-cb * sign, ca * sign)
        guess = {
            "amplitude": amplitude,
            "offset": float(c0),
            "detuning": freq,
            "t2star": t2,
            "phase": phase,
        }
        guess.update({k: v for k, v in man_guess.items() if k in guess})
        return guess

    def degenerate_guess(self, y):
        return {"amplitude": 0.0, "offset": float(y[0]), "detuning": 0.0, "t2star": 1.0, "phase": 0.0}


class EchoModel(RamseyModel):
    """P3 = B - alpha(|s|) A cos(delta' s + kappa(s) + psi), s = t - 2 tau_pi."""
    name = "echo"
    phases = ("echo_phase",)

    def __init__(self, tau_pi: float):
        if tau_pi < 0:
            raise ValueError(f"tau_pi must be >= 0, got {tau_pi}")
        self.tau_pi = tau_pi

    @classmethod
    def names(cls):
        return ("amplitude", "offset", "detuning", "t2star", "echo_phase")

    def _arg(self, t):
        return t - 2.0 * self.tau_pi

    def _sign(self) -> float:
        return -1.0

    def check_data(self, data: Dataset) -> None:
        super().check_data(data)
        if data.t[0] < self.tau_pi:
            raise InputDataError(f"echo data start at {data.t[0]:g} s, before the pi pulse at {self.tau_pi:g} s")

    def autoguess(self, t, y, man_guess):
        renamed = dict(man_guess)
        if "echo_phase" in renamed:
            renamed["phase"] = renamed.pop("echo_phase")
        guess = super().autoguess(t, y, renamed)
        guess["echo_phase"] = guess.pop("phase")
        return guess

    def degenerate_guess(self, y):
        guess = super().degenerate_guess(y)
        guess["echo_phase"] = guess.pop("phase")
        return guess

    def fixed(self):
        return {"tau_pi": self.tau_pi}


class VisibilityModel(FitModel):
    """V(tau_pi) = C0 exp(-tau_pi^2 sigma^2 / 2)."""
    name = "visibility"
    positive = ("sigma",)
    amplitude_name = "sigma"
    min_points = 3

    @classmethod
    def names(cls):
        return ("c0", "sigma")

    def value(self, t, params):
        c0, sigma = params
        return c0 * np.exp(-0.5 * (t * sigma) ** 2)

    def jacobian(self, t, params):
        c0, sigma = params
        g = np.exp(-0.5 * (t * sigma) ** 2)
        return np.column_stack([g, -c0 * g * t * t * sigma])

    def autoguess(self, t, y, man_guess):
        keep = y > 0
        c0 = float(y[np.argmin(t)])
        sigma = 1.0 / float(np.max(t)) if np.max(t) > 0 else 1.0
        if np.count_nonzero(keep) >= 2:
            slope, intercept = np.polyfit(t[keep] ** 2, np.log(y[keep]), 1)
            if slope < 0:
                sigma = math.sqrt(-2.0 * slope)
                c0 = math.exp(intercept)
        guess = {"c0": c0, "sigma": sigma}
        guess.update({k: v for k, v in man_guess.items() if k in guess})
        return guess

    def degenerate_guess(self, y):
        return {"c0": float(y[0]), "sigma": 0.0}


def _to_internal(model: FitModel, physical: Dict[str, float]) -> np.ndarray:
    values = []
    for name in model.names():
        value = physical[name]
        if name in model.positive:
            if value <= 0:
                raise InputDataError(f"initial {name} must be positive, got {value}")
            value = math.log(value)
        values.append(value)
    return np.array(values, dtype=float)


def _to_physical(model: FitModel, internal: np.ndarray) -> np.ndarray:
    out = np.array(internal, dtype=float)
    for i, name in enumerate(model.names()):
        if name in model.positive:
            out[i] = math.exp(internal[i])
    return out


def _degenerate_result(model: FitModel, data: Dataset) -> FitResult:
    guess = model.degenerate_guess(data.p3)
    names = model.names()
    params = np.array([guess[n] for n in names])
    residual = model.value(data.t, params) - data.p3
    rss = float(residual @ residual)
    logger.warning("%s fit: data do not vary, returning a degenerate solution", model.name)
    n = len(names)
    return FitResult(
        model=model.name,
        params=dict(zip(names, params.tolist())),
        errors={name: math.inf for name in names},
        covariance=np.full((n, n), math.inf),
        rss=rss,
        converged=rss == 0.0,
        iterations=0,
        n_points=len(data),
        degenerate=True,
        fixed=model.fixed(),
    )


def fit_model(
    model: FitModel,
    data: Dataset,
    init: Optional[Dict[str, float]] = None,
    weighted: bool = False,
    max_iterations: int = MAX_ITERATIONS,
) -> FitResult:
    """
    Fit a model to a dataset.

    Args:
        model: Model instance
        data: Points to fit
        init: Manual initial guesses by parameter name (unknown names are ignored)
        weighted: Multiply residuals by the dataset's weight column
        max_iterations: Iteration budget before ConvergenceError

    Returns:
        FitResult with covariance-derived standard errors
    """
    model.check_data(data)
    init = dict(init or {})
    for key in list(init):
        if key not in model.names():
            logger.warning("'%s' is not a parameter of the %s model, ignored", key, model.name)
            init.pop(key)

    if np.ptp(data.p3) == 0:
        return _degenerate_result(model, data)

    t, y = data.t, data.p3
    w = data.weight if (weighted and data.weight is not None) else np.ones_like(y)
    guess = model.autoguess(t, y, init)
    logger.debug("%s initial guess: %s", model.name, guess)
    x0 = _to_internal(model, guess)
    names = model.names()
    positive_mask = np.array([n in model.positive for n in names])

    def residuals(x):
        return w * (model.value(t, _to_physical(model, x)) - y)

    def jacobian(x):
        p = _to_physical(model, x)
        jac = model.jacobian(t, p)
        jac = jac * np.where(positive_mask, p, 1.0)[None, :]
        return w[:, None] * jac

    n = len(names)
    result = least_squares(
        residuals, x0, jac=jacobian, method="lm",
        xtol=X_TOL, ftol=F_TOL, gtol=1e-15, max_nfev=max_iterations * (n + 1),
    )
    params = _to_physical(model, result.x)
    state = dict(zip(names, params.tolist()))
    if result.status <= 0 or not np.all(np.isfinite(params)):
        raise ConvergenceError(
            f"{model.name} fit did not converge: {result.message}",
            last_state=state, iterations=int(result.nfev),
        )

    for i, name in enumerate(names):
        if name in model.phases:
            params[i] = wrap_phase(params[i])
            state[name] = float(params[i])

    jac = model.jacobian(t, params) * w[:, None]
    resid = w * (model.value(t, params) - y)
    rss = float(resid @ resid)
    m = len(y)
    jtj = jac.T @ jac
    singular = np.linalg.matrix_rank(jtj) < n
    if singular or m <= n:
        covariance = np.full((n, n), math.inf)
    else:
        covariance = np.linalg.pinv(jtj) * (rss / (m - n))
    errors = {
        name: (math.sqrt(covariance[i, i]) if np.isfinite(covariance[i, i]) and covariance[i, i] >= 0 else math.inf)
        for i, name in enumerate(names)
    }

    amplitude = abs(state.get(model.amplitude_name, 1.0))
    scale = max(1.0, float(np.max(np.abs(y))))
    degenerate = bool(singular or amplitude < 1e-9 * scale)
    if degenerate:
        logger.warning("%s fit is degenerate; errors are unreliable", model.name)

    return FitResult(
        model=model.name,
        params=state,
        errors=errors,
        covariance=covariance,
        rss=rss,
        converged=True,
        iterations=int(result.nfev),
        n_points=m,
        degenerate=degenerate,
        fixed=model.fixed(),
    )


def fit_rabi(data: Dataset, init: Optional[Dict[str, float]] = None, **kwargs) -> FitResult:
    """Fit C and Omega_R of resonant Rabi flopping."""
    return fit_model(RabiModel(), data, init, **kwargs)


def fit_ramsey(data: Dataset, init: Optional[Dict[str, float]] = None, **kwargs) -> FitResult:
    """Fit A, B, delta', T2* and phi of a Ramsey fringe."""
    return fit_model(RamseyModel(), data, init, **kwargs)


def fit_echo(data: Dataset, tau_pi: float, init: Optional[Dict[str, float]] = None, **kwargs) -> FitResult:
    """Fit A, B, delta', T2* and psi of a spin echo with tau_pi held fixed."""
    return fit_model(EchoModel(tau_pi), data, init, **kwargs)


def fit_visibility(
    points: Sequence[Tuple[float, float]],
    init: Optional[Dict[str, float]] = None,
    **kwargs,
) -> FitResult:
    """Fit C0 and sigma_exp of the Gaussian visibility decay in tau_pi."""
    data = Dataset.from_points(points)
    return fit_model(VisibilityModel(), data, init, **kwargs)


MODELS = {
    "rabi": RabiModel,
    "ramsey": RamseyModel,
    "echo": EchoModel,
    "visibility": VisibilityModel,
}


def list_models() -> List[str]:
    return list(MODELS)
