"""Scenario files: sectioned `key = value` text with unit-suffixed keys.

Frequencies are given in Hz and converted to rad/s here, once. Every
validation failure names the `[section] key` and its line in the file.
"""
import configparser
import logging
import os
import re
from pathlib import Path
from typing import Dict, Optional, Tuple, Type, TypeVar

from dotenv import find_dotenv, load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from analysis.noise_budget import (
    AllanSource,
    BudgetInputs,
    HeatingModel,
    MagneticField,
    MechanismId,
    PhotonScattering,
    TimeSeries,
    quadratic_zeeman_shift,
)
from core.constants import CESIUM, MICROTESLA, MILLIKELVIN, MILLISECOND, hz_to_rad
from core.errors import ConfigurationError
from core.trap import EnsembleSpec, TrapConfig, t2star_from_temperature, temperature_from_t2star
from sim.model import SequenceKind
from sim.scenarios import ScenarioConfig, time_grid
from sim.signals import EchoParams, HomogeneousNoise, RabiParams, RamseyParams

logger = logging.getLogger(__name__)

SEED_VARIABLE = "DEPHASIM_SEED"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ScenarioSection(_Section):
    name: str = ""
    description: str = ""
    expected_outcome: str = ""


class TrapSection(_Section):
    depth_mk: Optional[float] = Field(default=None, gt=0.0)
    intensity_ratio: Optional[float] = Field(default=None, ge=0.0)
    eta: float = Field(default=CESIUM.eta, gt=0.0)
    delta0_hz: Optional[float] = Field(default=None, le=0.0)
    wavelength_nm: float = Field(default=CESIUM.trap_wavelength * 1e9, gt=0.0)


class EnsembleSection(_Section):
    temperature_mk: Optional[float] = Field(default=None, gt=0.0)
    atoms: int = Field(default=100_000, ge=1)
    seed: int = Field(default=0, ge=0)
    truncation_mk: Optional[float] = Field(default=None, gt=0.0)
    workers: int = Field(default=1, ge=1)


class SequenceSection(_Section):
    kind: SequenceKind
    rabi_frequency_hz: Optional[float] = Field(default=None, ge=0.0)
    contrast: float = Field(default=1.0, ge=0.0, le=1.0)
    detuning_hz: Optional[float] = None
    delta_synth_hz: Optional[float] = None
    delta_b_hz: Optional[float] = Field(default=None, ge=0.0)
    b_field_ut: Optional[float] = None
    t2star_ms: Optional[float] = Field(default=None, gt=0.0)
    amplitude: float = 0.5
    offset: float = 0.5
    phase: float = 0.0
    tau_pi_ms: Optional[float] = Field(default=None, ge=0.0)
    echo_phase: float = 0.0
    t_start_ms: float = Field(default=0.0, ge=0.0)
    t_stop_ms: Optional[float] = Field(default=None, ge=0.0)
    points: int = Field(default=100, ge=1)


class NoiseSection(_Section):
    sigma_hz: float = Field(default=0.0, ge=0.0)


class BudgetSection(_Section):
    t2_prime_ms: Optional[float] = Field(default=None, gt=0.0)
    sigma_exp_hz: Optional[float] = Field(default=None, ge=0.0)
    delta0_hz: Optional[float] = Field(default=None, le=0.0)


class AllanSection(_Section):
    sigma_allan: Optional[float] = Field(default=None, ge=0.0)
    series: Optional[str] = None


class HeatingSection(_Section):
    rate_mk_per_s: float = Field(ge=0.0)
    temperature_mk: float = Field(gt=0.0)
    dimension: int = Field(default=3, ge=1, le=3)


class PhotonSection(_Section):
    temperature_mk: float = Field(gt=0.0)
    scattering_rate: Optional[float] = Field(default=None, ge=0.0)
    wavelength_nm: float = Field(default=CESIUM.trap_wavelength * 1e9, gt=0.0)


class MagneticSection(_Section):
    b0_ut: float
    delta_b_ut: float = Field(ge=0.0)


KNOWN_SECTIONS = (
    "scenario", "trap", "ensemble", "sequence", "noise", "budget",
    "intensity", "pointing_best", "pointing_worst", "heating", "photon", "magnetic", "references",
)
ALLAN_SECTIONS = ("intensity", "pointing_best", "pointing_worst")
BUDGET_SECTIONS = ("budget", "heating", "photon", "magnetic", "references") + ALLAN_SECTIONS

S = TypeVar("S", bound=_Section)


def _index_lines(text: str) -> Tuple[Dict[str, int], Dict[Tuple[str, str], int]]:
    """Line numbers of section headers and of keys within their section."""
    sections: Dict[str, int] = {}
    keys: Dict[Tuple[str, str], int] = {}
    current = None
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        header = re.match(r"\[([^\]]+)\]", line)
        if header:
            current = header.group(1).strip()
            sections.setdefault(current, number)
            continue
        if current is not None and re.search(r"[=:]", line):
            key = re.split(r"[=:]", line, maxsplit=1)[0].strip().lower()
            keys.setdefault((current, key), number)
    return sections, keys


class ConfigFile:
    """A parsed scenario file that can point at the line of any key."""

    def __init__(self, path: str):
        self.path = Path(path)
        if not self.path.is_file():
            raise ConfigurationError(f"config file not found: {path}", field="--config")
        text = self.path.read_text(encoding="utf-8")
        self.parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
        try:
            self.parser.read_string(text, source=str(self.path))
        except configparser.Error as exc:
            raise ConfigurationError(f"cannot parse {path}: {exc.message}", line=getattr(exc, "lineno", None)) from exc
        self.section_lines, self.key_lines = _index_lines(text)
        for name in self.parser.sections():
            if name not in KNOWN_SECTIONS:
                raise self.error(f"unknown section; expected one of {', '.join(KNOWN_SECTIONS)}", name)

    def has(self, name: str) -> bool:
        return self.parser.has_section(name)

    def error(self, message: str, section: str, key: Optional[str] = None) -> ConfigurationError:
        if key is None:
            return ConfigurationError(message, field=f"[{section}]", line=self.section_lines.get(section))
        line = self.key_lines.get((section, key), self.section_lines.get(section))
        return ConfigurationError(message, field=f"[{section}] {key}", line=line)

    def section(self, name: str, model: Type[S]) -> Optional[S]:
        """Validate one section; None when the file lacks it."""
        if not self.has(name):
            return None
        data = {key: value for key, value in self.parser[name].items()}
        try:
            return model(**data)
        except ValidationError as exc:
            first = exc.errors()[0]
            key = str(first["loc"][0]) if first.get("loc") else None
            raise self.error(first["msg"], name, key) from exc

    def resolve(self, relative: str) -> Path:
        candidate = Path(relative)
        return candidate if candidate.is_absolute() else self.path.parent / candidate


def _build_trap(cfg: ConfigFile, section: Optional[TrapSection]) -> TrapConfig:
    if section is None:
        return TrapConfig()
    return TrapConfig(
        depth=None if section.depth_mk is None else section.depth_mk * MILLIKELVIN,
        eta=section.eta,
        intensity_ratio=section.intensity_ratio,
        laser_wavelength=section.wavelength_nm * 1e-9,
    )


def _delta0(cfg: ConfigFile, trap: TrapConfig, override_hz: Optional[float]) -> float:
    if override_hz is not None:
        return hz_to_rad(override_hz)
    try:
        return trap.delta0()
    except ConfigurationError as exc:
        raise cfg.error("delta0 needs depth_mk, intensity_ratio or delta0_hz", "trap") from exc


def _detuning(cfg: ConfigFile, seq: SequenceSection, trap: TrapConfig, trap_section: Optional[TrapSection]) -> float:
    """delta' from an explicit value or from delta_synth - delta_B - delta0."""
    if seq.detuning_hz is not None:
        for key in ("delta_synth_hz", "delta_b_hz", "b_field_ut"):
            if getattr(seq, key) is not None:
                raise cfg.error("detuning_hz excludes delta_synth_hz, delta_b_hz and b_field_ut", "sequence", key)
        return hz_to_rad(seq.detuning_hz)
    if seq.delta_synth_hz is None:
        raise cfg.error("ramsey and echo sequences need detuning_hz or delta_synth_hz", "sequence", "delta_synth_hz")
    if (seq.delta_b_hz is None) == (seq.b_field_ut is None):
        raise cfg.error("give exactly one of delta_b_hz and b_field_ut", "sequence", "delta_b_hz")
    if seq.delta_b_hz is not None:
        delta_b = hz_to_rad(seq.delta_b_hz)
    else:
        delta_b = quadratic_zeeman_shift(seq.b_field_ut * MICROTESLA)
    override = None if trap_section is None else trap_section.delta0_hz
    return hz_to_rad(seq.delta_synth_hz) - delta_b - _delta0(cfg, trap, override)


def _build_sequence(cfg: ConfigFile, trap: TrapConfig, trap_section: Optional[TrapSection]) -> Dict[str, object]:
    seq = cfg.section("sequence", SequenceSection)
    ens = cfg.section("ensemble", EnsembleSection) or EnsembleSection()
    noise = cfg.section("noise", NoiseSection) or NoiseSection()
    if seq is None:
        return {}
    if seq.t_stop_ms is None:
        raise cfg.error("time grid needs t_stop_ms", "sequence", "t_stop_ms")
    if seq.points > 1 and not seq.t_stop_ms > seq.t_start_ms:
        raise cfg.error("t_stop_ms must exceed t_start_ms", "sequence", "t_stop_ms")
    times = time_grid(seq.t_start_ms * MILLISECOND, seq.t_stop_ms * MILLISECOND, seq.points)

    built: Dict[str, object] = {"kind": seq.kind, "times": times, "workers": ens.workers}
    if seq.kind is SequenceKind.RABI:
        if seq.rabi_frequency_hz is None:
            raise cfg.error("rabi sequences need rabi_frequency_hz", "sequence", "rabi_frequency_hz")
        built["params"] = RabiParams(rabi_frequency=hz_to_rad(seq.rabi_frequency_hz), contrast=seq.contrast)
        return built

    if seq.t2star_ms is not None and ens.temperature_mk is not None:
        raise cfg.error("give either [sequence] t2star_ms or [ensemble] temperature_mk, not both", "sequence", "t2star_ms")
    if seq.t2star_ms is None and ens.temperature_mk is None:
        raise cfg.error("ramsey and echo sequences need t2star_ms or [ensemble] temperature_mk", "sequence", "t2star_ms")
    if seq.t2star_ms is not None:
        t2star = seq.t2star_ms * MILLISECOND
        temperature = temperature_from_t2star(t2star, trap.eta)
    else:
        temperature = ens.temperature_mk * MILLIKELVIN
        t2star = t2star_from_temperature(temperature, trap.eta)

    fringe = dict(
        amplitude=seq.amplitude,
        offset=seq.offset,
        detuning=_detuning(cfg, seq, trap, trap_section),
        t2star=t2star,
        phase=seq.phase,
    )
    if seq.kind is SequenceKind.ECHO:
        if seq.tau_pi_ms is None:
            raise cfg.error("echo sequences need tau_pi_ms", "sequence", "tau_pi_ms")
        tau_pi = seq.tau_pi_ms * MILLISECOND
        if times[0] < tau_pi:
            raise cfg.error("echo time grid must start at or after tau_pi_ms", "sequence", "t_start_ms")
        built["params"] = EchoParams(tau_pi=tau_pi, echo_phase=seq.echo_phase, **fringe)
        built["noise"] = HomogeneousNoise(sigma=hz_to_rad(noise.sigma_hz))
    else:
        built["params"] = RamseyParams(**fringe)

    built["ensemble"] = EnsembleSpec(
        temperature=temperature,
        atom_count=ens.atoms,
        truncation_energy=None if ens.truncation_mk is None else ens.truncation_mk * MILLIKELVIN,
        rng_seed=ens.seed,
    )
    return built


def _allan_source(cfg: ConfigFile, name: str) -> Optional[AllanSource]:
    section = cfg.section(name, AllanSection)
    if section is None:
        return None
    if (section.sigma_allan is None) == (section.series is None):
        raise cfg.error("give exactly one of sigma_allan and series", name, "sigma_allan")
    if section.series is None:
        return AllanSource(sigma_allan=section.sigma_allan)
    path = cfg.resolve(section.series)
    if not path.is_file():
        raise cfg.error(f"series file not found: {path}", name, "series")
    return AllanSource(series=TimeSeries.from_csv(str(path)))


def _references(cfg: ConfigFile) -> Dict[MechanismId, float]:
    if not cfg.has("references"):
        return {}
    references = {}
    for key, raw in cfg.parser["references"].items():
        name = key[:-3] if key.endswith("_hz") else None
        try:
            mechanism = MechanismId(name)
        except ValueError:
            raise cfg.error("expected <mechanism>_hz", "references", key) from None
        try:
            references[mechanism] = float(raw)
        except ValueError:
            raise cfg.error(f"not a number: {raw!r}", "references", key) from None
    return references


def _build_budget(cfg: ConfigFile, trap_section: Optional[TrapSection]) -> Optional[BudgetInputs]:
    if not any(cfg.has(name) for name in BUDGET_SECTIONS):
        return None
    budget = cfg.section("budget", BudgetSection) or BudgetSection()
    heating = cfg.section("heating", HeatingSection)
    photon = cfg.section("photon", PhotonSection)
    magnetic = cfg.section("magnetic", MagneticSection)
    delta0_hz = budget.delta0_hz
    if delta0_hz is None and trap_section is not None:
        delta0_hz = trap_section.delta0_hz
    try:
        return BudgetInputs(
            t2_prime=None if budget.t2_prime_ms is None else budget.t2_prime_ms * MILLISECOND,
            delta0=None if delta0_hz is None else hz_to_rad(delta0_hz),
            sigma_exp=None if budget.sigma_exp_hz is None else hz_to_rad(budget.sigma_exp_hz),
            intensity=_allan_source(cfg, "intensity"),
            pointing_best=_allan_source(cfg, "pointing_best"),
            pointing_worst=_allan_source(cfg, "pointing_worst"),
            heating=None if heating is None else HeatingModel(
                heating_rate=heating.rate_mk_per_s * MILLIKELVIN,
                temperature=heating.temperature_mk * MILLIKELVIN,
                dimension=heating.dimension,
            ),
            photon=None if photon is None else PhotonScattering(
                temperature=photon.temperature_mk * MILLIKELVIN,
                scattering_rate=photon.scattering_rate,
                wavelength=photon.wavelength_nm * 1e-9,
            ),
            magnetic=None if magnetic is None else MagneticField(
                b0=magnetic.b0_ut * MICROTESLA,
                delta_b=magnetic.delta_b_ut * MICROTESLA,
            ),
            references_hz=_references(cfg),
        )
    except ValidationError as exc:
        raise cfg.error(exc.errors()[0]["msg"], "budget") from exc


def load_config(path: str) -> ScenarioConfig:
    """
    Read a scenario file.

    Args:
        path: INI-style scenario file

    Returns:
        ScenarioConfig with a sequence, a budget or both
    """
    cfg = ConfigFile(path)
    meta = cfg.section("scenario", ScenarioSection) or ScenarioSection()
    trap_section = cfg.section("trap", TrapSection)
    trap = _build_trap(cfg, trap_section)
    sequence = _build_sequence(cfg, trap, trap_section)
    budget = _build_budget(cfg, trap_section)
    if not sequence and budget is None:
        raise ConfigurationError(f"{path} has neither a [sequence] nor any budget section")
    logger.debug("loaded %s: sequence=%s budget=%s", path, sequence.get("kind"), budget is not None)
    return ScenarioConfig(
        name=meta.name or cfg.path.stem,
        description=meta.description,
        trap=trap,
        kind=sequence.get("kind"),
        params=sequence.get("params"),
        ensemble=sequence.get("ensemble"),
        noise=sequence.get("noise", HomogeneousNoise()),
        times=sequence.get("times"),
        budget=budget,
        expected_outcome=meta.expected_outcome,
        workers=sequence.get("workers", 1),
    )


def resolve_seed(cli_seed: Optional[int], file_seed: Optional[int]) -> int:
    """--seed, then DEPHASIM_SEED (environment or .env), then the file, then 0."""
    if cli_seed is not None:
        if cli_seed < 0:
            raise ConfigurationError("seed must be >= 0", field="--seed")
        return cli_seed
    load_dotenv(find_dotenv(usecwd=True))
    raw = os.environ.get(SEED_VARIABLE, "").strip()
    if raw:
        try:
            seed = int(raw)
        except ValueError:
            raise ConfigurationError(f"not an integer: {raw!r}", field=SEED_VARIABLE) from None
        if seed < 0:
            raise ConfigurationError("seed must be >= 0", field=SEED_VARIABLE)
        return seed
    return file_seed or 0
