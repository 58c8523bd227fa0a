"""Shared fixtures: measured parameter sets used as generators and references."""
import numpy as np
import pytest

from core.constants import MILLISECOND, hz_to_rad

# Ramsey fit results for two trap depths.
RAMSEY_TABLE = {
    "a": dict(depth_mk=0.1, delta_synth_hz=2250.0, amplitude=0.287, offset=0.305,
              detuning_hz=2133.7, phase=0.35, t2star_ms=4.4),
    "b": dict(depth_mk=0.04, delta_synth_hz=1050.0, amplitude=0.136, offset=0.138,
              detuning_hz=722.5, phase=0.13, t2star_ms=20.4),
}

# Dephasing times per trap depth (mK): T2* (ms), T2' (ms), T1 (s).
DEPHASING_TIMES = {
    1.0: dict(t2star_ms=0.86, t2_prime_ms=10.2, t1_s=8.6),
    0.1: dict(t2star_ms=2.9, t2_prime_ms=33.9, t1_s=86.0),
    0.04: dict(t2star_ms=18.9, t2_prime_ms=146.2, t1_s=220.0),
}

# Measured and estimated sigma/2pi (Hz) per trap depth (mK).
BUDGET_TABLE = {
    1.0: dict(sigma_exp=22.0, intensity=5.9, pointing_best=10.6, pointing_worst=21.6,
              heating=5.3, photon=4.5, magnetic=1.7),
    0.1: dict(sigma_exp=6.6, intensity=0.67, pointing_best=2.4, pointing_worst=6.7,
              heating=1.6, photon=1.5, magnetic=0.35),
    0.04: dict(sigma_exp=1.54, intensity=0.17, pointing_best=1.3, pointing_worst=3.7,
               heating=2.0, photon=1.4, magnetic=0.17),
}


@pytest.fixture
def ramsey_table():
    return RAMSEY_TABLE


@pytest.fixture
def dephasing_times():
    return DEPHASING_TIMES


@pytest.fixture
def budget_table():
    return BUDGET_TABLE


@pytest.fixture
def ramsey_a_params():
    """RamseyParams keyword arguments of the shallow-trap fringe, internal units."""
    row = RAMSEY_TABLE["a"]
    return dict(
        amplitude=row["amplitude"],
        offset=row["offset"],
        detuning=hz_to_rad(row["detuning_hz"]),
        t2star=row["t2star_ms"] * MILLISECOND,
        phase=row["phase"],
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def no_seed_env(monkeypatch, tmp_path):
    """Run in an empty directory without DEPHASIM_SEED set."""
    monkeypatch.delenv("DEPHASIM_SEED", raising=False)
    monkeypatch.chdir(tmp_path)
    return tmp_path
