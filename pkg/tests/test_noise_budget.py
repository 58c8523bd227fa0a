import math

import numpy as np
import pandas as pd
import pytest

from analysis.fitting import t2prime_from_sigma
from analysis.noise_budget import (
    AllanSource,
    BudgetInputs,
    HeatingModel,
    MagneticField,
    MechanismId,
    NoiseBudget,
    PhotonScattering,
    PointingCase,
    Provenance,
    TimeSeries,
    allan_at,
    allan_curve,
    allan_deviation,
    budget_report,
    default_taus,
    heating_sigma,
    heating_sigma_at,
    heating_sigma_mixture,
    kramers_heisenberg_rates,
    line_detunings,
    magnetic_shift,
    magnetic_sigma,
    mechanism_sigma,
    microwave_jitter,
    multi_photon_sigma,
    photon_heating_rate,
    photon_recoil_sigma,
    quadratic_zeeman_shift,
    quadrature_total,
    raman_suppression_beta,
    row_tau,
    scattering_rate_for_depth,
    sigma_from_allan,
    single_photon_sigma,
    suppression_factor,
    t1_from_scattering,
    timing_phase_error,
    total_mechanisms,
    window_length,
)
from analysis.report import budget_frame, render_budget, visibility_frame, write_budget
from core.constants import CESIUM, MICROTESLA, hz_to_rad, rad_to_hz
from core.errors import ConfigurationError, InputDataError
from core.trap import TrapConfig

T2_PRIME_1MK = 10.2e-3


@pytest.fixture
def budget_1mk(budget_table):
    row = budget_table[1.0]
    inputs = BudgetInputs(
        t2_prime=T2_PRIME_1MK,
        sigma_exp=hz_to_rad(row["sigma_exp"]),
        intensity=AllanSource(sigma_allan=0.00138),
        pointing_best=AllanSource(sigma_allan=0.00248),
        pointing_worst=AllanSource(sigma_allan=0.00506),
        heating=HeatingModel(heating_rate=2e-5, temperature=1e-4),
        photon=PhotonScattering(temperature=1e-4, scattering_rate=10.6),
        magnetic=MagneticField(b0=97.9 * MICROTESLA, delta_b=0.13 * MICROTESLA),
        references_hz={MechanismId.INTENSITY: row["intensity"], MechanismId.HEATING: row["heating"]},
    )
    return NoiseBudget.from_inputs(TrapConfig(depth=1e-3), inputs)


def _sigma_hz(budget, mechanism):
    return next(e.sigma_hz for e in budget.entries if e.mechanism is mechanism)


def test_t2_prime_from_measured_sigma(budget_table, dephasing_times):
    for depth, row in budget_table.items():
        expected = dephasing_times[depth]["t2_prime_ms"] * 1e-3
        assert t2prime_from_sigma(hz_to_rad(row["sigma_exp"])) == pytest.approx(expected, rel=0.03)


def test_allan_rows_at_one_millikelvin(budget_1mk, budget_table):
    row = budget_table[1.0]
    assert _sigma_hz(budget_1mk, MechanismId.INTENSITY) == pytest.approx(row["intensity"], abs=0.1)
    assert _sigma_hz(budget_1mk, MechanismId.POINTING_BEST) == pytest.approx(row["pointing_best"], abs=0.1)
    assert _sigma_hz(budget_1mk, MechanismId.POINTING_WORST) == pytest.approx(row["pointing_worst"], abs=0.1)


def test_intensity_row_with_measured_delta0(budget_table):
    inputs = BudgetInputs(t2_prime=33.9e-3, delta0=hz_to_rad(-268.0), intensity=AllanSource(sigma_allan=0.00177))
    budget = NoiseBudget.from_inputs(TrapConfig(), inputs)
    assert budget.entries[0].sigma_hz == pytest.approx(budget_table[0.1]["intensity"], abs=0.01)


def test_sigma_from_allan_is_linear():
    assert rad_to_hz(sigma_from_allan(0.01, hz_to_rad(-100.0))) == pytest.approx(math.sqrt(2.0))
    assert sigma_from_allan(0.0, -1e3) == 0.0


def test_heating_closed_form_matches_mixture():
    model = HeatingModel(heating_rate=2e-5, temperature=1e-4)
    closed = heating_sigma(model, T2_PRIME_1MK, CESIUM.eta)
    assert heating_sigma_mixture(model, T2_PRIME_1MK, CESIUM.eta) == pytest.approx(closed, rel=1e-6)
    assert heating_sigma_at(model, T2_PRIME_1MK / 2.0, CESIUM.eta) == pytest.approx(closed)


def test_heating_upper_limit_at_one_millikelvin(budget_1mk):
    # three-dimensional upper limit; the quoted row uses a smaller effective dimension
    assert _sigma_hz(budget_1mk, MechanismId.HEATING) == pytest.approx(16.7, rel=0.02)


def test_heating_scales_with_dimension():
    one = HeatingModel(heating_rate=1e-5, temperature=1e-4, dimension=1)
    three = HeatingModel(heating_rate=1e-5, temperature=1e-4, dimension=3)
    ratio = heating_sigma(three, 1e-2, CESIUM.eta) / heating_sigma(one, 1e-2, CESIUM.eta)
    assert ratio == pytest.approx(math.sqrt(3.0))
    with pytest.raises(ValueError):
        heating_sigma(one, 0.0, CESIUM.eta)


def test_photon_recoil_row(budget_1mk, budget_table):
    assert _sigma_hz(budget_1mk, MechanismId.PHOTON) == pytest.approx(budget_table[1.0]["photon"], rel=0.3)


def test_one_photon_heating_equals_single_photon_sigma():
    tau_pi, temperature = 5e-3, 1e-4
    rate = photon_heating_rate(CESIUM.trap_wavelength, CESIUM.mass, tau_pi)
    model = HeatingModel(heating_rate=rate, temperature=temperature)
    expected = single_photon_sigma(temperature, CESIUM.trap_wavelength, CESIUM.mass, CESIUM.eta)
    assert heating_sigma_at(model, tau_pi, CESIUM.eta) == pytest.approx(expected, rel=1e-12)


def test_photon_sigma_helpers():
    single = single_photon_sigma(1e-4, CESIUM.trap_wavelength, CESIUM.mass, CESIUM.eta)
    assert multi_photon_sigma(4.0, 1e-4, CESIUM.trap_wavelength, CESIUM.mass, CESIUM.eta) == pytest.approx(2 * single)
    assert photon_recoil_sigma(1e-4, 0.0, 5e-3) == 0.0
    assert scattering_rate_for_depth(1e-3) == pytest.approx(11.0)
    assert scattering_rate_for_depth(1e-4) == pytest.approx(1.1)
    with pytest.raises(ValueError):
        multi_photon_sigma(-1.0, 1e-4, CESIUM.trap_wavelength, CESIUM.mass, CESIUM.eta)
    with pytest.raises(ValueError):
        photon_recoil_sigma(0.0, 10.0, 5e-3)


def test_photon_rate_defaults_to_depth_scaling():
    inputs = BudgetInputs(t2_prime=T2_PRIME_1MK, photon=PhotonScattering(temperature=1e-4))
    budget = NoiseBudget.from_inputs(TrapConfig(depth=1e-3), inputs)
    expected = photon_recoil_sigma(1e-4, 11.0, T2_PRIME_1MK / 2.0)
    assert budget.entries[0].sigma == pytest.approx(expected)


def test_raman_suppression_and_t1(dephasing_times):
    beta = raman_suppression_beta(CESIUM.trap_wavelength)
    assert beta == pytest.approx(0.011, rel=0.05)
    t1 = t1_from_scattering(11.0, beta)
    assert t1 == pytest.approx(dephasing_times[1.0]["t1_s"], rel=0.1)
    assert t1_from_scattering(11.0, 0.0) == math.inf
    with pytest.raises(ValueError):
        t1_from_scattering(0.0, beta)


def test_amplitude_sum_agrees_with_suppression_far_off_resonance():
    delta_fs = -1.0
    delta_half = 100.0 * delta_fs
    rayleigh, raman = kramers_heisenberg_rates(delta_half, delta_half + delta_fs)
    assert raman / rayleigh == pytest.approx(suppression_factor(delta_half, delta_fs), rel=0.01)


def test_resonant_trap_rejected():
    with pytest.raises(ValueError):
        line_detunings(CESIUM.d1_wavelength)
    delta_half, delta_three_half = line_detunings(CESIUM.trap_wavelength)
    assert delta_half < 0 and delta_three_half < delta_half


def test_quadratic_zeeman_numbers():
    assert rad_to_hz(quadratic_zeeman_shift(97.9 * MICROTESLA)) == pytest.approx(412.1, abs=0.1)
    assert rad_to_hz(magnetic_shift(97.9 * MICROTESLA, 0.13 * MICROTESLA)) == pytest.approx(1.0946, rel=1e-3)


def test_magnetic_row(budget_1mk):
    assert 0.8 < _sigma_hz(budget_1mk, MechanismId.MAGNETIC) < 1.2


def test_line_ripple_averages_out_over_full_period():
    assert magnetic_sigma(20e-3, hz_to_rad(1.0)) < 1e-6
    with pytest.raises(ValueError):
        magnetic_sigma(0.0, 1.0)


def test_allan_of_constant_series_is_zero():
    series = TimeSeries(1e-3, np.full(64, 2.5))
    for tau, sigma in allan_curve(series):
        assert sigma == pytest.approx(0.0, abs=1e-12)


def test_allan_white_noise_slope(rng):
    series = TimeSeries(1e-4, 1.0 + 0.01 * rng.standard_normal(2 ** 18))
    taus = [m * 1e-4 for m in 2 ** np.arange(11)]
    curve = allan_curve(series, taus)
    slope = np.polyfit(np.log([t for t, _ in curve]), np.log([s for _, s in curve]), 1)[0]
    assert slope == pytest.approx(-0.5, abs=0.05)
    assert curve[0][1] == pytest.approx(0.01, rel=0.05)


def test_allan_raw_deviation_ignores_constant_offset(rng):
    values = 1.0 + 0.01 * rng.standard_normal(4096)
    base, shifted = TimeSeries(1e-4, values), TimeSeries(1e-4, values + 7.5)
    for tau in (1e-4, 8e-4, 6.4e-3):
        raw = allan_deviation(base, tau, normalize=False)
        assert allan_deviation(shifted, tau, normalize=False) == pytest.approx(raw, rel=1e-9)
        assert allan_deviation(shifted, tau) * np.mean(values + 7.5) == pytest.approx(raw, rel=1e-9)



def test_allan_input_checks():
    series = TimeSeries(1e-3, np.arange(1.0, 11.0))
    with pytest.raises(ValueError):
        window_length(series, 1.5e-3)
    with pytest.raises(InputDataError):
        allan_deviation(series, 6e-3)
    assert default_taus(series) == pytest.approx([1e-3, 2e-3, 4e-3])
    assert allan_at(series, 2.2e-3) == allan_deviation(series, 2e-3)
    with pytest.raises(InputDataError):
        TimeSeries(1e-3, np.zeros(4)).normalized()
    with pytest.raises(InputDataError):
        TimeSeries(0.0, np.ones(4))


def test_series_csv_reading(tmp_path):
    good = tmp_path / "good.csv"
    good.write_text("time_s,value\n0.000,1.0\n0.001,1.1\n0.002,0.9\n")
    series = TimeSeries.from_csv(str(good))
    assert series.sample_interval == pytest.approx(1e-3)
    assert len(series) == 3

    gap = tmp_path / "gap.csv"
    gap.write_text("time_s,value\n0.000,1.0\n0.001,1.1\n0.002,0.9\n0.004,1.0\n0.005,1.0\n")
    with pytest.raises(InputDataError, match="row 4"):
        TimeSeries.from_csv(str(gap))

    bad = tmp_path / "bad.csv"
    bad.write_text("time_s,value\n0.000,1.0\n0.001,oops\n")
    with pytest.raises(InputDataError, match="row 2"):
        TimeSeries.from_csv(str(bad))


def test_measured_series_provenance():
    series = TimeSeries(1e-4, 1.0 + 0.001 * np.sin(np.arange(4096)))
    inputs = BudgetInputs(t2_prime=10.24e-3, delta0=hz_to_rad(-3000.0), intensity=AllanSource(series=series))
    entry = budget_report(TrapConfig(), inputs)[0]
    assert entry.provenance is Provenance.MEASURED_SERIES
    assert entry.sigma == pytest.approx(sigma_from_allan(allan_at(series, 10.24e-3), hz_to_rad(-3000.0)))


def test_allan_source_needs_a_value():
    inputs = BudgetInputs(t2_prime=1e-2, delta0=-1e3, intensity=AllanSource())
    with pytest.raises(ConfigurationError):
        budget_report(TrapConfig(), inputs)


def test_empty_budget_rejected():
    with pytest.raises(ConfigurationError):
        NoiseBudget.from_inputs(TrapConfig(depth=1e-3), BudgetInputs(t2_prime=1e-2))
    with pytest.raises(ConfigurationError):
        BudgetInputs().evaluation_time()


def test_pointing_rows_are_alternative_bounds(budget_1mk):
    sigma = {e.mechanism: e.sigma for e in budget_1mk.entries}
    shared = [MechanismId.INTENSITY, MechanismId.HEATING, MechanismId.PHOTON, MechanismId.MAGNETIC]
    common = sum(sigma[m] ** 2 for m in shared)
    best, worst = budget_1mk.totals
    assert best == pytest.approx(math.sqrt(common + sigma[MechanismId.POINTING_BEST] ** 2))
    assert worst == pytest.approx(math.sqrt(common + sigma[MechanismId.POINTING_WORST] ** 2))
    assert rad_to_hz(worst) == pytest.approx(28.29, rel=0.01)
    assert best < worst
    assert quadrature_total(budget_1mk.entries) == worst
    assert quadrature_total(budget_1mk.entries, PointingCase.BEST) == best


def test_total_mechanisms_per_case():
    present = [MechanismId.MEASURED, MechanismId.INTENSITY, MechanismId.POINTING_BEST, MechanismId.POINTING_WORST]
    assert total_mechanisms(present, PointingCase.BEST) == [MechanismId.INTENSITY, MechanismId.POINTING_BEST]
    assert total_mechanisms(present, PointingCase.WORST) == [MechanismId.INTENSITY, MechanismId.POINTING_WORST]
    only_best = [MechanismId.INTENSITY, MechanismId.POINTING_BEST]
    assert total_mechanisms(only_best, PointingCase.WORST) == only_best


def test_single_pointing_row_gives_equal_totals():
    inputs = BudgetInputs(
        t2_prime=T2_PRIME_1MK,
        intensity=AllanSource(sigma_allan=0.00138),
        pointing_worst=AllanSource(sigma_allan=0.00506),
    )
    budget = NoiseBudget.from_inputs(TrapConfig(depth=1e-3), inputs)
    best, worst = budget.totals
    assert best == worst
    assert best == pytest.approx(math.hypot(budget.entries[0].sigma, budget.entries[1].sigma))


def test_rows_are_quoted_at_their_row_time(budget_1mk):
    assert row_tau(MechanismId.HEATING, T2_PRIME_1MK) == T2_PRIME_1MK / 2.0
    assert row_tau(MechanismId.MAGNETIC, T2_PRIME_1MK) == T2_PRIME_1MK
    for entry in budget_1mk.entries:
        expected, _ = mechanism_sigma(entry.mechanism, budget_1mk.trap, budget_1mk.inputs, row_tau(entry.mechanism, T2_PRIME_1MK))
        assert entry.sigma == pytest.approx(expected)


def test_visibility_curve_uses_sigma_at_tau_pi(budget_1mk):
    tau_pi = 4e-3
    trap, inputs = budget_1mk.trap, budget_1mk.inputs
    counted = [MechanismId.INTENSITY, MechanismId.POINTING_WORST, MechanismId.HEATING, MechanismId.PHOTON, MechanismId.MAGNETIC]
    sigmas = {m: mechanism_sigma(m, trap, inputs, tau_pi)[0] for m in counted}
    assert sigmas[MechanismId.HEATING] == pytest.approx(heating_sigma_at(inputs.heating, tau_pi, trap.eta))
    assert sigmas[MechanismId.PHOTON] == pytest.approx(photon_recoil_sigma(1e-4, 10.6, tau_pi))
    shift = magnetic_shift(97.9 * MICROTESLA, 0.13 * MICROTESLA)
    assert sigmas[MechanismId.MAGNETIC] == pytest.approx(magnetic_sigma(tau_pi, shift))
    total = math.sqrt(sum(s * s for s in sigmas.values()))
    assert budget_1mk.total_at(tau_pi) == pytest.approx(total)
    assert budget_1mk.total_at(0.0) == 0.0
    (_, visibility), = budget_1mk.visibility_curve([tau_pi], c0=0.8)
    assert visibility == pytest.approx(0.8 * math.exp(-0.5 * (tau_pi * total) ** 2))


def test_best_case_curve_lies_above_worst(budget_1mk):
    taus = np.linspace(1e-3, 12e-3, 12)
    best = budget_1mk.visibility_curve(taus, case=PointingCase.BEST)
    worst = budget_1mk.visibility_curve(taus, case=PointingCase.WORST)
    assert all(b > w for (_, b), (_, w) in zip(best, worst))



def test_measured_only_budget(budget_table):
    sigma = hz_to_rad(budget_table[1.0]["sigma_exp"])
    budget = NoiseBudget.from_inputs(TrapConfig(depth=1e-3), BudgetInputs(sigma_exp=sigma))
    assert [e.mechanism for e in budget.entries] == [MechanismId.MEASURED]
    assert budget.evaluation_time == pytest.approx(t2prime_from_sigma(sigma))
    assert budget.totals == (0.0, 0.0)
    (tau, visibility), = budget.visibility_curve([1.0 / sigma])
    assert visibility == pytest.approx(math.exp(-0.5))


def test_visibility_curve_starts_at_c0(budget_1mk):
    curve = budget_1mk.visibility_curve([0.0, 2e-3, 5e-3], c0=0.9)
    assert curve[0] == (0.0, 0.9)
    assert curve[1][1] > curve[2][1]


def test_phase_error_helpers():
    assert microwave_jitter(3e-3, 4e-3) == pytest.approx(5e-3)
    assert timing_phase_error(hz_to_rad(1000.0), 5e-3, 1e-6) == pytest.approx(2 * math.pi * 5e-6)
    with pytest.raises(ValueError):
        microwave_jitter(-1.0, 0.0)


def test_budget_frame_and_text(budget_1mk, budget_table):
    frame = budget_frame(budget_1mk)
    assert list(frame.columns) == ["mechanism", "label", "sigma_hz", "provenance", "reference_hz"]
    assert frame["mechanism"].tolist()[-2:] == ["total_best", "total_worst"]
    assert len(frame) == 9
    assert frame["sigma_hz"].iloc[-1] == pytest.approx(rad_to_hz(budget_1mk.totals[1]))
    assert frame.loc[frame["mechanism"] == "intensity", "reference_hz"].item() == budget_table[1.0]["intensity"]
    text = render_budget(budget_1mk, title="ONE MILLIKELVIN")
    assert "ONE MILLIKELVIN" in text
    assert "T2' from sigma_exp" in text
    assert "\x1b[" not in text


def test_write_budget_files(budget_1mk, tmp_path):
    paths = write_budget(budget_1mk, str(tmp_path / "budget"))
    assert [p.rsplit("/", 1)[-1] for p in paths] == ["budget.csv", "budget.txt", "budget_visibility.csv"]
    table = pd.read_csv(paths[0])
    assert table["sigma_hz"].iloc[1] == pytest.approx(budget_1mk.entries[1].sigma_hz, rel=1e-15)
    curve = pd.read_csv(paths[2])
    assert len(curve) == 50
    assert list(curve.columns) == ["tau_pi_s", "visibility_best", "visibility_worst"]
    assert curve["visibility_best"].iloc[0] == 1.0
    assert (curve["visibility_best"] >= curve["visibility_worst"]).all()
    assert len(visibility_frame(budget_1mk, [0.0, 1e-3])) == 2
