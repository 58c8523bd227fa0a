import logging
import math
from types import SimpleNamespace

import numpy as np
import pytest

from analysis.fitting import (
    Dataset,
    EchoModel,
    RabiModel,
    RamseyModel,
    VisibilityModel,
    _seed_frequencies,
    fit_echo,
    fit_model,
    fit_rabi,
    fit_ramsey,
    fit_visibility,
    list_models,
    t2prime_from_sigma,
    wrap_phase,
)
from core.constants import hz_to_rad
from core.errors import ConvergenceError, InputDataError

RABI_TIMES = np.linspace(0.0, 150e-6, 45)
RABI_TRUE = np.array([0.604, hz_to_rad(14.60e3)])
ECHO_TIMES = np.linspace(5e-3, 15e-3, 101)


def _ramsey_truth(row):
    return np.array([
        row["amplitude"], row["offset"], hz_to_rad(row["detuning_hz"]), row["t2star_ms"] * 1e-3, row["phase"],
    ])


def _assert_params(result, names, truth, rel=1e-6):
    for name, value in zip(names, truth):
        assert result[name] == pytest.approx(value, rel=rel, abs=1e-9)


def test_rabi_round_trip():
    data = Dataset(RABI_TIMES, RabiModel().value(RABI_TIMES, RABI_TRUE))
    result = fit_rabi(data)
    assert result.converged and not result.degenerate
    _assert_params(result, RabiModel.names(), RABI_TRUE)
    assert result.rss < 1e-16


def test_noisy_rabi_within_errors(rng):
    y = RabiModel().value(RABI_TIMES, RABI_TRUE) + 0.02 * rng.standard_normal(RABI_TIMES.size)
    result = fit_rabi(Dataset(RABI_TIMES, y))
    for name, value in zip(RabiModel.names(), RABI_TRUE):
        assert abs(result[name] - value) < 4.0 * result.error(name)


def test_rabi_errors_match_replicate_scatter(rng):
    clean = RabiModel().value(RABI_TIMES, RABI_TRUE)
    fits = [fit_rabi(Dataset(RABI_TIMES, clean + 0.02 * rng.standard_normal(clean.size))) for _ in range(200)]
    for name in RabiModel.names():
        scatter = np.std([f[name] for f in fits], ddof=1)
        reported = np.mean([f.error(name) for f in fits])
        assert reported == pytest.approx(scatter, rel=0.4)


@pytest.mark.parametrize("row_id", ["a", "b"])
def test_ramsey_round_trip(ramsey_table, row_id):
    row = ramsey_table[row_id]
    truth = _ramsey_truth(row)
    stop = 12e-3 if row_id == "a" else 60e-3
    t = np.linspace(0.0, stop, 200 if row_id == "a" else 300)
    result = fit_ramsey(Dataset(t, RamseyModel().value(t, truth)))
    _assert_params(result, RamseyModel.names(), truth)


def test_ramsey_visibility(ramsey_table):
    truth = _ramsey_truth(ramsey_table["b"])
    t = np.linspace(0.0, 60e-3, 300)
    visibility, error = fit_ramsey(Dataset(t, RamseyModel().value(t, truth))).visibility()
    assert visibility == pytest.approx(0.99, abs=0.01)
    assert error < 1e-6


def test_ramsey_with_rough_initial_detuning(ramsey_table):
    truth = _ramsey_truth(ramsey_table["a"])
    t = np.linspace(0.0, 12e-3, 200)
    result = fit_ramsey(Dataset(t, RamseyModel().value(t, truth)), init={"detuning": 0.8 * truth[2]})
    assert result["detuning"] == pytest.approx(truth[2], rel=1e-6)


def test_ramsey_negative_detuning(ramsey_table):
    truth = _ramsey_truth(ramsey_table["a"])
    truth[2] = -truth[2]
    t = np.linspace(0.0, 12e-3, 200)
    result = fit_ramsey(Dataset(t, RamseyModel().value(t, truth)))
    _assert_params(result, RamseyModel.names(), truth)


@pytest.mark.parametrize("psi", [0.0, 0.4])
def test_echo_round_trip(psi):
    model = EchoModel(5e-3)
    truth = np.array([0.25, 0.30, hz_to_rad(1000.0), 2.9e-3, psi])
    result = fit_echo(Dataset(ECHO_TIMES, model.value(ECHO_TIMES, truth)), tau_pi=5e-3)
    _assert_params(result, EchoModel.names(), truth)
    assert result.fixed == {"tau_pi": 5e-3}
    assert result.to_dict()["tau_pi"] == 5e-3


def test_echo_data_before_pi_pulse_rejected():
    t = np.linspace(1e-3, 15e-3, 20)
    with pytest.raises(InputDataError):
        fit_echo(Dataset(t, np.linspace(0.1, 0.5, 20)), tau_pi=5e-3)
    with pytest.raises(ValueError):
        EchoModel(-1.0)


def test_visibility_fit_gives_t2_prime(budget_table, dephasing_times):
    sigma = hz_to_rad(budget_table[1.0]["sigma_exp"])
    tau_pi = np.linspace(0.0, 15e-3, 12)
    points = list(zip(tau_pi, VisibilityModel().value(tau_pi, np.array([0.9, sigma]))))
    result = fit_visibility(points)
    assert result["sigma"] == pytest.approx(sigma, rel=1e-6)
    assert result["c0"] == pytest.approx(0.9, rel=1e-6)
    t2_prime, _ = result.t2_prime()
    assert t2_prime * 1e3 == pytest.approx(dephasing_times[1.0]["t2_prime_ms"], rel=0.03)
    assert "t2_prime" in result.to_dict()


def test_constant_visibility_is_degenerate():
    result = fit_visibility([(0.0, 0.8), (1e-3, 0.8), (2e-3, 0.8), (3e-3, 0.8)])
    assert result.degenerate
    assert result["sigma"] == 0.0
    assert math.isinf(result.error("sigma"))
    assert result.t2_prime() == (math.inf, math.inf)


def test_constant_ramsey_data_is_degenerate(caplog):
    t = np.linspace(0.0, 1e-2, 20)
    with caplog.at_level(logging.WARNING, logger="analysis.fitting"):
        result = fit_ramsey(Dataset(t, np.full(20, 0.4)))
    assert result.degenerate and result.converged
    assert result["amplitude"] == 0.0
    assert result["offset"] == 0.4
    assert "degenerate" in result.summary()
    assert caplog.records


def test_t2_prime_from_sigma():
    assert t2prime_from_sigma(hz_to_rad(1.54)) * 1e3 == pytest.approx(146.2, rel=0.01)
    assert t2prime_from_sigma(0.0) == math.inf
    with pytest.raises(ValueError):
        t2prime_from_sigma(-1.0)


def _random_rabi(rng):
    return np.array([rng.uniform(0.2, 1.0), hz_to_rad(rng.uniform(5e3, 30e3))])


def _random_fringe(rng):
    detuning = hz_to_rad(rng.uniform(200.0, 3000.0)) * rng.choice([-1.0, 1.0])
    return np.array([
        rng.uniform(0.1, 0.5), rng.uniform(0.2, 0.6), detuning, rng.uniform(1e-3, 20e-3), rng.uniform(-math.pi, math.pi),
    ])


def _random_visibility(rng):
    return np.array([rng.uniform(0.5, 1.0), hz_to_rad(rng.uniform(1.0, 50.0))])


@pytest.mark.parametrize("model, draw, t", [
    (RabiModel(), _random_rabi, np.linspace(1e-6, 150e-6, 20)),
    (RamseyModel(), _random_fringe, np.linspace(1e-4, 12e-3, 20)),
    (EchoModel(5e-3), _random_fringe, np.linspace(5e-3, 15e-3, 20)),
    (VisibilityModel(), _random_visibility, np.linspace(0.0, 15e-3, 20)),
])
def test_jacobian_matches_finite_differences(model, draw, t):
    rng = np.random.default_rng(2024)
    for _ in range(20):
        params = draw(rng)
        analytic = model.jacobian(t, params)
        for j in range(params.size):
            h = 1e-6 * max(abs(params[j]), 1e-3)
            up, down = params.copy(), params.copy()
            up[j] += h
            down[j] -= h
            numeric = (model.value(t, up) - model.value(t, down)) / (2.0 * h)
            atol = 1e-6 * max(np.max(np.abs(numeric)), 1e-12)
            assert analytic[:, j] == pytest.approx(numeric, rel=1e-5, abs=atol)



def test_uniform_weights_do_not_change_fit(rng):
    y = RabiModel().value(RABI_TIMES, RABI_TRUE) + 0.02 * rng.standard_normal(RABI_TIMES.size)
    plain = fit_rabi(Dataset(RABI_TIMES, y))
    weighted = fit_rabi(Dataset(RABI_TIMES, y, np.full(RABI_TIMES.size, 4.0)), weighted=True)
    for name in RabiModel.names():
        assert weighted[name] == pytest.approx(plain[name], rel=1e-6)
        assert weighted.error(name) == pytest.approx(plain.error(name), rel=1e-4)


def test_unknown_initial_guess_ignored(caplog):
    data = Dataset(RABI_TIMES, RabiModel().value(RABI_TIMES, RABI_TRUE))
    with caplog.at_level(logging.WARNING, logger="analysis.fitting"):
        result = fit_rabi(data, init={"frequency": 1.0})
    assert result["rabi_frequency"] == pytest.approx(RABI_TRUE[1], rel=1e-6)
    assert any("frequency" in r.getMessage() for r in caplog.records)


def test_non_positive_initial_guess_rejected():
    data = Dataset(RABI_TIMES, RabiModel().value(RABI_TIMES, RABI_TRUE))
    with pytest.raises(InputDataError):
        fit_rabi(data, init={"rabi_frequency": -1.0})


def test_stalled_solver_raises_convergence_error(monkeypatch):
    def stalled(fun, x0, **kwargs):
        return SimpleNamespace(x=np.asarray(x0), status=0, message="maximum evaluations", nfev=7)

    monkeypatch.setattr("analysis.fitting.least_squares", stalled)
    data = Dataset(RABI_TIMES, RabiModel().value(RABI_TIMES, RABI_TRUE))
    with pytest.raises(ConvergenceError) as info:
        fit_rabi(data)
    assert info.value.iterations == 7
    assert set(info.value.last_state) == {"contrast", "rabi_frequency"}
    assert "iterations: 7" in info.value.diagnostics()


def test_too_few_points_rejected():
    t = np.linspace(0.0, 1e-3, 5)
    with pytest.raises(InputDataError):
        fit_ramsey(Dataset(t, np.linspace(0.1, 0.5, 5)))


def test_dataset_validation():
    with pytest.raises(InputDataError):
        Dataset([0.0, 1.0], [0.1])
    with pytest.raises(InputDataError, match="row 3"):
        Dataset([0.0, 1.0, 1.0], [0.1, 0.2, 0.3])
    with pytest.raises(InputDataError, match="row 2"):
        Dataset([0.0, math.nan, 2.0], [0.1, 0.2, 0.3])
    with pytest.raises(InputDataError, match="row 1"):
        Dataset([0.0, 1.0], [0.1, 0.2], [0.0, 1.0])


def test_dataset_warns_outside_unit_interval(caplog):
    with caplog.at_level(logging.WARNING, logger="analysis.fitting"):
        Dataset([0.0, 1.0], [0.5, 1.2])
    assert any("outside" in r.getMessage() for r in caplog.records)


def test_dataset_from_points_and_csv(tmp_path):
    data = Dataset.from_points([(0.0, 0.1, 2.0), (1.0, 0.2, 3.0)])
    assert data.weight.tolist() == [2.0, 3.0]
    assert Dataset.from_points([(0.0, 0.1), (1.0, 0.2)]).weight is None

    path = tmp_path / "signal.csv"
    path.write_text("t_s,p3_analytic,p3_montecarlo,mc_stderr\n0,0.1,0.11,0.01\n0.001,0.2,0.19,0.01\n")
    parsed = Dataset.from_csv(str(path))
    assert parsed.p3.tolist() == [0.1, 0.2]
    assert parsed.weight is None

    weighted = tmp_path / "weighted.csv"
    weighted.write_text("t_s,p3,weight\n0,0.1,1\n0.001,0.2,2\n")
    assert Dataset.from_csv(str(weighted)).weight.tolist() == [1.0, 2.0]

    bad = tmp_path / "bad.csv"
    bad.write_text("t_s,p3\n0,0.1\n0.001,x\n0.002,0.3\n")
    with pytest.raises(InputDataError, match="row 2"):
        Dataset.from_csv(str(bad))


def test_wrap_phase():
    assert wrap_phase(3 * math.pi) == pytest.approx(math.pi)
    assert wrap_phase(-math.pi) == pytest.approx(math.pi)
    assert wrap_phase(0.5 + 4 * math.pi) == pytest.approx(0.5)


def test_summary_and_dict(ramsey_table):
    truth = _ramsey_truth(ramsey_table["a"])
    t = np.linspace(0.0, 12e-3, 200)
    result = fit_model(RamseyModel(), Dataset(t, RamseyModel().value(t, truth)))
    text = result.summary()
    assert "Hz (/2pi)" in text and "ms" in text
    row = result.to_dict()
    assert row["model"] == "ramsey"
    assert row["visibility"] == pytest.approx(0.287 / 0.305, rel=1e-6)
    assert list_models() == ["rabi", "ramsey", "echo", "visibility"]


def test_t2_prime_and_sigma_round_trip():
    for sigma_hz in (1.54, 6.6, 22.0):
        sigma = hz_to_rad(sigma_hz)
        t2_prime = t2prime_from_sigma(sigma)
        assert math.sqrt(2.0) / t2_prime == pytest.approx(sigma, rel=1e-12)
        visibility = VisibilityModel().value(np.array([t2_prime]), np.array([1.0, sigma]))[0]
        assert visibility == pytest.approx(math.exp(-1.0))


def test_long_ramsey_record(ramsey_table):
    truth = _ramsey_truth(ramsey_table["a"])
    t = np.linspace(0.0, 12e-3, 2400)
    result = fit_ramsey(Dataset(t, RamseyModel().value(t, truth)))
    _assert_params(result, RamseyModel.names(), truth, rel=1e-4)


def test_seed_grid_size_does_not_grow_with_record(ramsey_table):
    truth = _ramsey_truth(ramsey_table["a"])
    for points in (200, 4000, 20000):
        t = np.linspace(0.0, 12e-3, points)
        # three peaks, 49 trial frequencies each, both signs
        assert len(_seed_frequencies(t, RamseyModel().value(t, truth), signed=True)) <= 294


def test_ramsey_on_irregular_times(ramsey_table, rng):
    truth = _ramsey_truth(ramsey_table["a"])
    t = np.sort(rng.uniform(0.0, 12e-3, 300))
    result = fit_ramsey(Dataset(t, RamseyModel().value(t, truth)))
    _assert_params(result, RamseyModel.names(), truth, rel=1e-4)


def test_spectral_seed_finds_the_fringe(ramsey_table):
    truth = _ramsey_truth(ramsey_table["a"])
    t = np.linspace(0.0, 12e-3, 2000)
    seeds = _seed_frequencies(t, RamseyModel().value(t, truth), signed=True)
    assert np.min(np.abs(seeds - truth[2])) < hz_to_rad(10.0)
    assert np.min(np.abs(seeds + truth[2])) < hz_to_rad(10.0)


@pytest.mark.parametrize("model, t, truth, noise", [
    (RamseyModel(), np.linspace(0.0, 12e-3, 200), np.array([0.287, 0.305, hz_to_rad(2133.7), 4.4e-3, 0.35]), 0.02),
    (EchoModel(5e-3), ECHO_TIMES, np.array([0.25, 0.30, hz_to_rad(1000.0), 2.9e-3, 0.4]), 0.02),
    (VisibilityModel(), np.linspace(0.0, 15e-3, 12), np.array([0.9, hz_to_rad(22.0)]), 0.01),
])
def test_errors_match_replicate_scatter(model, t, truth, noise):
    rng = np.random.default_rng(77)
    clean = model.value(t, truth)
    fits = [fit_model(model, Dataset(t, clean + noise * rng.standard_normal(t.size))) for _ in range(100)]
    for name in model.names():
        scatter = np.std([f[name] for f in fits], ddof=1)
        reported = np.mean([f.error(name) for f in fits])
        assert reported == pytest.approx(scatter, rel=0.4)
