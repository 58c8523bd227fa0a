from pathlib import Path

import numpy as np
import pytest

from analysis.noise_budget import NoiseBudget
from cli.config import load_config
from core.constants import rad_to_hz
from core.errors import ConfigurationError
from sim.model import EnsembleSimulationModel, SequenceKind
from sim.scenarios import SCENARIOS, get_scenario, list_scenarios, time_grid

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def _assert_same_model(a, b):
    assert a.keys() == b.keys()
    for key, value in a.items():
        assert value == pytest.approx(b[key], rel=1e-12, abs=1e-15), key


@pytest.mark.parametrize("name", sorted(SCENARIOS))
def test_bundled_file_matches_registry(name):
    registry = get_scenario(name)
    loaded = load_config(str(FIXTURES / f"{name}.ini"))
    assert loaded.name == registry.name
    assert loaded.kind == registry.kind
    assert loaded.trap.depth == pytest.approx(registry.trap.depth)
    if registry.has_sequence:
        _assert_same_model(loaded.params.model_dump(), registry.params.model_dump())
        assert np.allclose(loaded.times, registry.times, rtol=1e-12, atol=0.0)
        assert loaded.noise.sigma == pytest.approx(registry.noise.sigma)
        if registry.ensemble is not None:
            _assert_same_model(loaded.ensemble.model_dump(exclude_none=True),
                               registry.ensemble.model_dump(exclude_none=True))
    if registry.has_budget:
        from_file = NoiseBudget.from_inputs(loaded.trap, loaded.budget)
        from_registry = NoiseBudget.from_inputs(registry.trap, registry.budget)
        assert [e.mechanism for e in from_file.entries] == [e.mechanism for e in from_registry.entries]
        assert [e.sigma for e in from_file.entries] == pytest.approx([e.sigma for e in from_registry.entries])
        assert loaded.budget.references_hz == registry.budget.references_hz


def test_shallow_trap_detuning():
    scenario = get_scenario("ramsey_0_1mk")
    assert rad_to_hz(scenario.params.detuning) == pytest.approx(2140.0, abs=1.0)
    assert isinstance(scenario.build_model(), EnsembleSimulationModel)


def test_budget_scenario_has_no_sequence():
    scenario = get_scenario("budget_1mk")
    assert scenario.has_budget and not scenario.has_sequence
    with pytest.raises(ConfigurationError):
        scenario.build_model()


def test_unknown_scenario():
    with pytest.raises(ConfigurationError, match="rabi_flopping"):
        get_scenario("no_such_scenario")


def test_with_seed_copies():
    scenario = get_scenario("echo_0_1mk")
    reseeded = scenario.with_seed(42)
    assert reseeded.ensemble.rng_seed == 42
    assert scenario.ensemble.rng_seed == 0
    assert reseeded.kind is SequenceKind.ECHO
    rabi = get_scenario("rabi_flopping")
    assert rabi.with_seed(42) is rabi


def test_listing_metadata():
    listing = list_scenarios()
    assert [m["id"] for m in listing] == list(SCENARIOS)
    ramsey = next(m for m in listing if m["id"] == "ramsey_0_1mk")
    assert ramsey["points"] == 200
    assert ramsey["depth_mk"] == pytest.approx(0.1)
    budget = next(m for m in listing if m["id"] == "budget_1mk")
    assert "magnetic" in budget["mechanisms"]


def test_time_grid_checks():
    assert time_grid(0.0, 1.0, 1).tolist() == [0.0]
    with pytest.raises(ConfigurationError):
        time_grid(0.0, 1.0, 0)
    with pytest.raises(ConfigurationError):
        time_grid(1.0, 1.0, 5)
    with pytest.raises(ConfigurationError):
        time_grid(-1.0, 1.0, 5)
