import logging

import pytest

from analysis.detection import (
    atom_number,
    clopper_pearson,
    detection_efficiency,
    format_efficiency,
    p3_from_counts,
)
from core.errors import InputDataError


def test_atom_numbers_from_count_rates():
    counts = p3_from_counts(c_init=2600.0, c_final=1350.0, c_backgr=100.0, c_1atom=50.0)
    assert counts.n_init == 50.0
    assert counts.n_final == 25.0
    assert counts.p3 == 0.5
    assert not counts.overcounted


def test_overcounting_is_flagged(caplog):
    with caplog.at_level(logging.WARNING, logger="analysis.detection"):
        counts = p3_from_counts(c_init=600.0, c_final=700.0, c_backgr=100.0, c_1atom=50.0)
    assert counts.overcounted
    assert counts.p3 == pytest.approx(1.2)
    assert caplog.records


def test_no_initial_atoms_rejected():
    with pytest.raises(InputDataError):
        p3_from_counts(c_init=100.0, c_final=50.0, c_backgr=100.0, c_1atom=50.0)
    with pytest.raises(ValueError):
        atom_number(100.0, 0.0, 0.0)


@pytest.mark.parametrize("k, n, plus, minus", [
    (153, 157, 0.012, 0.020),
    (2, 167, 0.016, 0.008),
])
def test_one_sigma_intervals(k, n, plus, minus):
    point, up, down = detection_efficiency(k, n)
    assert point == pytest.approx(k / n)
    assert up == pytest.approx(plus, abs=0.004)
    assert down == pytest.approx(minus, abs=0.004)


def test_interval_edges():
    assert clopper_pearson(0, 20)[0] == 0.0
    assert clopper_pearson(20, 20)[1] == 1.0
    lower, upper = clopper_pearson(5, 20)
    assert 0.0 < lower < 0.25 < upper < 1.0


def test_wider_confidence_gives_wider_interval():
    narrow = clopper_pearson(40, 100, 0.68)
    wide = clopper_pearson(40, 100, 0.95)
    assert wide[0] < narrow[0] and wide[1] > narrow[1]


def test_interval_input_checks():
    with pytest.raises(ValueError):
        clopper_pearson(5, 0)
    with pytest.raises(ValueError):
        clopper_pearson(6, 5)
    with pytest.raises(ValueError):
        clopper_pearson(1, 5, confidence=1.0)


def test_efficiency_text():
    assert format_efficiency(153, 157).startswith("97.5% (+")
