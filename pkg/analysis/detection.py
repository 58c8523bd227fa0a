"""Atom counting from fluorescence rates and binomial confidence limits."""
import logging
from dataclasses import dataclass
from typing import Tuple

from scipy import stats

from core.errors import InputDataError

logger = logging.getLogger(__name__)

# One-sigma confidence level used for detection efficiencies.
ONE_SIGMA = 0.68


@dataclass
class AtomCounts:
    """Atom numbers before and after a sequence and the ratio P3."""
    n_init: float
    n_final: float
    p3: float
    overcounted: bool = False


def atom_number(rate: float, background: float, single_atom_rate: float) -> float:
    """N = (C - C_backgr) / C_1atom."""
    if single_atom_rate <= 0:
        raise ValueError(f"single_atom_rate must be positive, got {single_atom_rate}")
    return (rate - background) / single_atom_rate


def p3_from_counts(c_init: float, c_final: float, c_backgr: float, c_1atom: float) -> AtomCounts:
    """
    Fraction of atoms left in F=3 from photon count rates.

    Args:
        c_init: Count rate before the state-selective push-out (counts/s)
        c_final: Count rate afterwards (counts/s)
        c_backgr: Background count rate (counts/s)
        c_1atom: Count rate of a single atom (counts/s)

    Returns:
        AtomCounts; `overcounted` is set when N_final exceeds N_init
    """
    n_init = atom_number(c_init, c_backgr, c_1atom)
    if n_init <= 0:
        raise InputDataError(f"initial atom number must be positive, got {n_init:g}")
    n_final = atom_number(c_final, c_backgr, c_1atom)
    overcounted = n_final > n_init
    if overcounted:
        logger.warning("final atom number %.3g exceeds initial %.3g", n_final, n_init)
    return AtomCounts(n_init, n_final, n_final / n_init, overcounted)


def clopper_pearson(successes: int, trials: int, confidence: float = ONE_SIGMA) -> Tuple[float, float]:
    """Exact binomial interval from beta-distribution quantiles."""
    if trials <= 0 or not 0 <= successes <= trials:
        raise ValueError(f"need 0 <= successes <= trials and trials > 0, got {successes}/{trials}")
    if not 0 < confidence < 1:
        raise ValueError(f"confidence must lie in (0, 1), got {confidence}")
    alpha = 1.0 - confidence
    lower = 0.0 if successes == 0 else stats.beta.ppf(alpha / 2.0, successes, trials - successes + 1)
    upper = 1.0 if successes == trials else stats.beta.ppf(1.0 - alpha / 2.0, successes + 1, trials - successes)
    return float(lower), float(upper)


def detection_efficiency(successes: int, trials: int, confidence: float = ONE_SIGMA) -> Tuple[float, float, float]:
    """Point estimate k/n with the interval as (+upper, -lower) offsets."""
    lower, upper = clopper_pearson(successes, trials, confidence)
    point = successes / trials
    return point, upper - point, point - lower


def format_efficiency(successes: int, trials: int, confidence: float = ONE_SIGMA) -> str:
    point, plus, minus = detection_efficiency(successes, trials, confidence)
    return f"{point * 100:.1f}% (+{plus * 100:.1f}/-{minus * 100:.1f}) at {confidence:.0%}"
