"""Tabular and text renderings of a dephasing budget."""
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from colorama import Fore, Style

from analysis.noise_budget import MechanismId, NoiseBudget, PointingCase
from core.constants import rad_to_hz

CSV_FLOAT_FORMAT = "%.17g"


def budget_frame(budget: NoiseBudget) -> pd.DataFrame:
    """One row per mechanism plus the quadrature total of each pointing case."""
    rows = []
    for entry in budget.entries:
        rows.append({
            'mechanism': entry.mechanism.value,
            'label': entry.label,
            'sigma_hz': entry.sigma_hz,
            'provenance': entry.provenance.value,
            'reference_hz': np.nan if entry.reference_hz is None else entry.reference_hz,
        })
    for case, total in zip(PointingCase, budget.totals):
        rows.append({
            'mechanism': f'total_{case.value}',
            'label': f'quadrature sum, {case.value}-case pointing',
            'sigma_hz': rad_to_hz(total),
            'provenance': 'model',
            'reference_hz': np.nan,
        })
    return pd.DataFrame(rows, columns=['mechanism', 'label', 'sigma_hz', 'provenance', 'reference_hz'])


def visibility_frame(budget: NoiseBudget, tau_pis: Optional[Sequence[float]] = None, c0: float = 1.0) -> pd.DataFrame:
    """Predicted V(2 tau_pi) for both pointing cases; defaults to 50 points up to the evaluation time."""
    if tau_pis is None:
        tau_pis = np.linspace(0.0, budget.evaluation_time, 50)
    frame = pd.DataFrame({'tau_pi_s': np.asarray(tau_pis, dtype=float)})
    for case in PointingCase:
        curve = budget.visibility_curve(tau_pis, c0, case)
        frame[f'visibility_{case.value}'] = [v for _, v in curve]
    return frame


def render_budget(budget: NoiseBudget, title: str = "DEPHASING BUDGET", color: bool = False) -> str:
    """Aligned text table with reference values side by side."""
    def paint(text: str, tint: str) -> str:
        return tint + text + Style.RESET_ALL if color else text

    lines: List[str] = []
    lines.append("=" * 60)
    lines.append(paint(title, Fore.CYAN))
    lines.append("=" * 60)
    lines.append(f"Evaluated at T2' = {budget.evaluation_time * 1e3:.2f} ms")
    lines.append("-" * 60)
    lines.append(f"{'mechanism':<38}{'sigma/2pi':>11}{'ref.':>11}")
    lines.append("-" * 60)
    for entry in budget.entries:
        reference = "" if entry.reference_hz is None else f"{entry.reference_hz:.2f}"
        row = f"{entry.label:<38}{entry.sigma_hz:>9.2f}Hz{reference:>11}"
        if entry.mechanism is MechanismId.MEASURED:
            row = paint(row, Fore.YELLOW)
        lines.append(row)
    lines.append("-" * 60)
    for case, total in zip(PointingCase, budget.totals):
        label = f"total ({case.value}-case pointing)"
        lines.append(paint(f"{label:<38}{rad_to_hz(total):>9.2f}Hz", Fore.GREEN))
    t2_measured = budget.t2_prime_measured
    if t2_measured is not None:
        lines.append(f"T2' from sigma_exp: {t2_measured * 1e3:.1f} ms")
    for case, total in zip(PointingCase, budget.totals):
        if total > 0:
            lines.append(f"T2' from modelled total, {case.value} case: {np.sqrt(2.0) / total * 1e3:.1f} ms")
    lines.append("=" * 60)
    return "\n".join(lines)


def print_summary(budget: NoiseBudget, title: str = "DEPHASING BUDGET"):
    """Print the budget table to the console."""
    print("\n" + render_budget(budget, title, color=True) + "\n")


def write_budget(budget: NoiseBudget, out: str, tau_pis: Optional[Sequence[float]] = None) -> List[str]:
    """Write `<out>.csv`, `<out>.txt` and `<out>_visibility.csv`; returns the paths."""
    paths = [f"{out}.csv", f"{out}.txt", f"{out}_visibility.csv"]
    budget_frame(budget).to_csv(paths[0], index=False, float_format=CSV_FLOAT_FORMAT)
    with open(paths[1], "w", encoding="utf-8") as handle:
        handle.write(render_budget(budget) + "\n")
    visibility_frame(budget, tau_pis).to_csv(paths[2], index=False, float_format=CSV_FLOAT_FORMAT)
    return paths
