"""CSV emission with round-trippable floats."""
from pathlib import Path
from typing import Sequence, Tuple

import pandas as pd

from analysis.fitting import FitResult
from analysis.report import CSV_FLOAT_FORMAT
from sim.model import SignalResult


def _ensure_parent(path: str):
    parent = Path(path).parent
    if str(parent):
        parent.mkdir(parents=True, exist_ok=True)


def write_signal(result: SignalResult, path: str) -> str:
    """Columns t_s, p3_analytic, p3_montecarlo, mc_stderr."""
    _ensure_parent(path)
    pd.DataFrame(result.to_dict()).to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
    return path


def write_fit(result: FitResult, path: str) -> Tuple[str, str]:
    """One-row machine-readable CSV plus a `.txt` summary next to it."""
    _ensure_parent(path)
    pd.DataFrame([result.to_dict()]).to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
    summary_path = str(Path(path).with_suffix(".txt"))
    with open(summary_path, "w", encoding="utf-8") as handle:
        handle.write(result.summary() + "\n")
    return path, summary_path


def write_allan(curve: Sequence[Tuple[float, float]], path: str) -> str:
    _ensure_parent(path)
    frame = pd.DataFrame(list(curve), columns=["tau_s", "sigma_allan"])
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
    return path
