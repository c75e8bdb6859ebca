"""Per-iteration training trace and the good/poor convergence verdict.

The verdict looks at raw discriminator outputs over the tail of a run: both
D(real) and D(fake) settling near 0.5 is good convergence; D(real) near 1 with
D(fake) near 0 means the discriminator wins outright.
"""
import logging
import math
from pathlib import Path

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

VERDICTS = ("good", "poor", "indeterminate")
MIN_TRACE = 10


class ConvergenceTrace:
    """append-only table of loss components and discriminator outputs, one row per iteration

    Columns: iter, L_mce_low, L_mce_high, L_adv_<d>, d_real_<d>, d_fake_<d> per discriminator
    <d>, then L_G, L_D, lr.
    """

    def __init__(self, rows: list[dict[str, float]] | None = None):
        self._rows: list[dict[str, float]] = []
        for row in rows or []:
            self.append(row)

    def __len__(self):
        return len(self._rows)

    def __repr__(self):
        return f"ConvergenceTrace<rows: {len(self)}, discriminators: {self.discriminators}>"

    def __eq__(self, other):
        if not isinstance(other, ConvergenceTrace):
            return NotImplemented
        return self._rows == other._rows

    def append(self, row: dict[str, float]) -> None:
        if "iter" not in row:
            raise KeyError("Trace rows need an `iter` column.")
        if self._rows and row["iter"] <= self._rows[-1]["iter"]:
            raise ValueError(f"Trace iterations must increase. Got {row['iter']} after {self._rows[-1]['iter']}.")
        bad = [k for k, v in row.items() if not math.isfinite(v)]
        if bad:
            raise ValueError(f"Trace row {row['iter']} has non-finite values in {bad}.")
        self._rows.append(dict(row))

    def head(self, iterations: int) -> "ConvergenceTrace":
        """rows with iter below `iterations`"""
        return ConvergenceTrace([row for row in self._rows if row["iter"] < iterations])

    @property
    def rows(self) -> list[dict[str, float]]:
        return [dict(row) for row in self._rows]

    @property
    def discriminators(self) -> list[str]:
        names: list[str] = []
        for row in self._rows[:1]:
            names = [key.removeprefix("d_real_") for key in row if key.startswith("d_real_")]
        return names

    @property
    def frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self._rows)
        if not frame.empty:
            frame["iter"] = frame["iter"].astype(np.int64)
            frame = frame.set_index("iter")
        return frame

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        self.frame.to_csv(path, float_format="%.17g")
        return path

    @classmethod
    def from_csv(cls, path: str | Path) -> "ConvergenceTrace":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Trace file `{path}` does not exist.")
        frame = pd.read_csv(path, float_precision="round_trip")
        rows = [{k: (int(v) if k == "iter" else float(v)) for k, v in row.items()} for row in frame.to_dict("records")]
        return cls(rows)


def _tail(trace: ConvergenceTrace, tail_fraction: float) -> pd.DataFrame:
    if len(trace) < MIN_TRACE:
        raise ValueError(f"Convergence needs a trace of at least {MIN_TRACE} iterations. Got {len(trace)}.")
    if not 0 < tail_fraction <= 1:
        raise ValueError(f"`tail_fraction` must lie in (0, 1]. Got {tail_fraction}.")
    count = max(1, math.ceil(len(trace) * tail_fraction))
    return trace.frame.tail(count)


def _verdict(d_real: float, d_fake: float, tol: float) -> str:
    if abs(d_real - 0.5) <= tol and abs(d_fake - 0.5) <= tol:
        return "good"
    if d_real >= 1 - tol and d_fake <= tol:
        return "poor"
    return "indeterminate"


def convergence_summary(trace: ConvergenceTrace, tail_fraction: float = 0.2, tol: float = 0.1) -> pd.DataFrame:
    """tail means and verdict per discriminator

    Results:
                        d_real  d_fake  verdict
        discriminator
        macro             0.52    0.47     good
        micro             0.97    0.03     poor
    """
    tail = _tail(trace, tail_fraction)
    names = trace.discriminators
    if not names:
        raise ValueError("The trace has no discriminator outputs to classify.")
    rows = {}
    for name in names:
        d_real = float(tail[f"d_real_{name}"].mean())
        d_fake = float(tail[f"d_fake_{name}"].mean())
        rows[name] = {"d_real": d_real, "d_fake": d_fake, "verdict": _verdict(d_real, d_fake, tol)}
    summary = pd.DataFrame.from_dict(rows, orient="index")
    summary.index.names = ["discriminator"]
    return summary


def classify_convergence(
        trace: ConvergenceTrace,
        tail_fraction: float = 0.2,
        tol: float = 0.1,
        discriminator: str | None = None,
) -> str:
    """good / poor / indeterminate from the tail means of D(real) and D(fake)

    With several discriminators and none named, the run is poor if any discriminator is
    poor and good only if all are good.
    """
    summary = convergence_summary(trace, tail_fraction, tol)
    if discriminator is not None:
        if discriminator not in summary.index:
            raise KeyError(f"No discriminator `{discriminator}` in the trace. Got {list(summary.index)}.")
        return str(summary.loc[discriminator, "verdict"])
    verdicts = set(summary["verdict"])
    if "poor" in verdicts:
        return "poor"
    if verdicts == {"good"}:
        return "good"
    return "indeterminate"
