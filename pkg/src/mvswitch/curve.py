"""Moment trajectories and their CSV form."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from enum import Enum
from typing import TextIO

import numpy as np


class Provenance(str, Enum):
    EMPIRICAL = "empirical"
    ANALYTIC = "analytic"


@dataclass(frozen=True)
class Crossing:
    """The moment passed threshold ``k`` at time ``t`` (direction +1 up, -1 down)."""

    t: float
    k: int
    direction: int = 1


def fmt(x: float) -> str:
    """17 significant digits: enough to round-trip any double."""
    return f"{float(x):.17g}"


@dataclass
class MomentCurve:
    times: np.ndarray
    g_values: np.ndarray
    regime_trace: np.ndarray
    stderr: np.ndarray | None = None
    crossings: list[Crossing] = field(default_factory=list)
    provenance: Provenance = Provenance.EMPIRICAL

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.g_values = np.asarray(self.g_values, dtype=float)
        self.regime_trace = np.asarray(self.regime_trace, dtype=int)
        if self.stderr is None:
            self.stderr = np.zeros_like(self.g_values)
        else:
            self.stderr = np.asarray(self.stderr, dtype=float)

    def __len__(self) -> int:
        return len(self.times)

    def first_crossing(self, k: int, direction: int = 1) -> Crossing | None:
        for c in self.crossings:
            if c.k == k and c.direction == direction:
                return c
        return None

    def value_at(self, t: float) -> float:
        """Linear interpolation of the recorded moment."""
        return float(np.interp(t, self.times, self.g_values))

    def write_csv(self, out: TextIO) -> None:
        analytic = self.provenance is Provenance.ANALYTIC
        out.write("t,g,stderr,regime,provenance\n" if analytic else "t,g,stderr,regime\n")
        for t, g, se, r in zip(self.times, self.g_values, self.stderr, self.regime_trace):
            row = f"{fmt(t)},{fmt(g)},{fmt(se)},{int(r)}"
            out.write(row + (",analytic\n" if analytic else "\n"))
        for c in self.crossings:
            tail = "" if c.direction > 0 else f" dir={c.direction}"
            out.write(f"# crossing t={fmt(c.t)} k={c.k}{tail}\n")

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def read_csv(text: str) -> MomentCurve:
    """Parse the CSV produced by :meth:`MomentCurve.write_csv`."""
    rows, crossings = [], []
    lines = text.splitlines()
    header = lines[0].split(",")
    for line in lines[1:]:
        if line.startswith("# crossing"):
            parts = dict(kv.split("=") for kv in line[len("# crossing ") :].split())
            crossings.append(Crossing(float(parts["t"]), int(parts["k"]), int(parts.get("dir", 1))))
        elif line.strip():
            rows.append(line.split(","))
    analytic = "provenance" in header
    arr = np.array([[float(v) for v in r[:4]] for r in rows]) if rows else np.zeros((0, 4))
    return MomentCurve(
        times=arr[:, 0],
        g_values=arr[:, 1],
        stderr=arr[:, 2],
        regime_trace=arr[:, 3].astype(int),
        crossings=crossings,
        provenance=Provenance.ANALYTIC if analytic else Provenance.EMPIRICAL,
    )
