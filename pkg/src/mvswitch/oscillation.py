"""The dyadic on/off diffusion that makes solutions collapse at time zero.

The diffusion is ``sqrt(2)`` on ``(a_n + D_n, a_n + 3 D_n]`` with
``a_n = 2**-n``, ``D_n = 2**-(n+2)`` and zero elsewhere; the drift pulls the
second moment down at unit rate. Restarting the moment equation at level 1 from
time ``s``, the solution exists only up to ``m(s)``, and ``m(s) -> 0`` as
``s -> 0``.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

from .curve import MomentCurve, Provenance, fmt
from .errors import DomainError
from .model import DyadicSwitchDiffusion, dyadic_a, dyadic_band, dyadic_delta


@dataclass(frozen=True)
class OscillationSchedule:
    alpha: float = 0.25
    depth: int = 60

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise DomainError("alpha must lie in (0, 1)")
        if self.depth < 1:
            raise DomainError("depth must be positive")

    @property
    def diffusion(self) -> DyadicSwitchDiffusion:
        return DyadicSwitchDiffusion(math.sqrt(2.0), self.depth)

    def a(self, n: int) -> float:
        return dyadic_a(n)

    def delta(self, n: int) -> float:
        return dyadic_delta(n)

    def on_interval(self, n: int) -> tuple[float, float]:
        """Left-open, right-closed interval where band n is switched on."""
        return dyadic_a(n) + dyadic_delta(n), dyadic_a(n) + 3 * dyadic_delta(n)

    def drift_bound(self) -> float:
        return 1.0 / (2.0 * math.sqrt(self.alpha))

    def next_switch(self, t: float) -> float:
        """First on/off switch time strictly after ``t``, capped at 1."""
        n = dyadic_band(t) if t > 0 else self.depth + 1
        best = 1.0
        for m in (n, n - 1):
            if 1 <= m <= self.depth:
                for edge in self.on_interval(m):
                    if t < edge < best:
                        best = edge
        if n > self.depth:
            lo, _ = self.on_interval(self.depth)
            best = min(best, lo) if lo > t else best
        return best


def sigma1_at(schedule: OscillationSchedule, t: float) -> float:
    if t <= 0:
        raise DomainError("sigma_1 is defined for t > 0")
    if t > 1:
        raise DomainError("sigma_1 is defined on (0, 1]")
    return math.sqrt(2.0) if schedule.diffusion.on(t) else 0.0


def kappa(s: float) -> int:
    """Smallest k >= 0 with ``s >= 2**-k``."""
    if not 0 < s < 1:
        raise DomainError(f"kappa needs s in (0, 1), got {s}")
    return 1 - math.frexp(s)[1]


def collapse_bound(k: int) -> float:
    return dyadic_a(k) + 9 * dyadic_delta(k)


def m_of_s_caseformula(schedule: OscillationSchedule, s: float) -> float:
    """Closed-form ``m(s)`` for ``kappa(s) > 1``, by position of s inside its band."""
    k = kappa(s)
    if k <= 1:
        raise DomainError(f"the case formulas need kappa(s) > 1, got kappa({s}) = {k}")
    a, dl = dyadic_a(k), dyadic_delta(k)
    if s < a + dl:
        return 2 * (a + dl) - s
    if s < a + 3 * dl:
        return s
    return 2 * (dyadic_a(k - 1) + dyadic_delta(k - 1)) - s


def solve_delayed_equation(schedule: OscillationSchedule, s: float, dt: float):
    """Integrate the restarted moment equation from ``g(s) = 1``.

    The slope is ``+1`` while ``g < 1`` and the diffusion is on, ``-1``
    otherwise. Steps are at most ``dt`` and never straddle a switch time.
    The solve stops at the first return to level 1 where the diffusion is on
    immediately to the right: there regime 1 pushes up and regime 2 pushes
    down, so no continuation exists.

    Returns ``(curve, m)``; ``m`` is None when ``kappa(s) <= 1`` (outside the
    collapse bound) even if such a time was found.
    """
    k = kappa(s)
    need = dyadic_delta(max(k, 1)) / 8
    if not 0 < dt <= need:
        raise DomainError(f"dt={dt:g} too coarse for s={s:g}; need dt <= {need:g}")
    on_right = schedule.diffusion.on_right
    t, g = s, 1.0
    times, gs, regimes = [t], [g], [2]
    stop = None
    while t < 1.0:
        if g >= 1.0 and on_right(t):
            stop = t
            break
        rising = g < 1.0 and on_right(t)
        nxt = min(t + dt, schedule.next_switch(t), 1.0)
        if rising and g + (nxt - t) >= 1.0:
            nxt, g = t + (1.0 - g), 1.0
        else:
            g += (nxt - t) if rising else -(nxt - t)
        t = nxt
        times.append(t)
        gs.append(g)
        regimes.append(2 if g >= 1.0 else 1)
    curve = MomentCurve(times, gs, regimes, provenance=Provenance.ANALYTIC)
    return curve, (stop if k > 1 else None)


@dataclass
class CollapseRow:
    s: float
    kappa: int
    m_formula: float
    m_numeric: float | None
    bound: float

    @property
    def ok(self) -> bool:
        return self.m_formula <= self.bound


@dataclass
class CollapseReport:
    rows: list[CollapseRow]
    band_maxima: dict[int, float]

    @property
    def all_bounded(self) -> bool:
        return all(r.ok for r in self.rows)

    def decay_ratios(self) -> list[float]:
        ks = sorted(self.band_maxima)
        return [self.band_maxima[b] / self.band_maxima[a] for a, b in zip(ks, ks[1:]) if b == a + 1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("s,kappa,m_formula,m_numeric,bound\n")
        for r in self.rows:
            mn = "" if r.m_numeric is None else fmt(r.m_numeric)
            buf.write(f"{fmt(r.s)},{r.kappa},{fmt(r.m_formula)},{mn},{fmt(r.bound)}\n")
        return buf.getvalue()


def band_grid(k: int, per_band: int) -> list[float]:
    """``per_band`` equally spaced starts in ``[a_k, a_{k-1})``."""
    a, width = dyadic_a(k), dyadic_a(k)
    return [a + width * j / per_band for j in range(per_band)]


def verify_collapse_bound(schedule: OscillationSchedule, s_grid, dt_factor: float | None = None) -> CollapseReport:
    """Check ``m(s) <= a_k + 9 D_k`` (k = kappa(s)) over ``s_grid``.

    With ``dt_factor`` the numeric solve runs too, at ``dt = D_k * dt_factor``.
    """
    rows, maxima = [], {}
    for s in s_grid:
        k = kappa(s)
        m = m_of_s_caseformula(schedule, s)
        mn = None
        if dt_factor is not None:
            _, mn = solve_delayed_equation(schedule, s, dyadic_delta(k) * dt_factor)
        rows.append(CollapseRow(s, k, m, mn, collapse_bound(k)))
        maxima[k] = max(maxima.get(k, -math.inf), m)
    return CollapseReport(rows, maxima)


def no_continuation_times(schedule: OscillationSchedule, bands, dt_factor: float = 1 / 64) -> list[float]:
    """Numeric ``m(a_k)`` for each band k: times at which a restart from level 1 dies.

    They accumulate at 0, so no solution can be started at time 0.
    """
    out = []
    for k in bands:
        if k <= 1:
            raise DomainError("bands must be >= 2")
        _, m = solve_delayed_equation(schedule, dyadic_a(k), dyadic_delta(k) * dt_factor)
        out.append(m)
    return out
