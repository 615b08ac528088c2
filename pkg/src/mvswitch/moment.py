"""Deterministic analysis of the second-moment equation for time-only coefficients.

For ``p = 2`` and coefficients that depend on time only, the moment function
of any solution satisfies

    g(t) = A(t) + sum_i int_{T0}^t 1{g(s) in A_i} |sigma_i(s)|^2 ds,
    A(t) = E|x_0 - z + int_{T0}^t b(s) ds|^2,

and on every stretch where ``g`` stays in one cell its increments coincide
with those of ``g_i(t) = A(t) + int_{T0}^t |sigma_i|^2``. The solver advances
``g`` with these increments, stops at each threshold hit and uses one-sided
slopes of the neighbouring ``g_i`` to decide whether a continuation exists.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .curve import Crossing, MomentCurve, Provenance, fmt
from .errors import DomainError, PreconditionError, UnsupportedSpecError
from .model import EquationSpec, Family, Side, ThresholdPartition


class VerdictKind(str, Enum):
    SOLVED = "SOLVED"
    NO_SOLUTION = "NO_SOLUTION"
    INCONCLUSIVE = "INCONCLUSIVE"


@dataclass(frozen=True)
class ExistenceVerdict:
    kind: VerdictKind
    t: float | None = None
    case: str | None = None
    evidence: tuple[str, ...] = ()

    def record(self) -> str:
        t = "-" if self.t is None else fmt(self.t)
        return f"verdict={self.kind.value} t={t} case={self.case or '-'}"


def require_time_only_p2(spec: EquationSpec) -> None:
    if spec.p != 2:
        raise UnsupportedSpecError(f"moment analysis needs p = 2, got p = {spec.p:g}")
    if spec.family not in (Family.CONSTANT, Family.TIME_ONLY):
        raise UnsupportedSpecError(f"moment analysis needs time-only coefficients, got {spec.family.value}")
    if not spec.partition.is_finite:
        raise UnsupportedSpecError("moment analysis needs a finite threshold partition")


class DriftAccumulator:
    """``A(t) = M0 + 2 <m0, I(t)> + |I(t)|^2`` with ``I(t) = int_{T0}^t b``."""

    def __init__(self, m0: Sequence[float], M0: float, drift, T0: float):
        self.m0 = np.asarray(m0, dtype=float)
        self.M0 = float(M0)
        self.drift = drift
        self.T0 = float(T0)

    def integral(self, t: float) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.drift.integral(self.T0, t), dtype=float))

    def value(self, t: float) -> float:
        if t == self.T0:
            return self.M0
        i = self.integral(t)
        return self.M0 + 2.0 * float(self.m0 @ i) + float(i @ i)

    def slope(self, t: float) -> float:
        """Right derivative ``A'(t+) = 2 <m0 + I(t), b(t+)>``."""
        b = np.atleast_1d(np.asarray(self.drift.value_right(t), dtype=float))
        return 2.0 * float((self.m0 + self.integral(t)) @ b)


@dataclass(frozen=True)
class RegimeMomentFunctions:
    """The per-regime moment functions ``g_i`` on ``[T0, inf)``.

    Built from a spec by :func:`regime_moment_functions`, or directly from
    callables. ``slopes`` are right derivatives; without them a one-sided
    difference quotient is used.
    """

    funcs: tuple[Callable[[float], float], ...]
    T0: float = 0.0
    slopes: tuple[Callable[[float], float], ...] | None = None
    exact: bool = False
    accumulator: DriftAccumulator | None = field(default=None, compare=False)

    def g(self, i: int, t: float) -> float:
        return float(self.funcs[i - 1](t))

    def g1(self, t: float) -> float:
        return self.g(1, t)

    def g2(self, t: float) -> float:
        return self.g(2, t)

    def slope(self, i: int, t: float, h: float = 1e-7) -> float:
        if self.slopes is not None:
            return float(self.slopes[i - 1](t))
        return (self.g(i, t + h) - self.g(i, t)) / h

    @property
    def n(self) -> int:
        return len(self.funcs)


def regime_moment_functions(spec: EquationSpec, T0: float = 0.0) -> RegimeMomentFunctions:
    require_time_only_p2(spec)
    acc = DriftAccumulator(spec.initial.m0, spec.initial.M0, spec.coefficients.drift, T0)
    d = spec.d
    sigmas = [spec.coefficients.diffusion(i) for i in range(1, spec.partition.n_regimes + 1)]

    def make(s):
        return lambda t: acc.value(t) + s.norm2_integral(T0, t, d)

    def make_slope(s):
        return lambda t: acc.slope(t) + s.norm2_right(t, d)

    exact = spec.coefficients.drift.exact_integral and all(s.exact_integral for s in sigmas)
    return RegimeMomentFunctions(
        funcs=tuple(make(s) for s in sigmas),
        T0=T0,
        slopes=tuple(make_slope(s) for s in sigmas),
        exact=exact,
        accumulator=acc,
    )


# ---------------------------------------------------------------------------
# decision table at a threshold hit


@dataclass(frozen=True)
class _Continue:
    regime: int
    direction: int
    note: str = ""


def _decide(gmf: RegimeMomentFunctions, part: ThresholdPartition, k: int, t: float, tol: float, arriving: int):
    lo, up, own = part.lower_regime(k), part.upper_regime(k), part.owner_regime(k)
    s_lo, s_up, s_own = gmf.slope(lo, t), gmf.slope(up, t), gmf.slope(own, t)
    slopes = f"slopes at t={fmt(t)}: lower g_{lo}'={s_lo:.6g}, upper g_{up}'={s_up:.6g}"
    if own == up and s_lo >= -tol and s_up < -tol:
        return ExistenceVerdict(
            VerdictKind.NO_SOLUTION, t, "A",
            (f"threshold {k} belongs to the upper cell; g_{lo} non-decreasing and g_{up} strictly decreasing", slopes),
        )
    if own == lo and own != up and s_lo > tol and s_up <= tol:
        return ExistenceVerdict(
            VerdictKind.NO_SOLUTION, t, "B",
            (f"threshold {k} belongs to the lower cell; g_{lo} strictly increasing and g_{up} non-increasing", slopes),
        )
    if own not in (lo, up) and abs(s_own) > tol and s_up <= tol and s_lo >= -tol:
        return ExistenceVerdict(
            VerdictKind.NO_SOLUTION, t, None,
            (f"point cell at threshold {k} cannot be held and neither side accepts continuation", slopes),
        )
    can_up, can_down = s_up > tol, s_lo < -tol
    can_stay = abs(s_own) <= tol
    if not (can_up or can_down):
        why = "both one-sided slopes vanish" if abs(s_lo) <= tol and abs(s_up) <= tol else "slope test undecided"
        return ExistenceVerdict(VerdictKind.INCONCLUSIVE, t, None, (why, slopes))
    note = ""
    if can_up + can_down + can_stay > 1:
        note = f"non-unique continuation at threshold {k} (t={fmt(t)})"
    if can_up and can_down:
        prefer = arriving or (1 if own != lo else -1)
        direction = prefer
    else:
        direction = 1 if can_up else -1
    return _Continue(up if direction > 0 else lo, direction, note)


def _threshold_index(part: ThresholdPartition, g: float) -> int | None:
    for k, y in enumerate(part.levels, start=1):
        if y == g:
            return k
    return None


def _first_return(phi, y, direction, a, b, pieces=16, depth=30):
    """Earliest root of ``phi - y`` in ``(a, b]`` given ``phi(a) == y`` and an
    expected departure on side ``direction``; None when no return is seen,
    ``a`` when the departure cannot be resolved at all."""

    def side(v):
        return (v > y) - (v < y)

    if side(phi(b)) == direction:
        return None
    hi = b
    for _ in range(depth):
        prev = None
        for j in range(1, pieces + 1):
            p = a + (hi - a) * j / pieces
            sd = side(phi(p))
            if sd == direction:
                prev = p
                continue
            if prev is None:
                hi = p
                break
            if sd == 0:
                return p
            return brentq(lambda s: phi(s) - y, prev, p, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        else:
            return None
    return a


def solve_moment_equation(
    spec: EquationSpec,
    T0: float = 0.0,
    horizon: float = 2.0,
    dt: float = 1e-3,
    slope_tol: float | None = None,
) -> tuple[MomentCurve, ExistenceVerdict]:
    """Forward-solve the moment equation on ``[T0, horizon]`` with threshold events.

    Returns the analytic curve up to the point where the solver stopped and a
    verdict: ``SOLVED`` at ``horizon``, ``NO_SOLUTION`` at a threshold hit
    where neither regime admits continuation, or ``INCONCLUSIVE``.
    """
    if not dt > 0:
        raise DomainError("dt must be positive")
    if not horizon > T0:
        raise DomainError("horizon must lie after T0")
    gmf = regime_moment_functions(spec, T0)
    part = spec.partition
    tol = slope_tol if slope_tol is not None else (1e-12 if gmf.exact else 10 * dt)

    g = gmf.accumulator.value(T0)
    t = T0
    times, gs, regimes, crossings, notes = [t], [g], [part.regime_of(g)], [], []

    def finish(verdict):
        curve = MomentCurve(times, gs, regimes, None, crossings, Provenance.ANALYTIC)
        if notes:
            verdict = ExistenceVerdict(verdict.kind, verdict.t, verdict.case, verdict.evidence + tuple(notes))
        return curve, verdict

    def hit(k, arriving):
        res = _decide(gmf, part, k, t, tol, arriving)
        if isinstance(res, ExistenceVerdict):
            return res
        if res.note:
            notes.append(res.note)
        return res

    leaving = None  # (threshold value, direction) right after a hit
    k0 = _threshold_index(part, g)
    if k0 is not None:
        res = hit(k0, 0)
        if isinstance(res, ExistenceVerdict):
            return finish(res)
        active, leaving = res.regime, (g, res.direction)
    else:
        active = part.regime_of(g)

    n_grid = math.ceil((horizon - T0) / dt - 1e-9)
    j = 0
    while t < horizon:
        while j <= n_grid and T0 + j * dt <= t:
            j += 1
        t_next = min(T0 + j * dt, horizon)
        base = g - gmf.g(active, t)

        def phi(s, base=base, active=active):
            return base + gmf.g(active, s)

        g_next = phi(t_next)
        event = None  # (time, k, direction)
        if leaving is not None:
            y, direction = leaving
            tr = _first_return(phi, y, direction, t, t_next)
            if tr is not None and tr <= t:
                return finish(ExistenceVerdict(
                    VerdictKind.INCONCLUSIVE, t, None, ("chosen continuation returns to the threshold immediately",)
                ))
            if tr is not None:
                event = (tr, _threshold_index(part, y), -direction)
        lo_v, hi_v = min(g, g_next), max(g, g_next)
        for k, y in part.thresholds_between(lo_v, hi_v) if hi_v > lo_v else []:
            if leaving is not None and y == leaving[0]:
                continue
            if y == g:
                continue
            fa = g - y
            if g_next == y:
                tc = t_next
            else:
                tc = brentq(lambda s: phi(s) - y, t, t_next, xtol=1e-15, rtol=4 * np.finfo(float).eps)
            if event is None or tc < event[0]:
                event = (tc, k, 1 if fa < 0 else -1)
        if event is None:
            t, g = t_next, g_next
            times.append(t)
            gs.append(g)
            regimes.append(active)
            if leaving is not None and g != leaving[0]:
                leaving = None
            continue
        tc, k, direction = event
        t, g = tc, part.level(k)
        if t > times[-1]:
            times.append(t)
            gs.append(g)
            regimes.append(active)
        crossings.append(Crossing(t, k, direction))
        res = hit(k, direction)
        if isinstance(res, ExistenceVerdict):
            return finish(res)
        active, leaving = res.regime, (g, res.direction)
    return finish(ExistenceVerdict(VerdictKind.SOLVED, horizon, None, (f"solved on [{fmt(T0)}, {fmt(horizon)}]",)))


def check_nonexistence(
    gmf: RegimeMomentFunctions,
    T0: float,
    eps: float,
    boundary: Side | str = Side.UPPER,
    samples: int = 257,
    tol: float = 1e-12,
) -> ExistenceVerdict:
    """Window test for the two-regime non-existence criterion.

    ``boundary`` says which cell owns the level: ``upper`` for ``A_1 = [0, y)``
    (needs ``g_1`` non-decreasing and ``g_2`` strictly decreasing on
    ``[T0, T0 + eps]``), ``lower`` for ``A_1 = [0, y]`` (``g_1`` strictly
    increasing and ``g_2`` non-increasing). Anything else is INCONCLUSIVE:
    the criterion is sufficient, not necessary.
    """
    if not eps > 0:
        raise DomainError("window length eps must be positive")
    boundary = Side(boundary)
    if boundary is Side.POINT:
        raise DomainError("the window test covers two-regime partitions only")
    g1_0, g2_0 = gmf.g1(T0), gmf.g2(T0)
    if abs(g1_0 - g2_0) > max(tol, 1e-12 * abs(g1_0)):
        raise PreconditionError("g_1 and g_2 must start from the same moment")
    ts = np.linspace(T0, T0 + eps, samples)
    d1 = np.diff([gmf.g1(s) for s in ts])
    d2 = np.diff([gmf.g2(s) for s in ts])
    nondec1, strict_inc1 = bool(np.all(d1 >= -tol)), bool(np.all(d1 > tol))
    strict_dec2, noninc2 = bool(np.all(d2 < -tol)), bool(np.all(d2 <= tol))
    window = f"window [{fmt(T0)}, {fmt(T0 + eps)}] with {samples} samples"
    if boundary is Side.UPPER and nondec1 and strict_dec2:
        return ExistenceVerdict(VerdictKind.NO_SOLUTION, T0, "A", ("g_1 non-decreasing, g_2 strictly decreasing", window))
    if boundary is Side.LOWER and strict_inc1 and noninc2:
        return ExistenceVerdict(VerdictKind.NO_SOLUTION, T0, "B", ("g_1 strictly increasing, g_2 non-increasing", window))
    facts = (
        f"g_1 non-decreasing={nondec1} strictly-increasing={strict_inc1}; "
        f"g_2 strictly-decreasing={strict_dec2} non-increasing={noninc2}"
    )
    return ExistenceVerdict(VerdictKind.INCONCLUSIVE, None, None, (facts, window))


def increment_identity_check(curve: MomentCurve, gmf: RegimeMomentFunctions, r: float, s: float, tol: float = 1e-9) -> bool:
    """Check ``g(t) - g(r) == g_k(t) - g_k(r)`` on the recorded points of ``(r, s]``.

    Raises PreconditionError unless the curve stays in a single regime there.
    """
    mask = (curve.times > r) & (curve.times <= s)
    regs = set(curve.regime_trace[mask].tolist())
    if len(regs) != 1:
        raise PreconditionError(f"regime is not constant on ({fmt(r)}, {fmt(s)}]: {sorted(regs)}")
    k = regs.pop()
    g_r, gk_r = curve.value_at(r), gmf.g(k, r)
    for t, g in zip(curve.times[mask], curve.g_values[mask]):
        if abs((g - g_r) - (gmf.g(k, t) - gk_r)) > tol:
            return False
    return True


def regime_windows(curve: MomentCurve) -> list[tuple[float, float, int]]:
    """Maximal windows ``(r, s]`` on which the recorded regime is constant."""
    out = []
    regs = curve.regime_trace
    i = 1
    while i < len(curve):
        j = i
        while j + 1 < len(curve) and regs[j + 1] == regs[i]:
            j += 1
        out.append((float(curve.times[i - 1]), float(curve.times[j]), int(regs[i])))
        i = j + 1
    return out


def check_all_windows(curve: MomentCurve, gmf: RegimeMomentFunctions, tol: float = 1e-9) -> int:
    """Run :func:`increment_identity_check` on every maximal window; returns the window count."""
    windows = regime_windows(curve)
    for r, s, _ in windows:
        if not increment_identity_check(curve, gmf, r, s, tol):
            raise AssertionError(f"increment identity fails on ({fmt(r)}, {fmt(s)}]")
    return len(windows)


# ---------------------------------------------------------------------------
# closed-form families and residual check


def nonunique_moment_family(a: float, w: float) -> Callable[[float], float]:
    """Moment function of the solution that pauses ``w`` time units at level ``1 + a``."""
    if a < 0 or w < 0:
        raise DomainError("a and w must be nonnegative")

    def g(t: float) -> float:
        if t < a:
            return 1.0 + t
        if t < a + w:
            return 1.0 + a
        return 1.0 + (t - w)

    return g


def moment_equation_residual(
    spec: EquationSpec,
    g: Callable[[float], float],
    T0: float,
    t_end: float,
    n: int = 4096,
) -> float:
    """Max over a uniform grid of ``|g(t) - A(t) - sum_i int 1{g in A_i} |sigma_i|^2|``.

    The integral uses the midpoint rule on ``n`` cells, so the residual of a
    true solution is of order ``(t_end - T0) / n`` at worst and vanishes when
    the switching times sit on the grid.
    """
    require_time_only_p2(spec)
    acc = DriftAccumulator(spec.initial.m0, spec.initial.M0, spec.coefficients.drift, T0)
    part, d = spec.partition, spec.d
    edges = np.linspace(T0, t_end, n + 1)
    running, worst = 0.0, abs(g(T0) - acc.value(T0))
    for lo, hi in zip(edges[:-1], edges[1:]):
        regime = part.regime_of(g(0.5 * (lo + hi)))
        running += spec.coefficients.diffusion(regime).norm2_integral(lo, hi, d)
        worst = max(worst, abs(g(hi) - acc.value(hi) - running))
    return worst
