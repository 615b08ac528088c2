"""Crossing times of an increasing threshold ladder and the lifetime series.

When the moment climbs a ladder ``y_1 < y_2 < ...`` with regime ``n`` active on
``[y_{n-1}, y_n)``, the solution is built segment by segment and lives until
``T_max = lim T_n``. Two series decide whether that limit is finite:

* the *growth series* ``sum log(y_k / y_{k-1}) / (K_b + K_k^2)``; divergence
  rules out a finite lifetime;
* for a linear outward drift ``b = beta (x - z)`` with ``sigma_n = c n^alpha``
  the *crossing series* ``sum log((y_k + h_k) / (y_{k-1} + h_k))`` with
  ``h_k = |sigma_k|^2 / (2 beta)``, whose half is exactly ``T_n - T_1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .curve import Crossing, MomentCurve, Provenance, fmt
from .errors import DomainError, UnsupportedSpecError
from .model import EquationSpec, Family, LevelRule, LinearDrift, PowerLawDiffusions
from .simulate import SimConfig, run


def ladder_crossing_times(alpha: float, y: Sequence[float], M0: float, n_max: int | None = None) -> list[float]:
    """Closed-form ``T_1, ..., T_n`` for ``b = x`` and ``sigma_n = n**alpha`` in one dimension.

    On segment n the second moment solves ``g' = 2 g + n^(2 alpha)``, so
    ``g + n^(2 alpha)/2`` grows like ``exp(2 t)`` and each crossing time is a log.
    """
    ys = [float(v) for v in y]
    if n_max is not None:
        ys = ys[:n_max]
    if not ys:
        return []
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    if M0 < 0 or M0 >= ys[0]:
        raise DomainError(f"need 0 <= M0 < y_1, got M0={M0}, y_1={ys[0]}")
    if any(b <= a for a, b in zip(ys, ys[1:])):
        raise DomainError("levels must be strictly increasing")
    out = [0.5 * math.log((ys[0] + 0.5) / (M0 + 0.5))]
    for n in range(2, len(ys) + 1):
        h = 0.5 * float(n) ** (2 * alpha)
        out.append(out[-1] + 0.5 * math.log((ys[n - 1] + h) / (ys[n - 2] + h)))
    return out


# ---------------------------------------------------------------------------
# series


class SeriesFamily(str, Enum):
    GENERIC = "generic"
    CROSSING = "crossing"
    GROWTH = "growth"


class Classification(str, Enum):
    DIVERGES = "DIVERGES"
    CONVERGES = "CONVERGES"
    INCONCLUSIVE = "INCONCLUSIVE"


@dataclass(frozen=True)
class SeriesSpec:
    """A positive series summed from ``k = start``.

    Build tagged families with :meth:`crossing` and :meth:`growth`; anything
    else is ``GENERIC`` and only ever gets numerical evidence.
    """

    term: Callable[[int], float]
    family: SeriesFamily = SeriesFamily.GENERIC
    levels: LevelRule | None = None
    alpha: float = 0.0
    start: int = 2
    label: str = ""

    @classmethod
    def crossing(cls, alpha: float, levels: LevelRule, h: float = 0.5) -> SeriesSpec:
        """``log((y_k + h k^(2 alpha)) / (y_{k-1} + h k^(2 alpha)))``, computed in log space."""
        if not alpha > 0 or not h > 0:
            raise DomainError("alpha and h must be positive")
        log_h = math.log(h)

        def term(k):
            lc = log_h + 2 * alpha * math.log(k)
            return float(np.logaddexp(levels.log_level(k), lc) - np.logaddexp(levels.log_level(k - 1), lc))

        return cls(term, SeriesFamily.CROSSING, levels, alpha, label=f"crossing(alpha={alpha:g}, y={levels.label()})")

    @classmethod
    def growth(cls, K_b: float, k_scale: float, alpha: float, levels: LevelRule) -> SeriesSpec:
        """``log(y_k / y_{k-1}) / (K_b + (k_scale k^alpha)^2)``."""
        if K_b < 0 or alpha < 0:
            raise DomainError("K_b and alpha must be nonnegative")
        if K_b == 0 and k_scale == 0:
            raise DomainError("growth series undefined when K_b and the diffusion scale are both zero")

        def term(k):
            return levels.log_ratio(k) / (K_b + (k_scale * float(k) ** alpha) ** 2)

        return cls(term, SeriesFamily.GROWTH, levels, alpha,
                   label=f"growth(K_b={K_b:g}, K_k={k_scale:g}*k^{alpha:g}, y={levels.label()})")


def partial_sums(series: SeriesSpec, n_max: int) -> np.ndarray:
    """Compensated running sums ``S_N = sum_{k=start}^{N} a_k`` for N up to ``n_max``."""
    out = np.empty(max(0, n_max - series.start + 1))
    s = c = 0.0
    for i, k in enumerate(range(series.start, n_max + 1)):
        a = series.term(k)
        if not a > 0 or not math.isfinite(a):
            raise DomainError(f"series term k={k} is not a positive finite number: {a}")
        # Neumaier summation
        t = s + a
        c += (s - t) + a if abs(s) >= abs(a) else (a - t) + s
        s = t
        out[i] = s + c
    return out


def _symbolic(series: SeriesSpec) -> tuple[Classification, str] | None:
    rule = series.levels
    if rule is None or series.family is SeriesFamily.GENERIC:
        return None
    a = series.alpha
    if series.family is SeriesFamily.CROSSING:
        if rule.kind == "factorial_power":
            return Classification.DIVERGES, "y_k / y_{k-1} grows without bound, so terms do not tend to zero"
        q = rule.exponent
        if q >= 2 * a:
            return Classification.DIVERGES, f"terms ~ c/k since level exponent {q:g} >= 2*alpha = {2 * a:g}"
        return Classification.CONVERGES, f"terms ~ c/k^{1 + 2 * a - q:g} since level exponent {q:g} < 2*alpha"
    if rule.kind == "factorial_power":
        if a <= 1:
            return Classification.DIVERGES, f"terms ~ 2 log(k) k^{1 - 2 * a:g} with alpha = {a:g} <= 1"
        return Classification.CONVERGES, f"terms ~ 2 log(k) / k^{2 * a - 1:g} with alpha = {a:g} > 1"
    if a == 0:
        return Classification.DIVERGES, "constant coefficients: terms ~ c/k (telescoping log series)"
    return Classification.CONVERGES, f"terms ~ c/k^{1 + 2 * a:g}"


def classify_series(series: SeriesSpec, n_max: int = 64, divergence_threshold: float = 1e3):
    """Return ``(partial sums, classification, evidence)``.

    Tagged families are decided by comparison with ``k^-s`` series. For a
    generic series a partial sum above ``divergence_threshold`` is reported as
    ``DIVERGES`` but flagged as numerical evidence only.
    """
    if n_max < series.start:
        raise DomainError(f"n_max must be at least {series.start}")
    sums = partial_sums(series, n_max)
    last = f"partial sum S_{n_max} = {fmt(sums[-1])}"
    verdict = _symbolic(series)
    if verdict is not None:
        cls, why = verdict
        return sums, cls, (f"{series.label}: {why}", last)
    if sums[-1] > divergence_threshold:
        return sums, Classification.DIVERGES, (
            f"partial sums exceed {divergence_threshold:g} (numerical evidence, not a proof)", last)
    return sums, Classification.INCONCLUSIVE, ("generic series: divergence is not decidable from finitely many terms", last)


def telescoped_growth_sum(levels: LevelRule, K_b: float, K: float, N: int) -> float:
    """Closed form of the constant-coefficient growth series: ``(log y_N - log y_1) / (K_b + K^2)``."""
    return (levels.log_level(N) - levels.log_level(1)) / (K_b + K * K)


# ---------------------------------------------------------------------------
# lifetime construction


class LifetimeVerdict(str, Enum):
    FINITE_LIFETIME_SUSPECTED = "FINITE_LIFETIME_SUSPECTED"
    INFINITE_LIFETIME_PROVEN_BY = "INFINITE_LIFETIME_PROVEN_BY"
    INCONCLUSIVE = "INCONCLUSIVE"


class Engine(str, Enum):
    ANALYTIC = "analytic"
    MONTE_CARLO = "monte_carlo"


@dataclass
class LifetimeReport:
    crossing_times: list[float]
    terminated_at: int | None
    series_partial_sums: np.ndarray
    verdict: LifetimeVerdict
    criterion: str | None = None
    evidence: list[str] = field(default_factory=list)
    engine: Engine = Engine.ANALYTIC

    def __post_init__(self):
        ts = self.crossing_times
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise DomainError("crossing times must be strictly increasing")

    def record(self) -> str:
        v = self.verdict.value
        if self.criterion:
            v = f"{v}({self.criterion})"
        t_last = fmt(self.crossing_times[-1]) if self.crossing_times else "-"
        return f"verdict={v} crossings={len(self.crossing_times)} T_last={t_last}"

    def to_csv(self) -> str:
        lines = ["n,T_n,increment"]
        prev = 0.0
        for n, t in enumerate(self.crossing_times, start=1):
            lines.append(f"{n},{fmt(t)},{fmt(t - prev)}")
            prev = t
        for e in self.evidence:
            lines.append(f"# {e}")
        return "\n".join(lines) + "\n"


def _rhs_factory(spec: EquationSpec):
    """Moment ODE ``g' = F(t, state, regime)`` for the supported closed cases.

    The state is ``[g]`` for a linear drift centred at ``z`` and
    ``[I_b..., g]`` for a time-only drift, where ``I_b`` is the drift integral.
    """
    coeffs, d = spec.coefficients, spec.d
    drift = coeffs.drift
    diff_families = (
        [Family.CONSTANT] if isinstance(coeffs.diffusions, PowerLawDiffusions) else [s.family for s in coeffs.diffusions]
    )
    if spec.p != 2:
        raise UnsupportedSpecError("the analytic lifetime engine needs p = 2")
    if any(f not in (Family.CONSTANT, Family.TIME_ONLY) for f in diff_families):
        raise UnsupportedSpecError("the analytic lifetime engine needs time-only diffusions")
    if isinstance(drift, LinearDrift):
        if tuple(drift.center) != tuple(spec.z):
            raise UnsupportedSpecError("linear drift must be centred at z for a closed moment equation")
        beta = drift.rate

        def make(i):
            sigma = coeffs.diffusion(i)
            return lambda t, u: [2.0 * beta * u[0] + sigma.norm2(t, d)]

        return make, np.array([spec.initial.M0]), 0
    if drift.family in (Family.CONSTANT, Family.TIME_ONLY):
        m0 = np.asarray(spec.initial.m0, dtype=float)

        def make(i):
            sigma = coeffs.diffusion(i)

            def f(t, u):
                b = np.asarray(drift.value(t), dtype=float)
                return np.concatenate([b, [2.0 * float(np.dot(m0 + u[:d], b)) + sigma.norm2(t, d)]])

            return f

        return make, np.concatenate([np.zeros(d), [spec.initial.M0]]), d
    raise UnsupportedSpecError("the analytic lifetime engine needs a time-only drift or a linear drift centred at z")


def _analytic_crossings(spec: EquationSpec, n_max: int, horizon: float, T0: float, rtol: float, atol: float, path=None):
    make, u, gi = _rhs_factory(spec)
    part = spec.partition
    t = T0
    times: list[float] = []
    notes: list[str] = []
    regime = part.regime_of(float(u[gi]))
    while len(times) < n_max:
        g = float(u[gi])
        k_hi = _next_threshold(part, g)
        if k_hi is None:
            notes.append(f"no threshold above g={fmt(g)}")
            return times, len(times) + 1, notes
        y_hi = part.level(k_hi)

        def hit(s, v, y=y_hi):
            return v[gi] - y

        hit.terminal, hit.direction = True, 1
        sol = solve_ivp(make(regime), (t, horizon), u, method="DOP853", rtol=rtol, atol=atol, events=hit)
        if sol.status == -1:
            raise DomainError(f"moment integration failed: {sol.message}")
        if path is not None:
            path.append((sol.t, sol.y[gi].copy(), regime))
        if not len(sol.t_events[0]):
            notes.append(f"no crossing in horizon: segment {len(times) + 1} stays below y={fmt(y_hi)} until t={fmt(horizon)}")
            return times, len(times) + 1, notes
        t = float(sol.t_events[0][0])
        u = np.array(sol.y_events[0][0], dtype=float)
        u[gi] = y_hi
        times.append(t)
        if path is not None:
            path[-1][1][-1] = y_hi
        regime = part.owner_regime(k_hi)
        if float(make(regime)(t, u)[gi]) < 0:
            notes.append(f"moment turns back at y={fmt(y_hi)}; ladder construction stops")
            return times, len(times) + 1, notes
    return times, None, notes


def analytic_moment_curve(
    spec: EquationSpec, n_max: int = 64, horizon: float = 100.0, T0: float = 0.0,
    rtol: float = 1e-13, atol: float = 1e-14,
) -> MomentCurve:
    """The integrator's accepted steps along the ladder, with the crossings marked."""
    path: list = []
    times, _, _ = _analytic_crossings(spec, n_max, horizon, T0, rtol, atol, path)
    t = np.concatenate([seg[0] for seg in path])
    g = np.concatenate([seg[1] for seg in path])
    regimes = np.concatenate([np.full(len(seg[0]), seg[2]) for seg in path])
    k0 = _next_threshold(spec.partition, float(g[0]))
    return MomentCurve(t, g, regimes, crossings=[Crossing(c, k) for k, c in enumerate(times, start=k0)],
                       provenance=Provenance.ANALYTIC)


def _next_threshold(part, g: float) -> int | None:
    if part.is_finite:
        for k, y in enumerate(part.levels, start=1):
            if y > g:
                return k
        return None
    k = 1
    while part.level(k) <= g:
        k += 1
    return k


def _crossing_series(spec: EquationSpec) -> SeriesSpec | None:
    c, drift = spec.coefficients, spec.coefficients.drift
    if (
        spec.p == 2
        and isinstance(spec.partition.levels, LevelRule)
        and isinstance(c.diffusions, PowerLawDiffusions)
        and isinstance(drift, LinearDrift)
        and drift.rate > 0
        and tuple(drift.center) == tuple(spec.z)
        and c.diffusions.exponent > 0
    ):
        h = c.diffusions.scale ** 2 * spec.d / (2.0 * drift.rate)
        return SeriesSpec.crossing(c.diffusions.exponent, spec.partition.levels, h)
    return None


def _growth_series(spec: EquationSpec) -> SeriesSpec | None:
    c = spec.coefficients
    rule = spec.partition.levels
    K_b = c.growth_b()
    if K_b is None or not isinstance(rule, LevelRule):
        return None
    if isinstance(c.diffusions, PowerLawDiffusions) and c.diffusion_growth is None:
        if K_b == 0 and c.diffusions.scale == 0:
            return None
        return SeriesSpec.growth(K_b, abs(c.diffusions.scale) * math.sqrt(spec.d), c.diffusions.exponent, rule)
    if c.growth_sigma(1, spec.d) is None:
        return None

    def term(k):
        return rule.log_ratio(k) / (K_b + c.growth_sigma(k, spec.d) ** 2)

    return SeriesSpec(term, SeriesFamily.GENERIC, label="growth series (declared constants)")


def construct_lifetime(
    spec: EquationSpec,
    engine: Engine = Engine.ANALYTIC,
    n_max: int = 64,
    horizon: float = 100.0,
    sim: SimConfig | None = None,
    T0: float = 0.0,
    rtol: float = 1e-13,
    atol: float = 1e-14,
    threads: int | None = None,
) -> LifetimeReport:
    """Build the solution segment by segment and record ``T_1 < T_2 < ...``.

    ``ANALYTIC`` integrates the second-moment ODE of each regime up to the next
    threshold. ``MONTE_CARLO`` runs the particle system (configured by ``sim``,
    whose horizon is overridden) and interpolates the empirical moment.
    """
    if n_max < 1:
        raise DomainError("n_max must be at least 1")
    evidence: list[str] = []
    if engine is Engine.ANALYTIC:
        times, terminated, notes = _analytic_crossings(spec, n_max, horizon, T0, rtol, atol)
    elif engine is Engine.MONTE_CARLO:
        if sim is None:
            raise DomainError("the Monte Carlo engine needs a SimConfig")
        cfg = SimConfig(sim.N, sim.dt, horizon - T0, sim.seed, sim.record_every, sim.antithetic, T0)
        curve, _ = run(spec, cfg, threads=threads, until_crossings=n_max)
        firsts: dict[int, float] = {}
        for c in curve.crossings:
            if c.direction > 0 and c.k not in firsts:
                firsts[c.k] = c.t
        times = [firsts[k] for k in sorted(firsts)]
        times = [t for i, t in enumerate(times) if i == 0 or t > times[i - 1]]
        terminated = None if len(times) >= n_max else len(times) + 1
        notes = [] if terminated is None else [f"no crossing in horizon after {len(times)} crossings"]
    else:
        raise UnsupportedSpecError(f"unknown engine {engine!r}")
    evidence.extend(notes)

    sums = np.zeros(0)
    verdict, criterion = LifetimeVerdict.INCONCLUSIVE, None
    n_series = max(n_max, 64)
    growth = _growth_series(spec)
    if growth is not None:
        sums, cls, ev = classify_series(growth, n_series)
        evidence.extend(ev)
        if cls is Classification.DIVERGES and growth.family is SeriesFamily.GROWTH:
            verdict, criterion = LifetimeVerdict.INFINITE_LIFETIME_PROVEN_BY, "growth-series"
    if verdict is LifetimeVerdict.INCONCLUSIVE:
        crossing = _crossing_series(spec)
        if crossing is not None:
            sums, cls, ev = classify_series(crossing, n_series)
            evidence.extend(ev)
            if cls is Classification.DIVERGES:
                verdict, criterion = LifetimeVerdict.INFINITE_LIFETIME_PROVEN_BY, "crossing-series"
            elif cls is Classification.CONVERGES:
                verdict = LifetimeVerdict.FINITE_LIFETIME_SUSPECTED
    return LifetimeReport(times, terminated, sums, verdict, criterion, evidence, engine)
