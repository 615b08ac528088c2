"""Interacting-particle Euler-Maruyama scheme for switched mean-field SDEs.

Every step reads the empirical moment ``g = mean |X^j - z|^p`` of the current
ensemble, picks the regime whose cell contains it, and moves each particle by
``sigma_i dB + b dt``. Gaussian increments come from Philox streams keyed by
``(seed, chunk, step)`` and moment sums are combined over a fixed tree of
fixed-size chunks, so results are bit-identical for any thread count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .curve import Crossing, MomentCurve, Provenance
from .errors import BlowUp, DomainError, SpecError
from .model import EquationSpec, validate

CHUNK = 8192
THREADS_ENV = "MVSWITCH_THREADS"
_INIT_STEP = 2**64 - 1


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class SimConfig:
    N: int
    dt: float
    horizon: float
    seed: int = 0
    record_every: int = 1
    antithetic: bool = False
    t0: float = 0.0

    def __post_init__(self):
        if self.N < 1:
            raise DomainError("N must be at least 1")
        if not self.dt > 0:
            raise DomainError("dt must be positive")
        if not self.horizon >= 0:
            raise DomainError("horizon must be nonnegative")
        if self.record_every < 1:
            raise DomainError("record_every must be at least 1")


@dataclass
class ParticleEnsemble:
    positions: np.ndarray  # (N, d)
    t: float
    seed: int
    step_index: int = 0
    antithetic: bool = False

    @property
    def N(self) -> int:
        return self.positions.shape[0]

    def snapshot(self) -> ParticleEnsemble:
        pos = self.positions.copy()
        pos.setflags(write=False)
        return ParticleEnsemble(pos, self.t, self.seed, self.step_index, self.antithetic)


def stream(seed: int, chunk: int, step: int) -> np.random.Generator:
    """Counter-based generator for one (seed, chunk, step) triple."""
    counter = np.array([0, 0, chunk, step % 2**64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=seed % 2**128, counter=counter))


def _chunks(n: int) -> list[tuple[int, int]]:
    return [(lo, min(lo + CHUNK, n)) for lo in range(0, n, CHUNK)]


def tree_sum(values) -> float:
    """Pairwise sum in a fixed order that depends only on ``len(values)``."""
    vals = [float(v) for v in values]
    if not vals:
        return 0.0
    while len(vals) > 1:
        nxt = [vals[i] + vals[i + 1] for i in range(0, len(vals) - 1, 2)]
        if len(vals) % 2:
            nxt.append(vals[-1])
        vals = nxt
    return vals[0]


def _radial(x: np.ndarray, z: np.ndarray, p: float) -> np.ndarray:
    diff = x - z
    r2 = np.einsum("ij,ij->i", diff, diff)
    return r2 if p == 2 else r2 ** (p / 2)


def initial_ensemble(spec: EquationSpec, cfg: SimConfig) -> ParticleEnsemble:
    pos = np.empty((cfg.N, spec.d))
    for c, (lo, hi) in enumerate(_chunks(cfg.N)):
        pos[lo:hi] = spec.initial.sample(stream(cfg.seed, c, _INIT_STEP), hi - lo)
    return ParticleEnsemble(pos, cfg.t0, cfg.seed, 0, cfg.antithetic)


class _Stepper:
    """Owns the ensemble during a run; keeps per-chunk radial moments."""

    def __init__(self, ens: ParticleEnsemble, spec: EquationSpec, threads: int):
        self.ens = ens
        self.spec = spec
        self.z = np.asarray(spec.z, dtype=float)
        self.chunks = _chunks(ens.N)
        self.pool = ThreadPoolExecutor(threads) if threads > 1 and len(self.chunks) > 1 else None
        self.radial = [None] * len(self.chunks)
        self._map(self._radial_only)

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()

    def _map(self, fn):
        idx = range(len(self.chunks))
        return list(self.pool.map(fn, idx)) if self.pool is not None else [fn(c) for c in idx]

    def _radial_only(self, c):
        lo, hi = self.chunks[c]
        self.radial[c] = _radial(self.ens.positions[lo:hi], self.z, self.spec.p)

    def moment(self) -> float:
        return tree_sum(np.sum(r) for r in self.radial) / self.ens.N

    def stderr(self, g: float) -> float:
        n = self.ens.N
        if n < 2:
            return math.nan
        ss = tree_sum(np.sum((r - g) ** 2) for r in self.radial)
        return math.sqrt(ss / (n - 1)) / math.sqrt(n)

    def advance(self, dt: float, g: float) -> None:
        ens, spec = self.ens, self.spec
        regime = spec.partition.regime_of(g)
        sigma = spec.coefficients.diffusion(regime)
        drift = spec.coefficients.drift
        t, step = ens.t, ens.step_index
        quiet = sigma.is_zero_at(t)
        sq = math.sqrt(dt)

        def work(c):
            lo, hi = self.chunks[c]
            x = ens.positions[lo:hi]
            incr = np.asarray(drift.evaluate(t, x, g), dtype=float) * dt
            if not quiet:
                rng = stream(ens.seed, c, step)
                n = hi - lo
                if ens.antithetic:
                    half = rng.standard_normal(((n + 1) // 2, x.shape[1]))
                    normals = np.concatenate([half, -half])[:n]
                else:
                    normals = rng.standard_normal((n, x.shape[1]))
                incr = sigma.apply(t, x, g, sq * normals) + incr
            x += incr
            self.radial[c] = _radial(x, self.z, spec.p)
            return bool(np.all(np.isfinite(x)))

        ok = self._map(work)
        ens.step_index = step + 1
        ens.t = t + dt
        if not all(ok):
            raise BlowUp(ens.step_index, ens.t)


def estimate_moment(ensemble: ParticleEnsemble, z, p: float, with_stderr: bool = True):
    """Sample mean of ``|X^j - z|^p`` and its standard error."""
    n = ensemble.N
    if with_stderr and n < 2:
        raise DomainError("standard error needs at least two particles")
    zz = np.asarray(z, dtype=float)
    radial = [_radial(ensemble.positions[lo:hi], zz, p) for lo, hi in _chunks(n)]
    g = tree_sum(np.sum(r) for r in radial) / n
    if not with_stderr:
        return g, math.nan
    ss = tree_sum(np.sum((r - g) ** 2) for r in radial)
    return g, math.sqrt(ss / (n - 1)) / math.sqrt(n)


def step(ensemble: ParticleEnsemble, spec: EquationSpec, dt: float, threads: int | None = None) -> ParticleEnsemble:
    """One Euler-Maruyama step; returns a new ensemble and leaves the input untouched."""
    if not dt > 0:
        raise DomainError("dt must be positive")
    ens = ParticleEnsemble(ensemble.positions.copy(), ensemble.t, ensemble.seed, ensemble.step_index, ensemble.antithetic)
    stepper = _Stepper(ens, spec, threads or default_threads())
    try:
        g = stepper.moment()
        if not math.isfinite(g):
            raise BlowUp(ens.step_index, ens.t)
        stepper.advance(dt, g)
    finally:
        stepper.close()
    return ens


def run(
    spec: EquationSpec,
    cfg: SimConfig,
    threads: int | None = None,
    until_crossings: int | None = None,
) -> tuple[MomentCurve, ParticleEnsemble]:
    """Simulate on ``[t0, t0 + horizon]`` and record the empirical moment curve.

    Crossing times are located by linear interpolation of the empirical
    moment between consecutive steps. With ``until_crossings`` the run stops
    early once that many distinct thresholds have been crossed upwards.
    """
    problems = validate(spec)
    if problems:
        raise SpecError("; ".join(problems))
    threads = threads or default_threads()
    ens = initial_ensemble(spec, cfg)
    n_steps = int(round(cfg.horizon / cfg.dt))
    part = spec.partition
    times, gs, ses, regimes, crossings = [], [], [], [], []
    reached: set[int] = set()

    def curve():
        return MomentCurve(times, gs, regimes, ses, list(crossings), Provenance.EMPIRICAL)

    stepper = _Stepper(ens, spec, threads)
    try:
        g = stepper.moment()

        def record(g):
            times.append(ens.t)
            gs.append(g)
            ses.append(stepper.stderr(g) if ens.N > 1 else 0.0)
            regimes.append(part.regime_of(g))

        if not math.isfinite(g):
            raise BlowUp(0, ens.t, partial=curve(), ensemble=ens)
        record(g)
        for i in range(n_steps):
            t_prev = ens.t
            try:
                stepper.advance(cfg.dt, g)
            except BlowUp as exc:
                raise BlowUp(exc.step_index, exc.t, partial=curve(), ensemble=ens) from None
            ens.t = cfg.t0 + (i + 1) * cfg.dt
            g_new = stepper.moment()
            if not math.isfinite(g_new):
                raise BlowUp(ens.step_index, ens.t, partial=curve(), ensemble=ens)
            up = g_new > g
            for k, y in part.thresholds_between(min(g, g_new), max(g, g_new)):
                if not up and y == g:
                    continue
                frac = (y - g) / (g_new - g)
                crossings.append(Crossing(t_prev + frac * cfg.dt, k, 1 if up else -1))
                if up:
                    reached.add(k)
            g = g_new
            last = i == n_steps - 1
            done = until_crossings is not None and len(reached) >= until_crossings
            if (i + 1) % cfg.record_every == 0 or last or done:
                record(g)
            if done:
                break
    finally:
        stepper.close()
    return curve(), ens
