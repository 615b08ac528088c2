"""Command line entry point: ``mvswitch <subcommand> ...``.

CSV goes to ``--output`` (or stdout); the summary/verdict line is always the
last line on stdout. Exit codes: 0 ok, 2 invalid input, 3 unsupported spec,
4 numerical blow-up.
"""

from __future__ import annotations

import argparse
import re
import sys
from pathlib import Path

from . import lifetime as lt
from .config import PRESETS, load_spec
from .curve import fmt
from .errors import BlowUp, DomainError, PreconditionError, SpecError, UnsupportedSpecError
from .model import LevelRule, Side
from .moment import check_nonexistence, regime_moment_functions, require_time_only_p2, solve_moment_equation
from .oscillation import OscillationSchedule, band_grid, kappa, verify_collapse_bound
from .simulate import SimConfig, run

EXIT_OK, EXIT_INVALID, EXIT_UNSUPPORTED, EXIT_BLOWUP = 0, 2, 3, 4


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def parse_levels(text: str) -> LevelRule:
    """``k``, ``k^q``, ``c*k^q`` or ``factorial`` (meaning ``(k!)^k``)."""
    t = text.replace(" ", "")
    if t in ("factorial", "(k!)^k"):
        return LevelRule("factorial_power")
    m = re.fullmatch(r"(?:([0-9.eE+-]+)\*)?k(?:\^([0-9.eE+-]+))?", t)
    if not m:
        raise DomainError(f"cannot parse level sequence {text!r}; use k, k^q, c*k^q or factorial")
    return LevelRule("power", float(m.group(1) or 1.0), float(m.group(2) or 1.0))


def _spec_arg(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("--spec", required=required, help=f"YAML spec file or preset ({', '.join(PRESETS)})")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mvswitch", description="Moment-switched mean-field SDE toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="particle-system Monte Carlo")
    _spec_arg(p)
    p.add_argument("--N", type=int, default=10_000)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--horizon", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--record-every", type=int, default=1)
    p.add_argument("--antithetic", action="store_true")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--output")

    p = sub.add_parser("moment-ode", help="deterministic moment equation (p = 2, time-only coefficients)")
    _spec_arg(p)
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--horizon", type=float, default=2.0, help="end time")
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--output")

    p = sub.add_parser("lifetime", help="crossing times and lifetime verdict")
    _spec_arg(p)
    p.add_argument("--engine", choices=["analytic", "monte-carlo"], default="analytic")
    p.add_argument("--n-max", type=int, default=64)
    p.add_argument("--horizon", type=float, default=100.0)
    p.add_argument("--N", type=int, default=100_000)
    p.add_argument("--dt", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--output")

    p = sub.add_parser("oscillation", help="collapse times of the dyadic oscillation")
    p.add_argument("--s", type=float, nargs="+", action="extend", help="restart times in (0, 1/2)")
    p.add_argument("--bands", default="2:12", help="band range lo:hi when --s is not given")
    p.add_argument("--per-band", type=int, default=50)
    p.add_argument("--dt-factor", type=float, default=1 / 64, help="dt as a fraction of D_kappa(s)")
    p.add_argument("--alpha", type=float, default=0.25)
    p.add_argument("--output")

    p = sub.add_parser("check-nonexistence", help="window test at a threshold")
    _spec_arg(p)
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--eps", type=float, default=1e-2)
    p.add_argument("--samples", type=int, default=257)

    p = sub.add_parser("series", help="classify a lifetime series")
    p.add_argument("--family", choices=["example26", "condition23"], required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--y", default="k", help="k, k^q, c*k^q or factorial")
    p.add_argument("--kb", type=float, default=1.0, help="drift growth constant (condition23)")
    p.add_argument("--k-scale", type=float, default=1.0, help="K_k = k_scale * k^alpha (condition23)")
    p.add_argument("--n-max", type=int, default=64)
    p.add_argument("--threshold", type=float, default=1e3)
    return ap


def _simulate(a) -> None:
    spec = load_spec(a.spec)
    cfg = SimConfig(a.N, a.dt, a.horizon, a.seed, a.record_every, a.antithetic, a.t0)
    try:
        curve, ens = run(spec, cfg, threads=a.threads)
    except BlowUp as exc:
        if a.output and exc.partial is not None:
            Path(a.output).write_text(exc.partial.to_csv())
        raise
    _emit(curve.to_csv(), a.output)
    print(f"t={fmt(ens.t)} g={fmt(curve.g_values[-1])} stderr={fmt(curve.stderr[-1])} crossings={len(curve.crossings)}")


def _moment(a) -> None:
    spec = load_spec(a.spec)
    curve, verdict = solve_moment_equation(spec, T0=a.t0, horizon=a.horizon, dt=a.dt)
    if a.output:
        _emit(curve.to_csv(), a.output)
    for line in verdict.evidence:
        print(f"# {line}", file=sys.stderr)
    print(verdict.record())


def _lifetime(a) -> None:
    spec = load_spec(a.spec)
    if a.engine == "analytic":
        report = lt.construct_lifetime(spec, lt.Engine.ANALYTIC, a.n_max, a.horizon)
    else:
        sim = SimConfig(a.N, a.dt, a.horizon, a.seed)
        report = lt.construct_lifetime(spec, lt.Engine.MONTE_CARLO, a.n_max, a.horizon, sim=sim, threads=a.threads)
    _emit(report.to_csv(), a.output)
    print(report.record())


def _oscillation(a) -> None:
    sched = OscillationSchedule(alpha=a.alpha)
    if a.s:
        grid = list(a.s)
    else:
        lo, hi = (int(v) for v in a.bands.split(":"))
        grid = [s for k in range(lo, hi + 1) for s in band_grid(k, a.per_band)]
    for s in grid:
        if kappa(s) <= 1:
            raise DomainError(f"s={s} has kappa(s) <= 1; the collapse bound needs s < 1/2")
    report = verify_collapse_bound(sched, grid, a.dt_factor)
    _emit(report.to_csv(), a.output)
    ratios = report.decay_ratios()
    worst = max(abs(r.m_numeric - r.m_formula) for r in report.rows)
    tail = f" max_decay_ratio={fmt(max(ratios))}" if ratios else ""
    status = "PASS" if report.all_bounded else "FAIL"
    print(f"collapse={status} rows={len(report.rows)} max_numeric_error={fmt(worst)}{tail}")


def _nonexistence(a) -> None:
    spec = load_spec(a.spec)
    require_time_only_p2(spec)
    if spec.partition.n_regimes != 2 or len(spec.partition.levels) != 1:
        raise UnsupportedSpecError("the window test needs exactly one threshold and two regimes")
    gmf = regime_moment_functions(spec, a.t0)
    verdict = check_nonexistence(gmf, a.t0, a.eps, spec.partition.side(1), a.samples)
    for line in verdict.evidence:
        print(f"# {line}", file=sys.stderr)
    print(verdict.record())


def _series(a) -> None:
    levels = parse_levels(a.y)
    if a.family == "example26":
        series = lt.SeriesSpec.crossing(a.alpha, levels)
    else:
        series = lt.SeriesSpec.growth(a.kb, a.k_scale, a.alpha, levels)
    sums, cls, evidence = lt.classify_series(series, a.n_max, a.threshold)
    for line in evidence:
        print(f"# {line}", file=sys.stderr)
    print(f"classification={cls.value}")


_DISPATCH = {
    "simulate": _simulate,
    "moment-ode": _moment,
    "lifetime": _lifetime,
    "oscillation": _oscillation,
    "check-nonexistence": _nonexistence,
    "series": _series,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        _DISPATCH[args.command](args)
    except UnsupportedSpecError as exc:
        print(f"mvswitch: unsupported: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except (SpecError, DomainError, PreconditionError) as exc:
        print(f"mvswitch: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except BlowUp as exc:
        print(f"mvswitch: blow-up at step {exc.step_index} (t={fmt(exc.t)})", file=sys.stderr)
        return EXIT_BLOWUP
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
