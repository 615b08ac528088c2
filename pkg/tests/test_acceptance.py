"""End-to-end acceptance checks; a per-criterion PASS/FAIL line is printed in the summary."""

import math
import time

import numpy as np
import pytest

from mvswitch.config import ladder_preset, point_cell_preset, switch_from_one, switch_from_zero
from mvswitch.lifetime import (
    Classification,
    Engine,
    LifetimeVerdict,
    SeriesSpec,
    analytic_moment_curve,
    classify_series,
    construct_lifetime,
    ladder_crossing_times,
    partial_sums,
    telescoped_growth_sum,
)
from mvswitch.metrics import coupling_inequality_check
from mvswitch.model import LevelRule, dyadic_a, dyadic_delta
from mvswitch.moment import (
    VerdictKind,
    check_all_windows,
    moment_equation_residual,
    nonunique_moment_family,
    regime_moment_functions,
    solve_moment_equation,
)
from mvswitch.oscillation import OscillationSchedule, band_grid, verify_collapse_bound
from mvswitch.simulate import CHUNK, SimConfig, run

LINEAR = LevelRule("power", 1.0, 1.0)
FACTORIAL = LevelRule("factorial_power")
S0 = math.sqrt(2.0) - 1.0


class Clock:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.start


def note(record_property, text):
    record_property("detail", text)


@pytest.mark.acceptance(1)
def test_nonunique_family_values(record_property):
    with Clock() as clock:
        g = nonunique_moment_family(0.5, 0.25)
        got = [g(0.25), g(0.6), g(1.0)]
        residual = moment_equation_residual(point_cell_preset(0.5), g, 0.0, 2.0)
    err = max(abs(a - b) for a, b in zip(got, [1.25, 1.5, 1.75]))
    note(record_property, f"max_err={err:.1e} residual={residual:.1e}")
    assert err <= 1e-12
    assert residual < 1e-9
    assert clock.seconds < 1.0


@pytest.mark.acceptance(2)
def test_ode_engine_matches_recursion(record_property):
    with Clock() as clock:
        report = construct_lifetime(ladder_preset(), Engine.ANALYTIC, n_max=10)
    closed = ladder_crossing_times(1.0, range(1, 11), 0.5)
    err = float(np.max(np.abs(np.asarray(report.crossing_times) - closed)))
    note(record_property, f"max|T_n - closed|={err:.1e}")
    assert len(report.crossing_times) == 10
    assert err <= 1e-6
    assert clock.seconds < 1.0


@pytest.mark.acceptance(3)
def test_series_verdicts(record_property):
    with Clock() as clock:
        verdicts = [
            classify_series(SeriesSpec.crossing(0.5, LINEAR))[1],
            classify_series(SeriesSpec.crossing(1.0, LINEAR))[1],
            classify_series(SeriesSpec.growth(1.0, 1.0, 1.0, FACTORIAL))[1],
        ]
    note(record_property, " ".join(v.value for v in verdicts))
    assert verdicts == [Classification.DIVERGES, Classification.CONVERGES, Classification.DIVERGES]
    assert clock.seconds < 1.0


@pytest.mark.acceptance(4)
@pytest.mark.parametrize("K_b,K", [(1.0, 1.0), (0.5, 2.0), (3.0, 0.0)])
def test_telescoping(record_property, K_b, K):
    N = 100_000
    with Clock() as clock:
        s = partial_sums(SeriesSpec.growth(K_b, K, 0.0, LINEAR), N)[-1]
    closed = telescoped_growth_sum(LINEAR, K_b, K, N)
    assert closed == pytest.approx(math.log(N) / (K_b + K * K), rel=1e-15)
    note(record_property, f"err={abs(s - closed):.1e}")
    assert abs(s - closed) <= 1e-12
    assert clock.seconds < 1.0


@pytest.mark.acceptance(5)
def test_nonexistence_verdicts(record_property):
    with Clock() as clock:
        for T0 in (0.0, 0.1, 0.3):
            _, v = solve_moment_equation(switch_from_one(), T0=T0, horizon=T0 + 1.0)
            assert (v.kind, v.case, v.t) == (VerdictKind.NO_SOLUTION, "A", T0)
        curve, v = solve_moment_equation(switch_from_zero(), 0.0, horizon=2.0)
    assert v.kind is VerdictKind.SOLVED and v.t == 2.0
    c = curve.first_crossing(1)
    assert c is not None and c.t == pytest.approx(S0, abs=1e-12)
    assert curve.times[-1] == 2.0 and curve.times[-1] > S0
    note(record_property, f"crossing at {c.t:.15f}")
    assert clock.seconds < 1.0


@pytest.mark.acceptance(6)
def test_oscillation_collapse(record_property):
    schedule = OscillationSchedule()
    grid = [s for k in range(2, 13) for s in band_grid(k, 50)]
    with Clock() as clock:
        report = verify_collapse_bound(schedule, grid, dt_factor=1 / 64)
    worst = 0.0
    for row in report.rows:
        dt = dyadic_delta(row.kappa) / 64
        assert abs(row.m_numeric - row.m_formula) <= 2 * dt
        assert row.m_numeric <= dyadic_a(row.kappa) + 9 * dyadic_delta(row.kappa)
        worst = max(worst, abs(row.m_numeric - row.m_formula) / dt)
    ratios = report.decay_ratios()
    note(record_property, f"rows={len(report.rows)} worst={worst:.1e}dt max_ratio={max(ratios):.4f} {clock.seconds:.2f}s")
    assert len(report.rows) == 550
    assert report.all_bounded
    assert max(ratios) <= 0.51
    assert clock.seconds < 10.0


@pytest.mark.acceptance(7)
def test_canonical_point_cell_solution(record_property):
    with Clock() as clock:
        curve, _ = run(point_cell_preset(), SimConfig(100_000, 1e-3, 1.0, seed=7, record_every=50))
    zs = []
    for t in (0.25, 0.5, 1.0):
        i = int(np.argmin(np.abs(curve.times - t)))
        assert curve.times[i] == pytest.approx(t)
        zs.append((curve.g_values[i] - (1 + t)) / curve.stderr[i])
    note(record_property, "z=" + ",".join(f"{z:+.2f}" for z in zs) + f" {clock.seconds:.1f}s")
    assert all(abs(z) <= 3 for z in zs)
    assert clock.seconds < 30.0


@pytest.mark.acceptance(7)
def test_monte_carlo_first_crossing(record_property):
    exact = 0.5 * math.log(1.5)
    with Clock() as clock:
        report = construct_lifetime(
            ladder_preset(), Engine.MONTE_CARLO, n_max=1, horizon=0.5, sim=SimConfig(100_000, 1e-4, 0.5, seed=7)
        )
    rel = abs(report.crossing_times[0] - exact) / exact
    note(record_property, f"T_1 rel_err={rel:.2%} {clock.seconds:.1f}s")
    assert rel <= 0.05
    assert clock.seconds < 30.0


@pytest.mark.acceptance(8)
def test_strong_drift_monotone(record_property):
    with Clock() as clock:
        for alpha in (0.25, 0.5, 1.0, 2.0):
            curve = analytic_moment_curve(ladder_preset(alpha=alpha), n_max=30)
            assert np.all(np.diff(curve.times) >= 0)
            assert np.all(np.diff(curve.g_values) >= 0)
    assert clock.seconds < 5.0


@pytest.mark.acceptance(8)
def test_increment_identity_on_solved_windows(record_property):
    checked = 0
    with Clock() as clock:
        for spec in (switch_from_zero(), point_cell_preset(), point_cell_preset(0.5)):
            curve, v = solve_moment_equation(spec, 0.0, 2.0)
            assert v.kind is VerdictKind.SOLVED
            checked += check_all_windows(curve, regime_moment_functions(spec, 0.0))
    note(record_property, f"windows={checked}")
    assert checked >= 4
    assert clock.seconds < 5.0


@pytest.mark.acceptance(8)
def test_null_regime_invariance(record_property):
    spec = point_cell_preset()
    unseen = spec.replace(partition=spec.partition.with_point(10.0, 2))
    with Clock() as clock:
        cfg = SimConfig(5000, 1e-2, 1.0, seed=5)
        assert run(spec, cfg)[0].to_csv() == run(unseen, cfg)[0].to_csv()
        base = switch_from_zero()
        extra = base.replace(partition=base.partition.with_point(50.0, 1))
        a, _ = solve_moment_equation(base, 0.0, 2.0)
        b, _ = solve_moment_equation(extra, 0.0, 2.0)
    np.testing.assert_array_equal(a.g_values, b.g_values)
    np.testing.assert_array_equal(a.regime_trace, b.regime_trace)
    assert clock.seconds < 5.0


@pytest.mark.acceptance(8)
def test_thread_count_determinism(record_property):
    cfg = SimConfig(5 * CHUNK + 123, 1e-3, 0.2, seed=13, record_every=10)
    with Clock() as clock:
        outputs = {threads: run(ladder_preset(), cfg, threads=threads)[0].to_csv() for threads in (1, 2, 4)}
    assert outputs[1] == outputs[2] == outputs[4]
    assert clock.seconds < 10.0


@pytest.mark.acceptance(8)
def test_coupling_inequality_datasets(record_property):
    worst = math.inf
    with Clock() as clock:
        for seed in range(1000):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(2, 500))
            p = (1.0, 1.5, 2.0, 3.0)[seed % 4]
            f = rng.normal(size=n)
            g = rng.uniform(-1, 1) * f + rng.standard_t(4, size=n)
            ok, slack = coupling_inequality_check(f, g, p)
            assert ok, f"seed {seed}"
            worst = min(worst, slack)
    note(record_property, f"min_slack={worst:.2e}")
    assert clock.seconds < 5.0
