import math

import numpy as np
import pytest

from mvswitch.config import dyadic_oscillation, ladder_preset, point_cell_preset, switch_from_one, switch_from_zero
from mvswitch.errors import DomainError, PreconditionError, UnsupportedSpecError
from mvswitch.model import (
    ConstantDiffusion,
    ConstantDrift,
    EquationSpec,
    InitialLaw,
    RegimeCoefficients,
    Side,
    ThresholdPartition,
)
from mvswitch.moment import (
    RegimeMomentFunctions,
    VerdictKind,
    check_all_windows,
    check_nonexistence,
    increment_identity_check,
    moment_equation_residual,
    nonunique_moment_family,
    regime_moment_functions,
    solve_moment_equation,
)

S0 = math.sqrt(2.0) - 1.0


def two_regime_spec(s1, s2, b, x0, side=Side.UPPER, y=1.0):
    z = (0.0,)
    return EquationSpec(
        2.0, z, ThresholdPartition((y,), (side,)),
        RegimeCoefficients((ConstantDiffusion(s1), ConstantDiffusion(s2)), ConstantDrift((b,))),
        InitialLaw.dirac((x0,), z),
    )


def test_regime_functions_closed_form():
    gmf = regime_moment_functions(switch_from_one(), 0.0)
    for t in (0.0, 0.3, 1.7):
        assert gmf.g1(t) == pytest.approx(1 + t * t, abs=1e-14)
        assert gmf.g2(t) == pytest.approx((1 - t) ** 2, abs=1e-14)


def test_regime_functions_from_later_start():
    gmf = regime_moment_functions(switch_from_one(), 0.4)
    assert gmf.g1(0.4) == gmf.g2(0.4) == 1.0
    assert gmf.g1(0.9) == pytest.approx(1 + 0.25, abs=1e-14)


def test_pure_diffusion_is_linear():
    gmf = regime_moment_functions(two_regime_spec(1.0, 0.0, 0.0, 0.5), 0.0)
    assert gmf.g1(0.7) == pytest.approx(0.25 + 0.7)


@pytest.mark.parametrize("T0", [0.0, 0.1, 0.3, 1.5])
def test_switch_from_one_has_no_solution(T0):
    _, v = solve_moment_equation(switch_from_one(), T0=T0, horizon=T0 + 1.0)
    assert v.kind is VerdictKind.NO_SOLUTION
    assert v.case == "A"
    assert v.t == T0


def test_switch_from_zero_passes_s0():
    curve, v = solve_moment_equation(switch_from_zero(), 0.0, horizon=2.0)
    assert v.kind is VerdictKind.SOLVED and v.t == 2.0
    c = curve.first_crossing(1)
    assert c.t == pytest.approx(S0, abs=1e-12)
    for t in (0.6, 1.0, 1.9):
        assert curve.value_at(t) == pytest.approx(1 - S0 * S0 + t * t, abs=1e-9)


def test_mean_matters_at_same_second_moment():
    z = (0.0,)
    shifted = switch_from_one().replace(initial=InitialLaw.from_moments((1 - math.sqrt(2.0),), 1.0, z))
    _, v = solve_moment_equation(shifted, T0=S0, horizon=2.0)
    assert v.kind is VerdictKind.SOLVED
    gmf = regime_moment_functions(shifted, S0)
    assert check_nonexistence(gmf, S0, 0.5).kind is VerdictKind.INCONCLUSIVE


def test_lower_owned_threshold_gives_case_b():
    spec = two_regime_spec(1.0, 0.0, 0.0, 1.0, side=Side.LOWER)
    _, v = solve_moment_equation(spec, 0.0, 1.0)
    assert (v.kind, v.case) == (VerdictKind.NO_SOLUTION, "B")


def test_frozen_equation_is_solved():
    curve, v = solve_moment_equation(two_regime_spec(0.0, 0.0, 0.0, 0.5), 0.0, 1.0)
    assert v.kind is VerdictKind.SOLVED
    assert np.all(curve.g_values == 0.25)


def test_oscillation_has_no_solution_near_zero():
    _, v = solve_moment_equation(dyadic_oscillation(), 0.0, horizon=0.7, dt=1e-4)
    assert v.kind is VerdictKind.NO_SOLUTION
    assert v.t < 0.01


def test_point_cell_is_nonunique():
    curve, v = solve_moment_equation(point_cell_preset(), 0.0, 2.0)
    assert v.kind is VerdictKind.SOLVED
    assert any("non-unique" in e for e in v.evidence)
    assert curve.value_at(0.25) == pytest.approx(1.25)


class TestNonexistenceWindow:
    def test_case_a(self):
        gmf = regime_moment_functions(switch_from_one(), 0.0)
        v = check_nonexistence(gmf, 0.0, 0.5)
        assert (v.kind, v.case) == (VerdictKind.NO_SOLUTION, "A")

    def test_constant_functions_inconclusive(self):
        gmf = RegimeMomentFunctions((lambda t: 1.0, lambda t: 1.0))
        assert check_nonexistence(gmf, 0.0, 1.0).kind is VerdictKind.INCONCLUSIVE

    def test_bad_eps(self):
        gmf = regime_moment_functions(switch_from_one(), 0.0)
        with pytest.raises(DomainError):
            check_nonexistence(gmf, 0.0, 0.0)

    def test_mismatched_start(self):
        gmf = RegimeMomentFunctions((lambda t: 1.0, lambda t: 2.0))
        with pytest.raises(PreconditionError):
            check_nonexistence(gmf, 0.0, 1.0)


class TestIncrementIdentity:
    def test_all_windows_of_solved_curve(self):
        spec = switch_from_zero()
        curve, _ = solve_moment_equation(spec, 0.0, 2.0)
        assert check_all_windows(curve, regime_moment_functions(spec, 0.0)) >= 2

    def test_pre_crossing_window(self):
        spec = switch_from_zero()
        curve, _ = solve_moment_equation(spec, 0.0, 2.0)
        assert increment_identity_check(curve, regime_moment_functions(spec, 0.0), 0.0, 0.4)

    def test_straddling_window_refused(self):
        spec = switch_from_zero()
        curve, _ = solve_moment_equation(spec, 0.0, 2.0)
        with pytest.raises(PreconditionError):
            increment_identity_check(curve, regime_moment_functions(spec, 0.0), 0.0, 1.0)


def test_unattained_threshold_leaves_curve_unchanged():
    spec = switch_from_zero()
    extra = spec.replace(partition=spec.partition.with_point(50.0, 1))
    a, _ = solve_moment_equation(spec, 0.0, 2.0)
    b, _ = solve_moment_equation(extra, 0.0, 2.0)
    np.testing.assert_array_equal(a.g_values, b.g_values)
    np.testing.assert_array_equal(a.regime_trace, b.regime_trace)


def test_unsupported_specs():
    with pytest.raises(UnsupportedSpecError):
        solve_moment_equation(ladder_preset(), 0.0, 1.0)
    with pytest.raises(UnsupportedSpecError):
        solve_moment_equation(switch_from_one().replace(p=3.0), 0.0, 1.0)


def test_bad_horizon():
    with pytest.raises(DomainError):
        solve_moment_equation(switch_from_one(), 1.0, 0.5)


class TestNonuniqueFamily:
    def test_values(self):
        g = nonunique_moment_family(0.5, 0.25)
        assert [g(0.25), g(0.6), g(1.0)] == [1.25, 1.5, 1.75]

    @pytest.mark.parametrize("w", [0.0, 0.25, 1.0])
    def test_every_member_solves_the_equation(self, w):
        g = nonunique_moment_family(0.5, w)
        assert moment_equation_residual(point_cell_preset(0.5), g, 0.0, 2.0) < 1e-9

    def test_wrong_curve_has_residual(self):
        assert moment_equation_residual(point_cell_preset(0.5), lambda t: 1 + 2 * t, 0.0, 1.0) > 0.5
