import math

import numpy as np
import pytest

from mvswitch.errors import DomainError, UnsupportedSpecError
from mvswitch.model import (
    ConstantDiffusion,
    ConstantDrift,
    CutoffSqrtDrift,
    DyadicSwitchDiffusion,
    EquationSpec,
    Family,
    InitialLaw,
    LevelRule,
    LinearDrift,
    PowerLawDiffusions,
    RegimeCoefficients,
    Side,
    ThresholdPartition,
    combine_families,
    validate,
)


def two_regime(y=1.0, side=Side.UPPER):
    return ThresholdPartition((y,), (side,))


class TestPartition:
    def test_upper_side_owns_threshold(self):
        p = two_regime()
        assert p.regime_of(0.0) == 1
        assert p.regime_of(0.999) == 1
        assert p.regime_of(1.0) == 2
        assert p.regime_of(5.0) == 2

    def test_lower_side_owns_threshold(self):
        p = two_regime(side=Side.LOWER)
        assert p.regime_of(1.0) == 1
        assert p.regime_of(np.nextafter(1.0, 2.0)) == 2

    def test_point_cell_with_labels(self):
        p = ThresholdPartition((2.0,), (Side.POINT,), (1, 2, 1))
        assert [p.regime_of(v) for v in (1.0, 2.0, 3.0)] == [1, 2, 1]
        assert p.n_regimes == 2
        assert (p.lower_regime(1), p.upper_regime(1), p.owner_regime(1)) == (1, 1, 2)

    def test_with_point_inserts_cell(self):
        p = two_regime().with_point(0.5, 3)
        assert p.levels == (0.5, 1.0)
        assert [p.regime_of(v) for v in (0.2, 0.5, 0.7, 1.0)] == [1, 3, 1, 2]

    def test_with_point_rejects_existing_threshold(self):
        with pytest.raises(DomainError):
            two_regime().with_point(1.0, 3)

    @pytest.mark.parametrize("bad", [-1.0, math.inf, math.nan])
    def test_regime_of_rejects_bad_values(self, bad):
        with pytest.raises(DomainError):
            two_regime().regime_of(bad)

    def test_infinite_rule_lookup(self):
        p = ThresholdPartition(LevelRule("power", 1.0, 1.0))
        assert p.regime_of(0.5) == 1
        assert p.regime_of(1.0) == 2
        assert p.regime_of(1.5) == 2
        assert p.regime_of(1000.0) == 1001
        assert p.n_regimes is None

    def test_thresholds_between(self):
        p = ThresholdPartition((1.0, 2.0, 3.0))
        assert p.thresholds_between(1.0, 3.0) == [(2, 2.0), (3, 3.0)]
        assert p.thresholds_between(3.0, 1.0) == []
        rule = ThresholdPartition(LevelRule("power", 1.0, 1.0))
        assert [k for k, _ in rule.thresholds_between(0.5, 4.0)] == [1, 2, 3, 4]

    def test_violations(self):
        assert "thresholds not increasing" in ThresholdPartition((2.0, 1.0)).violations()
        assert ThresholdPartition((0.0,)).violations()
        assert ThresholdPartition((1.0, 2.0), labels=(1, 3, 1)).violations()
        assert not two_regime().violations()

    def test_label_count_checked(self):
        with pytest.raises(DomainError):
            ThresholdPartition((1.0,), labels=(1, 2, 1))


class TestLevelRule:
    def test_power_levels(self):
        r = LevelRule("power", 2.0, 2.0)
        assert r.level(3) == 18.0
        assert r.log_ratio(3) == pytest.approx(2 * math.log(1.5), abs=1e-15)

    def test_factorial_levels(self):
        r = LevelRule("factorial_power")
        assert r.level(3) == pytest.approx(216.0)
        assert r.log_ratio(3) == pytest.approx(math.log(216.0 / 4.0), rel=1e-14)
        assert r.level(200) == math.inf
        assert r.label() == "(k!)^k"

    def test_unknown_kind(self):
        with pytest.raises(DomainError):
            LevelRule("exp")


class TestDyadic:
    sigma = DyadicSwitchDiffusion()

    @pytest.mark.parametrize(
        "t,on",
        [(0.75, True), (0.5, False), (0.625, False), (0.875, True), (0.3125, False), (0.3126, True), (0.0, False)],
    )
    def test_membership(self, t, on):
        assert self.sigma.on(t) is on

    def test_right_membership_at_left_endpoint(self):
        assert not self.sigma.on(0.625)
        assert self.sigma.on_right(0.625)
        assert not self.sigma.on_right(0.875)

    def test_on_measure(self):
        assert self.sigma.on_measure(0.0, 1.0) == pytest.approx(sum(2 * 2.0 ** -(n + 2) for n in range(1, 61)))
        assert self.sigma.on_measure(0.6, 0.7) == pytest.approx(0.075)
        assert self.sigma.norm2_integral(0.6, 0.7, 1) == pytest.approx(0.15)


class TestDrift:
    def test_cutoff_integral(self):
        b = CutoffSqrtDrift(0.25)
        assert b.integral(0.0, 0.5) == pytest.approx(math.sqrt(0.5) - 1.0)
        assert b.integral(0.8, 0.9) == 0.0
        assert float(np.asarray(b.value(0.9)).ravel()[0]) == 0.0

    def test_linear_drift_evaluates(self):
        b = LinearDrift(2.0, (1.0,))
        np.testing.assert_allclose(b.evaluate(0.0, np.array([[3.0]]), 0.0), [[4.0]])


def test_power_law_diffusions_are_regime_indexed():
    fam = PowerLawDiffusions(2.0, 0.5)
    assert fam(4).scale == pytest.approx(4.0)
    assert fam.growth(4, 1) == pytest.approx(4.0)


def test_combine_families():
    assert combine_families([Family.CONSTANT, Family.TIME_ONLY]) is Family.TIME_ONLY
    assert combine_families([Family.CONSTANT, Family.LINEAR_STATE]) is Family.LINEAR_STATE
    assert combine_families([Family.CONSTANT]) is Family.CONSTANT


class TestInitialLaw:
    def test_dirac_moments(self):
        law = InitialLaw.dirac((3.0, 4.0), (0.0, 0.0))
        assert law.M0 == 25.0
        assert law.m0 == (3.0, 4.0)

    def test_gaussian_general_p(self):
        law = InitialLaw.gaussian((0.0,), 1.0, (0.0,), p=4.0)
        assert law.M0 == pytest.approx(3.0, rel=1e-12)
        assert law.exact

    def test_jensen_violation(self):
        law = InitialLaw.from_moments((2.0,), 1.0, (0.0,))
        assert law.violations()

    def test_moment_law_needs_p2(self):
        with pytest.raises(UnsupportedSpecError):
            InitialLaw.from_moments((0.0,), 1.0, (0.0,), p=3.0)


def make_spec(**kw):
    z = (0.0,)
    base = dict(
        p=2.0,
        z=z,
        partition=two_regime(),
        coefficients=RegimeCoefficients((ConstantDiffusion(1.0), ConstantDiffusion(0.0)), ConstantDrift((0.0,))),
        initial=InitialLaw.dirac((1.0,), z),
    )
    base.update(kw)
    return EquationSpec(**base)


class TestValidate:
    def test_valid(self):
        assert validate(make_spec()) == []

    def test_p_below_two(self):
        assert any("p < 2" in v for v in validate(make_spec(p=1.5)))

    def test_regime_count_mismatch(self):
        coeffs = RegimeCoefficients((ConstantDiffusion(1.0),), ConstantDrift((0.0,)))
        assert validate(make_spec(coefficients=coeffs))

    def test_dimension_mismatch(self):
        assert validate(make_spec(initial=InitialLaw.dirac((1.0, 0.0), (0.0, 0.0))))
