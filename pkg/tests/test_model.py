import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from failsim.errors import DomainError, ValidationError
from failsim.model import (ComponentSpec, CostModel, InitialAges, SystemSpec, ages_from_elapsed_time,
                           clamp_probability, failed_at_start, no_hard_failure_prob, system_violations,
                           validate_system)
from failsim.stochastic import FacilitationParams, GammaProcessParams, NormalParams


def _comp(D=40.0, w_mean=10.0, w_std=5.0, H=5.0, name="spool"):
    return ComponentSpec(name, H, D, GammaProcessParams(0.5, 1.2), NormalParams(w_mean, w_std), NormalParams(0.5, 0.1))


def test_hard_failure_spool():
    assert no_hard_failure_prob(_comp()) == pytest.approx(1 - 9.866e-10, abs=1e-13)
    assert 1 - no_hard_failure_prob(_comp()) == pytest.approx(0.5 * math.erfc(6 / math.sqrt(2)), rel=1e-3)


def test_hard_failure_symmetric():
    assert no_hard_failure_prob(_comp(D=10.0)) == 0.5


def test_hard_failure_sleeve_clamped():
    # Phi(31/3) is below 1 by < 1e-23, under the clamp
    assert no_hard_failure_prob(_comp(D=45.0, w_mean=14.0, w_std=3.0, H=6.0)) == 1.0


def test_normal_std_must_be_positive():
    with pytest.raises(DomainError):
        NormalParams(10.0, 0.0)


def test_clamp_probability():
    assert clamp_probability(1e-16) == 0.0 and clamp_probability(1 - 1e-16) == 1.0
    assert clamp_probability(0.3) == 0.3


@given(st.floats(-50, 80), st.floats(-50, 80), st.floats(-20, 40), st.floats(0.1, 10))
def test_hard_failure_monotone(d1, d2, mu, sd):
    lo, hi = sorted((d1, d2))
    p_lo = no_hard_failure_prob(_comp(D=max(lo, 1e-3), w_mean=mu, w_std=sd))
    p_hi = no_hard_failure_prob(_comp(D=max(hi, 1e-3), w_mean=mu, w_std=sd))
    assert 0.0 <= p_lo <= p_hi <= 1.0


@given(st.floats(-20, 40), st.floats(-20, 40), st.floats(0.1, 10))
def test_hard_failure_nonincreasing_in_mean(m1, m2, sd):
    lo, hi = sorted((m1, m2))
    assert no_hard_failure_prob(_comp(w_mean=hi, w_std=sd)) <= no_hard_failure_prob(_comp(w_mean=lo, w_std=sd))


def test_validate_table1(servo):
    b = validate_system(servo.system, InitialAges((0.0, 0.0)), servo.costs)
    assert b.warnings == ()


def test_validate_dimension_mismatch(servo):
    with pytest.raises(ValidationError) as err:
        validate_system(servo.system, InitialAges((0.0, 0.0, 0.0)), servo.costs)
    assert any(p == "ages.u" and "dimension" in m for p, m in err.value.violations)


def test_validate_negative_threshold(servo):
    bad = SystemSpec((_comp(H=-1.0), servo.system.components[1]), servo.system.shock_model)
    violations = system_violations(bad, servo.ages, servo.costs)
    assert ("components[0].H" in [p for p, _ in violations])


def test_validate_reports_every_violation(servo):
    bad = SystemSpec((_comp(H=-1.0, D=-2.0), servo.system.components[1]), servo.system.shock_model, "bogus")
    paths = {p for p, _ in system_violations(bad, InitialAges((math.nan, 0.0)), CostModel(-1.0, 0.0, 0.0))}
    assert {"components[0].H", "components[0].D", "system.mode", "components[0].u", "costs.c_i"} <= paths


def test_validation_idempotent(servo):
    a = validate_system(servo.system, servo.ages, servo.costs)
    b = validate_system(a.system, a.ages, a.costs)
    assert a == b and a.system is servo.system


def test_failed_at_start_warning(servo):
    ages = InitialAges((5.0, 0.0))
    assert failed_at_start(servo.system, ages) == [0]
    assert validate_system(servo.system, ages, servo.costs).warnings


def test_shock_model_domain():
    with pytest.raises(DomainError):
        FacilitationParams(0.0, 0.2, 0.0)
    with pytest.raises(DomainError):
        FacilitationParams(1e-5, -0.1, 0.0)


def test_poisson_mode_ignores_dependence(servo):
    sm = servo.system.with_mode("poisson").effective_shock_model
    assert (sm.eta, sm.gamma) == (0.0, 0.0)
    assert servo.system.effective_shock_model == servo.system.shock_model


def test_ages_from_elapsed_time(servo):
    a = ages_from_elapsed_time(servo.system, (1e4, 2e4))
    assert a.u == pytest.approx((0.5 / 1.2, 2 * 0.2 / 1.6))
