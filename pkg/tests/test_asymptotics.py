import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from semistable.asymptotics import (
    CLOSED_FORM, CONVERGED, CURVATURE_LIMINF, DELTA_MARGIN, EXCESS_OVER_F, EXCESS_OVER_T, FAILS, GROWTH_EVERY_EPS,
    GROWTH_SUBLINEAR, HOLDS, INCONCLUSIVE, LOG_CONVEXITY, POWER_GROWTH, TANGENT_FOOT, AsymptoticProfile,
    ConditionError, build_profile, check_condition, convex_power_delta, convexity_ratio, estimate_tau, sample_tail,
)
from semistable.nonlinearity import builtin, parse_nonlinearity


def test_closed_form_tau():
    assert estimate_tau(builtin("exp")) == estimate_tau(builtin("exp"))
    e = estimate_tau(builtin("exp"))
    assert (e.tau_minus, e.tau_plus, e.confidence) == (1.0, 1.0, CLOSED_FORM)
    for p in (1.5, 2.0, 3.0, 7.0):
        e = estimate_tau(builtin("pow", p=p))
        assert e.tau_minus == e.tau_plus == pytest.approx((p - 1) / p, abs=1e-15)
    e = estimate_tau(builtin("linlog"))
    assert (e.tau_minus, e.tau_plus, e.confidence) == (0.0, 0.0, CLOSED_FORM)


def test_linlog_ratio_sampled_at_one_million():
    f = builtin("linlog")
    t = 1e6
    L = math.log(t)
    q = convexity_ratio(*f.jet(t))
    assert q == pytest.approx(L / (L + 1) ** 2, rel=1e-12)
    # decreasing towards the closed-form limit 0
    assert convexity_ratio(*f.jet(1e8)) < q < convexity_ratio(*f.jet(1e4))


@pytest.mark.parametrize("text,want", [("exp(t)", 1.0), ("(1+t)^3", 2 / 3), ("(1+t)^1.5", 1 / 3), ("exp(2*t)+1", 1.0)])
def test_numeric_tau_on_parsed_expressions(text, want):
    e = estimate_tau(parse_nonlinearity(text), numeric=True)
    assert e.confidence == CONVERGED
    assert abs(e.tau_minus - want) < 1e-3 and abs(e.tau_plus - want) < 1e-3


def test_slowly_drifting_ratio_is_inconclusive():
    e = estimate_tau(parse_nonlinearity("1+t*ln(1+t)"), numeric=True)
    assert e.confidence == INCONCLUSIVE
    assert e.window_minima == sorted(e.window_minima, reverse=True)


def test_sample_tail_windows_are_dyadic_and_finite():
    s = sample_tail(builtin("exp"))
    assert np.all(np.isfinite(s.F)) and s.t[-1] < 710
    end = s.t[-1]
    for j, m in enumerate(s.windows):
        assert np.all(s.t[m] > end / 2.0 ** (len(s.windows) - j)) and np.all(s.t[m] <= end / 2.0 ** (len(s.windows) - j - 1))


_positive_tail = st.tuples(st.floats(1.1, 4.0), st.floats(0.0, 3.0), st.floats(0.1, 1.5))


@settings(max_examples=25, deadline=None)
@given(_positive_tail)
def test_tau_minus_not_above_tau_plus(params):
    p, c, k = params
    f = parse_nonlinearity(f"(1+t)^{p} + {c}*exp({k}*sqrt(1+t))")
    e = estimate_tau(f, numeric=True)
    assert e.tau_minus <= e.tau_plus
    if validate_ok(f):
        assert 0.0 <= e.tau_minus <= 1.0 + 1e-12


def validate_ok(f):
    from semistable.nonlinearity import validate

    return validate(f).passed


@settings(max_examples=20, deadline=None)
@given(st.floats(1e-3, 1e6), st.sampled_from(["(1+t)^2.5", "exp(t)+t^3", "1+t*ln(1+t)^2"]))
def test_tau_is_exactly_scale_invariant(c, text):
    f = parse_nonlinearity(text)
    assert estimate_tau(f, numeric=True) == estimate_tau(f.scaled(c), numeric=True)


def test_convex_power_delta():
    assert convex_power_delta(builtin("exp")) == pytest.approx(1 - 1e-6, abs=1e-15)
    assert convex_power_delta(builtin("pow", p=3)) == pytest.approx(2 / 3 - 1e-6, abs=1e-15)
    assert convex_power_delta(builtin("linlog")) is None
    assert convex_power_delta(builtin("pow", p=3), numeric=True) == pytest.approx(2 / 3 - DELTA_MARGIN, abs=1e-9)
    assert convex_power_delta(builtin("linlog"), numeric=True) is None


def test_power_growth_on_exponential():
    r = check_condition(builtin("exp"), POWER_GROWTH, {"gamma": 1.0, "delta": 0.0})
    assert r.status == HOLDS and r.constant == pytest.approx(1.0, abs=1e-15)
    r = check_condition(builtin("exp"), POWER_GROWTH, {"gamma": 0.5, "delta": 0.0})
    assert r.status == FAILS


def test_excess_over_t_fails_for_half_log_power():
    f = builtin("linlogpow", a=0.5)
    r = check_condition(f, EXCESS_OVER_T)
    assert r.status == FAILS
    # t f' - f = a t / sqrt(ln t): the sampled ratio (f' - f/t) = a / sqrt(ln t)
    t = np.array(r.t_range)
    assert r.constant == pytest.approx(0.5 / math.sqrt(math.log(t[1])), rel=1e-9)
    assert check_condition(f, EXCESS_OVER_F).status == FAILS


def test_log_convexity_for_half_log_power():
    # f''/f = a (ln t + a - 1) / (t ln t)^2, so t^2 (ln t)^gamma f''/f stays positive iff gamma >= 1
    f = builtin("linlogpow", a=0.5)
    for g in (1.0, 1.5, 1.95):
        assert check_condition(f, LOG_CONVEXITY, {"gamma": g}).status == HOLDS
    for g in (0.25, 0.5):
        assert check_condition(f, LOG_CONVEXITY, {"gamma": g}).status == FAILS


@pytest.mark.parametrize("f", [builtin("exp"), builtin("pow", p=2), builtin("pow", p=3), parse_nonlinearity("exp(t)+t^2")])
def test_excess_over_f_implies_excess_over_t(f):
    a = check_condition(f, EXCESS_OVER_F)
    b = check_condition(f, EXCESS_OVER_T)
    assert a.status == HOLDS
    # f' - f/t = (f/t)(t f'/f - 1) >= eps * min f/t on the same tail
    s = sample_tail(f)
    floor = a.constant * float(np.min(s.F[s.tail] / s.t[s.tail]))
    assert b.status == HOLDS and b.constant >= floor * (1 - 1e-12)


def test_tangent_foot():
    assert check_condition(builtin("exp"), TANGENT_FOOT).status == HOLDS
    assert check_condition(builtin("linlogpow", a=0.5), TANGENT_FOOT).status == HOLDS
    assert check_condition(builtin("linlogpow", a=0.25), TANGENT_FOOT).status == FAILS


def test_growth_conditions():
    assert check_condition(builtin("exp"), GROWTH_EVERY_EPS).status == HOLDS
    assert check_condition(builtin("exp"), GROWTH_SUBLINEAR, {"eps": 0.5}).status == FAILS
    assert check_condition(builtin("pow", p=2), GROWTH_SUBLINEAR, {"eps": 0.25}).status == HOLDS
    r = check_condition(builtin("pow", p=2), CURVATURE_LIMINF, {"gamma": 0.0, "eps": 3.0})
    assert r.status == HOLDS and r.useful


@pytest.mark.parametrize("which,params", [
    (GROWTH_SUBLINEAR, {"eps": 1.0}), (CURVATURE_LIMINF, {"gamma": 3.0, "eps": 1.0}),
    (POWER_GROWTH, {"gamma": 1.0, "delta": 2.0}), (LOG_CONVEXITY, {"gamma": 2.0}),
    (EXCESS_OVER_F, {"eps": -1.0}), ("no_such_condition", {}),
])
def test_condition_parameter_checks(which, params):
    with pytest.raises(ConditionError):
        check_condition(builtin("exp"), which, params)


def test_profiles():
    p = build_profile(builtin("exp"))
    assert p.curvature_liminf == (0.0, 1.0)
    assert p.power_growth == (1.0, 0.0)
    assert p.growth_sublinear is None and p.tangent_foot is not None
    q = build_profile(builtin("pow", p=2))
    assert q.power_growth == pytest.approx((1 / 3, 1 / 3))
    assert AsymptoticProfile.from_dict(q.to_dict()) == q
    r = build_profile(builtin("linlogpow", a=0.25))
    assert r.tangent_foot is None and r.log_convexity == 1.0
    assert build_profile(parse_nonlinearity("1+t")).superlinear is False
