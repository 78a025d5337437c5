import csv
import io
import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from semistable.estimates import (
    CumulativeTable, H_f_beta, PiecewiseIntegral, chain_lower_bound_gap, closed_form_deviation, g_custom,
    g_equals_f, g_power, g_shifted_f, g_weighted, multiplier, multiplier_defect, multiplier_ratio_bound,
)
from semistable.nonlinearity import builtin

EXP = builtin("exp")
POW2 = builtin("pow", p=2)
POW3 = builtin("pow", p=3)
S = sp.symbols("s", nonnegative=True)


def test_exponential_value_at_one():
    assert H_f_beta(EXP, 0.0, 1.0) == pytest.approx((math.e**3 - math.e) / 2, rel=1e-10)
    assert H_f_beta(EXP, 0.0, 0.0) == 0.0


def test_power_value_at_one():
    assert H_f_beta(POW2, 0.0, 1.0) == pytest.approx(56 / 3, rel=1e-10)


@pytest.mark.parametrize("beta", [0.0, 0.25, 0.6, 0.9])
def test_exponential_against_symbolic(beta):
    # sqrt(f''/f) = 1 so the weight is exp(2 beta s)
    b = sp.nsimplify(beta)
    expr = sp.exp(S) * sp.integrate(sp.exp((2 + 2 * b) * S), (S, 0, S))
    u = np.linspace(0.0, 15.0, 31)
    want = np.array([float(expr.subs(S, x)) for x in u])
    got = H_f_beta(EXP, beta, u)
    assert np.allclose(got, want, rtol=1e-9, atol=1e-12)


def test_power_with_weight_against_nested_quadrature():
    beta = 0.4
    phi = lambda t: quad(lambda s: math.sqrt(6.0 / (1 + s) ** 2), 0, t)[0]
    for u in (0.5, 2.0, 7.0):
        inner = quad(lambda s: (1 + s) ** 3 * 6 * (1 + s) * math.exp(2 * beta * phi(s)), 0, u, epsabs=0, epsrel=1e-12)[0]
        assert H_f_beta(POW3, beta, u) == pytest.approx((1 + u) ** 3 * inner, rel=1e-9)


def test_closed_form_deviation_small():
    u = np.linspace(0.0, 20.0, 201)
    for f in (EXP, POW2, POW3):
        for beta in (0.0, 0.5, 0.95):
            assert closed_form_deviation(f, beta, u) < 1e-8


def test_beta_domain():
    with pytest.raises(ValueError):
        H_f_beta(EXP, 1.0, 1.0)
    with pytest.raises(ValueError):
        H_f_beta(EXP, 0.5, -1.0)


def test_monotone_in_u_and_beta():
    rng = np.random.default_rng(3)
    u = np.sort(rng.uniform(0.0, 12.0, 1000))
    betas = np.sort(rng.uniform(0.0, 0.99, 6))
    rows = [H_f_beta(POW3, b, u) for b in betas]
    for r in rows:
        assert np.all(np.diff(r) >= 0.0)
    for lo, hi in zip(rows, rows[1:]):
        assert np.all(hi >= lo)


def test_panel_refinement_invariance():
    h = lambda t: np.exp(3.0 * t) * np.cos(t) ** 2
    a = PiecewiseIntegral(h, 10.0, 1e-12)
    b = PiecewiseIntegral(h, 10.0, 1e-12, initial_width=0.5)
    t = np.linspace(0.0, 10.0, 400)
    assert np.allclose(a(t), b(t), rtol=1e-10, atol=1e-12)
    exact = quad(h, 0, 7.3, epsabs=0, epsrel=1e-13)[0]
    assert a(7.3) == pytest.approx(exact, rel=1e-10)


def test_chain_lower_bound():
    u = np.linspace(0.0, 25.0, 300)
    for f in (EXP, POW2, builtin("pow", p=1.5)):
        assert np.all(chain_lower_bound_gap(f, u) >= -1e-9)


def _defect_oracle(gexpr, fexpr, s):
    G = sp.integrate(sp.diff(gexpr, S) ** 2, (S, 0, S))
    d = gexpr**2 * sp.diff(fexpr, S) - G * fexpr
    return np.array([float(d.subs(S, x)) for x in s])


def test_multiplier_defect_exponential():
    s = np.linspace(0.0, 6.0, 25)
    got = multiplier_defect(EXP, g_equals_f(EXP), s)
    assert np.allclose(got, (np.exp(3 * s) + np.exp(s)) / 2, rtol=1e-10)
    got = multiplier_defect(EXP, g_shifted_f(EXP), s)
    assert np.allclose(got, _defect_oracle(sp.exp(S) - 1, sp.exp(S), s), rtol=1e-9, atol=1e-12)
    assert multiplier_defect(EXP, g_shifted_f(EXP), 0.0) == 0.0


def test_multiplier_defect_power_and_custom():
    s = np.linspace(0.0, 5.0, 21)
    f = (1 + S) ** 2
    got = multiplier_defect(POW2, g_power(POW2, 0.5), s)
    assert np.allclose(got, _defect_oracle(sp.sqrt(f), f, s), rtol=1e-9, atol=1e-10)
    got = multiplier_defect(POW2, g_custom("t^2"), s)
    assert np.allclose(got, _defect_oracle(S**2, f, s), rtol=1e-9, atol=1e-10)


def test_multiplier_choices():
    assert multiplier("shifted_f", EXP).vanishes_at_zero
    assert not multiplier("f", EXP).vanishes_at_zero
    assert multiplier("weighted", EXP, beta=0.5).vanishes_at_zero
    with pytest.raises(ValueError):
        multiplier("custom", EXP)
    with pytest.raises(ValueError):
        multiplier("bogus", EXP)


def test_weighted_multiplier_is_c1_at_the_join():
    g = g_weighted(EXP, 0.5)
    val, der = g.values(np.array([1.0 - 1e-9, 1.0 + 1e-9]))
    assert abs(val[0] - val[1]) < 1e-7 and abs(der[0] - der[1]) < 1e-7
    # g(1) = e * exp(0.5 * Phi(1)) with Phi(t) = t; g'(1) = g(1) * (1 + 0.5)
    val, der = g.values(np.array([1.0]))
    assert val[0] == pytest.approx(math.exp(1.5), rel=1e-9)
    assert der[0] == pytest.approx(1.5 * math.exp(1.5), rel=1e-9)


def test_ratio_bound():
    r = multiplier_ratio_bound(EXP, g_shifted_f(EXP), 1.0, np.linspace(1, 40, 200))
    assert r.status == "holds"
    assert r.lhs_sup == pytest.approx(0.5, rel=1e-6) and r.rhs_sup == pytest.approx(1.0, rel=1e-6)
    r = multiplier_ratio_bound(POW2, g_shifted_f(POW2), 1.0, np.geomspace(1, 1e5, 400))
    assert r.status == "holds" and r.lhs_sup == pytest.approx(2 / 3, rel=1e-6)
    r = multiplier_ratio_bound(POW2, g_shifted_f(POW2), 1.0, np.linspace(0.05, 0.3, 30))
    assert r.status == "Inconclusive"
    with pytest.raises(ValueError):
        multiplier_ratio_bound(EXP, g_shifted_f(EXP), 0.0, np.linspace(1, 2, 10))


def test_cumulative_table_csv():
    tab = CumulativeTable(EXP, beta=0.5, g=g_shifted_f(EXP), t_max=5.0)
    rows = list(csv.reader(io.StringIO(tab.to_csv())))
    assert rows[0] == ["t", "Phi", "I", "G"]
    data = np.array(rows[1:], dtype=float)
    assert data[0, 0] == 0.0 and data[-1, 0] <= 5.0
    assert np.allclose(data[:, 1], data[:, 0], rtol=1e-10, atol=1e-12)
    assert np.allclose(data[:, 2], np.expm1(3 * data[:, 0]) / 3, rtol=1e-10, atol=1e-12)
    assert np.allclose(data[:, 3], np.expm1(2 * data[:, 0]) / 2, rtol=1e-10, atol=1e-12)
    assert set(tab.error_estimates) == {"Phi", "I", "G"}


@settings(max_examples=30, deadline=None)
@given(st.floats(1.2, 6.0), st.floats(0.0, 0.95), st.one_of(st.just(0.0), st.floats(1e-12, 30.0)))
def test_power_family_closed_form_property(p, beta, u):
    f = builtin("pow", p=p)
    assert closed_form_deviation(f, beta, [u]) < 1e-8
