import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from semistable.expr import Call, Const, ParseError, Var, evaluate, evaluate_jet, parse_expression, to_text
from semistable.jet import DomainError, Jet2

T = sp.Symbol("t", positive=True)

EXPRESSIONS = [
    ("exp(t)", sp.exp(T)),
    ("(1+t)^3", (1 + T) ** 3),
    ("t*ln(t)", T * sp.log(T)),
    ("sqrt(1+t^2)*exp(2*t)/(3+t)", sp.sqrt(1 + T**2) * sp.exp(2 * T) / (3 + T)),
    ("2^t + t^t", 2**T + T**T),
    ("-t^2 + 5", -(T**2) + 5),
    ("(1+t)^(1/2) - ln(1+t)", sp.sqrt(1 + T) - sp.log(1 + T)),
]


@pytest.mark.parametrize("text,sym", EXPRESSIONS)
def test_jet_matches_symbolic_derivatives(text, sym):
    node = parse_expression(text)
    d1, d2 = sp.diff(sym, T), sp.diff(sym, T, 2)
    for t in (0.3, 1.0, 2.7, 6.0):
        j = evaluate_jet(node, Jet2.variable(t))
        for got, want in zip(j.triple(), (sym, d1, d2)):
            w = float(want.subs(T, t))
            assert got == pytest.approx(w, rel=1e-13, abs=1e-300)


def test_array_and_scalar_jets_agree():
    node = parse_expression("exp(t)*(1+t)^2.5")
    t = np.linspace(0.0, 5.0, 41)
    arr = evaluate_jet(node, Jet2.variable(t)).triple()
    for k, tk in enumerate(t):
        sc = evaluate_jet(node, Jet2.variable(float(tk))).triple()
        for a, s in zip(arr, sc):
            assert a[k] == pytest.approx(s, rel=1e-15)


def test_precedence_and_associativity():
    assert evaluate(parse_expression("-t^2"), 3.0) == -9.0
    assert evaluate(parse_expression("2^-t"), 1.0) == 0.5
    assert evaluate(parse_expression("2^3^2"), 0.0) == 2.0**9
    assert evaluate(parse_expression("8/4/2"), 0.0) == 1.0
    assert evaluate(parse_expression("1-2-3"), 0.0) == -4.0
    assert evaluate(parse_expression("+t*-2"), 1.5) == -3.0


@pytest.mark.parametrize("text", ["", "t +", "exp t", "(t", "t)", "sin(t)", "1..2", "t $ 2", "x"])
def test_parse_errors_carry_position(text):
    with pytest.raises(ParseError) as info:
        parse_expression(text)
    assert 0 <= info.value.position <= len(text)


def test_tree_shapes():
    assert parse_expression("t") == Var()
    assert parse_expression("2.5e1") == Const(25.0)
    assert parse_expression("ln(t)") == Call("ln", Var())


@pytest.mark.parametrize("text,t", [("ln(t)", 0.0), ("sqrt(t)", 0.0), ("1/t", 0.0), ("t^0.5", 0.0), ("(t-1)^0.5", 0.0)])
def test_domain_errors(text, t):
    with pytest.raises(DomainError):
        evaluate_jet(parse_expression(text), Jet2.variable(t))


def test_domain_error_in_plain_evaluation():
    with pytest.raises(DomainError):
        evaluate(parse_expression("ln(t-1)"), 0.5)


_atoms = st.sampled_from(["t", "1", "2.5", "0.5"])


def _combine(children):
    ops = st.sampled_from(["+", "-", "*"])
    return st.builds(lambda a, op, b: f"({a}{op}{b})", children, ops, children) | st.builds(
        lambda a: f"exp({a})", children
    )


_exprs = st.recursive(_atoms, _combine, max_leaves=6)


@settings(max_examples=80, deadline=None)
@given(_exprs, st.floats(0.0, 1.0))
def test_to_text_round_trips(text, t):
    node = parse_expression(text)
    again = parse_expression(to_text(node))
    assert again == node
    try:
        v = evaluate(node, t)
    except OverflowError:
        return
    if math.isfinite(v):
        assert evaluate_jet(node, Jet2.variable(t)).value == pytest.approx(v, rel=1e-12, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.1, 3.0), st.floats(-2.0, 2.0), st.floats(0.1, 5.0))
def test_product_rule_against_finite_differences(t, a, b):
    node = parse_expression(f"exp({a}*t)*(t+{b})^2")
    j = evaluate_jet(node, Jet2.variable(t))
    h = 1e-5
    fp = evaluate(node, t + h)
    fm = evaluate(node, t - h)
    f0 = evaluate(node, t)
    assert j.d1 == pytest.approx((fp - fm) / (2 * h), rel=1e-6, abs=1e-8)
    assert j.d2 == pytest.approx((fp - 2 * f0 + fm) / h**2, rel=1e-4, abs=1e-5)
