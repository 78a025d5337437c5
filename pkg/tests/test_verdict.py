import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from semistable.asymptotics import CONVERGED, AsymptoticProfile, build_profile
from semistable.nonlinearity import builtin
from semistable.verdict import (
    H10, L1, LINF, TAU_PLUS_NINE, TAU_SHIFTED_H10_TEN, TAU_TWO_SIDED_NINE, W1R, EstimateCertificate,
    VerdictDomainError, bootstrap_exponents, certificate_guarantees, generate_certificates, h1_all_dimensions,
    profile_with_all_unknown, regularity_verdict, shifted_w1r_exponent, tau_plus_linf_bound, two_sided_linf_bound,
)

EXP = build_profile(builtin("exp"))


def test_guarantee_examples():
    assert certificate_guarantees(2, 1, 3).level == LINF
    g = certificate_guarantees(2, 1, 5)
    assert g.level == H10 and not g.linf
    g = certificate_guarantees(2, 1, 8)
    assert g.level == W1R
    # hand evaluation: (a-s)n/(n-2a), (a-s)n/(n-2s), (a-s)n/(n-a-s) at (2, 1, 8)
    assert g.lr_u == pytest.approx(8 / 4)
    assert g.lr_fu == pytest.approx(8 / 6)
    assert g.w1r == pytest.approx(8 / 5)


def test_h10_short_circuit_when_alpha_exceeds_two_plus_sigma():
    g = certificate_guarantees(5, 1, 40)
    assert g.h10 and g.level == H10
    assert EstimateCertificate(5, 1, "x").h10_sup == math.inf


def test_only_l1_when_no_exponent_condition():
    g = certificate_guarantees(1.5, 1.4, 50)
    assert g.level == L1 and g.w1r is None


@pytest.mark.parametrize("args", [(0.5, 0, 3), (2, 3, 5), (2, -0.1, 5), (2, 1, 1)])
def test_domain_checks(args):
    with pytest.raises(VerdictDomainError):
        certificate_guarantees(*args)


def test_bootstrap_examples():
    r = bootstrap_exponents(2, 1, 7)
    assert r.sequence[0] == pytest.approx(7 / 5)
    assert r.limit == pytest.approx(7 / 3)
    assert r.increasing and abs(r.sequence[-1] - 7 / 3) < 1e-12
    assert bootstrap_exponents(2, 1, 5).limit == pytest.approx(5.0)
    with pytest.raises(VerdictDomainError):
        bootstrap_exponents(2, 1, 4)
    with pytest.raises(VerdictDomainError):
        bootstrap_exponents(2, 1.9, 5)
    r = bootstrap_exponents(3, 1, 8, iterations=200)
    assert r.limit == 8.0 and abs(r.sequence[-1] - 8.0) < 1e-9


@settings(max_examples=50, deadline=None)
@given(st.floats(1.05, 6.0), st.floats(0.05, 30.0), st.floats(0.0, 0.999))
def test_bootstrap_is_increasing_and_converges(alpha, gap, frac):
    n = 2 * alpha + gap
    sigma = frac * min(alpha, n * (alpha - 1) / (n - 2))
    r = bootstrap_exponents(alpha, sigma, n, iterations=10**6, tol=1e-12)
    want = (alpha - sigma) * n / (n - 2 * alpha)
    assert abs(r.sequence[-1] - want) <= 1e-9 * max(1.0, want)
    assert all(b >= a - 1e-12 * abs(a) for a, b in zip(r.sequence, r.sequence[1:]))
    assert all(q <= want * (1 + 1e-12) for q in r.sequence)


def _pairs(profile):
    certs, _ = generate_certificates(profile)
    return {(c.source, c.alpha, c.sigma) for c in certs}


def test_exponential_certificates():
    pairs = {(a, s) for _, a, s in _pairs(EXP)}
    for want in ((5.0, 1.0), (5.0, 5.0), (5.0, 4.0), (5.0, 3.0), (2.0, 1.0)):
        assert want in pairs


def test_loglike_is_bounded_in_every_dimension():
    v = regularity_verdict(build_profile(builtin("linlog")), n=50)
    assert v.linf.n_sup == math.inf and v.row(50)["guarantee"] == LINF


def test_unknown_profile_only_gets_the_default_certificate():
    certs, skipped = generate_certificates(profile_with_all_unknown())
    assert [(c.source, c.alpha, c.sigma) for c in certs] == [("nedev", 2.0, 1.0)]
    assert skipped
    certs, _ = generate_certificates(profile_with_all_unknown(convex=False))
    assert certs == []


def test_exponential_verdict():
    v = regularity_verdict(EXP, n=9)
    assert v.linf.n_sup == pytest.approx(10.0, abs=1e-9)
    for n in range(2, 10):
        assert v.row(n)["guarantee"] == LINF
    assert v.row(10)["guarantee"] == H10
    assert v.h10.n_sup == math.inf


@pytest.mark.parametrize("p", [2.0, 3.0, 5.0])
def test_power_thresholds(p):
    v = regularity_verdict(build_profile(builtin("pow", p=p)))
    want = 2 * (1 + 2 * p / (p - 1) + 2 * math.sqrt(p / (p - 1)))
    tau = (p - 1) / p
    assert v.linf.n_sup == pytest.approx(want, abs=1e-9)
    assert want == pytest.approx(2 + 4 / tau + 4 / math.sqrt(tau), abs=1e-12)
    if p == 2.0:
        assert want == pytest.approx(10 + 4 * math.sqrt(2), abs=1e-12)


def test_two_sided_clause_reaches_nine():
    prof = AsymptoticProfile("synthetic", 0.5, 16 / 9, confidence={"tau_minus": CONVERGED, "tau_plus": CONVERGED})
    v = regularity_verdict(prof, n=9)
    assert v.linf.n_sup >= 9 - 1e-12
    assert dict(v.linf.clauses)["tau_two_sided"] == pytest.approx(9.0, abs=1e-12)
    prof.tau_minus = None
    v = regularity_verdict(prof)
    assert "tau_two_sided" not in dict(v.linf.clauses)


def test_boundary_identities():
    t = TAU_PLUS_NINE
    assert 4 + 2 / t + 4 / math.sqrt(t) == pytest.approx(9, abs=1e-9)
    assert two_sided_linf_bound(TAU_TWO_SIDED_NINE) == pytest.approx(9, abs=1e-9)
    # the H^1 threshold below ten dimensions is attained at the last integer, n = 9
    assert shifted_w1r_exponent(9, TAU_SHIFTED_H10_TEN) == pytest.approx(2, abs=1e-9)
    assert shifted_w1r_exponent(10, TAU_SHIFTED_H10_TEN) == pytest.approx(20 / 11, abs=1e-9)
    assert shifted_w1r_exponent(6, 1e12) > 2 > shifted_w1r_exponent(7, 1e12)


def test_tau_bound_map_is_strictly_decreasing():
    tau = np.geomspace(1e-3, 1e3, 1000)
    vals = np.array([tau_plus_linf_bound(x) for x in tau])
    assert np.all(np.diff(vals) < 0)


def test_linf_threshold_increases_with_alpha():
    alphas = np.linspace(1, 10, 50)
    sups = [EstimateCertificate(a, 0.5, "user").linf_sup for a in alphas]
    assert np.all(np.diff(sups) > 0)


_RANK = {LINF: 0, H10: 1, W1R: 2, L1: 3}


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(1.0, 8.0), st.floats(0.0, 1.0)), max_size=3), st.floats(1.0, 8.0), st.floats(0.0, 1.0))
def test_adding_a_certificate_never_weakens(base, alpha, frac):
    prof = profile_with_all_unknown()
    user = [(a, f * a) for a, f in base]
    before = regularity_verdict(prof, user=user)
    after = regularity_verdict(prof, user=user + [(alpha, frac * alpha)])
    assert after.linf.n_sup >= before.linf.n_sup
    assert after.h10.n_sup >= before.h10.n_sup
    for rb, ra in zip(before.table, after.table):
        assert _RANK[ra["guarantee"]] <= _RANK[rb["guarantee"]]


def test_all_dimension_energy_bound():
    assert h1_all_dimensions(build_profile(builtin("linlogpow", a=0.5))).clause == "log_convexity"
    r = h1_all_dimensions(build_profile(builtin("linlogpow", a=0.25)))
    assert r.clause == "log_convexity" and "tangent_foot" not in r.firing
    r = h1_all_dimensions(EXP)
    assert r and set(r.firing) == {"log_convexity", "tangent_foot"}


def test_tie_break_is_fixed():
    v = regularity_verdict(EXP)
    assert v.linf.clause == "tau_plus_equal"


def test_reports_render():
    v = regularity_verdict(EXP, n=12)
    md = v.to_markdown()
    assert "| 12 | H10 |" in md and "L^inf for n < 10" in md
    import json

    d = json.loads(v.to_json())
    assert d["thresholds"]["h10"]["n_sup"] == "inf"
    assert v.row(12)["exponents"]["w1r"] is not None
