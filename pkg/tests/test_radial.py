import math

import numpy as np
import pytest
import sympy as sp

from semistable.estimates import g_shifted_f
from semistable.nonlinearity import builtin
from semistable.radial import (
    SolverControls, branch_sweep, dirichlet_ball_eigenvalue, eigen_fold, integrate_profile, m_grid,
    principal_eigenvalue, read_branch_csv, sphere_area, stability_margin, verify_stability_inequality,
)

EXP = builtin("exp")


def _plane_lambda(m):
    # u = ln(8 mu / (lam (1 + mu r^2)^2)) with u(1) = 0 gives e^m = (1 + mu)^2
    mu = math.exp(m / 2) - 1
    return 8 * mu / (1 + mu) ** 2


def test_plane_family_solves_the_equation():
    r, mu, lam = sp.symbols("r mu lam", positive=True)
    u = sp.log(8 * mu / (lam * (1 + mu * r**2) ** 2))
    res = sp.diff(u, r, 2) + sp.diff(u, r) / r + lam * sp.exp(u)
    assert sp.simplify(res) == 0
    assert sp.simplify(u.subs({r: 1, lam: 8 * mu / (1 + mu) ** 2})) == 0


@pytest.mark.parametrize("m", [0.05, 0.7, 2 * math.log(2), 3.0, 9.0])
def test_plane_lambda_matches_exact_family(m):
    assert integrate_profile(EXP, 2, m).lam == pytest.approx(_plane_lambda(m), rel=1e-10)


def test_plane_profile_shape():
    m = 1.3
    p = integrate_profile(EXP, 2, m)
    mu = math.exp(m / 2) - 1
    lam = _plane_lambda(m)
    r = np.linspace(0, 1, 50)
    exact = np.log(8 * mu / (lam * (1 + mu * r**2) ** 2))
    u, _ = p.u_at(r)
    assert np.allclose(u, exact, atol=1e-10)


def test_trivial_solution():
    p = integrate_profile(EXP, 4, 0.0)
    assert p.lam == 0.0 and np.all(p.u == 0.0)
    e = principal_eigenvalue(p)
    assert e.mu1 == pytest.approx(dirichlet_ball_eigenvalue(4))


def test_ball_eigenvalues():
    assert dirichlet_ball_eigenvalue(3) == pytest.approx(math.pi**2, rel=1e-13)
    assert math.sqrt(dirichlet_ball_eigenvalue(2)) == pytest.approx(2.404825557695773, rel=1e-13)
    assert sphere_area(3) == pytest.approx(4 * math.pi)
    assert sphere_area(2) == pytest.approx(2 * math.pi)


def test_small_center_eigenvalue_tends_to_ball_value():
    mus = [principal_eigenvalue(integrate_profile(EXP, 3, m)).mu1 for m in (1e-2, 1e-4, 1e-6)]
    gaps = [math.pi**2 - x for x in mus]
    assert all(g > 0 for g in gaps) and gaps[0] > gaps[1] > gaps[2] and gaps[2] < 1e-4


def test_residual_small():
    for n, m in ((2, 1.0), (3, 30.0), (9, 5.0)):
        assert integrate_profile(EXP, n, m).residual() <= 1e-8


def test_error_decreases_with_tolerance():
    m = 1.0
    errs = [abs(integrate_profile(EXP, 2, m, SolverControls(rtol=rt)).lam - _plane_lambda(m))
            for rt in (1e-6, 1e-9, 1e-12)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-11


def test_three_dimensional_limit():
    # lambda oscillates towards 2(n - 2) as the center value grows
    assert integrate_profile(EXP, 3, 30.0).lam == pytest.approx(2.0, abs=2e-3)


def test_plane_fold_and_eigenvalue():
    br = branch_sweep(EXP, 2, m_grid(0.1, 6.0, 30))
    assert br.fold_m == pytest.approx(2 * math.log(2), abs=1e-4)
    assert br.lambda_star == pytest.approx(2.0, rel=1e-10)
    assert eigen_fold(EXP, 2, 1.0, 2.0) == pytest.approx(2 * math.log(2), abs=1e-9)
    assert abs(principal_eigenvalue(integrate_profile(EXP, 2, 2 * math.log(2))).mu1) < 1e-8


def test_eigenvalue_decreases_along_minimal_branch():
    br = branch_sweep(EXP, 3, m_grid(0.1, 3.0, 15), eigen=True)
    mu = [p.mu1 for p in br.minimal()]
    assert all(b < a for a, b in zip(mu, mu[1:]))
    assert mu[0] > 0


def test_margin_with_eigenfunction():
    for m, sign in ((1.0, 1), (4.0, -1)):
        e = principal_eigenvalue(integrate_profile(EXP, 3, m))
        marg = stability_margin(e.profile, e.eta)
        assert np.sign(marg.direct) == sign == np.sign(e.mu1)
        # the margin is mu1 times the L^2 norm of the eigenfunction
        r, w = e.profile.quadrature()
        eta, _ = e.eta(r)
        l2 = float(np.sum(sphere_area(3) * w * r**2 * eta * eta))
        assert marg.direct == pytest.approx(e.mu1 * l2, rel=1e-6)


def test_two_margin_forms_agree():
    for n, m in ((3, 1.0), (3, 5.0), (9, 2.0)):
        marg = verify_stability_inequality(integrate_profile(EXP, n, m), g_shifted_f(EXP))
        assert marg.relative_gap <= 1e-8


def test_power_nonlinearity_folds_in_three_dimensions():
    br = branch_sweep(builtin("pow", p=2), 3, m_grid(0.1, 6.0, 40))
    assert br.fold_m is not None and not br.monotone_flag
    assert br.lambda_star > integrate_profile(builtin("pow", p=2), 3, 6.0).lam


def test_csv_round_trip():
    br = branch_sweep(EXP, 2, m_grid(0.2, 2.0, 5), eigen=True)
    rows = read_branch_csv(br.to_csv())
    assert [r["m"] for r in rows] == [p.m for p in br.points]
    assert [r["lambda"] for r in rows] == [p.lam for p in br.points]
    assert [r["mu1"] for r in rows] == [p.mu1 for p in br.points]


def test_threads_do_not_change_results():
    g = m_grid(0.2, 4.0, 8)
    a = branch_sweep(EXP, 3, g).to_csv()
    b = branch_sweep(EXP, 3, g, threads=4).to_csv()
    assert a == b


def test_argument_checks():
    with pytest.raises(ValueError):
        m_grid(1.0, 0.5, 10)
    with pytest.raises(ValueError):
        m_grid(0.1, 1.0, 1)
    with pytest.raises(ValueError):
        m_grid(0.1, 1.0, 5, "cubic")
    with pytest.raises(ValueError):
        integrate_profile(EXP, 1, 1.0)
    with pytest.raises(ValueError):
        integrate_profile(EXP, 3, -1.0)
    with pytest.raises(ValueError):
        branch_sweep(EXP, 3, [0.1, 0.2])
