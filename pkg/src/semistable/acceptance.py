"""The acceptance suite: ten numbered checks, each a deterministic report dict."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .analysis import CONVERGES, GROWS, INT_H, QuantitySpec, densify_fold_tail, diagnose_boundedness, track
from .asymptotics import CONVERGED, estimate_tau, jsonable
from .estimates import H_f_beta, closed_form_H, g_shifted_f
from .nonlinearity import builtin, parse_nonlinearity
from .radial import (
    branch_sweep, eigen_fold, integrate_profile, m_grid, principal_eigenvalue, verify_stability_inequality,
)
from .verdict import (
    TAU_PLUS_NINE, TAU_TWO_SIDED_NINE, bootstrap_exponents, certificate_guarantees, h10_sup,
    power_law_linf_bound, regularity_verdict, tau_plus_linf_bound, two_sided_linf_bound,
)
from .asymptotics import build_profile


@dataclass(frozen=True)
class Criterion:
    number: int
    title: str
    suites: tuple
    runtime: Optional[float]  # seconds allowed, None when untimed
    run: Callable[[int], dict]


def _close(a, b, tol):
    return abs(a - b) <= tol


# 1 -----------------------------------------------------------------------------


def thresholds(seed: int) -> dict:
    checks = {}
    v = regularity_verdict(build_profile(builtin("exp")))
    checks["exp_linf_n_sup"] = (v.linf.n_sup, 10.0, _close(v.linf.n_sup, 10.0, 1e-9))
    for p in (2.0, 3.0, 5.0):
        f = builtin("pow", p=p)
        got = regularity_verdict(build_profile(f)).linf.n_sup
        want = 2.0 * (1.0 + 2.0 * p / (p - 1.0) + 2.0 * math.sqrt(p / (p - 1.0)))
        tau = (p - 1.0) / p
        via_tau = tau_plus_linf_bound(tau)
        ok = _close(got, want, 1e-9) and _close(via_tau, want, 1e-9) and _close(power_law_linf_bound(p), want, 1e-9)
        checks[f"pow_{p:g}_linf_n_sup"] = (got, want, ok)
    t = TAU_PLUS_NINE
    b = tau_plus_linf_bound(t)
    checks["tau_plus_boundary_nine"] = (b, 9.0, _close(b, 9.0, 1e-9) and _close(4.0 + 2.0 / t + 4.0 / math.sqrt(t), 9.0, 1e-9))
    t = TAU_TWO_SIDED_NINE
    b = two_sided_linf_bound(t)
    b2 = 6.0 + 4.0 / math.sqrt(t)
    checks["two_sided_boundary_nine"] = (b, 9.0, _close(b, 9.0, 1e-9) and _close(b2, 9.0, 1e-9))
    nedev = certificate_guarantees(2.0, 1.0, 3.0)
    linf_sup = 2.0 * 2.0
    checks["nedev_linf_n_sup"] = (linf_sup, 4.0, _close(linf_sup, 4.0, 1e-9) and nedev.linf)
    checks["nedev_h10_n_sup"] = (h10_sup(2.0, 1.0), 6.0, _close(h10_sup(2.0, 1.0), 6.0, 1e-9))
    passed = all(c[2] for c in checks.values())
    return {"passed": passed, "checks": {k: {"got": g, "want": w, "ok": o} for k, (g, w, o) in checks.items()}}


# 2 -----------------------------------------------------------------------------


def tau_estimation(seed: int) -> dict:
    checks = {}
    for text, want in (("exp(t)", 1.0), ("(1+t)^3", 2.0 / 3.0)):
        est = estimate_tau(parse_nonlinearity(text), numeric=True)
        ok = (est.confidence == CONVERGED and est.tau_minus is not None
              and abs(est.tau_minus - want) <= 1e-3 and abs(est.tau_plus - want) <= 1e-3)
        checks[text] = {"tau_minus": est.tau_minus, "tau_plus": est.tau_plus, "want": want,
                        "confidence": est.confidence, "ok": ok}
    ll = estimate_tau(builtin("linlog"))
    sampled = estimate_tau(builtin("linlog"), numeric=True)
    checks["linlog"] = {
        "tau_plus": ll.tau_plus, "confidence": ll.confidence, "sampled_tau_plus_at_grid_end": sampled.tau_plus,
        "ok": ll.tau_plus is not None and ll.tau_plus <= 1e-3,
    }
    return {"passed": all(c["ok"] for c in checks.values()), "checks": checks}


# 3 -----------------------------------------------------------------------------


def exp_quadrature(seed: int) -> dict:
    f = builtin("exp")
    u = np.linspace(0.0, 10.0, 1001)[1:]
    errs = {}
    for beta in (0.0, 0.5, 0.9):
        num = H_f_beta(f, beta, u)
        exact = closed_form_H(f, beta, u)
        errs[f"{beta:g}"] = float(np.max(np.abs(num - exact) / np.abs(exact)))
    worst = max(errs.values())
    return {"passed": worst < 1e-8, "max_relative_error": errs, "tolerance": 1e-8}


# 4 -----------------------------------------------------------------------------


def gelfand_plane(seed: int) -> dict:
    f = builtin("exp")
    b = branch_sweep(f, 2, m_grid(0.1, 6.0, 60))
    fold = b.fold_m if b.fold_m is not None else math.nan
    lam_err = abs(b.lambda_star - 2.0)
    fold_err = abs(fold - 2.0 * math.log(2.0))
    return {
        "passed": lam_err <= 1e-5 and fold_err <= 1e-4,
        "lambda_star": b.lambda_star, "fold_m": fold, "lambda_error": lam_err, "fold_error": fold_err,
    }


# 5 -----------------------------------------------------------------------------


def singular_limit(seed: int) -> dict:
    f = builtin("exp")
    rows = {}
    for n in (3, 4, 5, 6, 7, 8, 9, 11):
        lam = integrate_profile(f, n, 30.0).lam
        target = 2.0 * (n - 2)
        rel = abs(lam - target) / target
        rows[str(n)] = {"lambda": lam, "target": target, "relative_error": rel, "ok": rel <= 0.01}
    b = branch_sweep(f, 11, m_grid(0.5, 40.0, 80))
    mono = b.monotone_flag and b.fold_m is None
    return {"passed": mono and all(r["ok"] for r in rows.values()), "lambda_at_30": rows,
            "n11_monotone": mono, "n11_lambda_max": b.lambda_star}


# 6 -----------------------------------------------------------------------------

_EIGEN_GRIDS = {2: (0.1, 3.0, 30), 3: (0.1, 3.0, 30), 9: (0.2, 7.0, 35)}


def semistability(seed: int) -> dict:
    f = builtin("exp")
    out = {}
    for n, (lo, hi, count) in _EIGEN_GRIDS.items():
        b = branch_sweep(f, n, m_grid(lo, hi, count))
        if b.fold_m is None:
            out[str(n)] = {"ok": False, "reason": "no fold found"}
            continue
        mus = []
        guess = None
        for p in b.minimal():
            res = principal_eigenvalue(integrate_profile(f, n, p.m), guess=guess)
            guess = res.mu1
            mus.append(res.mu1)
        mu_min = min(mus)
        fm = eigen_fold(f, n, b.fold_m - 0.05, b.fold_m + 0.05)
        past = principal_eigenvalue(integrate_profile(f, n, b.fold_m + 0.01)).mu1
        ok = mu_min >= -1e-6 and abs(fm - b.fold_m) <= 1e-3 and past < 0.0
        out[str(n)] = {"ok": ok, "fold_m": b.fold_m, "eigen_zero_m": fm, "min_mu1_minimal": mu_min,
                       "mu1_past_fold": past, "points": len(mus)}
    return {"passed": all(v["ok"] for v in out.values()), "branches": out}


# 7 -----------------------------------------------------------------------------

_SIGN_CASES = (("exp", None, 3, 3.0), ("exp", None, 9, 7.0), ("pow", 2.0, 3, 3.0))


def multiplier_sign(seed: int) -> dict:
    out = {}
    for fam, p, n, hi in _SIGN_CASES:
        f = builtin(fam, p=p)
        g = g_shifted_f(f)
        b = branch_sweep(f, n, m_grid(0.05, hi, 40), keep_profiles=True)
        worst_sign = -math.inf
        worst_gap = 0.0
        for pt in b.minimal():
            mg = verify_stability_inequality(pt.profile, g)
            integral = -mg.integrated / pt.profile.lam
            positive = mg.potential / pt.profile.lam
            worst_sign = max(worst_sign, integral / positive)
            worst_gap = max(worst_gap, mg.relative_gap)
        ok = b.fold_m is not None and worst_sign <= 1e-8 and worst_gap <= 1e-6
        out[f"{f.description}|n={n}"] = {"ok": ok, "max_integral_over_positive_part": worst_sign,
                                         "max_margin_gap": worst_gap, "points": len(b.minimal())}
    return {"passed": all(v["ok"] for v in out.values()), "cases": out, "multiplier": "g = f - f(0)"}


# 8 -----------------------------------------------------------------------------


def uniform_bound(seed: int) -> dict:
    f = builtin("exp")
    out = {}
    b9 = branch_sweep(f, 9, m_grid(0.1, 7.0, 36), keep_profiles=True)
    pts = densify_fold_tail(b9)
    verdict9 = regularity_verdict(build_profile(f), n=9).row(9)["guarantee"]
    for beta in (0.0, 0.9):
        spec = QuantitySpec(INT_H, beta=beta)
        tab = track(b9, [spec], points=pts)
        vals = tab.column(spec.name)
        diag = diagnose_boundedness(tab.lam, vals, b9.lambda_star, expected_bounded=True)
        increasing = bool(np.all(np.diff(vals) > 0.0))
        ok = increasing and diag.behavior == CONVERGES and math.isfinite(diag.empirical_sup)
        out[f"n=9|beta={beta:g}"] = {"ok": ok, "increasing": increasing, "behavior": diag.behavior,
                                     "limit": diag.limit, "empirical_sup": diag.empirical_sup,
                                     "tail_points": len(diag.values), "verdict_level": verdict9}
    b11 = branch_sweep(f, 11, m_grid(0.5, 40.0, 80), keep_profiles=True)
    spec = QuantitySpec(INT_H, beta=0.9)
    tab = track(b11, [spec])
    diag = diagnose_boundedness(tab.lam, tab.column(spec.name), b11.lambda_star, expected_bounded=False)
    out["n=11|beta=0.9"] = {"ok": diag.behavior == GROWS, "behavior": diag.behavior, "law": diag.law,
                            "limit": diag.limit, "exponent": diag.exponent, "empirical_sup": diag.empirical_sup,
                            "tail_points": len(diag.values)}
    return {"passed": all(v["ok"] for v in out.values()), "cases": out}


# 9 -----------------------------------------------------------------------------


def random_bootstrap_inputs(rng: np.random.Generator, count: int) -> list:
    """Valid (alpha, sigma, n): n > 2 alpha and (n - 2) sigma / n < alpha - 1."""
    out = []
    while len(out) < count:
        alpha = float(rng.uniform(1.05, 6.0))
        n = float(rng.uniform(2.0 * alpha + 0.05, 2.0 * alpha + 30.0))
        top = min(alpha, n * (alpha - 1.0) / (n - 2.0))
        sigma = float(rng.uniform(0.0, top))
        if (n - 2.0) * sigma / n < alpha - 1.0:
            out.append((alpha, sigma, n))
    return out


def bootstrap(seed: int) -> dict:
    rng = np.random.default_rng(seed)
    worst = 0.0
    worst_case = None
    for alpha, sigma, n in random_bootstrap_inputs(rng, 50):
        res = bootstrap_exponents(alpha, sigma, n, iterations=10**6, tol=1e-12)
        want = (alpha - sigma) * n / (n - 2.0 * alpha)
        err = abs(res.sequence[-1] - want)
        if err >= worst:
            worst, worst_case = err, [alpha, sigma, n]
    return {"passed": worst <= 1e-9, "max_error": worst, "worst_case": worst_case, "cases": 50}


# 10 ----------------------------------------------------------------------------

_DETERMINISM_PROBE = (1, 2, 3, 9)


def determinism(seed: int) -> dict:
    first = report_lines(run(_select(_DETERMINISM_PROBE), seed))
    second = report_lines(run(_select(_DETERMINISM_PROBE), seed))
    return {"passed": first == second, "probed": list(_DETERMINISM_PROBE), "bytes": len(first.encode())}


CRITERIA = (
    Criterion(1, "threshold regression table", ("verdict",), 1.0, thresholds),
    Criterion(2, "tau estimation", ("asymptotics", "nonlinearity"), 5.0, tau_estimation),
    Criterion(3, "H quadrature against the exponential closed form", ("estimates",), 5.0, exp_quadrature),
    Criterion(4, "plane Gelfand oracle", ("radial",), 10.0, gelfand_plane),
    Criterion(5, "singular limit and supercritical monotonicity", ("radial",), 60.0, singular_limit),
    Criterion(6, "principal eigenvalue along the minimal branch", ("radial",), 60.0, semistability),
    Criterion(7, "sign of the multiplier integral and margin identity", ("estimates", "radial"), 60.0, multiplier_sign),
    Criterion(8, "uniform bound along the branch", ("analysis",), 120.0, uniform_bound),
    Criterion(9, "bootstrap limit", ("verdict",), 1.0, bootstrap),
    Criterion(10, "determinism of the report", ("cli",), None, determinism),
)


def _select(numbers: Sequence[int]) -> list:
    return [c for c in CRITERIA if c.number in numbers]


def select(filter_text: Optional[str] = None) -> list:
    """Criteria whose number, suite or title matches any comma-separated token."""
    if not filter_text:
        return list(CRITERIA)
    tokens = [t.strip().lower() for t in filter_text.split(",") if t.strip()]
    chosen = []
    for c in CRITERIA:
        for t in tokens:
            if t == str(c.number) or t in c.suites or t in c.title.lower():
                chosen.append(c)
                break
    return chosen


def run_one(c: Criterion, seed: int = 0) -> dict:
    try:
        body = c.run(seed)
    except Exception as exc:  # a crash is a failed criterion, reported like one
        body = {"passed": False, "error": f"{type(exc).__name__}: {exc}"}
    return jsonable({"criterion": c.number, "title": c.title, "suites": list(c.suites), **body})


def run(criteria: Sequence[Criterion], seed: int = 0) -> list:
    return [run_one(c, seed) for c in criteria]


def report_lines(results: Sequence[dict]) -> str:
    """One JSON object per line, keys sorted, so equal results give equal bytes."""
    return "".join(json.dumps(r, sort_keys=True) + "\n" for r in results)
