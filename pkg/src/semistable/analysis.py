"""Integrals over the unit ball along a branch, and tail-growth diagnosis."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .asymptotics import jsonable
from .estimates import DEFAULT_TOL, H_f_beta, multiplier_defect, multiplier
from .radial import (
    Branch, BranchPoint, RadialProfile, SolverControls, DEFAULT_CONTROLS, FOLD_NOISE, _fmt, integrate_profile,
    principal_eigenvalue, sphere_area,
)


class InsufficientTailError(ValueError):
    pass


# ball integrals ----------------------------------------------------------------


@dataclass(frozen=True)
class AnalyticProfile:
    """A radial function given in closed form, integrated on uniform panels."""

    n: int
    u: Callable
    du: Callable
    panels: int = 64

    def u_at(self, r):
        r = np.asarray(r, dtype=float)
        return self.u(r), self.du(r)

    def quadrature(self, order: int = 8):
        x, wts = np.polynomial.legendre.leggauss(order)
        edges = np.linspace(0.0, 1.0, self.panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        return (mid[:, None] + half[:, None] * x).ravel(), (half[:, None] * wts).ravel()


@dataclass
class BallIntegral:
    value: float
    error: float  # |8-node - 5-node| on the same panels


def ball_integral_with_error(profile, integrand: Callable) -> BallIntegral:
    """``omega_{n-1} int_0^1 integrand(r, u, u') r^(n-1) dr`` with a lower-order check."""
    vals = []
    for order in (8, 5):
        r, w = profile.quadrature(order)
        u, du = profile.u_at(r)
        vals.append(sphere_area(profile.n) * float(np.sum(w * r ** (profile.n - 1) * integrand(r, u, du))))
    return BallIntegral(vals[0], abs(vals[0] - vals[1]))


def ball_integral(profile, integrand: Callable) -> float:
    return ball_integral_with_error(profile, integrand).value


# tracked quantities --------------------------------------------------------------

LP = "Lp"
GRAD_LP = "GradLp"
INT_H = "IntHfBeta"
INT_NEDEV = "IntNedev"
INT_FFPRIME = "IntFfPrime"
INT_DEFECT = "IntMultiplierDefect"
INT_UF = "IntUf"
KINDS = (LP, GRAD_LP, INT_H, INT_NEDEV, INT_FFPRIME, INT_DEFECT, INT_UF)


@dataclass(frozen=True)
class QuantitySpec:
    kind: str
    r: Optional[float] = None
    beta: Optional[float] = None
    g: str = "shifted_f"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown quantity {self.kind!r}")
        if self.kind in (LP, GRAD_LP) and not (self.r is not None and self.r >= 1.0):
            raise ValueError("norm exponent must be >= 1")
        if self.kind == INT_H and not (self.beta is not None and 0.0 <= self.beta < 1.0):
            raise ValueError("beta must lie in [0, 1)")

    @property
    def name(self) -> str:
        if self.kind in (LP, GRAD_LP):
            return f"{self.kind}({'inf' if math.isinf(self.r) else f'{self.r:g}'})"
        if self.kind == INT_H:
            return f"{self.kind}({self.beta:g})"
        if self.kind == INT_DEFECT:
            return f"{self.kind}({self.g})"
        return self.kind


def evaluate_quantity(profile: RadialProfile, spec: QuantitySpec, tol: float = DEFAULT_TOL) -> float:
    f = profile.f
    if profile.R == 0.0:
        return 0.0
    if spec.kind == LP:
        if math.isinf(spec.r):
            return profile.m
        return ball_integral(profile, lambda r, u, du: np.abs(u) ** spec.r) ** (1.0 / spec.r)
    if spec.kind == GRAD_LP:
        if math.isinf(spec.r):
            r, _ = profile.quadrature()
            return float(np.max(np.abs(profile.u_at(np.append(r, 1.0))[1])))
        return ball_integral(profile, lambda r, u, du: np.abs(du) ** spec.r) ** (1.0 / spec.r)
    if spec.kind == INT_H:
        return ball_integral(profile, lambda r, u, du: H_f_beta(f, spec.beta, np.maximum(u, 0.0), tol))
    if spec.kind == INT_NEDEV:
        f0 = f.f0

        def nedev(r, u, du):
            u = np.maximum(u, 0.0)
            ft = f(u) - f0
            # f~(u)^2 / u -> 0 as u -> 0
            return np.where(u > 0.0, ft * ft / np.where(u > 0.0, u, 1.0), 0.0)

        return ball_integral(profile, nedev)
    if spec.kind == INT_FFPRIME:
        return ball_integral(profile, lambda r, u, du: f(np.maximum(u, 0.0)) * f.d1(np.maximum(u, 0.0)))
    if spec.kind == INT_UF:
        return ball_integral(profile, lambda r, u, du: np.maximum(u, 0.0) * f(np.maximum(u, 0.0)))
    g = _multiplier(spec.g, f, spec.beta or 0.0)
    return ball_integral(profile, lambda r, u, du: multiplier_defect(f, g, np.maximum(u, 0.0), tol))


@lru_cache(maxsize=64)
def _multiplier(choice, f, beta):
    # one object per choice keeps the cumulative G table cached across points
    return multiplier(choice, f, beta)


@dataclass
class TrackTable:
    columns: list
    m: list
    lam: list
    values: list  # rows, aligned with columns; nan marks a failed cell
    errors: list = field(default_factory=list)  # per-row error text or None

    def column(self, name: str) -> np.ndarray:
        k = self.columns.index(name)
        return np.array([row[k] for row in self.values])

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["m", "lambda", *self.columns])
        for m, lam, row in zip(self.m, self.lam, self.values):
            w.writerow([_fmt(m), _fmt(lam), *(_fmt(v) for v in row)])
        return out.getvalue()

    def to_json(self) -> str:
        return json.dumps(jsonable({
            "columns": self.columns, "m": self.m, "lambda": self.lam, "values": self.values, "errors": self.errors,
        }), indent=2)


def _profile_for(point: BranchPoint, f, n, controls) -> RadialProfile:
    return point.profile if point.profile is not None else integrate_profile(f, n, point.m, controls)


def track(branch: Branch, specs: Sequence[QuantitySpec], points: Optional[Sequence[BranchPoint]] = None,
          controls: SolverControls = DEFAULT_CONTROLS, tol: float = DEFAULT_TOL, threads: Optional[int] = None) -> TrackTable:
    """Evaluate every spec at every branch point (all points unless ``points`` is given)."""
    pts = list(points if points is not None else branch.points)
    cols = [s.name for s in specs]

    def work(pt):
        if not pt.ok:
            return [math.nan] * len(specs), pt.error
        try:
            prof = _profile_for(pt, branch.f, branch.n, controls)
            return [evaluate_quantity(prof, s, tol) for s in specs], None
        except (ValueError, RuntimeError, OverflowError) as exc:
            return [math.nan] * len(specs), f"{type(exc).__name__}: {exc}"

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(work, pts))
    else:
        results = [work(p) for p in pts]
    for pt, (vals, _) in zip(pts, results):
        pt.extra.update(dict(zip(cols, vals)))
    return TrackTable(cols, [p.m for p in pts], [p.lam for p in pts], [r[0] for r in results], [r[1] for r in results])


def densify_fold_tail(branch: Branch, count: int = 24, window: float = 0.99,
                      controls: SolverControls = DEFAULT_CONTROLS, eigen: bool = False) -> list:
    """Extra minimal-branch points with ``lambda >= window * lambda_star``.

    On a folding branch the points approach the fold quadratically in m; on a
    monotone branch they are spread between the first grid point inside the
    window and the last grid point.  Returns the merged minimal branch, by m.
    """
    minimal = branch.minimal()
    target = window * branch.lambda_star
    lam_fun = lambda m: integrate_profile(branch.f, branch.n, m, controls).lam
    if branch.fold_m is not None:
        inside = [p for p in minimal if p.lam >= target]
        before = [p for p in minimal if p.lam < target]
        hi = branch.fold_m
        lo = before[-1].m if before else minimal[0].m
        m_a = brentq(lambda m: lam_fun(m) - target, lo, hi, xtol=1e-12) if lam_fun(lo) < target else lo
        k = np.arange(count)
        # quadratic clustering towards the fold, fold itself excluded
        ms = hi - (hi - m_a) * (1.0 - k / count) ** 2
        ms = ms[ms < hi]
    else:
        inside = [p for p in minimal if p.lam >= target]
        if not inside:
            raise InsufficientTailError("no grid point inside the tail window")
        ms = np.linspace(inside[0].m, inside[-1].m, count + 2)[1:-1]
    extra = []
    for m in ms:
        pt = BranchPoint(float(m))
        try:
            prof = integrate_profile(branch.f, branch.n, float(m), controls)
            pt.R, pt.lam, pt.profile = prof.R, prof.lam, prof
            if eigen:
                pt.mu1 = principal_eigenvalue(prof).mu1
        except (ValueError, RuntimeError) as exc:
            pt.error = str(exc)
        extra.append(pt)
    merged = {p.m: p for p in minimal}
    merged.update({p.m: p for p in extra if p.ok})
    return [merged[m] for m in sorted(merged)]


# boundedness diagnosis ------------------------------------------------------------

CONVERGES = "ConvergesTo"
GROWS = "GrowsLike"


@dataclass
class BoundednessDiagnosis:
    behavior: str  # ConvergesTo | GrowsLike
    law: Optional[str]  # limit for ConvergesTo is in `limit`; log | power | undetermined for growth
    limit: Optional[float]
    exponent: Optional[float]
    empirical_sup: float
    rss: dict
    lambdas: list
    values: list
    verdict_consistency: Optional[str] = None

    def to_dict(self):
        return jsonable(self.__dict__.copy())


def _lsq(X, y):
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    r = y - X @ coef
    return coef, float(r @ r)


def _best_exponent(design, y, lo, hi, accept):
    """Minimize the residual over the exponent on a grid, then refine."""
    grid = np.linspace(lo, hi, 37)
    best = (math.inf, None, None)
    for q in grid:
        coef, rss = _lsq(design(q), y)
        if accept(coef) and rss < best[0]:
            best = (rss, q, coef)
    if best[1] is None or best[0] == 0.0:
        return best
    step = grid[1] - grid[0]
    a, b = max(lo, best[1] - step), min(hi, best[1] + step)

    def obj(q):
        coef, rss = _lsq(design(q), y)
        return rss if accept(coef) else math.inf

    # rejected exponents score inf, which the bounded search handles but warns about
    with np.errstate(invalid="ignore"):
        res = minimize_scalar(obj, bounds=(a, b), method="bounded", options={"xatol": 1e-10})
    if res.fun < best[0]:
        q = float(res.x)
        best = (float(res.fun), q, _lsq(design(q), y)[0])
    return best


def diagnose_boundedness(lambdas, values, lambda_star: Optional[float] = None, window: float = 0.99,
                         min_points: int = 10, expected_bounded: Optional[bool] = None,
                         noise: float = FOLD_NOISE) -> BoundednessDiagnosis:
    """Classify the approach of ``values`` as ``lambda -> lambda_star``.

    Four least-squares fits in ``d = lambda_star - lambda`` over the tail
    ``lambda >= window * lambda_star``: constant, ``a + b d^q``,
    ``a + b ln d`` (b < 0) and ``a + b d^-q`` (b > 0).  The smallest residual
    wins; near-ties go to the simpler model.  Points with ``d`` below
    ``noise * lambda_star`` are dropped: there the gap is solver noise.
    """
    lam = np.asarray(lambdas, dtype=float)
    val = np.asarray(values, dtype=float)
    ok = np.isfinite(lam) & np.isfinite(val)
    lam, val = lam[ok], val[ok]
    lstar = float(np.max(lam)) if lambda_star is None else float(lambda_star)
    d = lstar - lam
    sel = (lam >= window * lstar) & (d > max(noise, 1e-12) * abs(lstar))
    if np.count_nonzero(sel) < min_points:
        raise InsufficientTailError(f"{np.count_nonzero(sel)} tail points, need {min_points}")
    d, y = d[sel], val[sel]
    order = np.argsort(-d)
    d, y = d[order], y[order]
    scale = max(float(np.max(np.abs(y))), 1e-300)
    ys = y / scale
    ones = np.ones_like(d)

    rss = {}
    c_const, rss["constant"] = _lsq(ones[:, None], ys)
    conv = _best_exponent(lambda q: np.column_stack([ones, d**q]), ys, 0.2, 2.0, lambda c: True)
    rss["converges"] = conv[0]
    c_log, r_log = _lsq(np.column_stack([ones, np.log(d)]), ys)
    rss["log"] = r_log if c_log[1] < 0.0 else math.inf
    grow = _best_exponent(lambda q: np.column_stack([ones, d ** (-q)]), ys, 0.25, 4.0, lambda c: c[1] > 0.0)
    rss["power"] = grow[0]

    # near-ties resolve to the simpler model
    tie = 1e-9 * float(ys @ ys) + 1e-30
    ranking = ["constant", "converges", "log", "power"]
    best = min(ranking, key=lambda k: rss[k])
    for k in ranking:
        if rss[k] <= rss[best] + tie:
            best = k
            break

    sup = float(np.max(y))
    if best == "constant":
        res = BoundednessDiagnosis(CONVERGES, None, float(c_const[0] * scale), None, sup, rss, list(lam[sel]), list(val[sel]))
    elif best == "converges":
        res = BoundednessDiagnosis(CONVERGES, None, float(conv[2][0] * scale), conv[1], sup, rss, list(lam[sel]), list(val[sel]))
    elif best == "log":
        res = BoundednessDiagnosis(GROWS, "log", None, None, sup, rss, list(lam[sel]), list(val[sel]))
    else:
        law = "power" if grow[1] is not None else "undetermined"
        res = BoundednessDiagnosis(GROWS, law, None, grow[1], sup, rss, list(lam[sel]), list(val[sel]))
    if expected_bounded is not None:
        bounded = res.behavior == CONVERGES
        res.verdict_consistency = "consistent" if bounded == expected_bounded else "inconsistent"
    return res
