"""Radial solutions of -Lap u = lambda f(u) on the unit ball.

For a center value ``m`` the initial value problem

    v'' + (n-1)/s v' + f(v) = 0,   v(0) = m,  v'(0) = 0

is integrated to its first zero ``R``; then ``u(r) = v(R r)`` solves the
Dirichlet problem with ``lambda = R**2``.  Sweeping ``m`` traces the branch
``lambda(m)``; its first fold is the extremal parameter.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq, minimize_scalar
from scipy.special import gamma as gamma_fn, jv

from .jet import DomainError
from .nonlinearity import Nonlinearity


class IntegrationError(RuntimeError):
    pass


class EigenBracketError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverControls:
    rtol: float = 1e-12
    atol_scale: float = 1e-14
    dense_points: int = 513
    series_scale: float = 1e-4
    s_max: Optional[float] = None


DEFAULT_CONTROLS = SolverControls()
FOLD_NOISE = 1e-9


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / gamma_fn(n / 2.0)


def _extended(f: Nonlinearity):
    """(f, f') with a quadratic Taylor extension below 0 for overshooting steps."""
    f0, f1, f2 = f.jet(0.0)

    def val(v):
        if v >= 0.0:
            F, F1, _ = f.jet(v)
            return F, F1
        return f0 + v * (f1 + 0.5 * f2 * v), f1 + f2 * v

    return val


def _series(f: Nonlinearity, n: int, m: float, s):
    """Fourth-order expansion of (v, v') at the origin."""
    F, F1, _ = f.jet(m)
    v = m - F * s * s / (2 * n) + F1 * F * s**4 / (8 * n * (n + 2))
    w = -F * s / n + F1 * F * s**3 / (2 * n * (n + 2))
    return v, w


def series_start(f: Nonlinearity, m: float, controls: SolverControls = DEFAULT_CONTROLS) -> float:
    # min(): the characteristic length shrinks like sqrt(m / f(m)) when f(m) is large
    F = f(m)
    return controls.series_scale * min(1.0, math.sqrt(m / F))


@dataclass(frozen=True)
class RadialProfile:
    f: Nonlinearity
    n: int
    m: float
    R: float
    s0: float
    sol: object  # scipy OdeSolution on [s0, R], or None when m == 0
    steps: np.ndarray  # integrator breakpoints in s, from 0 to R
    r: np.ndarray
    u: np.ndarray
    du: np.ndarray
    nfev: int = 0

    @property
    def lam(self) -> float:
        return self.R * self.R

    def v_at(self, s):
        """(v, v') at scaled radii ``s`` in [0, R]."""
        s = np.asarray(s, dtype=float)
        if self.sol is None:
            return np.zeros_like(s), np.zeros_like(s)
        out_v = np.empty_like(s)
        out_w = np.empty_like(s)
        low = s < self.s0
        if np.any(low):
            out_v[low], out_w[low] = _series(self.f, self.n, self.m, s[low])
        if np.any(~low):
            y = self.sol(np.clip(s[~low], self.s0, self.R))
            out_v[~low], out_w[~low] = y[0], y[1]
        return out_v, out_w

    def u_at(self, r):
        """(u, u') at radii ``r`` in [0, 1]."""
        v, w = self.v_at(np.asarray(r, dtype=float) * self.R)
        return v, w * self.R

    def quadrature(self, order: int = 8):
        """Gauss-Legendre nodes and weights in r on the integrator's own steps."""
        x, wts = np.polynomial.legendre.leggauss(order)
        a = self.steps[:-1] / self.R if self.R > 0 else np.array([0.0])
        b = self.steps[1:] / self.R if self.R > 0 else np.array([1.0])
        half = 0.5 * (b - a)
        mid = 0.5 * (b + a)
        r = (mid[:, None] + half[:, None] * x[None, :]).ravel()
        w = (half[:, None] * wts[None, :]).ravel()
        return r, w

    def residual(self, per_step: int = 3) -> float:
        """Max of |u'' + (n-1)/r u' + lambda f(u)| / (lambda f(m)) on step interiors.

        ``u''`` is a fourth-order central difference of the dense interpolant of
        ``u'``, independent of the right-hand side used by the integrator.
        """
        if self.sol is None:
            return 0.0
        ts = self.sol.ts
        worst = 0.0
        fr = np.linspace(0.0, 1.0, per_step + 2)[1:-1]
        a, b = ts[:-1], ts[1:]
        h = 1e-3 * (b - a)
        for frac in fr:
            s = a + frac * (b - a)
            w = [self.sol(s + k * h)[1] for k in (-2, -1, 1, 2)]
            vpp = (-w[3] + 8.0 * w[2] - 8.0 * w[1] + w[0]) / (12.0 * h)
            v, wc = self.sol(s)[:2]
            res = vpp + (self.n - 1) / s * wc + self.f(np.maximum(v, 0.0))
            worst = max(worst, float(np.max(np.abs(res))))
        return worst / self.f(self.m)


def _rhs(n: int, fx: Callable):
    def rhs(s, y):
        F, _ = fx(y[0])
        return [y[1], -(n - 1) / s * y[1] - F]

    return rhs


def _hit_zero(s, y):
    return y[0]


_hit_zero.terminal = True
_hit_zero.direction = -1


def integrate_profile(f: Nonlinearity, n: int, m: float, controls: SolverControls = DEFAULT_CONTROLS) -> RadialProfile:
    """Shoot from the center value ``m`` to the first zero of v."""
    if int(n) != n or n < 2:
        raise ValueError("n must be an integer >= 2")
    n = int(n)
    if m < 0.0:
        raise ValueError("center value must be nonnegative")
    r = np.linspace(0.0, 1.0, controls.dense_points)
    if m == 0.0:
        z = np.zeros_like(r)
        return RadialProfile(f, n, 0.0, 0.0, 0.0, None, np.array([0.0, 0.0]), r, z, z.copy())
    f0 = f.f0
    if not f0 > 0.0:
        raise ValueError("f(0) must be positive")
    # v <= m - f(0) s^2 / (2n), so the zero lies below sqrt(2 n m / f(0))
    s_max = controls.s_max or 4.0 * math.sqrt(2.0 * n * m / f0) + 1.0
    s0 = series_start(f, m, controls)
    v0, w0 = _series(f, n, m, s0)
    fx = _extended(f)
    # absolute floors tied to the starting magnitudes: (n-1)/s v' amplifies errors in v' near s0
    atol = [controls.atol_scale * m, controls.atol_scale * abs(w0)]
    res = solve_ivp(
        _rhs(n, fx), (s0, s_max), [v0, w0], method="DOP853", rtol=controls.rtol,
        atol=atol, events=_hit_zero, dense_output=True,
    )
    if res.status == -1:
        raise IntegrationError(f"integration failed at m = {m!r}: {res.message}")
    if res.status == 0 or not len(res.t_events[0]):
        raise IntegrationError(f"no zero of v before s = {s_max:g} (m = {m!r})")
    R = float(res.t_events[0][0])
    sol = res.sol
    # one Newton polish on the dense interpolant
    vR, wR = sol(R)[:2]
    if wR < 0.0:
        R_new = R - vR / wR
        if abs(R_new - R) < 1e-6 * R:
            R = R_new
    steps = np.concatenate([[0.0], sol.ts[sol.ts < R], [R]])
    steps = np.unique(steps)
    prof = RadialProfile(f, n, m, R, s0, sol, steps, r, np.empty(0), np.empty(0), res.nfev)
    u, du = prof.u_at(r)
    u[-1] = 0.0
    object.__setattr__(prof, "u", u)
    object.__setattr__(prof, "du", du)
    return prof


# principal eigenvalue --------------------------------------------------------


def dirichlet_ball_eigenvalue(n: int) -> float:
    """First Dirichlet eigenvalue of -Lap on the unit ball: j_{n/2-1,1}^2."""
    order = n / 2.0 - 1.0
    # the first zero of J_order lies in (order, order + pi + 2)
    lo = max(order, 0.0) + 1e-9
    hi = order + math.pi + 2.0
    xs = np.linspace(lo, hi, 400)
    vals = jv(order, xs)
    k = int(np.argmax(np.sign(vals[:-1]) != np.sign(vals[1:])))
    z = brentq(lambda x: jv(order, x), xs[k], xs[k + 1], xtol=1e-15, rtol=1e-15)
    return z * z


@dataclass(frozen=True)
class EigenResult:
    mu1: float
    profile: RadialProfile
    sol: object  # OdeSolution of (v, v', phi, phi') in s, or None
    positive: bool
    evaluations: int

    def eta(self, r):
        """Eigenfunction and its r-derivative, normalized to 1 at the center."""
        r = np.asarray(r, dtype=float)
        p = self.profile
        if self.sol is None:
            order = p.n / 2.0 - 1.0
            k = math.sqrt(self.mu1)
            x = np.maximum(k * r, 1e-300)
            scale = gamma_fn(order + 1.0) * (2.0 / x) ** order
            from scipy.special import jvp
            phi = np.where(r > 0, scale * jv(order, x), 1.0)
            dphi = np.where(r > 0, scale * jvp(order, x) * k - order / np.maximum(r, 1e-300) * phi, 0.0)
            return phi, dphi
        s = r * p.R
        nu = self.mu1 / p.lam
        low = s < p.s0
        phi = np.empty_like(s)
        dphi = np.empty_like(s)
        F1 = p.f.d1(p.m)
        phi[low] = 1.0 - (F1 + nu) * s[low] ** 2 / (2 * p.n)
        dphi[low] = -(F1 + nu) * s[low] / p.n
        if np.any(~low):
            y = self.sol(np.clip(s[~low], p.s0, p.R))
            phi[~low], dphi[~low] = y[2], y[3]
        return phi, dphi * p.R


def _eigen_shoot(p: RadialProfile, mu: float, rtol: float, dense: bool = False):
    nu = mu / p.lam
    n = p.n
    fx = _extended(p.f)
    s0 = p.s0
    v0, w0 = _series(p.f, n, p.m, s0)
    F1 = p.f.d1(p.m)
    phi0 = 1.0 - (F1 + nu) * s0 * s0 / (2 * n)
    psi0 = -(F1 + nu) * s0 / n

    def rhs(s, y):
        F, Fp = fx(y[0])
        c = (n - 1) / s
        return [y[1], -c * y[1] - F, y[3], -c * y[3] - (Fp + nu) * y[2]]

    def node(s, y):
        return y[2]

    atol = [1e-14 * p.m, 1e-14 * abs(w0), 1e-14, 1e-14 * max(abs(psi0), 1e-300)]
    res = solve_ivp(rhs, (s0, p.R), [v0, w0, phi0, psi0], method="DOP853", rtol=rtol,
                    atol=atol, events=node, dense_output=dense)
    if res.status == -1:
        raise IntegrationError(res.message)
    # sign changes on (0, R]; the sign of phi(R) is consistent with this count
    return float(res.y[2, -1]), len(res.t_events[0]), res.sol if dense else None


def principal_eigenvalue(profile: RadialProfile, tol: float = 1e-10, mu_max: float = 1e5,
                         guess: Optional[float] = None, rtol: float = 1e-11) -> EigenResult:
    """Lowest Dirichlet eigenvalue of ``-Lap - lambda f'(u)`` on the unit ball.

    Shoots phi'' + (n-1)/r phi' + (lambda f'(u) + mu) phi = 0 from the center;
    a node count brackets the mu for which the first zero of phi sits at
    r = 1, and Brent's method refines it.
    """
    p = profile
    if p.R == 0.0:
        return EigenResult(dirichlet_ball_eigenvalue(p.n), p, None, True, 0)
    count = [0]

    def shoot(mu):
        count[0] += 1
        return _eigen_shoot(p, mu, rtol)[:2]

    start = 0.0 if guess is None else guess
    val, zeros = shoot(start)
    lo = hi = None
    if zeros == 0:
        lo, lo_val = start, val
        step = 1.0
        while True:
            cand = lo + step
            if cand > mu_max:
                raise EigenBracketError("no upper bracket for the principal eigenvalue")
            v, z = shoot(cand)
            if z >= 1:
                hi, hi_val, hi_z = cand, v, z
                break
            lo, lo_val = cand, v
            step *= 2.0
    else:
        hi, hi_val, hi_z = start, val, zeros
        step = 1.0
        while True:
            cand = hi - step
            if cand < -mu_max:
                raise EigenBracketError("no lower bracket for the principal eigenvalue")
            v, z = shoot(cand)
            if z == 0:
                lo, lo_val = cand, v
                break
            hi, hi_val, hi_z = cand, v, z
            step *= 2.0
    # shrink until the upper end has exactly one interior node
    while hi_z > 1:
        mid = 0.5 * (lo + hi)
        v, z = shoot(mid)
        if z == 0:
            lo, lo_val = mid, v
        else:
            hi, hi_val, hi_z = mid, v, z
    if lo_val == 0.0:
        mu = lo
    elif hi_val == 0.0:
        mu = hi
    else:
        mu = brentq(lambda x: shoot(x)[0], lo, hi, xtol=tol * max(1.0, abs(lo)), rtol=1e-15)
    _, _, sol = _eigen_shoot(p, mu, rtol, dense=True)
    s = np.linspace(p.s0, p.R, 2001)[:-1]
    positive = bool(np.all(sol(s)[2] > 0.0))
    return EigenResult(float(mu), p, sol, positive, count[0] + 1)


# stability margins -----------------------------------------------------------


@dataclass
class StabilityMargin:
    gradient: float  # int |grad eta|^2
    potential: float  # lambda int f'(u) eta^2
    direct: float  # gradient - potential
    integrated: Optional[float] = None  # -lambda int H(u), when eta = g(u)
    relative_gap: Optional[float] = None


def stability_margin(profile: RadialProfile, eta: Callable, order: int = 8) -> StabilityMargin:
    """``int |grad eta|^2 - lambda int f'(u) eta^2`` for a radial ``eta(r) -> (eta, eta')``."""
    p = profile
    if p.R == 0.0:
        return StabilityMargin(0.0, 0.0, 0.0)
    r, w = p.quadrature(order)
    u, _ = p.u_at(r)
    e, de = eta(r)
    meas = sphere_area(p.n) * w * r ** (p.n - 1)
    grad = float(np.sum(meas * de * de))
    pot = p.lam * float(np.sum(meas * p.f.d1(np.maximum(u, 0.0)) * e * e))
    return StabilityMargin(grad, pot, grad - pot)


def verify_stability_inequality(profile: RadialProfile, g, tol: float = 1e-10, order: int = 8) -> StabilityMargin:
    """Semistability test with ``eta = g(u)`` in two forms.

    The direct form integrates ``g'(u)^2 |u'|^2 - lambda f'(u) g(u)^2``; the
    second form is ``-lambda int (g^2 f' - G f)(u)``, equal to the first after
    integrating by parts (both vanish for the trivial solution).
    """
    from .estimates import g_table

    p = profile
    if p.R == 0.0:
        return StabilityMargin(0.0, 0.0, 0.0, 0.0, 0.0)
    r, w = p.quadrature(order)
    u, du = p.u_at(r)
    u = np.maximum(u, 0.0)
    gv, gp = g.values(u)
    meas = sphere_area(p.n) * w * r ** (p.n - 1)
    F, F1, _ = p.f.jet(u)
    grad = float(np.sum(meas * (gp * du) ** 2))
    pot = p.lam * float(np.sum(meas * F1 * gv * gv))
    G = g_table(g, max(p.m, 1.0), tol)(u)
    pos = p.lam * float(np.sum(meas * G * F))
    integrated = pos - pot
    direct = grad - pot
    scale = abs(grad) + abs(pot)
    gap = abs(direct - integrated) / scale if scale > 0 else 0.0
    return StabilityMargin(grad, pot, direct, integrated, gap)


# branches --------------------------------------------------------------------


@dataclass
class BranchPoint:
    m: float
    R: float = math.nan
    lam: float = math.nan
    mu1: float = math.nan
    error: Optional[str] = None
    profile: Optional[RadialProfile] = field(default=None, repr=False)
    extra: dict = field(default_factory=dict)

    @property
    def u_inf(self) -> float:
        return self.m

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class Branch:
    f: Nonlinearity
    n: int
    points: list
    lambda_star: float
    fold_m: Optional[float]
    monotone_flag: bool
    argmax_m: float = math.nan

    def minimal(self) -> list:
        """Points up to the first fold (all points on a monotone branch)."""
        pts = [p for p in self.points if p.ok]
        if self.fold_m is None:
            return pts
        return [p for p in pts if p.m <= self.fold_m]

    def to_csv(self, columns: Sequence[str] = ()) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["m", "R", "lambda", "mu1", "u_inf", *columns])
        for p in self.points:
            w.writerow([_fmt(p.m), _fmt(p.R), _fmt(p.lam), _fmt(p.mu1), _fmt(p.u_inf),
                        *(_fmt(p.extra.get(c, math.nan)) for c in columns)])
        return out.getvalue()


def _fmt(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.17g" % x


def read_branch_csv(text: str) -> list:
    """Rows of a branch CSV as dicts of floats."""
    rows = csv.DictReader(io.StringIO(text))
    return [{k: float(v) for k, v in row.items()} for row in rows]


def m_grid(lo: float, hi: float, count: int, spacing: str = "linear") -> np.ndarray:
    if not hi > lo > 0.0:
        raise ValueError("need 0 < min < max")
    if count < 2:
        raise ValueError("need at least two grid points")
    if spacing == "linear":
        return np.linspace(lo, hi, count)
    if spacing == "geometric":
        return np.geomspace(lo, hi, count)
    raise ValueError(f"unknown spacing {spacing!r}")


def _solve_point(f, n, m, controls, eigen, keep, eigen_tol=1e-10):
    pt = BranchPoint(float(m))
    try:
        prof = integrate_profile(f, n, float(m), controls)
    except (IntegrationError, DomainError, ValueError, OverflowError) as exc:
        pt.error = f"{type(exc).__name__}: {exc}"
        return pt
    pt.R, pt.lam = prof.R, prof.lam
    if keep:
        pt.profile = prof
    if eigen:
        try:
            pt.mu1 = principal_eigenvalue(prof, tol=eigen_tol).mu1
        except (EigenBracketError, ValueError, OverflowError) as exc:
            # the point still belongs to the branch; only mu1 is missing
            pt.extra["mu1_error"] = f"{type(exc).__name__}: {exc}"
    return pt


def lambda_of(f: Nonlinearity, n: int, controls: SolverControls = DEFAULT_CONTROLS) -> Callable:
    return lambda m: integrate_profile(f, n, float(m), controls).lam


def _refine_max(fun, a, b, c, tol):
    res = minimize_scalar(lambda m: -fun(m), bracket=(a, b, c), method="golden", tol=tol)
    return float(res.x), float(-res.fun)


def branch_sweep(f: Nonlinearity, n: int, grid, controls: SolverControls = DEFAULT_CONTROLS, eigen: bool = False,
                 keep_profiles: bool = False, threads: Optional[int] = None, refine: bool = True,
                 refine_tol: float = 1e-9, eigen_tol: float = 1e-10) -> Branch:
    """Trace lambda(m) over ``grid`` and locate the first fold.

    Failed points carry an error message instead of aborting the sweep.
    Results are ordered by ``m`` whatever the number of worker threads.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size < 3 or np.any(np.diff(grid) <= 0.0) or grid[0] <= 0.0:
        raise ValueError("grid must be positive, strictly increasing, with >= 3 points")

    def work(m):
        return _solve_point(f, n, m, controls, eigen, keep_profiles, eigen_tol)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            points = list(ex.map(work, grid))
    else:
        points = [work(m) for m in grid]

    lam = np.array([p.lam for p in points])
    good = np.isfinite(lam)
    fold_idx = None
    for k in range(1, len(points) - 1):
        if not (good[k - 1] and good[k] and good[k + 1]):
            continue
        # differences at the level of the integration tolerance are not folds
        noise = FOLD_NOISE * lam[k]
        if lam[k] > lam[k - 1] + noise and lam[k] > lam[k + 1] + noise:
            fold_idx = k
            break
    lam_fun = lambda_of(f, n, controls)
    fold_m = None
    if fold_idx is not None:
        k = fold_idx
        if refine:
            fold_m, lam_fold = _refine_max(lam_fun, grid[k - 1], grid[k], grid[k + 1], refine_tol)
        else:
            fold_m, lam_fold = float(grid[k]), float(lam[k])
        lambda_star = max(lam_fold, float(np.nanmax(lam[: k + 1])))
        argmax_m = fold_m
    else:
        kmax = int(np.nanargmax(lam))
        lambda_star = float(lam[kmax])
        argmax_m = float(grid[kmax])
    return Branch(f, n, points, lambda_star, fold_m, fold_idx is None, argmax_m)


def eigen_fold(f: Nonlinearity, n: int, lo: float, hi: float, controls: SolverControls = DEFAULT_CONTROLS,
               xtol: float = 1e-10) -> float:
    """Center value where the principal eigenvalue crosses zero, bracketed by [lo, hi]."""

    def mu(m):
        return principal_eigenvalue(integrate_profile(f, n, m, controls)).mu1

    return float(brentq(mu, lo, hi, xtol=xtol))
