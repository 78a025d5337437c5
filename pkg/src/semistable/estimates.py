"""Integral functionals of a nonlinearity.

``Phi(t) = int_0^t sqrt(f''/f)``, ``I(t) = int_0^t f f'' exp(2 beta Phi)`` and
``G(t) = int_0^t g'(s)^2 ds`` are tabulated once as piecewise Chebyshev
antiderivatives; any number of point queries afterwards cost a panel lookup
and a series evaluation.
"""

from __future__ import annotations

import csv
import io
import math
import threading
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import chebyshev as C

from .expr import evaluate_jet, parse_expression
from .jet import Jet2
from .nonlinearity import EXPONENTIAL, POWER_SHIFTED, Nonlinearity

DEFAULT_TOL = 1e-10
DEGREE = 32
MIN_WIDTH = 1e-8
NEAR_START = 1e-2
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(12)


class NonConvexError(ValueError):
    pass


class QuadratureError(RuntimeError):
    pass


class PiecewiseIntegral:
    """Cumulative integral ``x -> int_start^x h`` on adaptive Chebyshev panels.

    ``h`` must accept a numpy array.  Panels are split until the trailing
    Chebyshev coefficients fall below ``tol`` relative to the smallest
    integrand magnitude on the panel, floored at ``abs_floor``.
    """

    def __init__(self, integrand: Callable, t_max: float, tol: float = DEFAULT_TOL,
                 start: float = 0.0, deg: int = DEGREE, abs_floor: float = 1e-2, initial_width: float = 1.0):
        if not tol > 0.0:
            raise ValueError("tolerance must be positive")
        self.h = integrand
        self.tol = tol
        self.deg = deg
        self.abs_floor = abs_floor
        self.start = start
        self.unresolved = 0
        self._nodes = C.chebpts1(deg + 1)
        tr = C.chebvander(self._nodes, deg).T * (2.0 / (deg + 1))
        tr[0] *= 0.5
        self._transform = tr
        breaks = [start]
        coefs = []
        errs = []
        for a, b in _initial_panels(start, t_max, initial_width):
            self._fill(a, b, breaks, coefs, errs)
        self.breaks = np.array(breaks)
        self.coefs = coefs
        self.errors = np.array(errs)
        ends = np.array([C.chebval(1.0, c) for c in coefs]) if coefs else np.zeros(0)
        self.offsets = np.concatenate([[0.0], np.cumsum(ends)])

    @property
    def t_max(self) -> float:
        return float(self.breaks[-1])

    def _fill(self, a, b, breaks, coefs, errs):
        stack = [(a, b)]
        while stack:
            lo, hi = stack.pop()
            half = 0.5 * (hi - lo)
            mid = 0.5 * (hi + lo)
            v = np.broadcast_to(self.h(mid + half * self._nodes), self._nodes.shape)
            if not np.all(np.isfinite(v)):
                raise QuadratureError(f"integrand not finite on [{lo!r}, {hi!r}]")
            c = self._transform @ v
            tail = float(np.max(np.abs(c[-4:])))
            # smallest magnitude on the panel keeps the cumulant pointwise relative-accurate
            scale = float(np.min(np.abs(v)))
            err = tail * 2.0 * half
            ok = tail <= self.tol * max(scale, self.abs_floor)
            # kinks and roundoff noise (e.g. where f'' touches 0) stop at a minimum width
            if not ok and 2.0 * half <= MIN_WIDTH * max(1.0, abs(hi)):
                self.unresolved += 1
                ok = True
            if ok:
                coefs.append(C.chebint(c, lbnd=-1.0, scl=half))
                breaks.append(hi)
                errs.append(err)
            else:
                stack.append((mid, hi))
                stack.append((lo, mid))

    def __call__(self, x):
        scalar = np.isscalar(x)
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if np.any(x < self.start) or np.any(x > self.breaks[-1] * (1.0 + 1e-15)):
            raise ValueError(f"query outside tabulated range [{self.start}, {self.breaks[-1]}]")
        idx = np.clip(np.searchsorted(self.breaks, x, side="right") - 1, 0, len(self.coefs) - 1)
        out = np.empty_like(x)
        for k in np.unique(idx):
            sel = idx == k
            lo, hi = self.breaks[k], self.breaks[k + 1]
            xi = (2.0 * x[sel] - lo - hi) / (hi - lo)
            out[sel] = self.offsets[k] + C.chebval(xi, self.coefs[k])
        # close to the start the series loses relative accuracy to roundoff; integrate directly
        near = (x > self.start) & (x - self.start < NEAR_START * (self.breaks[1] - self.start))
        if np.any(near):
            xn = x[near]
            half = 0.5 * (xn - self.start)
            pts = self.start + half[:, None] * (_GL_NODES[None, :] + 1.0)
            vals = np.broadcast_to(self.h(pts.ravel()), (pts.size,)).reshape(pts.shape)
            out[near] = half * (vals @ _GL_WEIGHTS)
        out[x == self.start] = 0.0
        return float(out[0]) if scalar else out

    @property
    def error_estimate(self) -> float:
        return float(np.sum(self.errors))


def _initial_panels(start, t_max, width):
    """[start, start+w], then doubling widths until t_max is covered."""
    out = []
    a = start
    w = width
    while a < t_max:
        b = a + w
        out.append((a, b))
        a = b
        if a - start >= w:
            w = a - start
    return out or [(start, start + width)]


def _covering(t_max: float) -> float:
    """Round a range up to a power of two so tables are shared between queries."""
    return 2.0 ** math.ceil(math.log2(max(t_max, 1.0)))


# multipliers g ----------------------------------------------------------------


@dataclass(frozen=True)
class Multiplier:
    """A choice of g with ``values(t) -> (g, g')`` on arrays."""

    name: str
    values: Callable
    detail: str = ""

    def __call__(self, t):
        return self.values(np.asarray(t, dtype=float))[0]

    def derivative(self, t):
        return self.values(np.asarray(t, dtype=float))[1]

    @property
    def vanishes_at_zero(self) -> bool:
        return abs(float(self(0.0))) <= 1e-14


def g_equals_f(f: Nonlinearity) -> Multiplier:
    return Multiplier("f", lambda t: f.jet(t)[:2], "g = f")


def g_shifted_f(f: Nonlinearity) -> Multiplier:
    f0 = f.f0

    def values(t):
        F, F1, _ = f.jet(t)
        return F - f0, F1

    return Multiplier("shifted_f", values, "g = f - f(0)")


def g_power(f: Nonlinearity, beta: float) -> Multiplier:
    def values(t):
        F, F1, _ = f.jet(t)
        return F**beta, beta * F ** (beta - 1.0) * F1

    return Multiplier(f"power({beta:g})", values, f"g = f^{beta:g}")


def g_weighted(f: Nonlinearity, beta: float, s0: float = 1.0, tol: float = DEFAULT_TOL) -> Multiplier:
    """``g = f exp(beta Phi)`` beyond ``s0``, joined to 0 by a C^1 quadratic."""
    phi = phi_table(f, s0, tol)
    F, F1, F2 = f.jet(s0)
    w = math.exp(beta * phi(s0))
    gs = F * w
    gps = w * (F1 + beta * math.sqrt(F * F2))
    a = (2.0 * gs - gps * s0) / s0
    b = (gps * s0 - gs) / s0**2

    def values(t):
        t = np.asarray(t, dtype=float)
        hi = t >= s0
        g = a * t + b * t * t
        gp = a + 2.0 * b * t
        if np.any(hi):
            th = t[hi] if t.ndim else t
            F, F1, F2 = f.jet(th)
            tab = phi_table(f, float(np.max(th)), tol)
            e = np.exp(beta * tab(th))
            gh = F * e
            gph = e * (F1 + beta * np.sqrt(np.maximum(F * F2, 0.0)))
            if t.ndim:
                g[hi], gp[hi] = gh, gph
            else:
                g, gp = gh, gph
        return g, gp

    return Multiplier(f"weighted({beta:g})", values, f"g = f exp({beta:g} Phi) for s >= {s0:g}, quadratic bridge below")


def g_custom(text: str) -> Multiplier:
    node = parse_expression(text)

    def values(t):
        j = evaluate_jet(node, Jet2.variable(t))
        shape = np.shape(t)
        return np.broadcast_to(j.value, shape).copy(), np.broadcast_to(j.d1, shape).copy()

    return Multiplier("custom", values, f"g = {text}")


def multiplier(choice: str, f: Nonlinearity, beta: float = 0.0, expr: Optional[str] = None) -> Multiplier:
    if choice == "f":
        return g_equals_f(f)
    if choice == "shifted_f":
        return g_shifted_f(f)
    if choice == "power":
        return g_power(f, beta)
    if choice == "weighted":
        return g_weighted(f, beta)
    if choice == "custom":
        if expr is None:
            raise ValueError("custom multiplier needs an expression")
        return g_custom(expr)
    raise ValueError(f"unknown multiplier {choice!r}")


# tables -----------------------------------------------------------------------

_cache: dict = {}
_lock = threading.Lock()


def _cached(key, t_max, build):
    with _lock:
        tab = _cache.get(key)
        if tab is not None and tab.t_max >= t_max:
            return tab
    tab = build(_covering(t_max))
    with _lock:
        old = _cache.get(key)
        if old is None or old.t_max < tab.t_max:
            _cache[key] = tab
    return tab


def clear_cache():
    with _lock:
        _cache.clear()


def _phi_integrand(f: Nonlinearity):
    def h(t):
        F, _, F2 = f.jet(t)
        if np.any(F2 < 0.0):
            bad = float(np.asarray(t)[np.argmax(F2 < 0.0)])
            raise NonConvexError(f"f'' < 0 at t = {bad!r}")
        if np.any(F <= 0.0):
            raise NonConvexError("f must be positive")
        # sqrt(f''/f) extended by 0 where f'' vanishes
        return np.sqrt(F2 / F)

    return h


def phi_table(f: Nonlinearity, t_max: float, tol: float = DEFAULT_TOL) -> PiecewiseIntegral:
    return _cached(("phi", f, tol), t_max, lambda T: PiecewiseIntegral(_phi_integrand(f), T, tol))


def i_table(f: Nonlinearity, beta: float, t_max: float, tol: float = DEFAULT_TOL) -> PiecewiseIntegral:
    if not 0.0 <= beta < 1.0:
        raise ValueError("beta must lie in [0, 1)")
    phi = phi_table(f, _covering(t_max), tol)

    def h(t):
        F, _, F2 = f.jet(t)
        if np.any(F2 < 0.0):
            raise NonConvexError("f'' < 0")
        out = F * F2
        if beta:
            out = out * np.exp(2.0 * beta * phi(t))
        return out

    return _cached(("I", f, beta, tol), t_max, lambda T: PiecewiseIntegral(h, T, tol))


def g_table(g: Multiplier, t_max: float, tol: float = DEFAULT_TOL) -> PiecewiseIntegral:
    return _cached(("G", g, tol), t_max, lambda T: PiecewiseIntegral(lambda t: g.derivative(t) ** 2, T, tol))


class CumulativeTable:
    """Phi, I and (optionally) G on a common range, exportable as CSV."""

    def __init__(self, f: Nonlinearity, beta: float = 0.0, g: Optional[Multiplier] = None,
                 t_max: float = 10.0, tol: float = DEFAULT_TOL):
        self.f = f
        self.beta = beta
        self.g = g
        self.Phi = phi_table(f, t_max, tol)
        self.I = i_table(f, beta, t_max, tol)
        self.G = g_table(g, t_max, tol) if g is not None else None
        self.t_max = t_max

    def breakpoints(self) -> np.ndarray:
        parts = [self.Phi.breaks, self.I.breaks] + ([self.G.breaks] if self.G else [])
        t = np.unique(np.concatenate(parts))
        return t[t <= self.t_max]

    def rows(self):
        t = self.breakpoints()
        cols = [t, self.Phi(t), self.I(t)]
        if self.G is not None:
            cols.append(self.G(t))
        return np.column_stack(cols)

    def to_csv(self, fh=None) -> str:
        out = fh or io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["t", "Phi", "I", "G"] if self.G is not None else ["t", "Phi", "I"])
        for row in self.rows():
            w.writerow([f"{x:.17g}" for x in row])
        return out.getvalue() if fh is None else ""

    @property
    def error_estimates(self) -> dict:
        d = {"Phi": self.Phi.error_estimate, "I": self.I.error_estimate}
        if self.G is not None:
            d["G"] = self.G.error_estimate
        return d


# functionals ------------------------------------------------------------------


def H_f_beta(f: Nonlinearity, beta: float, u, tol: float = DEFAULT_TOL):
    """``f(u) int_0^u f f'' exp(2 beta Phi)``; ``u`` may be an array."""
    ua = np.asarray(u, dtype=float)
    if np.any(ua < 0.0):
        raise ValueError("u must be nonnegative")
    top = float(np.max(ua)) if ua.size else 0.0
    tab = i_table(f, beta, max(top, 1.0), tol)
    val = f(ua) * tab(ua)
    return float(np.reshape(val, ())) if np.ndim(u) == 0 else val


def multiplier_defect(f: Nonlinearity, g: Multiplier, s, tol: float = DEFAULT_TOL):
    """``g(s)^2 f'(s) - G(s) f(s)``."""
    sa = np.asarray(s, dtype=float)
    top = float(np.max(sa)) if sa.size else 0.0
    G = g_table(g, max(top, 1.0), tol)
    F, F1, _ = f.jet(sa)
    gv = g(sa)
    val = gv * gv * F1 - G(sa) * F
    return float(np.reshape(val, ())) if np.ndim(s) == 0 else val


@dataclass
class RatioBoundReport:
    lhs_sup: float
    rhs_sup: float
    violation: float  # lhs_sup - rhs_sup, <= 0 when the bound holds
    status: str  # "holds", "violated" or "Inconclusive"
    convex_power_ok: bool
    lhs_windows: list
    rhs_windows: list


def multiplier_ratio_bound(f: Nonlinearity, g: Multiplier, gamma: float, s_grid, tol: float = DEFAULT_TOL,
                        settle: float = 1e-3) -> RatioBoundReport:
    """Compare ``limsup G f/(g^2 f')`` with ``limsup g' f/(g f') / (2 - gamma)`` on a grid tail.

    Both limsups are read off the maxima over three consecutive chunks of the
    upper half of ``s_grid``; if those maxima still move by more than
    ``settle`` (relative), the report is Inconclusive.
    """
    if not 0.0 < gamma <= 1.0:
        raise ValueError("gamma must lie in (0, 1]")
    s = np.sort(np.asarray(s_grid, dtype=float))
    s = s[s > 0.0]
    if s.size < 6:
        raise ValueError("s_grid needs at least 6 positive points")
    tail = s[s.size // 2:]
    G = g_table(g, float(tail[-1]), tol)
    F, F1, _ = f.jet(tail)
    gv, gp = g.values(tail)
    lhs = G(tail) * F / (gv * gv * F1)
    rhs = gp * F / (gv * F1) / (2.0 - gamma)
    chunks = np.array_split(np.arange(tail.size), 3)
    lw = [float(np.max(lhs[c])) for c in chunks]
    rw = [float(np.max(rhs[c])) for c in chunks]

    # convexity of g^gamma on the tail via slopes of the sampled graph
    y = gv**gamma
    slopes = np.diff(y) / np.diff(tail)
    convex_ok = bool(np.all(np.diff(slopes) >= -1e-9 * np.maximum(1.0, np.abs(slopes[1:]))))

    def settled(w):
        return all(abs(b - a) <= settle * max(abs(a), abs(b), 1e-300) for a, b in zip(w, w[1:]))

    violation = lw[-1] - rw[-1]
    if not (settled(lw) and settled(rw)) or not convex_ok:
        status = "Inconclusive"
    else:
        status = "holds" if violation <= settle * max(abs(rw[-1]), 1.0) else "violated"
    return RatioBoundReport(lw[-1], rw[-1], violation, status, convex_ok, lw, rw)


def closed_form_H(f: Nonlinearity, beta: float, u):
    """Exact ``H_{f,beta}`` for the exponential and shifted-power families."""
    u = np.asarray(u, dtype=float)
    if f.family == EXPONENTIAL and f.is_builtin:
        k = 2.0 + 2.0 * beta
        return np.exp(u) * np.expm1(k * u) / k
    if f.family == POWER_SHIFTED and f.is_builtin:
        p = f.p
        c = math.sqrt(p * (p - 1.0))
        E = 2.0 * p - 1.0 + 2.0 * beta * c
        return (1.0 + u) ** p * p * (p - 1.0) * np.expm1(E * np.log1p(u)) / E
    raise ValueError("closed form available only for the exponential and shifted-power families")


def closed_form_deviation(f: Nonlinearity, beta: float, u_grid, tol: float = DEFAULT_TOL) -> float:
    """Largest relative deviation of the tabulated functional from its closed form.

    Points where the closed form vanishes contribute their absolute error.
    """
    u = np.asarray(u_grid, dtype=float)
    exact = closed_form_H(f, beta, u)
    approx = H_f_beta(f, beta, u, tol)
    denom = np.where(exact != 0.0, np.abs(exact), 1.0)
    return float(np.max(np.abs(approx - exact) / denom))


def chain_lower_bound_gap(f: Nonlinearity, u, tol: float = DEFAULT_TOL):
    """``I(u) - f(0)(f'(u) - f'(0))`` at beta = 0, nonnegative for convex f."""
    ua = np.asarray(u, dtype=float)
    tab = i_table(f, 0.0, max(float(np.max(ua)), 1.0), tol)
    return tab(ua) - f.f0 * (f.d1(ua) - f.d1(0.0))
