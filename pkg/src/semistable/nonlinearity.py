"""Nonlinearities f with exact first and second derivatives.

Built-in families have closed-form triples; a parsed expression gets its
derivatives by jet propagation.  Every :class:`Nonlinearity` is immutable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .expr import Node, parse_expression, evaluate_jet, to_text
from .jet import DomainError, Jet2

EXPONENTIAL = "exp"
POWER_SHIFTED = "pow"
LINLOG = "linlog"
LINLOG_POW = "linlogpow"
CUSTOM = "custom"

FAMILIES = (EXPONENTIAL, POWER_SHIFTED, LINLOG, LINLOG_POW, CUSTOM)

#: Crossover above which the t ln t type families use their exact formula.
BLEND_POINT = math.e**2


class ParameterError(ValueError):
    pass


class BlendError(ValueError):
    """No convex quintic blend exists for the requested tail."""


@dataclass(frozen=True)
class Nonlinearity:
    family: str
    p: Optional[float] = None
    a: Optional[float] = None
    expr: Optional[Node] = None
    source: Optional[str] = None
    scale: float = 1.0
    blend: tuple = field(default=(), repr=False)
    description: str = ""

    # evaluation -------------------------------------------------------------

    def jet(self, t):
        """Return ``(f, f', f'')`` at ``t`` (scalar or array)."""
        scalar = np.isscalar(t)
        if scalar and self.family != CUSTOM:
            return self._scalar_jet(float(t))
        t = np.asarray(t, dtype=float)
        if self.family == EXPONENTIAL:
            e = np.exp(t)
            out = (e, e, e)
        elif self.family == POWER_SHIFTED:
            p = self.p
            s = 1.0 + t
            out = (s**p, p * s ** (p - 1.0), p * (p - 1.0) * s ** (p - 2.0))
        elif self.family in (LINLOG, LINLOG_POW):
            out = self._loglike(t)
        else:
            j = evaluate_jet(self.expr, Jet2.variable(t))
            out = tuple(np.broadcast_to(np.asarray(c, dtype=float), t.shape).copy() for c in j.triple())
        if self.scale != 1.0:
            out = tuple(self.scale * c for c in out)
        if scalar:
            return tuple(float(c) for c in out)
        return out

    def _scalar_jet(self, t: float):
        c = self.scale
        if self.family == EXPONENTIAL:
            e = c * math.exp(t)
            return e, e, e
        if self.family == POWER_SHIFTED:
            p = self.p
            s = 1.0 + t
            return c * s**p, c * p * s ** (p - 1.0), c * p * (p - 1.0) * s ** (p - 2.0)
        if t >= BLEND_POINT:
            a = 1.0 if self.family == LINLOG else self.a
            L = math.log(t)
            return c * t * L**a, c * (L**a + a * L ** (a - 1.0)), c * a * L ** (a - 2.0) * (L + a - 1.0) / t
        f0 = f1 = f2 = 0.0
        k = len(self.blend) - 1
        for j in range(k, -1, -1):
            # Horner for the polynomial and its first two derivatives
            f2 = f2 * t + 2.0 * f1
            f1 = f1 * t + f0
            f0 = f0 * t + self.blend[j]
        return c * f0, c * f1, c * f2

    def __call__(self, t):
        return self.jet(t)[0]

    def d1(self, t):
        return self.jet(t)[1]

    def d2(self, t):
        return self.jet(t)[2]

    @property
    def f0(self) -> float:
        return self.jet(0.0)[0]

    def ftilde(self, t):
        """f(t) - f(0)."""
        return self(t) - self.f0

    def scaled(self, c: float) -> "Nonlinearity":
        if not c > 0.0:
            raise ParameterError("scale factor must be positive")
        return Nonlinearity(
            self.family, self.p, self.a, self.expr, self.source, self.scale * c,
            self.blend, f"{c:g}*({self.description})",
        )

    @property
    def unscaled(self) -> "Nonlinearity":
        """The same f without the positive factor from :meth:`scaled`."""
        if self.scale == 1.0:
            return self
        desc = self.description.split("*(", 1)[1][:-1] if "*(" in self.description else self.description
        return Nonlinearity(self.family, self.p, self.a, self.expr, self.source, 1.0, self.blend, desc)

    @property
    def is_builtin(self) -> bool:
        return self.family != CUSTOM and self.scale == 1.0

    def _loglike(self, t):
        a = 1.0 if self.family == LINLOG else self.a
        hi = t >= BLEND_POINT
        th = np.where(hi, t, BLEND_POINT)
        L = np.log(th)
        f_hi = th * L**a
        f1_hi = L**a + a * L ** (a - 1.0)
        f2_hi = a * L ** (a - 2.0) * (L + a - 1.0) / th
        c = np.asarray(self.blend)
        c1 = np.polynomial.polynomial.polyder(c)
        c2 = np.polynomial.polynomial.polyder(c1)
        tl = np.where(hi, 0.0, t)
        pv = np.polynomial.polynomial
        f_lo, f1_lo, f2_lo = pv.polyval(tl, c), pv.polyval(tl, c1), pv.polyval(tl, c2)
        return (np.where(hi, f_hi, f_lo), np.where(hi, f1_hi, f1_lo), np.where(hi, f2_hi, f2_lo))


# construction --------------------------------------------------------------


def _quintic(tail, c0):
    """Monomial coefficients of the quintic with (1, 0, c0) at 0 and ``tail`` at T0."""
    T = BLEND_POINT
    head = np.array([1.0, 0.0, 0.5 * c0])
    # remaining cubic part k = 3..5, fitted to the tail residual at T0
    pv = np.polynomial.polynomial
    rhs = np.asarray(tail, dtype=float) - np.array(
        [pv.polyval(T, head), pv.polyval(T, pv.polyder(head)), pv.polyval(T, pv.polyder(head, 2))]
    )
    A = np.array([[T**k for k in (3, 4, 5)], [k * T ** (k - 1) for k in (3, 4, 5)], [k * (k - 1) * T ** (k - 2) for k in (3, 4, 5)]])
    return np.concatenate([head, np.linalg.solve(A, rhs)])


def _min_second_derivative(coef) -> float:
    """Exact minimum over [0, T0] of the cubic p'' for quintic coefficients."""
    pv = np.polynomial.polynomial
    c2 = pv.polyder(coef, 2)
    c3 = pv.polyder(c2)
    cands = [0.0, BLEND_POINT]
    for r in np.roots(c3[::-1]) if np.any(c3[1:]) else []:
        if abs(r.imag) < 1e-12 and 0.0 < r.real < BLEND_POINT:
            cands.append(r.real)
    return float(min(pv.polyval(x, c2) for x in cands))


def _convex_blend(a: float) -> tuple:
    T = BLEND_POINT
    L = math.log(T)
    tail = (T * L**a, L**a + a * L ** (a - 1.0), a * L ** (a - 2.0) * (L + a - 1.0) / T)

    def feasible(c0):
        return _min_second_derivative(_quintic(tail, c0)) >= 0.0

    if feasible(0.0):
        return tuple(_quintic(tail, 0.0))
    grid = np.linspace(0.0, 20.0, 4001)
    ok = [c for c in grid if feasible(c)]
    if not ok:
        raise BlendError(f"no convex C2 blend with f(0)=1 for exponent a={a:g}")
    hi = ok[0]
    lo = hi - (grid[1] - grid[0])
    # feasible set is an interval (min of affine functions of c0 is concave)
    while hi - lo > 1e-10:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return tuple(_quintic(tail, hi))


def builtin(family: str, p: Optional[float] = None, a: Optional[float] = None) -> Nonlinearity:
    """One of the closed-form families: exp, pow (``(1+t)^p``), linlog, linlogpow."""
    if family == EXPONENTIAL:
        return Nonlinearity(EXPONENTIAL, description="exp(t)")
    if family == POWER_SHIFTED:
        if p is None or not p > 1.0:
            raise ParameterError("PowerShifted needs p > 1")
        return Nonlinearity(POWER_SHIFTED, p=float(p), description=f"(1+t)^{p:g}")
    if family == LINLOG:
        return Nonlinearity(LINLOG, blend=_convex_blend(1.0), description="t ln t (t >= e^2), convex quintic blend below")
    if family == LINLOG_POW:
        if a is None or not 0.0 < a < 1.0:
            raise ParameterError("LinLogPow needs a in (0, 1)")
        return Nonlinearity(
            LINLOG_POW, a=float(a), blend=_convex_blend(float(a)),
            description=f"t (ln t)^{a:g} (t >= e^2), convex quintic blend below",
        )
    raise ParameterError(f"unknown family {family!r}")


def parse_nonlinearity(text: str) -> Nonlinearity:
    """Parse an expression in ``t``; it must be defined (with derivatives) at t = 0."""
    node = parse_expression(text)
    try:
        evaluate_jet(node, Jet2.variable(0.0))
    except (DomainError, ZeroDivisionError, OverflowError) as exc:
        raise DomainError(f"{text!r} is undefined at t = 0: {exc}") from exc
    return Nonlinearity(CUSTOM, expr=node, source=text, description=text)


def expression_for(f: Nonlinearity) -> str:
    """Source text of ``f`` (the closed-form tail for the t ln t families)."""
    if f.family == CUSTOM:
        return f.source or to_text(f.expr)
    return {
        EXPONENTIAL: "exp(t)",
        POWER_SHIFTED: f"(1+t)^{f.p!r}",
        LINLOG: "t*ln(t)",
        LINLOG_POW: f"t*ln(t)^{f.a!r}",
    }[f.family]


# validation ----------------------------------------------------------------


@dataclass
class HypothesisCheck:
    name: str
    passed: bool
    witness: Optional[float] = None
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list
    superlinear_ratio_max: float
    grid_max: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name) -> HypothesisCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self):
        return {
            "passed": self.passed,
            "superlinear_ratio_max": self.superlinear_ratio_max,
            "grid_max": self.grid_max,
            "checks": [vars(c).copy() for c in self.checks],
        }


def geometric_grid(t_max: float = 1e6, t_min: float = 1e-3, ratio: float = 1.1) -> np.ndarray:
    """``0`` followed by ``t_min * ratio**k`` up to ``t_max``."""
    k = int(math.floor(math.log(t_max / t_min) / math.log(ratio)))
    return np.concatenate([[0.0], t_min * ratio ** np.arange(k + 1)])


def validate(f: Nonlinearity, grid: Optional[np.ndarray] = None, windows: int = 3) -> ValidationReport:
    """Check f(0) > 0, f' >= 0, f'' >= 0 and superlinearity on a sample grid.

    Points where f overflows are dropped from the end of the grid.
    """
    grid = geometric_grid() if grid is None else np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty grid")
    with np.errstate(over="ignore", invalid="ignore"):
        try:
            F, F1, F2 = f.jet(grid)
        except DomainError:
            vals = []
            for t in grid:
                try:
                    vals.append(f.jet(float(t)))
                except DomainError:
                    vals.append((math.nan,) * 3)
            F, F1, F2 = (np.array(c) for c in zip(*vals))
    finite = np.isfinite(F) & np.isfinite(F1) & np.isfinite(F2)
    # keep the finite prefix so tails are contiguous
    stop = int(np.argmin(finite)) if not finite.all() else grid.size
    t, F, F1, F2 = grid[:stop], F[:stop], F1[:stop], F2[:stop]

    def first_bad(mask):
        idx = np.flatnonzero(mask)
        return float(t[idx[0]]) if idx.size else None

    checks = []
    if t.size == 0:
        checks.append(HypothesisCheck("finite", False, float(grid[0]), "f is not finite on the grid"))
        return ValidationReport(checks, math.nan, math.nan)

    f0 = F[0] if t[0] == 0.0 else f.jet(0.0)[0]
    checks.append(HypothesisCheck("f0_positive", bool(f0 > 0.0), None if f0 > 0 else 0.0, f"f(0) = {float(f0)!r}"))
    w = first_bad(F1 < 0.0)
    checks.append(HypothesisCheck("nondecreasing", w is None, w, "f' >= 0 on grid"))
    w = first_bad(F2 < 0.0)
    checks.append(HypothesisCheck("convex", w is None, w, "f'' >= 0 on grid"))

    pos = t > 0.0
    ratio = F[pos] / t[pos]
    tp = t[pos]
    t_end = tp[-1]
    maxima = []
    for j in range(windows, 0, -1):
        sel = (tp >= t_end / 2.0**j) & (tp <= t_end / 2.0 ** (j - 1))
        maxima.append(float(np.max(ratio[sel])) if np.any(sel) else math.nan)
    tail = tp >= t_end / 2.0**windows
    growing = all(b > a_ * (1.0 + 1e-6) for a_, b in zip(maxima, maxima[1:]))
    increasing_tail = bool(np.all(np.diff(ratio[tail]) > 0.0))
    superlinear = growing and increasing_tail
    checks.append(
        HypothesisCheck(
            "superlinear", superlinear, None if superlinear else float(t_end),
            f"window maxima of f(t)/t: {', '.join(f'{m:.6g}' for m in maxima)}",
        )
    )
    return ValidationReport(checks, float(np.max(ratio[tail])), float(t_end))
