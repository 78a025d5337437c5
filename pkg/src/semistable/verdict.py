"""Regularity verdicts from (alpha, sigma) certificates.

A certificate ``(alpha, sigma)`` records a uniform L^1 bound on
``f~(u)^alpha / u^sigma`` over semistable solutions.  The threshold map turns
one certificate and a dimension ``n`` into the strongest guarantee it
implies; the verdict aggregates over all certificates generated from an
:class:`AsymptoticProfile`.  Every threshold is open: dimension ``n`` is
granted exactly when ``n < n_sup``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional

from .asymptotics import CLOSED_FORM, INCONCLUSIVE, AsymptoticProfile, jsonable

TAU_FLOOR = 1e-3

LINF = "Linf"
H10 = "H10"
W1R = "W1r"
L1 = "L1"
LEVELS = (LINF, H10, W1R, L1)

# clause tags
NEDEV = "nedev"
TAU_MINUS = "tau_minus"
CONVEX_POWER = "convex_power"
TAU_PLUS_EQUAL = "tau_plus_equal"
TAU_PLUS_SHIFTED = "tau_plus_shifted"
TAU_PLUS_ZERO = "tau_plus_zero"
TAU_TWO_SIDED = "tau_two_sided"
CURVATURE_GROWTH = "curvature_growth"
POWER_GROWTH = "power_growth"
POWER_GROWTH_DERIVATIVE = "power_growth_derivative"
USER = "user"

# tie-break among clauses with equal thresholds
_PREFERENCE = (TAU_PLUS_ZERO, TAU_PLUS_EQUAL, TAU_PLUS_SHIFTED, TAU_TWO_SIDED, TAU_MINUS, CONVEX_POWER,
               CURVATURE_GROWTH, POWER_GROWTH, POWER_GROWTH_DERIVATIVE, NEDEV, USER)


def _pref(source: str) -> int:
    return _PREFERENCE.index(source) if source in _PREFERENCE else len(_PREFERENCE)


# tau values at which the headline bounds cross n = 9 / n = 10
TAU_PLUS_NINE = 2.0 / (9.0 - 2.0 * math.sqrt(14.0))
TAU_TWO_SIDED_NINE = 16.0 / 9.0
TAU_SHIFTED_H10_TEN = 4.0 / (11.0 - 4.0 * math.sqrt(7.0))


class VerdictDomainError(ValueError):
    pass


@dataclass(frozen=True)
class EstimateCertificate:
    alpha: float
    sigma: float
    source: str
    open_sup: bool = True
    detail: str = ""

    def __post_init__(self):
        if not self.alpha >= 1.0:
            raise VerdictDomainError(f"alpha must be >= 1, got {self.alpha!r}")
        if not 0.0 <= self.sigma <= self.alpha:
            raise VerdictDomainError(f"sigma must lie in [0, alpha], got {self.sigma!r}")

    @property
    def linf_sup(self) -> float:
        return 2.0 * self.alpha

    @property
    def h10_sup(self) -> float:
        return h10_sup(self.alpha, self.sigma)


def h10_sup(alpha: float, sigma: float) -> float:
    """Open dimension bound for the H^1_0 estimate (inf = every dimension)."""
    if math.isinf(alpha) or alpha >= 2.0 + sigma:
        return math.inf
    return max(2.0 * alpha, 2.0 * (alpha + sigma) / (2.0 + sigma - alpha))


@dataclass
class GuaranteeSet:
    level: str
    linf: bool
    h10: bool
    lr_u: Optional[float] = None  # u in L^r for r below this
    lr_fu: Optional[float] = None  # f(u) in L^r
    w1r: Optional[float] = None  # u in W^{1,r}


def _check(alpha, sigma, n):
    if not alpha >= 1.0:
        raise VerdictDomainError(f"alpha must be >= 1, got {alpha!r}")
    if not 0.0 <= sigma <= alpha:
        raise VerdictDomainError(f"sigma must lie in [0, alpha], got {sigma!r}")
    if not n >= 2:
        raise VerdictDomainError(f"dimension must be >= 2, got {n!r}")


def certificate_guarantees(alpha: float, sigma: float, n: float) -> GuaranteeSet:
    """Everything a single bound on ``f~(u)^alpha/u^sigma`` in L^1 yields in dimension ``n``."""
    _check(alpha, sigma, n)
    linf = n < 2.0 * alpha
    lr_u = lr_fu = w1r = None
    if not linf and n > 2.0 * alpha and (n - 2.0) * sigma / n < alpha - 1.0:
        lr_u = (alpha - sigma) * n / (n - 2.0 * alpha)
        lr_fu = (alpha - sigma) * n / (n - 2.0 * sigma)
        w1r = (alpha - sigma) * n / (n - alpha - sigma)
    # alpha >= 2 + sigma is tested first: the general bound divides by 2 + sigma - alpha
    h10 = linf or alpha >= 2.0 + sigma or n < 2.0 * (alpha + sigma) / (2.0 + sigma - alpha)
    if linf:
        level = LINF
    elif h10:
        level = H10
    elif w1r is not None:
        level = W1R
    else:
        level = L1
    return GuaranteeSet(level, linf, h10, lr_u, lr_fu, w1r)


@dataclass
class BootstrapResult:
    sequence: list
    limit: float
    error: float
    rate: float

    @property
    def increasing(self) -> bool:
        return all(b > a for a, b in zip(self.sequence, self.sequence[1:]))


def bootstrap_exponents(alpha: float, sigma: float, n: float, iterations: int = 500, tol: Optional[float] = None) -> BootstrapResult:
    """Iterate ``q -> alpha n q / ((sigma + q) n - 2 alpha q)`` from ``n/(n-2)``.

    The iteration contracts at rate ``sigma/alpha`` towards
    ``(alpha - sigma) n / (n - 2 alpha)``.  With ``tol`` set, iteration stops
    early once the distance to the limit is below it.
    """
    _check(alpha, sigma, n)
    if not n > 2.0 * alpha:
        raise VerdictDomainError("bootstrap needs n > 2 alpha")
    if not (n - 2.0) * sigma / n < alpha - 1.0:
        raise VerdictDomainError("bootstrap needs (n - 2) sigma / n < alpha - 1")
    limit = (alpha - sigma) * n / (n - 2.0 * alpha)
    q = n / (n - 2.0)
    seq = [q]
    for _ in range(iterations - 1):
        if tol is not None and abs(limit - q) < tol:
            break
        nxt = alpha * n * q / ((sigma + q) * n - 2.0 * alpha * q)
        if nxt == q:  # floating-point fixed point
            break
        q = nxt
        seq.append(q)
    return BootstrapResult(seq, limit, abs(seq[-1] - limit), sigma / alpha)


# certificate generation ---------------------------------------------------


@dataclass
class NotFired:
    clause: str
    reason: str


def _known(profile: AsymptoticProfile, name: str) -> bool:
    return profile.known(name)


def generate_certificates(profile: AsymptoticProfile, user: Iterable[tuple] = ()) -> tuple:
    """Return ``(certificates, not_fired)`` for ``profile``.

    ``user`` holds extra ``(alpha, sigma)`` pairs supplied by the caller.
    """
    certs: list = []
    skipped: list = []
    for a, s in user:
        certs.append(EstimateCertificate(float(a), float(s), USER, False, "supplied"))

    hyp = profile.f0_positive and profile.nondecreasing and profile.superlinear
    if not hyp:
        for c in (NEDEV, TAU_MINUS, CONVEX_POWER, TAU_PLUS_EQUAL, TAU_PLUS_SHIFTED, TAU_PLUS_ZERO,
                  TAU_TWO_SIDED, CURVATURE_GROWTH, POWER_GROWTH, POWER_GROWTH_DERIVATIVE):
            skipped.append(NotFired(c, "f(0) > 0, f' >= 0 or superlinear growth fails"))
        return certs, skipped

    convex = profile.convex
    need_convex = "f is not convex on the sample grid"

    def fire(clause, alpha, sigma, detail, open_sup=True):
        certs.append(EstimateCertificate(alpha, sigma, clause, open_sup, detail))

    if convex:
        fire(NEDEV, 2.0, 1.0, "f(u) f'(u) in L^1", open_sup=False)
    else:
        skipped.append(NotFired(NEDEV, need_convex))

    tm_ok = _known(profile, "tau_minus") and profile.tau_minus >= TAU_FLOOR
    tp_ok = _known(profile, "tau_plus") and math.isfinite(profile.tau_plus)
    tm = profile.tau_minus
    tp = profile.tau_plus

    if not convex:
        skipped.append(NotFired(TAU_MINUS, need_convex))
    elif tm_ok:
        fire(TAU_MINUS, 3.0 + 2.0 * math.sqrt(tm), 1.0, f"tau_minus = {tm:.12g}")
    else:
        skipped.append(NotFired(TAU_MINUS, f"tau_minus not known to be >= {TAU_FLOOR:g}"))

    if _known(profile, "convex_power_delta"):
        d = profile.convex_power_delta
        fire(CONVEX_POWER, 3.0 + 2.0 * math.sqrt(d), 1.0, f"f^(1-delta) convex on the tail, delta = {d:.12g}")
    else:
        skipped.append(NotFired(CONVEX_POWER, "no delta >= 1e-3 with f^(1-delta) convex"))

    if not convex:
        for c in (TAU_PLUS_EQUAL, TAU_PLUS_SHIFTED, TAU_PLUS_ZERO, TAU_TWO_SIDED, CURVATURE_GROWTH,
                  POWER_GROWTH, POWER_GROWTH_DERIVATIVE):
            skipped.append(NotFired(c, need_convex))
        return certs, skipped

    if tp_ok and tp == 0.0:
        if profile.confidence.get("tau_plus") == CLOSED_FORM:
            fire(TAU_PLUS_ZERO, math.inf, 0.0, "tau_plus = 0: bounded in every dimension")
        else:
            skipped.append(NotFired(TAU_PLUS_ZERO, "tau_plus = 0 only numerically"))
        for c in (TAU_PLUS_EQUAL, TAU_PLUS_SHIFTED, TAU_TWO_SIDED):
            skipped.append(NotFired(c, "tau_plus = 0"))
    elif tp_ok:
        r = math.sqrt(tp)
        fire(TAU_PLUS_EQUAL, 1.0 + 2.0 / tp + 2.0 / r, 1.0 + 2.0 / tp + 2.0 / r, f"tau_plus = {tp:.12g}")
        fire(TAU_PLUS_SHIFTED, 2.0 + 1.0 / tp + 2.0 / r, 1.0 + 1.0 / tp + 2.0 / r, f"tau_plus = {tp:.12g}")
        skipped.append(NotFired(TAU_PLUS_ZERO, "tau_plus > 0"))
        if tm_ok:
            fire(TAU_TWO_SIDED, 3.0 + 2.0 / r, 1.0 + 2.0 / r, f"tau_minus = {tm:.12g}, tau_plus = {tp:.12g}")
        else:
            skipped.append(NotFired(TAU_TWO_SIDED, f"tau_minus not known to be >= {TAU_FLOOR:g}"))
    else:
        for c in (TAU_PLUS_EQUAL, TAU_PLUS_SHIFTED, TAU_PLUS_ZERO, TAU_TWO_SIDED):
            skipped.append(NotFired(c, "tau_plus unknown or infinite"))

    if _known(profile, "curvature_liminf"):
        g, e = profile.curvature_liminf
        if e - g > 0.5:
            a = 2.0 + e - g
            fire(CURVATURE_GROWTH, a, a, f"gamma = {g:g}, eps = {e:g}")
        else:
            skipped.append(NotFired(CURVATURE_GROWTH, "eps - gamma <= 1/2"))
    else:
        skipped.append(NotFired(CURVATURE_GROWTH, "curvature condition not established"))

    if _known(profile, "power_growth") and profile.power_growth[0] > 0.0:
        g, d = profile.power_growth
        fire(POWER_GROWTH, 2.0 + 1.0 / g, 1.0 + (1.0 + d) / g, f"gamma = {g:.12g}, delta = {d:.12g}")
        p = 1.0 + 2.0 / (g + d)
        fire(POWER_GROWTH_DERIVATIVE, p, p, f"f'(u) in L^{p:.12g}; f~(u)/u <= f'(u)")
    else:
        skipped.append(NotFired(POWER_GROWTH, "power growth bound not established"))
        skipped.append(NotFired(POWER_GROWTH_DERIVATIVE, "power growth bound not established"))
    return certs, skipped


# all-dimension H^1_0 --------------------------------------------------------

H1_CONDITIONS = ("log_convexity", "tangent_foot")


@dataclass
class H1Result:
    clause: Optional[str]
    firing: list
    reported: dict

    def __bool__(self):
        return self.clause is not None


def h1_all_dimensions(profile: AsymptoticProfile) -> H1Result:
    """Energy bound in every dimension from the tangent-foot or log-convexity condition.

    The two excess conditions are recorded for comparison only.
    """
    firing = [c for c in H1_CONDITIONS if profile.known(c)]
    reported = {c: getattr(profile, c) for c in ("excess_over_f", "excess_over_t")}
    return H1Result(firing[0] if firing else None, firing, reported)


# verdict ------------------------------------------------------------------


def tau_plus_linf_bound(tau: float) -> float:
    return max(2.0 + 4.0 / tau + 4.0 / math.sqrt(tau), 4.0 + 2.0 / tau + 4.0 / math.sqrt(tau))


def tau_minus_linf_bound(tau: float) -> float:
    return 6.0 + 4.0 * math.sqrt(tau)


def two_sided_linf_bound(tau_plus: float) -> float:
    return 6.0 + 4.0 / math.sqrt(tau_plus)


def shifted_w1r_exponent(n: float, tau: float) -> float:
    return n / (n - 3.0 - 2.0 / tau - 4.0 / math.sqrt(tau))


def power_law_linf_bound(p: float) -> float:
    """Open L^inf dimension bound for ``(1+t)^p``."""
    return 2.0 * (1.0 + 2.0 * p / (p - 1.0) + 2.0 * math.sqrt(p / (p - 1.0)))


DEFAULT_DIMENSIONS = tuple(range(2, 16))


@dataclass
class Threshold:
    n_sup: float
    clause: Optional[str]
    clauses: list  # [(clause, n_sup)] sorted by n_sup, largest first


@dataclass
class Verdict:
    profile: dict
    certificates: list
    not_fired: list
    linf: Threshold
    h10: Threshold
    h1_all_dimensions: Optional[str]
    table: list = field(default_factory=list)

    def row(self, n) -> dict:
        for r in self.table:
            if r["n"] == n:
                return r
        raise KeyError(n)

    def to_dict(self) -> dict:
        return jsonable({
            "profile": self.profile,
            "certificates": [asdict(c) for c in self.certificates],
            "not_fired": [asdict(c) for c in self.not_fired],
            "thresholds": {"linf": asdict(self.linf), "h10": asdict(self.h10)},
            "h1_all_dimensions": self.h1_all_dimensions,
            "table": self.table,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_markdown(self) -> str:
        def num(x):
            if x is None:
                return "-"
            return "inf" if math.isinf(x) else f"{x:.6g}"

        lines = [f"# Regularity verdict: {self.profile.get('description', '')}", ""]
        lines.append(f"- L^inf for n < {num(self.linf.n_sup)} ({self.linf.clause or 'none'})")
        h = "every dimension" if math.isinf(self.h10.n_sup) else f"n < {num(self.h10.n_sup)}"
        lines.append(f"- H^1_0 for {h} ({self.h10.clause or 'none'})")
        lines += ["", "| n | guarantee | clauses | L^r(u) | L^r(f(u)) | W^{1,r} |", "|---|---|---|---|---|---|"]
        for r in self.table:
            e = r["exponents"]
            lines.append(
                f"| {r['n']} | {r['guarantee']} | {', '.join(r['clauses']) or '-'} | "
                f"{num(e['lr_u'])} | {num(e['lr_fu'])} | {num(e['w1r'])} |"
            )
        lines += ["", "## Certificates", "", "| clause | alpha | sigma | detail |", "|---|---|---|---|"]
        for c in self.certificates:
            lines.append(f"| {c.source} | {num(c.alpha)} | {num(c.sigma)} | {c.detail} |")
        if self.not_fired:
            lines += ["", "## Not fired", ""]
            lines += [f"- {c.clause}: {c.reason}" for c in self.not_fired]
        return "\n".join(lines) + "\n"


def _row(certs, n, h1_clause) -> dict:
    per = [(c, certificate_guarantees(c.alpha, c.sigma, n)) for c in certs]
    rank = {lvl: i for i, lvl in enumerate(LEVELS)}
    best = min((rank[g.level] for _, g in per), default=rank[L1])
    level = LEVELS[best]
    clauses = []
    if level == LINF:
        clauses = [c.source for c, g in sorted(per, key=lambda cg: (-cg[0].linf_sup, _pref(cg[0].source))) if g.linf]
    elif level == H10:
        clauses = [c.source for c, g in sorted(per, key=lambda cg: (-cg[0].h10_sup, _pref(cg[0].source))) if g.h10]
    if h1_clause and rank[level] > rank[H10]:
        level = H10
    if h1_clause and level == H10:
        clauses.append(h1_clause)

    def top(attr):
        vals = [getattr(g, attr) for _, g in per if getattr(g, attr) is not None]
        return max(vals) if vals and level != LINF else None

    exps = {"lr_u": top("lr_u"), "lr_fu": top("lr_fu"), "w1r": top("w1r")}
    if level == W1R:
        clauses = [c.source for c, g in sorted(per, key=lambda cg: (-(cg[1].w1r or 0.0), _pref(cg[0].source))) if g.w1r is not None]
    return {"n": n, "guarantee": level, "clauses": _dedupe(clauses), "exponents": exps}


def _dedupe(seq):
    out = []
    for s in seq:
        if s not in out:
            out.append(s)
    return out


def regularity_verdict(profile: AsymptoticProfile, n=None, dimensions: Iterable = DEFAULT_DIMENSIONS,
                       user: Iterable[tuple] = ()) -> Verdict:
    """Best guarantee per dimension, aggregated over every certificate that fires."""
    certs, skipped = generate_certificates(profile, user)
    dims = sorted(set(dimensions) | ({n} if n is not None else set()))
    if any(not d >= 2 for d in dims):
        raise VerdictDomainError("dimensions must be >= 2")
    h1 = h1_all_dimensions(profile) if profile.convex else H1Result(None, [], {})

    linf_list = sorted(((c.source, c.linf_sup) for c in certs), key=lambda x: (-x[1], _pref(x[0])))
    h10_list = sorted(((c.source, c.h10_sup) for c in certs), key=lambda x: (-x[1], _pref(x[0])))
    if h1.clause:
        h10_list.insert(0, (h1.clause, math.inf))
    linf = Threshold(linf_list[0][1] if linf_list else 0.0, linf_list[0][0] if linf_list else None, linf_list)
    h10 = Threshold(h10_list[0][1] if h10_list else 0.0, h10_list[0][0] if h10_list else None, h10_list)
    table = [_row(certs, d, h1.clause) for d in dims]
    prof = profile.to_dict()
    return Verdict(prof, certs, skipped, linf, h10, h1.clause, table)


def profile_with_all_unknown(description: str = "unknown", convex: bool = True) -> AsymptoticProfile:
    """A profile carrying no asymptotic information."""
    conf = {k: INCONCLUSIVE for k in ("tau_minus", "tau_plus")}
    return AsymptoticProfile(description, None, None, convex=convex, confidence=conf)
