"""Asymptotic classifiers of a nonlinearity.

The convexity ratio ``q(t) = f f'' / f'^2`` and the growth conditions used by
the regularity rules are sampled on a geometric tail grid.  Built-in
families use closed forms for ``tau_minus``/``tau_plus`` and the convex-power
exponent.  Nothing here certifies a statement "for all t > T"; a report only
describes the sampled tail.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .jet import DomainError
from .nonlinearity import (
    EXPONENTIAL, LINLOG, LINLOG_POW, POWER_SHIFTED, Nonlinearity, validate,
)

CLOSED_FORM = "ClosedForm"
CONVERGED = "NumericConverged"
INCONCLUSIVE = "Inconclusive"

HOLDS = "holds"
FAILS = "fails"

T_MAX = 1e8
GRID_START = 1.0
GRID_RATIO = 1.1
WINDOWS = 5
TOL = 1e-3
DELTA_MARGIN = 1e-6

# growth conditions -------------------------------------------------------
#: f' <= C_eps f^(1+eps) for every eps > 0
GROWTH_EVERY_EPS = "growth_every_eps"
#: f' <= C f^(1-eps) for some eps in (0, 1)
GROWTH_SUBLINEAR = "growth_sublinear"
#: liminf t^(2-gamma) f^(1+gamma) f'' / f'^(1+eps) > 0
CURVATURE_LIMINF = "curvature_liminf"
#: f' <= C t^delta f^gamma
POWER_GROWTH = "power_growth"
#: t f' - f >= eps f
EXCESS_OVER_F = "excess_over_f"
#: t f' - f >= eps t
EXCESS_OVER_T = "excess_over_t"
#: f'(t) f(t - f/f') >= eps t
TANGENT_FOOT = "tangent_foot"
#: f''/f >= C / (t^2 (ln t)^gamma), 0 < gamma < 2
LOG_CONVEXITY = "log_convexity"

CONDITIONS = (
    GROWTH_EVERY_EPS, GROWTH_SUBLINEAR, CURVATURE_LIMINF, POWER_GROWTH,
    EXCESS_OVER_F, EXCESS_OVER_T, TANGENT_FOOT, LOG_CONVEXITY,
)


class ConditionError(ValueError):
    pass


@dataclass
class TailSample:
    t: np.ndarray
    F: np.ndarray
    F1: np.ndarray
    F2: np.ndarray
    windows: list  # boolean masks, increasing t

    @property
    def tail(self) -> np.ndarray:
        return np.any(self.windows, axis=0)


def sample_tail(f: Nonlinearity, t_max: float = T_MAX, windows: int = WINDOWS) -> TailSample:
    """Geometric grid ``1.1**k`` cut at ``t_max`` and at the first non-finite value."""
    k = int(math.floor(math.log(t_max / GRID_START) / math.log(GRID_RATIO)))
    t = GRID_START * GRID_RATIO ** np.arange(k + 1)
    with np.errstate(over="ignore", invalid="ignore"):
        try:
            F, F1, F2 = f.jet(t)
        except DomainError:
            rows = []
            for x in t:
                try:
                    rows.append(f.jet(float(x)))
                except DomainError:
                    rows.append((math.nan,) * 3)
            F, F1, F2 = (np.array(c) for c in zip(*rows))
    ok = np.isfinite(F) & np.isfinite(F1) & np.isfinite(F2) & (F > 0.0)
    stop = t.size if ok.all() else int(np.argmin(ok))
    t, F, F1, F2 = t[:stop], F[:stop], F1[:stop], F2[:stop]
    masks = []
    if t.size:
        end = t[-1]
        for j in range(windows, 0, -1):
            masks.append((t > end / 2.0**j) & (t <= end / 2.0 ** (j - 1)))
    return TailSample(t, F, F1, F2, masks)


@dataclass
class TauEstimate:
    tau_minus: Optional[float]
    tau_plus: Optional[float]
    confidence: str
    window_minima: list = field(default_factory=list)
    window_maxima: list = field(default_factory=list)


def closed_form_tau(f: Nonlinearity) -> Optional[tuple]:
    if not f.is_builtin:
        return None
    if f.family == EXPONENTIAL:
        return 1.0, 1.0
    if f.family == POWER_SHIFTED:
        q = (f.p - 1.0) / f.p
        return q, q
    if f.family in (LINLOG, LINLOG_POW):
        # q = a (L + a - 1) / (L + a)^2 -> 0 with L = ln t
        return 0.0, 0.0
    return None


def convexity_ratio(F, F1, F2):
    """``f f'' / f'^2`` evaluated without forming the overflow-prone products."""
    return (F / F1) * (F2 / F1)


def estimate_tau(f: Nonlinearity, t_max: float = T_MAX, windows: int = WINDOWS, numeric: bool = False) -> TauEstimate:
    """liminf / limsup of ``f f''/f'^2`` at infinity.

    Built-ins return closed forms unless ``numeric`` is set.  Otherwise the
    ratio is sampled on the last ``windows`` dyadic windows of the tail grid;
    the result is converged when successive window extrema differ by < 1e-3.
    """
    if not numeric:
        cf = closed_form_tau(f)
        if cf is not None:
            return TauEstimate(cf[0], cf[1], CLOSED_FORM)
    # the ratio ignores positive factors; dropping them makes that exact in floating point
    s = sample_tail(f.unscaled, t_max, windows)
    if s.t.size == 0 or not all(np.any(m) for m in s.windows):
        return TauEstimate(None, None, INCONCLUSIVE)
    tail = s.tail
    if np.any(s.F1[tail] <= 0.0):
        return TauEstimate(None, None, INCONCLUSIVE)
    q = convexity_ratio(s.F, s.F1, s.F2)
    mins = [float(np.min(q[m])) for m in s.windows]
    maxs = [float(np.max(q[m])) for m in s.windows]
    steady = all(abs(b - a) < TOL for a, b in zip(mins, mins[1:])) and all(
        abs(b - a) < TOL for a, b in zip(maxs, maxs[1:])
    )
    return TauEstimate(float(np.min(q[tail])), float(np.max(q[tail])), CONVERGED if steady else INCONCLUSIVE, mins, maxs)


def convex_power_delta(f: Nonlinearity, numeric: bool = False, t_max: float = T_MAX, windows: int = WINDOWS) -> Optional[float]:
    """Largest delta in (0, 1) with ``f**(1-delta)`` convex on the tail.

    ``(f^(1-d))'' >= 0`` is equivalent to ``f f'' >= d f'^2``.
    """
    if not numeric:
        cf = closed_form_tau(f)
        if cf is not None:
            tm = cf[0]
            return tm - DELTA_MARGIN if 0.0 < tm <= 1.0 else None
    s = sample_tail(f.unscaled, t_max, windows)
    if s.t.size == 0 or not all(np.any(m) for m in s.windows):
        return None
    tail = s.tail
    F, F1, F2 = s.F[tail], s.F1[tail], s.F2[tail]
    if np.any(F2 < 0.0) or np.any(F1 <= 0.0):
        return None
    # f^(1-d) is convex exactly where q >= d, so the best d is the tail minimum of q
    q = convexity_ratio(s.F, s.F1, s.F2)
    mins = [float(np.min(q[m])) for m in s.windows]
    if not all(abs(b - a) < TOL for a, b in zip(mins, mins[1:])):
        return None
    d = min(float(np.min(q[tail])), 1.0) - DELTA_MARGIN
    return d if d >= 1e-3 else None


# conditions ---------------------------------------------------------------


@dataclass
class ConditionReport:
    condition: str
    params: dict
    status: str
    constant: Optional[float]
    kind: str  # "upper" (sup bounded) or "lower" (inf positive)
    window_extrema: list
    t_range: tuple
    useful: Optional[bool] = None

    @property
    def holds(self) -> bool:
        return self.status == HOLDS

    @property
    def confidence(self) -> str:
        return INCONCLUSIVE if self.status == INCONCLUSIVE else CONVERGED


def _log_ratio(cond: str, s: TailSample, f: Nonlinearity, params: dict):
    """Return (log r or r, is_log, kind) on the tail points."""
    tail = s.tail
    t, F, F1, F2 = s.t[tail], s.F[tail], s.F1[tail], s.F2[tail]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if cond == GROWTH_SUBLINEAR:
            return np.log(F1) - (1.0 - params["eps"]) * np.log(F), True, "upper"
        if cond == CURVATURE_LIMINF:
            g, e = params["gamma"], params["eps"]
            return (2.0 - g) * np.log(t) + (1.0 + g) * np.log(F) + np.log(F2) - (1.0 + e) * np.log(F1), True, "lower"
        if cond == POWER_GROWTH:
            return np.log(F1) - params["delta"] * np.log(t) - params["gamma"] * np.log(F), True, "upper"
        if cond == EXCESS_OVER_F:
            return t * (F1 / F) - 1.0, False, "lower"
        if cond == EXCESS_OVER_T:
            return F1 - F / t, False, "lower"
        if cond == TANGENT_FOOT:
            x = t - F / F1
            fx = np.full_like(x, -math.inf)
            good = x >= 0.0
            if np.any(good):
                try:
                    fx[good] = f.jet(x[good])[0]
                except DomainError:
                    fx[good] = [f.jet(float(v))[0] for v in x[good]]
            return F1 * fx / t, False, "lower"
        if cond == LOG_CONVEXITY:
            return 2.0 * np.log(t) + params["gamma"] * np.log(np.log(t)) + np.log(F2) - np.log(F), True, "lower"
    raise ConditionError(f"unknown condition {cond!r}")


def _judge(values, windows, kind, is_log, tail_mask):
    """Trend test over window extrema: bounded tail -> holds, monotone drift -> fails."""
    extrema = []
    for m in windows:
        v = values[m[tail_mask]]
        extrema.append(float(np.min(v) if kind == "lower" else np.max(v)))
    if any(math.isnan(e) for e in extrema):
        return INCONCLUSIVE, extrema
    if kind == "lower" and not is_log and min(extrema) <= 0.0:
        return FAILS, extrema
    if is_log:
        steps = [b - a for a, b in zip(extrema, extrema[1:])]
        up, down = math.log1p(TOL), math.log1p(-TOL)
    else:
        steps = [(b - a) / abs(a) if a != 0 else math.inf for a, b in zip(extrema, extrema[1:])]
        up, down = TOL, -TOL
    if any(math.isinf(e) for e in extrema):
        bad = (kind == "lower" and extrema[-1] == -math.inf) or (kind == "upper" and extrema[-1] == math.inf)
        return (FAILS if bad else HOLDS), extrema
    if kind == "lower":
        if all(d >= down for d in steps):
            return HOLDS, extrema
        if all(d < down for d in steps):
            return FAILS, extrema
    else:
        if all(d <= up for d in steps):
            return HOLDS, extrema
        if all(d > up for d in steps):
            return FAILS, extrema
    return INCONCLUSIVE, extrema


_DEFAULT_EPS_FAMILY = (0.01, 0.05, 0.1, 0.25, 0.5, 1.0)


def _validate_params(cond, params):
    p = dict(params)
    if cond == GROWTH_EVERY_EPS:
        p.setdefault("eps_family", _DEFAULT_EPS_FAMILY)
        if any(e <= 0 for e in p["eps_family"]):
            raise ConditionError("eps must be positive")
    elif cond == GROWTH_SUBLINEAR:
        if not 0.0 < p.get("eps", -1) < 1.0:
            raise ConditionError("growth_sublinear needs eps in (0, 1)")
    elif cond == CURVATURE_LIMINF:
        if not 0.0 <= p.get("gamma", -1) <= 2.0 or not p.get("eps", 0) > 0.0:
            raise ConditionError("curvature_liminf needs 0 <= gamma <= 2 and eps > 0")
    elif cond == POWER_GROWTH:
        g, d = p.get("gamma", -1), p.get("delta", 0.0)
        p["delta"] = d
        if not g >= 0.0 or not 0.0 <= d <= g:
            raise ConditionError("power_growth needs gamma >= 0 and 0 <= delta <= gamma")
    elif cond in (EXCESS_OVER_F, EXCESS_OVER_T, TANGENT_FOOT):
        p.setdefault("eps", None)
        if p["eps"] is not None and not p["eps"] > 0.0:
            raise ConditionError("eps must be positive")
    elif cond == LOG_CONVEXITY:
        if not 0.0 < p.get("gamma", -1) < 2.0:
            raise ConditionError("log_convexity needs gamma in (0, 2)")
    else:
        raise ConditionError(f"unknown condition {cond!r}")
    return p


def check_condition(f: Nonlinearity, which: str, params: Optional[dict] = None,
                    t_max: float = T_MAX, windows: int = WINDOWS, sample: Optional[TailSample] = None) -> ConditionReport:
    """Sample the defining inequality of ``which`` on the tail grid.

    The constant is the empirical sup (upper-bound conditions) or inf
    (lower-bound conditions) of the ratio over the sampled tail.
    """
    p = _validate_params(which, params or {})
    s = sample if sample is not None else sample_tail(f, t_max, windows)
    if s.t.size == 0 or not all(np.any(m) for m in s.windows):
        return ConditionReport(which, p, INCONCLUSIVE, None, "upper", [], (math.nan, math.nan))
    tail = s.tail
    t_range = (float(s.t[tail][0]), float(s.t[tail][-1]))

    if which == GROWTH_EVERY_EPS:
        sub = [check_condition(f, POWER_GROWTH, {"gamma": 1.0 + e, "delta": 0.0}, sample=s) for e in p["eps_family"]]
        statuses = {r.status for r in sub}
        status = FAILS if FAILS in statuses else (INCONCLUSIVE if INCONCLUSIVE in statuses else HOLDS)
        const = max(r.constant for r in sub if r.constant is not None) if status == HOLDS else None
        return ConditionReport(which, p, status, const, "upper", [r.window_extrema for r in sub], t_range)

    values, is_log, kind = _log_ratio(which, s, f, p)
    status, extrema = _judge(values, s.windows, kind, is_log, tail)
    finite = values[np.isfinite(values)]
    const = None
    if finite.size:
        c = float(np.min(finite) if kind == "lower" else np.max(finite))
        const = math.exp(c) if is_log else c
    if status == HOLDS and p.get("eps") is not None and which in (EXCESS_OVER_F, EXCESS_OVER_T, TANGENT_FOOT):
        if const < p["eps"]:
            status = FAILS
    useful = None
    if which == CURVATURE_LIMINF:
        useful = p["eps"] - p["gamma"] > 0.5
    if is_log:
        extrema = [math.exp(e) if np.isfinite(e) else (0.0 if e < 0 else math.inf) for e in extrema]
    return ConditionReport(which, p, status, const, kind, extrema, t_range, useful)


# profile ------------------------------------------------------------------


@dataclass
class AsymptoticProfile:
    description: str
    tau_minus: Optional[float]
    tau_plus: Optional[float]
    convex_power_delta: Optional[float] = None
    growth_every_eps: Optional[bool] = None
    growth_sublinear: Optional[float] = None  # eps
    curvature_liminf: Optional[tuple] = None  # (gamma, eps)
    power_growth: Optional[tuple] = None  # (gamma, delta)
    excess_over_f: Optional[float] = None  # eps
    excess_over_t: Optional[float] = None
    tangent_foot: Optional[float] = None
    log_convexity: Optional[float] = None  # gamma
    convex: bool = True
    nondecreasing: bool = True
    superlinear: bool = True
    f0_positive: bool = True
    confidence: dict = field(default_factory=dict)

    def known(self, name: str) -> bool:
        return getattr(self, name) is not None and self.confidence.get(name) != INCONCLUSIVE

    def to_dict(self):
        d = asdict(self)
        for k in ("curvature_liminf", "power_growth"):
            if d[k] is not None:
                d[k] = list(d[k])
        return d

    def to_json(self) -> str:
        return json.dumps(jsonable(self.to_dict()), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "AsymptoticProfile":
        d = dict(d)
        for k in ("curvature_liminf", "power_growth"):
            if d.get(k) is not None:
                d[k] = tuple(d[k])
        for k in ("tau_minus", "tau_plus"):
            if isinstance(d.get(k), str):
                d[k] = float(d[k])
        return cls(**d)

    @property
    def all_inconclusive(self) -> bool:
        return all(v == INCONCLUSIVE for v in self.confidence.values()) if self.confidence else True


def jsonable(x):
    """Replace non-finite floats by strings so the output is strict JSON."""
    if isinstance(x, dict):
        return {k: jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


_GAMMAS_POWER = (0.05, 0.1, 0.2, 0.25, 1 / 3, 0.5, 2 / 3, 0.75, 1.0, 1.5, 2.0, 3.0, 5.0, 10.0)
_DELTA_FRACTIONS = (0.0, 0.25, 0.5, 1.0)
_EXCESS_CURV = (3.0, 2.0, 1.5, 1.0, 0.75, 0.55)
_GAMMAS_CURV = (0.0, 0.25, 0.5, 1.0, 1.5, 2.0)
_EPS_SUBLINEAR = (0.9, 0.75, 0.5, 0.25, 0.1, 0.05, 0.01)
_GAMMAS_LOG = (0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 1.95)


def power_growth_threshold(gamma: float, delta: float) -> float:
    return max(4.0 + 2.0 / gamma, 2.0 + 4.0 / (gamma + delta))


def build_profile(f: Nonlinearity, t_max: float = T_MAX, windows: int = WINDOWS) -> AsymptoticProfile:
    """Estimate every classifier of ``f``; unresolvable fields stay None."""
    rep = validate(f)
    s = sample_tail(f, t_max, windows)
    conf = {}
    tau = estimate_tau(f, t_max, windows)
    prof = AsymptoticProfile(f.description, tau.tau_minus, tau.tau_plus)
    conf["tau_minus"] = conf["tau_plus"] = tau.confidence
    prof.convex = rep["convex"].passed
    prof.nondecreasing = rep["nondecreasing"].passed
    prof.superlinear = rep["superlinear"].passed
    prof.f0_positive = rep["f0_positive"].passed

    delta = convex_power_delta(f, t_max=t_max, windows=windows)
    prof.convex_power_delta = delta
    conf["convex_power_delta"] = CLOSED_FORM if closed_form_tau(f) is not None else (CONVERGED if delta is not None else INCONCLUSIVE)

    def run(cond, params):
        return check_condition(f, cond, params, sample=s)

    r = run(GROWTH_EVERY_EPS, {})
    prof.growth_every_eps = r.holds if r.status != INCONCLUSIVE else None
    conf["growth_every_eps"] = r.confidence

    conf["growth_sublinear"] = INCONCLUSIVE
    for eps in _EPS_SUBLINEAR:
        r = run(GROWTH_SUBLINEAR, {"eps": eps})
        if r.holds:
            prof.growth_sublinear, conf["growth_sublinear"] = eps, CONVERGED
            break
        if r.status == FAILS:
            conf["growth_sublinear"] = CONVERGED

    conf["curvature_liminf"] = INCONCLUSIVE
    done = False
    for d in _EXCESS_CURV:
        for g in _GAMMAS_CURV:
            r = run(CURVATURE_LIMINF, {"gamma": g, "eps": g + d})
            if r.holds:
                prof.curvature_liminf, conf["curvature_liminf"] = (g, g + d), CONVERGED
                done = True
                break
            if r.status == FAILS:
                conf["curvature_liminf"] = CONVERGED
        if done:
            break

    best = None
    conf["power_growth"] = INCONCLUSIVE
    for g in _GAMMAS_POWER:
        for frac in _DELTA_FRACTIONS:
            r = run(POWER_GROWTH, {"gamma": g, "delta": frac * g})
            if r.status != INCONCLUSIVE:
                conf["power_growth"] = CONVERGED
            if r.holds:
                th = power_growth_threshold(g, frac * g)
                if best is None or th > best[0]:
                    best = (th, (g, frac * g))
    prof.power_growth = best[1] if best else None

    for cond in (EXCESS_OVER_F, EXCESS_OVER_T, TANGENT_FOOT):
        r = run(cond, {})
        setattr(prof, cond, r.constant if r.holds else None)
        conf[cond] = r.confidence

    conf["log_convexity"] = INCONCLUSIVE
    for g in _GAMMAS_LOG:
        r = run(LOG_CONVEXITY, {"gamma": g})
        if r.status != INCONCLUSIVE:
            conf["log_convexity"] = CONVERGED
        if r.holds:
            prof.log_convexity = g
            break
    prof.confidence = conf
    return prof
