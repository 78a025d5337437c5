"""Command-line front end: classify, verdict, branch, verify.

Every option can also come from ``--config FILE``, a text file of
``key = value`` lines (``#`` starts a comment, keys are option names with or
without the leading dashes, underscores and dashes interchangeable).  Flags
given on the command line override the file.  Exit codes: 0 ok, 1 error,
2 inconclusive.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import acceptance
from .analysis import KINDS, QuantitySpec, track
from .asymptotics import build_profile, jsonable
from .expr import ParseError
from .jet import DomainError
from .nonlinearity import ParameterError, builtin, parse_nonlinearity, validate
from .radial import DEFAULT_CONTROLS, SolverControls, branch_sweep, eigen_fold, m_grid
from .verdict import VerdictDomainError, regularity_verdict

EXIT_OK, EXIT_ERROR, EXIT_INCONCLUSIVE = 0, 1, 2


class UsageError(ValueError):
    pass


# config -------------------------------------------------------------------------


def read_config(path: str) -> dict:
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.lstrip("-").replace("_", "-")] = value
    return out


def _config_argv(sub: argparse.ArgumentParser, cfg: dict) -> list:
    """Translate config entries into flags understood by ``sub``."""
    known = {}
    for action in sub._actions:
        for opt in action.option_strings:
            if opt.startswith("--"):
                known[opt[2:]] = action
    argv = []
    for key, value in cfg.items():
        if key == "config":
            continue
        action = known.get(key)
        if action is None:
            raise UsageError(f"unknown config key {key!r}")
        if action.nargs == 0:
            if value.lower() in ("1", "true", "yes", "on"):
                argv.append(f"--{key}")
            elif value.lower() not in ("0", "false", "no", "off"):
                raise UsageError(f"config key {key!r} expects true or false")
        elif action.nargs in ("+", "*"):
            argv += [f"--{key}", *value.replace(",", " ").split()]
        else:
            argv += [f"--{key}", value]
    return argv


# shared options -------------------------------------------------------------------


def _add_nonlinearity(p):
    g = p.add_argument_group("nonlinearity")
    g.add_argument("--family", choices=("exp", "pow", "linlog", "linlogpow"), help="built-in family")
    g.add_argument("--p", type=float, help="exponent for pow: (1+t)^p")
    g.add_argument("--a", type=float, help="exponent for linlogpow: t (ln t)^a")
    g.add_argument("--expr", help="custom f(t) as an expression in t")


def _add_common(p):
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--out", help="directory for output files")
    p.add_argument("--json", action="store_true", help="print JSON (default)")
    p.add_argument("--markdown", action="store_true", help="print markdown where available")
    p.add_argument("--threads", type=int, default=None, help="worker threads for sweeps")
    p.add_argument("--seed", type=int, default=0, help="seed for randomized checks")
    p.add_argument("--tol-ode", type=float, default=DEFAULT_CONTROLS.rtol, help="ODE relative tolerance")
    p.add_argument("--tol-quad", type=float, default=1e-10, help="quadrature tolerance")
    p.add_argument("--tol-eigen", type=float, default=1e-10, help="eigenvalue tolerance")


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; here 2 means inconclusive
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="semistable", description=__doc__.split("\n")[0])
    subs = parser.add_subparsers(dest="command", required=True)

    c = subs.add_parser("classify", help="asymptotic profile of f as JSON")
    _add_nonlinearity(c)
    _add_common(c)

    v = subs.add_parser("verdict", help="regularity guarantees per dimension")
    _add_nonlinearity(v)
    _add_common(v)
    v.add_argument("--n", type=int, help="dimension of interest (added to the table)")
    v.add_argument("--cert", nargs="+", default=[], metavar="ALPHA,SIGMA",
                   help="user certificates: bounds on f~(u)^alpha/u^sigma in L^1")

    b = subs.add_parser("branch", help="sweep the radial branch, write CSV and a summary")
    _add_nonlinearity(b)
    _add_common(b)
    b.add_argument("--n", type=int, required=False, help="dimension")
    b.add_argument("--m-min", type=float, default=0.1)
    b.add_argument("--m-max", type=float, default=10.0)
    b.add_argument("--m-count", type=int, default=100)
    b.add_argument("--spacing", choices=("linear", "geometric"), default="linear")
    b.add_argument("--beta", type=float, nargs="+", default=[], help="track int H_{f,beta}(u) for each beta")
    b.add_argument("--track", nargs="+", default=[], metavar="KIND[:PARAM]",
                   help=f"extra tracked quantities, KIND in {', '.join(KINDS)}")
    b.add_argument("--no-eigen", action="store_true", help="skip the principal eigenvalue")

    r = subs.add_parser("verify", help="run the acceptance suite")
    _add_common(r)
    r.add_argument("--filter", help="comma-separated criterion numbers, suite names or title words")
    return parser


def parse_args(argv: Sequence[str]) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        sub = parser._subparsers._group_actions[0].choices[args.command]
        extra = _config_argv(sub, read_config(args.config))
        args = parser.parse_args([args.command, *extra, *argv[1:]])
    for name in ("tol_ode", "tol_quad", "tol_eigen"):
        if not getattr(args, name) > 0.0:
            raise UsageError(f"--{name.replace('_', '-')} must be positive")
    if args.threads is not None and args.threads < 1:
        raise UsageError("--threads must be >= 1")
    return args


def nonlinearity_from(args):
    if args.expr and args.family:
        raise UsageError("give either --family or --expr, not both")
    if args.expr:
        return parse_nonlinearity(args.expr)
    if args.family:
        return builtin(args.family, p=args.p, a=args.a)
    raise UsageError("a nonlinearity is required: --family or --expr")


def _emit(text: str, out: Optional[str], name: str):
    sys.stdout.write(text if text.endswith("\n") else text + "\n")
    if out:
        d = Path(out)
        d.mkdir(parents=True, exist_ok=True)
        (d / name).write_text(text if text.endswith("\n") else text + "\n")


def _dumps(obj) -> str:
    return json.dumps(jsonable(obj), indent=2)


# commands -----------------------------------------------------------------------


def cmd_classify(args) -> int:
    f = nonlinearity_from(args)
    report = validate(f)
    prof = build_profile(f)
    doc = {"nonlinearity": f.description, "hypotheses": report.to_dict(), "profile": prof.to_dict()}
    _emit(_dumps(doc), args.out, "profile.json")
    if not report.passed:
        failed = ", ".join(c.name for c in report.checks if not c.passed)
        print(f"hypotheses failed: {failed}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_INCONCLUSIVE if prof.all_inconclusive else EXIT_OK


def _parse_cert(text: str) -> tuple:
    try:
        alpha, sigma = (float(x) for x in text.split(","))
    except ValueError:
        raise UsageError(f"certificate {text!r} is not ALPHA,SIGMA") from None
    return alpha, sigma


def cmd_verdict(args) -> int:
    f = nonlinearity_from(args)
    prof = build_profile(f)
    user = [_parse_cert(c) for c in args.cert]
    dims = range(2, 16)
    v = regularity_verdict(prof, n=args.n, dimensions=dims, user=user)
    if args.markdown:
        _emit(v.to_markdown(), args.out, "verdict.md")
    else:
        doc = v.to_dict()
        if args.n is not None:
            doc["requested"] = v.row(args.n)
        _emit(json.dumps(doc, indent=2), args.out, "verdict.json")
    if not v.certificates and v.h1_all_dimensions is None:
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def _quantity(token: str) -> QuantitySpec:
    kind, _, param = token.partition(":")
    if kind not in KINDS:
        raise UsageError(f"unknown quantity {kind!r}")
    if kind in ("Lp", "GradLp"):
        return QuantitySpec(kind, r=math.inf if param in ("inf", "") else float(param))
    if kind == "IntHfBeta":
        return QuantitySpec(kind, beta=float(param or 0.0))
    if kind == "IntMultiplierDefect":
        return QuantitySpec(kind, g=param or "shifted_f")
    return QuantitySpec(kind)


def cmd_branch(args) -> int:
    f = nonlinearity_from(args)
    if args.n is None or args.n < 2:
        raise UsageError("--n must be an integer >= 2")
    grid = m_grid(args.m_min, args.m_max, args.m_count, args.spacing)
    controls = SolverControls(rtol=args.tol_ode)
    eigen = not args.no_eigen
    specs = [QuantitySpec("IntHfBeta", beta=b) for b in args.beta] + [_quantity(t) for t in args.track]
    br = branch_sweep(f, args.n, grid, controls, eigen=eigen, keep_profiles=bool(specs), threads=args.threads,
                      eigen_tol=args.tol_eigen)
    columns = []
    if specs:
        table = track(br, specs, controls=controls, tol=args.tol_quad, threads=args.threads)
        columns = table.columns
        for p in br.points:
            p.profile = None
    failed = [{"m": p.m, "error": p.error} for p in br.points if not p.ok]
    summary = {
        "nonlinearity": f.description, "n": args.n, "points": len(br.points), "failed": failed,
        "lambda_star": br.lambda_star, "fold_m": br.fold_m, "argmax_m": br.argmax_m,
        "monotone_flag": br.monotone_flag, "minimal_points": len(br.minimal()),
    }
    if eigen:
        summary.update(_eigen_summary(br, f, args, controls))
    csv_text = br.to_csv(columns)
    if args.out:
        d = Path(args.out)
        d.mkdir(parents=True, exist_ok=True)
        (d / "branch.csv").write_text(csv_text)
    _emit(_dumps(summary), args.out, "summary.json")
    return EXIT_OK if not failed else EXIT_ERROR


def _eigen_summary(br, f, args, controls) -> dict:
    pts = [p for p in br.points if p.ok and math.isfinite(p.mu1)]
    change = None
    for a, b in zip(pts, pts[1:]):
        if a.mu1 >= 0.0 > b.mu1:
            change = (a.m, b.m)
            break
    out = {"mu1_min_minimal": min((p.mu1 for p in pts if br.fold_m is None or p.m <= br.fold_m), default=None),
           "mu1_sign_change": change is not None, "mu1_zero_m": None}
    if change is not None:
        try:
            out["mu1_zero_m"] = eigen_fold(f, br.n, change[0], change[1], controls)
        except ValueError:
            pass
    return out


def cmd_verify(args) -> int:
    chosen = acceptance.select(args.filter)
    if not chosen:
        raise UsageError(f"no criterion matches {args.filter!r}")
    results = acceptance.run(chosen, args.seed)
    _emit(acceptance.report_lines(results), args.out, "report.jsonl")
    return EXIT_OK if all(r["passed"] for r in results) else EXIT_ERROR


COMMANDS = {"classify": cmd_classify, "verdict": cmd_verdict, "branch": cmd_branch, "verify": cmd_verify}


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
        return COMMANDS[args.command](args)
    except (UsageError, ParseError, ParameterError, DomainError, VerdictDomainError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
