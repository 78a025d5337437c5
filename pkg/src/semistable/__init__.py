"""Semistable radial solutions of -Lap u = lambda f(u) on the unit ball and regularity verdicts."""

from .analysis import QuantitySpec, ball_integral, diagnose_boundedness, track
from .asymptotics import AsymptoticProfile, build_profile, check_condition, estimate_tau
from .estimates import CumulativeTable, H_f_beta, multiplier_defect, multiplier_ratio_bound
from .nonlinearity import Nonlinearity, builtin, parse_nonlinearity, validate
from .radial import branch_sweep, integrate_profile, principal_eigenvalue, stability_margin
from .verdict import bootstrap_exponents, certificate_guarantees, generate_certificates, regularity_verdict

__all__ = [
    "AsymptoticProfile", "CumulativeTable", "H_f_beta", "Nonlinearity", "QuantitySpec", "ball_integral",
    "bootstrap_exponents", "branch_sweep", "build_profile", "builtin", "certificate_guarantees", "check_condition",
    "diagnose_boundedness", "estimate_tau", "generate_certificates", "integrate_profile", "multiplier_defect",
    "multiplier_ratio_bound", "parse_nonlinearity", "principal_eigenvalue", "regularity_verdict", "stability_margin",
    "track", "validate",
]
