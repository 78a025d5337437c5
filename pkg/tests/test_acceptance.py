"""One test per acceptance criterion, each at its stated tolerance and time budget."""

import json
import subprocess
import sys
import time

import pytest

from semistable import acceptance

BY_NUMBER = {c.number: c for c in acceptance.CRITERIA}


def _check(number):
    c = BY_NUMBER[number]
    start = time.perf_counter()
    result = acceptance.run_one(c, seed=0)
    elapsed = time.perf_counter() - start
    detail = json.dumps(result, sort_keys=True)
    assert result["passed"], detail
    if c.runtime is not None:
        assert elapsed < c.runtime, f"took {elapsed:.2f} s, budget {c.runtime} s"


def test_criterion_01_threshold_table():
    _check(1)


def test_criterion_02_tau_estimation():
    _check(2)


def test_criterion_03_exponential_quadrature():
    _check(3)


def test_criterion_04_plane_oracle():
    _check(4)


def test_criterion_05_singular_limit():
    _check(5)


def test_criterion_06_principal_eigenvalue():
    _check(6)


def test_criterion_07_multiplier_sign():
    _check(7)


def test_criterion_08_uniform_bound():
    _check(8)


def test_criterion_09_bootstrap():
    _check(9)


def test_criterion_10_determinism():
    cmd = [sys.executable, "-m", "semistable.cli", "verify", "--filter", "1,2,3,4,9,10"]
    first = subprocess.run(cmd, capture_output=True)
    second = subprocess.run(cmd, capture_output=True)
    assert first.returncode == 0, first.stdout.decode() + first.stderr.decode()
    assert first.stdout == second.stdout and first.stdout
