"""Acceptance suite: one printed pass/fail line per criterion.

The in-process suite runs once per module; criterion 11 additionally runs
``monotone selftest`` twice in subprocesses and compares the report bytes.
"""

import os
import subprocess
import sys

import pytest

from monotone import acceptance

from conftest import ACCEPTANCE_LINES


@pytest.fixture(scope="module")
def suite():
    return {r.number: r for r in acceptance.run_suite()}


def _report(result):
    line = result.line()
    ACCEPTANCE_LINES.append(line)
    print(line)
    for c in result.checks:
        print(f"    {c.name}: measured={c.measured!r} tol={c.tolerance!r}"
              f"{' skipped' if c.skipped else ''}")


def _tols(result, prefix=""):
    return {c.tolerance for c in result.checks if c.name.startswith(prefix) and not c.skipped}


def test_c01_gradient_structure(suite):
    r = suite[1]
    _report(r)
    assert len(r.checks) == 10
    assert _tols(r) <= {0.5, 1e-9}
    assert r.passed


def test_c02_geometry_oracles(suite):
    r = suite[2]
    _report(r)
    for c in r.checks:
        want = {"kernel_mass": 1e-6, "heat_residual": 1e-4}.get(c.name.split(":")[1], 1e-8)
        assert c.tolerance == want, c.name
    assert r.passed


def test_c03_elliptic_identities(suite):
    r = suite[3]
    _report(r)
    fixtures = {c.name.split(":")[0] for c in r.checks}
    assert fixtures == {"x1_n3", "linear_sin", "helmholtz_sin", "gl_kink", "noise"}
    assert _tols(r, "noise") == {1.0}
    assert r.passed


def test_c04_elliptic_monotonicity(suite):
    r = suite[4]
    _report(r)
    assert _tols(r, "noise") == {0.0}
    assert sum("identity(10 pairs)" in c.name for c in r.checks) == 4
    assert r.passed


def test_c05_homogeneous_invariance(suite):
    r = suite[5]
    _report(r)
    assert _tols(r, "x1:max") == {1e-3}
    assert r.passed


def test_c06_beta_admissibility(suite):
    r = suite[6]
    _report(r)
    assert _tols(r, "p=") == {0.0}
    assert _tols(r, "GL") == {1e-12}
    assert r.passed


def test_c07_caloric_invariance(suite):
    r = suite[7]
    _report(r)
    assert _tols(r, "|Psi-|") == {1e-3}
    assert _tols(r, "residual") == {1e-6}
    assert r.passed


def test_c08_parabolic_identity(suite):
    r = suite[8]
    _report(r)
    assert {c.name for c in r.checks} >= {"caloric_linear:minus", "caloric_linear:plus",
                                         "exp_growth:minus", "exp_growth:plus"}
    assert _tols(r, "noise") == {0.0}
    assert r.passed


def test_c09_free_boundary(suite):
    r = suite[9]
    _report(r)
    assert _tols(r, "u=0") == {1e-12}
    assert _tols(r, "(*) fixture:violations") == {0.0}
    assert r.passed


def test_c10_blowup(suite):
    r = suite[10]
    _report(r)
    assert _tols(r, "degree") == {1e-3}
    assert _tols(r, "gl_kink:|beta_hat") == {0.02}
    assert r.passed


def _selftest(out):
    env = {**os.environ, "MONOTONE_THREADS": "1"}
    return subprocess.run([sys.executable, "-m", "monotone", "selftest", "--out", str(out)],
                          capture_output=True, text=True, env=env)


def test_c11_determinism(suite, tmp_path):
    r = suite[11]
    a, b = _selftest(tmp_path / "A"), _selftest(tmp_path / "B")
    diffs = 0
    for name in ("selftest.csv", "selftest.json"):
        diffs += (tmp_path / "A" / name).read_bytes() != (tmp_path / "B" / name).read_bytes()
    diffs += a.stdout != b.stdout
    r.checks.append(acceptance._le("two selftest runs:differing files", diffs, 0))
    _report(r)
    assert a.returncode == b.returncode == 0, a.stderr
    assert r.passed
