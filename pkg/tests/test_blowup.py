import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from monotone import blowup as B, geometry as geo, models as M, solvers as S
from monotone.errors import DegreeUndefinedError, OutOfDomainError
from monotone.fields import AnalyticField, Field

from conftest import linear_x1


def _affine(n, a, b):
    b = np.asarray(b, float)

    def u(P):
        return (a + P @ b)[None]

    def g(P):
        return np.broadcast_to(b[None, :, None], (1, n, len(P))).copy()
    return AnalyticField(n, 1, u, g)


def test_homogeneity_residual_pinned_value():
    # defect -x1 against weight r^-7 on 0.1 < r < 1 gives 2 * (4 pi / 3) * 49.5
    got = B.homogeneity_residual(linear_x1(3), [0, 0, 0], 2.0)
    assert got == pytest.approx(132 * math.pi, rel=1e-12)
    assert got == pytest.approx(414.690230273853, rel=1e-12)


def test_homogeneity_residual_on_grid_matches_analytic():
    g = geo.CartesianGrid.cube(3, 1.2, 49)
    f = linear_x1(3).on_grid(g)
    assert B.homogeneity_residual(f, [0, 0, 0], 2.0) == pytest.approx(132 * math.pi, rel=1e-10)
    assert B.homogeneity_residual(f, [0, 0, 0], 1.0) < 1e-20


@settings(max_examples=25, deadline=None)
@given(st.floats(0.2, 1.0), st.floats(0.2, 1.0), st.floats(-2, 2), st.floats(-2, 2),
       st.floats(0.5, 2.5))
def test_rescaling_composes(r1, r2, a, b, beta):
    f = _affine(1, a, [b])
    x0 = [0.1]
    probe = geo.CartesianGrid((-1.0,), (1.0,), (41,))
    once = B.rescale_elliptic(f, x0, r1 * r2, beta, probe)
    inner = B.rescale_elliptic(f, x0, r1, beta, probe)
    twice = B.rescale_elliptic(inner, [0.0], r2, beta, probe)
    assert np.allclose(once.values, twice.values, rtol=1e-11, atol=1e-11 * r1 ** -beta)


def test_rescaling_fixes_homogeneous_data():
    g = geo.CartesianGrid.cube(2, 1.2, 257)
    f = S.manufactured_homogeneous(1.5, lambda d: 1.0 + 0.3 * d[:, 0] ** 2, g)
    probe = geo.CartesianGrid.cube(2, 1.0, 33)
    a = B.rescale_elliptic(f, [0, 0], 0.5, 1.5, probe)
    b = B.rescale_elliptic(f, [0, 0], 1.0, 1.5, probe)
    assert np.abs(a.values - b.values).max() < 5e-3


def test_rescaling_window_must_fit():
    g = geo.CartesianGrid.cube(1, 1.0, 11)
    f = Field(g, np.zeros(11))
    with pytest.raises(OutOfDomainError):
        B.rescale_elliptic(f, [0.5], 0.8, 1.0)
    with pytest.raises(ValueError):
        B.rescale_elliptic(f, [0.0], 0.0, 1.0)


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("beta", [0.5, 1.0, 2.5])
def test_degree_exact_on_analytic_homogeneous(n, beta):
    def u(P):
        r = np.linalg.norm(P, axis=1)
        return (r ** beta * (1.0 + 0.5 * P[:, 0] / np.maximum(r, 1e-300)) ** 2)[None]

    f = AnalyticField(n, 1, u, lambda P: np.zeros((1, n, len(P))))
    assert B.estimate_degree(f, np.zeros(n), [0.2, 0.4, 0.6, 0.8]) == pytest.approx(beta, abs=1e-12)


def test_degree_undefined_and_argument_checks():
    zero = AnalyticField(2, 1, lambda P: np.zeros((1, len(P))), lambda P: np.zeros((1, 2, len(P))))
    with pytest.raises(DegreeUndefinedError):
        B.estimate_degree(zero, [0, 0], [0.2, 0.4, 0.6])
    with pytest.raises(ValueError):
        B.estimate_degree(linear_x1(2), [0, 0], [0.2, 0.4])


def test_kink_blowup_converges_to_linear():
    g = geo.CartesianGrid((-4.0,), (4.0,), (2001,))
    f = S.exact_solution("gl_kink", g)
    rep = B.blowup_study(f, [0.0], 1.0, [0.4, 0.2, 0.1, 0.05])
    assert np.all(np.diff(rep.residuals) < 0)
    assert rep.beta_hat == pytest.approx(1.0, abs=0.02)
    assert not rep.degenerate and rep.growth_ok
    assert np.all(np.diff(rep.cauchy) < 0)


def test_degenerate_flag_for_too_small_beta():
    g = geo.CartesianGrid.cube(1, 1.0, 401)
    f = Field(g, g.mesh()[0] ** 2, "exact", M.zero(1))
    rep = B.blowup_study(f, [0.0], 1.0, [0.4, 0.2, 0.1, 0.05])
    assert rep.degenerate
    assert rep.warnings


def test_parabolic_invariance_of_caloric_quadratic():
    space = geo.CartesianGrid((-3.0,), (3.0,), (601,))
    stg = geo.SpaceTimeGrid.from_step(space, 0.0, 1.0, 1e-2)
    T = 1.0
    f = S.exact_solution("caloric_quadratic", stg, {"T": T})
    a = B.rescale_parabolic(f, T, [0.0], 0.4, 2.0)
    b = B.rescale_parabolic(f, T, [0.0], 0.2, 2.0)
    assert np.abs(a.values - b.values).max() < 1e-3
    assert B.parabolic_homogeneity_residual(a, 2.0) < 1e-4
    lam = np.geomspace(1 / math.sqrt(2), 1.0, 5)
    assert B.estimate_degree_parabolic(a, 0.0, [0.0], lam) == pytest.approx(2.0, abs=1e-3)


def test_report_serialises():
    g = geo.CartesianGrid((-4.0,), (4.0,), (2001,))
    rep = B.blowup_study(S.exact_solution("gl_kink", g), [0.0], 1.0, [0.4, 0.2, 0.1])
    d = rep.to_dict()
    assert d["beta"] == 1.0 and "fields" not in d
    assert rep.csv().splitlines()[0] == "rho,norm,residual,degree,cauchy"
