import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from monotone import elliptic as E, geometry as geo, models as M, solvers as S
from monotone.errors import FieldNotSolutionError, OutOfDomainError
from monotone.fields import noise_field

from conftest import linear_x1

X0 = [0.25]


@pytest.fixture(scope="module")
def gl(grid1):
    return S.exact_solution("gl_kink", grid1), M.ginzburg_landau(1.0)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.2, 1.5), st.floats(0.5, 3.0))
def test_phi_of_x1_matches_closed_form(r, beta):
    # n=3, F=0: r^(2-n-2b) |B_r| - b r^(1-n-2b) |S_r| r^2 / 3
    f = linear_x1(3)
    got = E.phi(f, M.zero(1), [0, 0, 0], beta, r).value
    want = (4 * math.pi / 3) * (1 - beta) * r ** (2 - 2 * beta)
    assert got == pytest.approx(want, rel=1e-10)


def test_phi_pinned_value():
    v = E.phi(linear_x1(3), M.zero(1), [0, 0, 0], 1.5, 0.5).value
    assert v == pytest.approx(-(2 * math.pi / 3) / 0.5, rel=1e-12)


def test_phi_in_one_dimension_against_scipy(gl):
    from scipy.integrate import quad
    fld, model = gl
    beta, r = 2.0, 0.8
    u = lambda x: math.tanh(x / math.sqrt(2))
    du = lambda x: (1 - u(x) ** 2) / math.sqrt(2)
    Fv = lambda x: model.F(np.array([[u(x)]]))[0]
    vol = quad(lambda x: du(x) ** 2 - 2 * Fv(x), X0[0] - r, X0[0] + r, epsabs=1e-13)[0]
    bd = u(X0[0] - r) ** 2 + u(X0[0] + r) ** 2
    want = r ** (-1 - 2 * beta + 2) * vol - beta * r ** (-1 - 2 * beta + 1) * bd
    got = E.phi(fld, model, X0, beta, r).value
    assert got == pytest.approx(want, abs=20 * fld.h ** 2)


@pytest.mark.parametrize("r", [0.5, 1.0, 2.0])
def test_identities_hold_on_the_kink(gl, r):
    fld, model = gl
    for rep in (E.pohozaev_report(fld, model, X0, r), E.ibp_report(fld, model, X0, r)):
        assert rep.passed, rep


def test_identities_fail_on_noise(grid1):
    f = noise_field(grid1, seed=4)
    rep = E.ibp_report(f, M.helmholtz(0.0), X0, 1.0)
    assert rep.residual > 10 * rep.tolerance


def test_boundary_part_is_non_negative_even_on_noise(grid1):
    f = noise_field(grid1, seed=8)
    for r in (0.3, 0.9, 1.7):
        b, _ = E.phi_derivative_decomposition(f, M.helmholtz(0.0), X0, 2.0, r)
        assert b >= 0


def test_monotonicity_identity_on_kink(gl):
    fld, model = gl
    rep = E.verify_monotonicity_elliptic(fld, model, X0, 2.0, 0.3, 1.5)
    assert rep.passed and rep.residual <= rep.tolerance


def test_noise_is_gated(grid1):
    f = noise_field(grid1, seed=1)
    with pytest.raises(FieldNotSolutionError):
        E.verify_monotonicity_elliptic(f, M.helmholtz(0.0), X0, 2.0, 0.3, 1.0)


def test_phi_scan_on_kink_is_monotone(gl):
    fld, model = gl
    rep = E.phi_scan(fld, model, X0, 2.0, 0.2, 2.0, n_r=7)
    assert rep.violations == 0
    assert rep.identity_residual_max <= rep.identity_tolerance
    # 2(b-1)F - b u f < 0 away from |u| = 1, so no radius is admissible here
    assert len(rep.inadmissible_radii) == 7


def test_inadmissible_radii_are_reported(grid1):
    # u^p with p=3 admits only beta <= -1; beta=2 must be flagged
    fld = S.exact_solution("gl_kink", grid1)
    model = M.single_power(3.0)
    rep = E.phi_scan(fld, model, X0, 2.0, 0.2, 1.0, n_r=5, check_identity=False)
    assert rep.inadmissible_radii
    assert rep.notes


def test_admissibility_margin_against_scipy(gl):
    from scipy.integrate import quad
    fld, model = gl
    beta, r = 1.0, 1.0
    u = lambda x: math.tanh(x / math.sqrt(2))
    want = quad(lambda x: -beta * u(x) ** 2 * (1 - u(x) ** 2), X0[0] - r, X0[0] + r)[0]
    adm = E.beta_admissible_elliptic(fld, model, X0, beta, r)
    assert adm.margin == pytest.approx(want, abs=1e-5)
    assert not adm.admissible


def test_zero_model_is_admissible_for_any_beta():
    for beta in (-1.0, 0.5, 3.0):
        assert E.beta_admissible_elliptic(linear_x1(2), M.zero(1), [0, 0], beta, 0.5).admissible


def test_radius_and_shape_errors(gl):
    fld, model = gl
    with pytest.raises(OutOfDomainError):
        E.phi(fld, model, X0, 2.0, 10.0)
    with pytest.raises(ValueError):
        E.phi(fld, model, [0.0, 0.0], 2.0, 1.0)
    with pytest.raises(ValueError):
        E.phi(fld, model, X0, 2.0, -1.0)
    with pytest.raises(ValueError):
        E.phi_scan(fld, model, X0, 2.0, 0.0, 1.0)


def test_homogeneous_phi_is_constant():
    g = geo.CartesianGrid.cube(3, 1.2, 97)
    X, Y, _ = g.mesh()
    from monotone.fields import Field
    f = Field(g, X * Y, "exact", M.zero(1))
    vals = [E.phi(f, M.zero(1), [0, 0, 0], 2.0, r).value for r in (0.3, 0.6, 1.0)]
    assert np.ptp(vals) < 1e-3 * (1 + np.max(np.abs(vals)))
