import math

import numpy as np
import pytest
from scipy.integrate import quad

from monotone import geometry as geo, models as M, parabolic as P, solvers as S
from monotone.errors import FieldNotSolutionError, HypothesisError, OutOfDomainError
from monotone.fields import SpaceTimeField, noise_spacetime

T = 0.25


def _stgrid(dt, count=801, half=8.0):
    space = geo.CartesianGrid((-half,), (half,), (count,))
    return geo.SpaceTimeGrid.from_step(space, 0.0, 2 * T, dt)


@pytest.fixture(scope="module")
def growth():
    return S.exact_solution("exp_growth", _stgrid(1e-4))


@pytest.fixture(scope="module")
def caloric():
    return S.exact_solution("caloric_linear", _stgrid(1e-3))


def _growth_oracle(beta, r, side):
    # u = e^t is constant in x and the kernel has mass sign(T - t), so Psi is a time integral
    a, b = geo.layer_interval(T, r, side)
    sgn = 1.0 if side == "minus" else -1.0
    g = lambda t: sgn * (-math.exp(2 * t) - 0.5 * beta * math.exp(2 * t) / (T - t))
    return r ** (-2 * beta) * quad(g, a, b, epsabs=0, epsrel=1e-13)[0]


@pytest.mark.parametrize("side", ["minus", "plus"])
@pytest.mark.parametrize("r", [0.1, 0.2])
def test_psi_of_exp_growth_against_time_quadrature(growth, side, r):
    got = P.psi(growth, growth.model, T, [0.0], 2.0, r, side=side).value
    assert got == pytest.approx(_growth_oracle(2.0, r, side), rel=5e-5)


def test_slice_quadrature_is_second_order_in_dt():
    errs = []
    for dt in (2e-3, 1e-3):
        f = S.exact_solution("exp_growth", _stgrid(dt, count=201))
        errs.append(abs(P.psi(f, f.model, T, [0.0], 2.0, 0.1).value
                        - _growth_oracle(2.0, 0.1, "minus")))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)


def test_caloric_psi_minus_vanishes_plus_is_minus_six(caloric):
    for r in (0.05, 0.1, 0.2):
        assert abs(P.psi(caloric, caloric.model, T, [0.0], 1.0, r).value) < 1e-9
    plus = P.psi(caloric, caloric.model, T, [0.0], 1.0, 0.1, side="plus").value
    assert plus == pytest.approx(-6.0, abs=1e-9)


def test_caloric_residual_part_vanishes(caloric):
    for r in (0.05, 0.2):
        _, resid = P.psi_derivative_decomposition(caloric, caloric.model, T, [0.0], 1.0, r)
        assert abs(resid) < 1e-6


@pytest.mark.parametrize("side", ["minus", "plus"])
def test_monotonicity_identity(growth, side):
    rep = P.verify_monotonicity_parabolic(growth, growth.model, T, [0.0], 2.0, 0.05, 0.2,
                                          side=side, n_quad_r=8)
    assert rep.passed, rep


def test_ibp_gate_rejects_noise():
    f = noise_spacetime(_stgrid(1e-3, count=201), seed=3)
    with pytest.raises(FieldNotSolutionError):
        P.verify_monotonicity_parabolic(f, M.helmholtz(0.0), T, [0.0], 2.0, 0.05, 0.1)


def test_residual_part_is_non_negative_on_noise():
    f = noise_spacetime(_stgrid(1e-3, count=201), seed=5)
    for r in (0.05, 0.1, 0.2):
        _, resid = P.psi_derivative_decomposition(f, M.helmholtz(0.0), T, [0.0], 2.0, r)
        assert resid >= 0


def test_literal_convention_refuses_uncut_plus_side(caloric):
    with pytest.raises(ValueError):
        P.psi(caloric, caloric.model, T, [0.0], 1.0, 0.1, side="plus", convention="literal")


def test_radius_outside_time_range(caloric):
    lo, hi = P.valid_interval(caloric, T, "minus")
    assert hi == pytest.approx(0.25)
    with pytest.raises(OutOfDomainError):
        P.psi(caloric, caloric.model, T, [0.0], 1.0, 0.3)
    with pytest.raises(ValueError):
        P.psi(caloric, caloric.model, T, [0.0], 1.0, 0.1, side="sideways")


@pytest.fixture(scope="module")
def obstacle():
    space = geo.CartesianGrid((-2.0,), (2.0,), (401,))
    st = geo.SpaceTimeGrid.from_step(space, 0.0, 1.0, 4e-3)
    init = S.discrete_obstacle_profile(space)
    fld, chi = S.simulate_free_boundary(st, init, thresholds=S.obstacle_thresholds(space))
    return fld, chi


def test_free_boundary_zero_field_gives_C_E(obstacle):
    fld, chi = obstacle
    zero = SpaceTimeField(fld.stgrid, np.zeros_like(fld.values), "exact", fld.model)
    for r in (0.1, 0.3):
        v = P.psi_free_boundary(zero, fld.model, chi, 1.0, [-0.1], 2.0, r, C=0.5)
        assert v.value == pytest.approx(0.5 * geo.error_integral_E(r, 1, 2.0), rel=1e-12)


def test_free_boundary_hypotheses(obstacle):
    fld, chi = obstacle
    with pytest.raises(HypothesisError):
        P.psi_free_boundary(fld, fld.model, chi, 1.0, [-0.1], 2.0, 0.2, C=-1.0)
    with pytest.raises(HypothesisError):
        P.psi_free_boundary(fld, fld.model, chi, 1.0, [0.5], 2.0, 0.2)
    with pytest.raises(HypothesisError):
        P.psi_free_boundary(fld, fld.model, None, 1.0, [-0.1], 2.0, 0.2)


def test_free_boundary_identity_and_envelope(obstacle):
    fld, chi = obstacle
    rep = P.verify_free_boundary(fld, fld.model, chi, 1.0, [-0.1], 2.0, 0.1, 0.4)
    assert rep.passed, rep
    radii = np.linspace(0.1, 0.45, 6)
    cal = P.calibrate_C(fld, fld.model, chi, 1.0, [-0.1], 2.0, radii)
    assert cal.C >= 0
    scan = P.psi_scan(fld, fld.model, 1.0, [-0.1], 2.0, radii=radii, chi=chi, C=cal.C)
    assert scan.violations == 0
    assert scan.free_boundary
