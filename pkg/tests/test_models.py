import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from monotone import models as M
from monotone.errors import ModelDomainError


@pytest.mark.parametrize("name", sorted(M.builtin_models()))
def test_gradient_structure(name):
    gc = M.gradient_check(M.builtin_models()[name], n_points=1000)
    assert gc.passed, gc


def test_gradient_check_catches_wrong_pair():
    bad = M.NonlinearityModel("bad", 1, {}, (M.REALS,), lambda u: u[0] ** 3,
                              lambda u: u.copy())
    assert not M.gradient_check(bad).passed


def test_ginzburg_landau_values():
    m = M.ginzburg_landau(0.5)
    u = np.array([[0.3]])
    s = 0.09
    assert m.F(u)[0] == pytest.approx(-(1 - s) ** 2 / (4 * 0.25))
    assert m.f(u)[0, 0] == pytest.approx(0.3 * (1 - s) / 0.25)


def test_gl_interior_integrand_closed_form():
    m = M.ginzburg_landau(0.7, m=2)
    rng = np.random.default_rng(4)
    u = rng.uniform(-1.5, 1.5, (2, 200))
    s = np.sum(u * u, axis=0)
    for beta in (0.5, 1.5, 2.0, 3.0):
        assert np.allclose(M.interior_integrand(m, beta, u),
                           M.gl_interior_closed_form(beta, s, 0.7), rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("beta", [1.5, 2.0, 3.0])
def test_gl_integrand_vanishes_on_unit_sphere(beta):
    th = np.linspace(0, 2 * np.pi, 33)
    u = np.stack([np.cos(th), np.sin(th)])
    assert np.max(np.abs(M.interior_integrand(M.ginzburg_landau(1.0, m=2), beta, u))) < 1e-12


def test_gl_assertion_bracket_differs_from_consistent_model():
    # the two brackets agree only at special points; at s = 0 they differ in sign
    assert M.gl_assertion_bracket(2.0, 0.0) == pytest.approx(0.5)
    assert M.gl_interior_closed_form(2.0, 0.0) == pytest.approx(-0.5)


def test_single_power_intervals():
    rep = M.pointwise_beta_interval(M.single_power(0.5), (0.0, 2.0))
    adm = rep.admissible_betas()
    assert min(adm) == pytest.approx(4.0) and max(adm) == pytest.approx(10.0)
    rep = M.pointwise_beta_interval(M.single_power(3.0), (-2.0, 2.0))
    adm = rep.admissible_betas()
    assert max(adm) == pytest.approx(-1.0) and min(adm) == pytest.approx(-10.0)


def test_single_power_rejects_unit_exponents():
    for p in (1.0, -1.0):
        with pytest.raises(ValueError):
            M.single_power(p)


def test_domain_errors():
    with pytest.raises(ModelDomainError) as exc:
        M.single_power(0.5).F(np.array([[-0.1]]))
    assert exc.value.component == 0
    with pytest.raises(ModelDomainError):
        M.log_potential().f(np.array([[0.0]]))


def test_build_model_and_errors():
    m = M.build_model({"kind": "single_power", "p": 0.5})
    assert m.kind == "single_power" and m.params["p"] == 0.5
    with pytest.raises(ValueError):
        M.build_model({"kind": "nope"})
    with pytest.raises(ValueError):
        M.build_model({"kind": "helmholtz", "bogus": 1})
    with pytest.raises(ValueError):
        M.build_model({})


def test_custom_expression_and_cross_check():
    m = M.custom("u1**2 * u2 + sin(u1)", m=2)
    u = np.array([[0.3], [1.2]])
    assert m.F(u)[0] == pytest.approx(0.09 * 1.2 + np.sin(0.3))
    assert np.allclose(m.f(u)[:, 0], [2 * 0.3 * 1.2 + np.cos(0.3), 0.09], rtol=1e-8)
    with pytest.raises(ValueError):
        M.custom("u**2", f=lambda u: 3 * u)
    with pytest.raises(ValueError):
        M.custom("__import__('os')")


def test_jacobian_matches_differences():
    m = M.coupled_power(2.0, 1.0)
    u = np.array([[0.7], [1.1]])
    J = m.jacobian(u)[:, :, 0]
    h = 1e-6
    for j in range(2):
        e = np.zeros((2, 1))
        e[j] = h
        col = (m.f(u + e) - m.f(u - e))[:, 0] / (2 * h)
        assert np.allclose(J[:, j], col, rtol=1e-6)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 3.0), st.floats(0.1, 4.0), st.sampled_from([0.5, 2.0, 3.0, 2.5]))
def test_single_power_homogeneity(u, lam, p):
    m = M.single_power(p)
    a = m.F(np.array([[lam * u]]))[0]
    b = lam ** (p + 1) * m.F(np.array([[u]]))[0]
    assert a == pytest.approx(b, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-5, 5))
def test_interior_integrand_affine_in_beta(b1, b2, u):
    m = M.ginzburg_landau(1.0)
    x = np.array([[u]])
    f1 = M.interior_integrand(m, b1, x)[0]
    f2 = M.interior_integrand(m, b2, x)[0]
    mid = M.interior_integrand(m, 0.5 * (b1 + b2), x)[0]
    assert mid == pytest.approx(0.5 * (f1 + f2), rel=1e-9, abs=1e-9)
