import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from monotone import geometry as geo
from monotone.errors import OutOfDomainError, SingularTimeError


@pytest.mark.parametrize("n, area", [(1, 2.0), (2, 2 * math.pi), (3, 4 * math.pi)])
def test_unit_sphere_area(n, area):
    assert geo.unit_sphere_area(n) == pytest.approx(area, rel=1e-15)


def test_sphere_moments_against_closed_forms():
    r = 2.0
    # 3-sphere of radius 2: area 16 pi, int x1^2 = 4 pi r^4 / 3
    assert geo.sphere_integral(lambda p: np.ones(len(p)), [0, 0, 0], r) == pytest.approx(
        16 * math.pi, rel=1e-14)
    assert geo.sphere_integral(lambda p: p[:, 0] ** 2, [0, 0, 0], r) == pytest.approx(
        4 * math.pi * r ** 4 / 3, rel=1e-13)


def test_ball_volume_and_moment():
    assert geo.ball_integral(lambda p: np.ones(len(p)), [0, 0, 0], 1.0) == pytest.approx(
        4 * math.pi / 3, rel=1e-13)
    # int_B |x|^2 = 4 pi / 5
    assert geo.ball_integral(lambda p: np.sum(p ** 2, axis=1), [0, 0, 0], 1.0) == \
        pytest.approx(4 * math.pi / 5, rel=1e-13)


def test_sphere_rule_circle_against_mpmath():
    # int over the circle of radius 1.3 centred at (0.2, -0.1) of exp(x1) x2^2
    c, r = (0.2, -0.1), 1.3
    want = mpmath.quad(lambda th: mpmath.exp(c[0] + r * mpmath.cos(th))
                       * (c[1] + r * mpmath.sin(th)) ** 2 * r, [0, 2 * mpmath.pi])
    got = geo.sphere_integral(lambda p: np.exp(p[:, 0]) * p[:, 1] ** 2, c, r)
    assert got == pytest.approx(float(want), rel=1e-12)


def test_sphere_integral_respects_domain():
    grid = geo.CartesianGrid.cube(2, 1.0, 11)
    with pytest.raises(OutOfDomainError):
        geo.sphere_integral(lambda p: np.ones(len(p)), [0.5, 0], 0.6, domain=grid)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 3.0), st.floats(-np.pi, np.pi))
def test_circle_integral_rotation_invariant(r, angle):
    def f(p):
        return p[:, 0] ** 4 + 2 * p[:, 0] * p[:, 1] ** 3
    c, s = math.cos(angle), math.sin(angle)
    R = np.array([[c, -s], [s, c]])
    a = geo.sphere_integral(f, [0, 0], r)
    b = geo.sphere_integral(lambda p: f(p @ R.T), [0, 0], r)
    assert a == pytest.approx(b, rel=1e-10, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 2.0), st.floats(0.1, 0.9))
def test_ball_is_inner_ball_plus_annulus(r, frac):
    f = lambda p: np.cos(p[:, 0]) + p[:, 1] ** 2
    inner = frac * r
    full = geo.ball_integral(f, [0, 0], r)
    pts, w = geo.ball_rule([0, 0], r, r_inner=inner)
    ann = float(f(pts) @ w)
    assert full == pytest.approx(geo.ball_integral(f, [0, 0], inner) + ann, rel=1e-10)


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("tau", [0.01, 1.0, 7.5])
def test_heat_kernel_unit_mass(n, tau):
    m = geo.kernel_mass(n, tau)
    assert abs(m.value + m.tail_bound - 1.0) < 1e-10
    assert m.tail_bound < 1e-14


def test_heat_kernel_pointwise_against_formula():
    t, t0, x, x0 = -0.3, 0.2, np.array([0.4, -0.2]), np.array([0.1, 0.1])
    tau = t0 - t
    want = (4 * math.pi * tau) ** -1 * math.exp(-np.sum((x - x0) ** 2) / (4 * tau))
    assert geo.backward_heat_kernel(t, x, t0, x0) == pytest.approx(want, rel=1e-14)


def test_heat_kernel_plus_side_conventions():
    x = np.array([[1.5]])
    signed = geo.backward_heat_kernel(1.0, x, 0.0, [0.0], convention="signed_abs_exponent")
    literal = geo.backward_heat_kernel(1.0, x, 0.0, [0.0], convention="literal")
    assert signed[0] < 0 and literal[0] < 0
    assert abs(literal[0]) > abs(signed[0])  # the literal form grows in |x|


def test_heat_kernel_singular_time():
    with pytest.raises(SingularTimeError):
        geo.backward_heat_kernel(0.5, [0.0], 0.5, [0.0])


def test_heat_kernel_gradient_matches_differences():
    x = np.array([[0.3, -0.7]])
    g = geo.heat_kernel_gradient(-0.4, x, 0.0, [0.0, 0.0])
    h = 1e-6
    for a in range(2):
        e = np.zeros(2)
        e[a] = h
        fd = (geo.backward_heat_kernel(-0.4, x + e, 0.0, [0, 0])
              - geo.backward_heat_kernel(-0.4, x - e, 0.0, [0, 0])) / (2 * h)
        assert g[0, a] == pytest.approx(fd[0], rel=1e-7)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_heat_equation_residual(n):
    assert geo.kernel_heat_residual(n, 0.5) < 1e-4


@pytest.mark.parametrize("r", [0.05, 0.2, 0.5])
def test_layer_integrals_of_polynomials(r):
    T = 1.0
    # int over the minus layer of G dx dt = layer length 3 r^2
    one = geo.layer_gaussian_integral(lambda t, p: np.ones(len(p)), T, [0.0], r)
    assert float(one) == pytest.approx(3 * r * r, rel=1e-12)
    # int |x|^2 G dx = 2 n (T - t) for n = 1; over t: 2 * (16 r^4 - r^4) / 2 = 15 r^4
    m2 = geo.layer_gaussian_integral(lambda t, p: p[:, 0] ** 2, T, [0.0], r)
    assert float(m2) == pytest.approx(15 * r ** 4, rel=1e-10)


def test_layer_leaves_time_range():
    with pytest.raises(OutOfDomainError):
        geo.layer_nodes(0.25, [0.0], 0.3, "minus", t_range=(0.0, 0.25))


def test_cutoff_values():
    assert geo.cutoff_phi(np.array([[0.4]]), [0.0])[0] == 1.0
    assert geo.cutoff_phi(np.array([[0.625]]), [0.0])[0] == pytest.approx(0.5, abs=1e-15)
    assert geo.cutoff_phi(np.array([[0.8]]), [0.0])[0] == 0.0


def test_cutoff_gradient_matches_differences():
    x = np.array([[0.6, 0.1]])
    g = geo.cutoff_phi_gradient(x, [0.0, 0.0])
    h = 1e-6
    fd = (geo.cutoff_phi(x + [h, 0], [0, 0]) - geo.cutoff_phi(x - [h, 0], [0, 0])) / (2 * h)
    assert g[0, 0] == pytest.approx(fd[0], rel=1e-6)


@pytest.mark.parametrize("r, n, beta", [(0.25, 1, 0.0), (0.3, 1, 2.0), (0.5, 3, 1.5)])
def test_error_integral_against_mpmath(r, n, beta):
    k = n + 2 * beta + 1
    mpmath.mp.dps = 30
    want = mpmath.quad(lambda s: s ** (-k) * mpmath.exp(-1 / (16 * s * s)), [0, 0.05, r])
    assert geo.error_integral_E(r, n, beta) == pytest.approx(float(want), rel=1e-10)


def test_error_integral_pinned():
    assert geo.error_integral_E(0.25, 1, 0.0) == pytest.approx(0.5576111705613239, rel=1e-12)


def test_error_integral_strictly_increasing():
    rr = np.linspace(0.05, 0.5, 50)
    E = [geo.error_integral_E(r, 2, 1.0) for r in rr]
    assert np.all(np.diff(E) > 0)


def test_configure_and_restore(restore_settings):
    prev = geo.configure(sphere_points_2d=8)
    assert geo.settings().sphere_points_2d == 8
    geo.restore(prev)
    assert geo.settings().sphere_points_2d == prev.sphere_points_2d


def test_grid_contains_ball():
    g = geo.CartesianGrid.cube(2, 1.0, 21)
    assert g.contains_ball([0, 0], 1.0)
    assert not g.contains_ball([0.5, 0], 0.6)
    with pytest.raises(OutOfDomainError):
        g.require_ball([0.5, 0], 0.6)
