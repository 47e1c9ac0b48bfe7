import numpy as np
import pytest

from monotone import geometry as geo, models as M, solvers as S
from monotone.errors import ConvergenceError, SingularOriginError


@pytest.mark.parametrize("name, model", [
    ("linear_sin", M.coupled_linear(0.0)),
    ("helmholtz_sin", M.helmholtz(0.0)),
    ("gl_kink", M.ginzburg_landau(1.0)),
])
def test_catalog_fields_solve_the_discrete_equation(name, model, grid1):
    f = S.exact_solution(name, grid1)
    res = np.abs(S.elliptic_residual(f, model)).max()
    # truncation error of the 3-point Laplacian: h^2 |u''''| / 12
    assert res < grid1.h ** 2


def test_catalog_rejects_wrong_grid(grid1):
    with pytest.raises(ValueError):
        S.exact_solution("caloric_linear", grid1)
    with pytest.raises(KeyError):
        S.exact_solution("unknown", grid1)


def test_solve_elliptic_recovers_kink():
    g = geo.CartesianGrid((-4.0,), (4.0,), (801,))
    model = M.ginzburg_landau(1.0)
    exact = S.exact_analytic("gl_kink", 1)
    sol = S.solve_elliptic(model, g, exact.sample)
    err = np.abs(sol.values[0] - exact.sample(g.points())[0]).max()
    assert err < 1e-4
    assert sol.provenance == "solved"


def test_solve_elliptic_second_order():
    errs = []
    for count in (101, 201):
        g = geo.CartesianGrid((-1.0,), (2.0,), (count,))
        exact = S.exact_analytic("linear_sin", 1)
        sol = S.solve_elliptic(M.coupled_linear(0.0), g, exact.sample)
        errs.append(np.abs(sol.values - exact.sample(g.points()).reshape(sol.values.shape)).max())
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)


def test_solve_elliptic_2d_harmonic():
    g = geo.CartesianGrid.cube(2, 1.0, 21)
    sol = S.solve_elliptic(M.zero(1), g, lambda P: (P[:, 0] * P[:, 1])[None])
    X, Y = g.mesh()
    assert np.abs(sol.values[0] - X * Y).max() < 1e-9


def test_solve_elliptic_reports_stall():
    g = geo.CartesianGrid((-1.0,), (1.0,), (41,))
    cfg = S.SolverConfig(max_iter=1, tol=1e-30, gs_sweeps=2)
    with pytest.raises(ConvergenceError) as exc:
        S.solve_elliptic(M.ginzburg_landau(1.0), g, S.exact_analytic("gl_kink", 1).sample, cfg)
    assert exc.value.history


def test_crank_nicolson_second_order_in_time():
    g = geo.CartesianGrid((0.0,), (1.0,), (5,))
    errs = []
    for dt in (0.02, 0.01):
        st = geo.SpaceTimeGrid.from_step(g, 0.0, 0.4, dt)
        exact = S.exact_analytic("exp_growth", 1)
        init = S.exact_solution("exp_growth", st).slice(0)
        sol = S.solve_parabolic(M.helmholtz(0.0), st, init, boundary=exact.sample)
        errs.append(abs(sol.values[-1, 0, 2] - np.exp(0.4)))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


def test_heat_equation_decay():
    g = geo.CartesianGrid((0.0,), (np.pi,), (201,))
    st = geo.SpaceTimeGrid.from_step(g, 0.0, 0.5, 1e-3)
    init = np.sin(g.mesh()[0])
    from monotone.fields import Field
    sol = S.solve_parabolic(M.zero(1), st, Field(g, init))
    want = np.exp(-0.5) * init
    assert np.abs(sol.values[-1, 0] - want).max() < 2e-5


def test_manufactured_homogeneity():
    g = geo.CartesianGrid.cube(2, 1.0, 41)
    f = S.manufactured_homogeneous(1.5, lambda d: 1 + d[:, 0], g)
    a = f.sample([[0.5, 0.0]])[0, 0]
    assert a == pytest.approx(0.5 ** 1.5 * 2, rel=1e-12)
    with pytest.raises(SingularOriginError):
        S.manufactured_homogeneous(-0.5, lambda d: np.ones(len(d)), g)
    S.manufactured_homogeneous(-0.5, lambda d: np.ones(len(d)), g, exclusion_radius=0.1)


def test_discrete_obstacle_profile_is_stationary():
    g = geo.CartesianGrid((-2.0,), (2.0,), (201,))
    st = geo.SpaceTimeGrid.from_step(g, 0.0, 0.2, 1e-2)
    init = S.discrete_obstacle_profile(g)
    fld, chi = S.simulate_free_boundary(st, init, thresholds=S.obstacle_thresholds(g))
    assert np.abs(fld.values[-1] - fld.values[0]).max() < 1e-12
    assert chi.contains([-0.5], 0.2)
    assert not chi.contains([0.5], 0.2)


def test_coincidence_set_of_stationary_profile():
    g = geo.CartesianGrid((-1.0,), (1.0,), (101,))
    f = S.discrete_obstacle_profile(g)
    chi = S.coincidence_set(f, *S.obstacle_thresholds(g))
    x = g.mesh()[0]
    assert np.all(chi.indicator[x < -1e-12])
    assert not np.any(chi.indicator[x > g.h * 0.5])
