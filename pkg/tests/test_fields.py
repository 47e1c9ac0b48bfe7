import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from monotone import geometry as geo
from monotone.errors import OutOfDomainError
from monotone.fields import (AnalyticField, Field, RadialField, SpaceTimeField, noise_field,
                             noise_spacetime, read_csv_table, read_field, write_csv_table,
                             write_field)
from monotone.models import helmholtz


def test_linear_data_is_reproduced_exactly():
    g = geo.CartesianGrid.cube(2, 1.0, 21)
    X, Y = g.mesh()
    f = Field(g, 2 * X - 3 * Y + 1)
    pts = np.array([[0.123, -0.456], [0.9, 0.9], [-1.0, 1.0]])
    assert np.allclose(f.sample(pts)[0], 2 * pts[:, 0] - 3 * pts[:, 1] + 1, atol=1e-13)
    assert np.allclose(f.sample_gradient(pts)[0, :, 0], [2, -3], atol=1e-12)


def test_sampling_outside_raises():
    f = noise_field(geo.CartesianGrid.cube(1, 1.0, 11))
    with pytest.raises(OutOfDomainError):
        f.sample([[1.5]])


def test_gradient_is_second_order():
    errs = []
    for count in (41, 81):
        g = geo.CartesianGrid((0.0,), (2.0,), (count,))
        f = Field(g, np.sin(g.mesh()[0]))
        errs.append(np.abs(f.nodal_gradient[0, 0] - np.cos(g.mesh()[0])).max())
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.15)


def test_shape_and_model_validation():
    g = geo.CartesianGrid.cube(1, 1.0, 5)
    with pytest.raises(ValueError):
        Field(g, np.zeros(6))
    with pytest.raises(ValueError):
        Field(g, np.zeros((2, 5)), model=helmholtz(0.0))
    with pytest.raises(ValueError):
        Field(g, np.full(5, np.nan))


def test_field_file_round_trip(tmp_path):
    g = geo.CartesianGrid((0.0, -1.0), (1.0, 1.0), (4, 5))
    f = noise_field(g, m=2, seed=5)
    write_field(tmp_path / "a.field", f)
    h = read_field(tmp_path / "a.field")
    assert np.array_equal(h.values, f.values) and h.grid == g
    assert h.provenance == "noise"


def test_spacetime_file_and_csv_round_trip(tmp_path):
    g = geo.CartesianGrid((0.0,), (1.0,), (6,))
    st_ = geo.SpaceTimeGrid.from_step(g, 0.0, 0.2, 0.05)
    f = noise_spacetime(st_, seed=2)
    write_field(tmp_path / "b.field", f)
    write_csv_table(tmp_path / "b.csv", f)
    a = read_field(tmp_path / "b.field")
    b = read_csv_table(tmp_path / "b.csv")
    assert np.array_equal(a.values, f.values) and np.array_equal(b.values, f.values)
    assert b.stgrid.slices == st_.slices


def test_csv_rows_in_any_order(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("x1,u1\n1.0,3.0\n0.0,1.0\n0.5,2.0\n")
    f = read_csv_table(p)
    assert f.values[0].tolist() == [1.0, 2.0, 3.0]


@pytest.mark.parametrize("text", ["x1,u1\n0,1\n0.5,2\n2,3\n", "x1,u1\n0,1\n0,1\n1,2\n",
                                  "x1,v1\n0,1\n1,2\n"])
def test_csv_validation_errors(tmp_path, text):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(ValueError):
        read_csv_table(p)


def test_field_header_validation(tmp_path):
    p = tmp_path / "bad.field"
    p.write_text('{"n": 1, "m": 1, "axes": [[0, 1]], "counts": [3]}\nx1,u1\n0,1\n0.5,2\n')
    with pytest.raises(ValueError):
        read_field(p)


def test_spacetime_linear_in_time():
    g = geo.CartesianGrid((0.0,), (1.0,), (11,))
    st_ = geo.SpaceTimeGrid.from_step(g, 0.0, 1.0, 0.5)
    vals = np.array([np.full(11, t) for t in st_.times])
    f = SpaceTimeField(st_, vals)
    assert f.sample(0.3, [[0.5]])[0, 0] == pytest.approx(0.3)
    assert f.sample_dt(0.3, [[0.5]])[0, 0] == pytest.approx(1.0)
    with pytest.raises(OutOfDomainError):
        f.sample(1.5, [[0.5]])


def test_radial_field():
    g = geo.RadialGrid(3, 2.0, 400)
    f = RadialField(g, g.nodes ** 2)
    x = np.array([[0.3, 0.4, 0.0]])
    assert f.sample(x)[0, 0] == pytest.approx(0.25, abs=1e-4)
    assert np.allclose(f.sample_gradient(x)[0, :, 0], [0.6, 0.8, 0.0], atol=1e-3)


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.9, 0.9), st.floats(-0.9, 0.9), st.floats(0.1, 5.0))
def test_scaled_field_is_linear(x, y, lam):
    g = geo.CartesianGrid.cube(2, 1.0, 17)
    f = noise_field(g, seed=9)
    s = f.scaled(lam)
    p = np.array([[x, y]])
    assert s.sample(p)[0, 0] == pytest.approx(lam * f.sample(p)[0, 0], rel=1e-12, abs=1e-14)


def test_analytic_on_grid():
    a = AnalyticField(1, 1, lambda P: np.sin(P[:, 0])[None],
                      lambda P: np.cos(P[:, 0])[None, None])
    f = a.on_grid(geo.CartesianGrid((0.0,), (1.0,), (11,)))
    assert f.values[0, -1] == pytest.approx(np.sin(1.0))
