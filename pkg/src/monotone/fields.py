"""Discrete and analytic fields plus the Field text file format.

A field is anything exposing ``sample(points)`` -> (m, P) values and
``sample_gradient(points)`` -> (m, n, P); space-time fields take the time
as first argument and add ``sample_dt``. Grid-backed fields interpolate
linearly per axis and difference with second-order central stencils
(one-sided second order at the box faces).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import ndimage

from .errors import OutOfDomainError
from .geometry import CartesianGrid, RadialGrid, SpaceTimeGrid

PROVENANCES = ("exact", "solved", "manufactured", "noise", "rescaled", "file")


def _grad_nodes(values: np.ndarray, grid: CartesianGrid) -> np.ndarray:
    """Central-difference gradient of (m, *counts) node data -> (m, n, *counts)."""
    sp = grid.spacing
    out = np.empty((values.shape[0], grid.n) + values.shape[1:])
    for i in range(values.shape[0]):
        g = np.gradient(values[i], *sp, edge_order=2)
        if grid.n == 1:
            g = [g]
        for a in range(grid.n):
            out[i, a] = g[a]
    return out


def _interp(arr: np.ndarray, coords: np.ndarray) -> np.ndarray:
    return ndimage.map_coordinates(arr, coords, order=1, mode="nearest", prefilter=False)


class Field:
    """Vector field u = (u_1..u_m) on the nodes of a CartesianGrid.

    Args:
        grid: the node grid.
        values: array (m, *grid.counts); a bare (*counts) array means m = 1.
        provenance: one of exact | solved | manufactured | noise | rescaled | file.
        model: the NonlinearityModel the field is meant to solve, if any.
        gradient: optional precomputed nodal gradient (m, n, *counts), used
            instead of finite differences (rescaled fields carry the
            source's gradient this way).
    """

    def __init__(self, grid: CartesianGrid, values, provenance: str = "exact", model=None,
                 metadata: dict | None = None, gradient=None):
        v = np.asarray(values, float)
        if v.shape == tuple(grid.counts):
            v = v[None]
        if v.shape[1:] != tuple(grid.counts):
            raise ValueError(f"values shape {v.shape} does not match grid {grid.counts}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        if model is not None and model.m != v.shape[0]:
            raise ValueError(f"field has {v.shape[0]} components, model expects {model.m}")
        if provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {provenance!r}")
        self.grid = grid
        self.values = v
        self.provenance = provenance
        self.model = model
        self.metadata = dict(metadata or {})
        self._gradient = None if gradient is None else np.asarray(gradient, float)

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def h(self) -> float:
        return self.grid.h

    @property
    def nodal_gradient(self) -> np.ndarray:
        if self._gradient is None:
            self._gradient = _grad_nodes(self.values, self.grid)
        return self._gradient

    def _coords(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, float))
        if pts.shape[1] != self.n:
            raise ValueError(f"points must have {self.n} columns")
        lo, hi = np.array(self.grid.lo), np.array(self.grid.hi)
        slack = 1e-9 * np.maximum(1.0, np.abs(hi - lo))
        if np.any(pts < lo - slack) or np.any(pts > hi + slack):
            far = np.max(np.maximum(lo - pts, pts - hi))
            raise OutOfDomainError(f"sample points leave the grid box by {far!r}")
        return self.grid.index_coordinates(pts)

    def sample(self, points) -> np.ndarray:
        c = self._coords(points)
        return np.array([_interp(self.values[i], c) for i in range(self.m)])

    def sample_gradient(self, points) -> np.ndarray:
        c = self._coords(points)
        G = self.nodal_gradient
        return np.array([[_interp(G[i, a], c) for a in range(self.n)] for i in range(self.m)])

    def laplacian(self) -> np.ndarray:
        """Standard (2n+1)-point Laplacian at interior nodes, zero on the faces."""
        out = np.zeros_like(self.values)
        sp = self.grid.spacing
        inner = (slice(None),) + (slice(1, -1),) * self.n
        for a in range(self.n):
            sl_p = [slice(None)] + [slice(1, -1)] * self.n
            sl_m = list(sl_p)
            sl_p[a + 1] = slice(2, None)
            sl_m[a + 1] = slice(None, -2)
            out[inner] += (self.values[tuple(sl_p)] - 2 * self.values[inner]
                           + self.values[tuple(sl_m)]) / sp[a] ** 2
        return out

    def scaled(self, lam: float) -> "Field":
        g = None if self._gradient is None else lam * self._gradient
        return Field(self.grid, lam * self.values, self.provenance, self.model,
                     self.metadata, g)

    def __repr__(self):
        return f"Field(n={self.n}, m={self.m}, counts={self.grid.counts}, {self.provenance})"


class RadialField:
    """Radially symmetric field stored on a cell-centred RadialGrid."""

    def __init__(self, grid: RadialGrid, values, provenance: str = "exact", model=None,
                 metadata: dict | None = None):
        v = np.asarray(values, float)
        if v.ndim == 1:
            v = v[None]
        if v.shape[1] != grid.count:
            raise ValueError("values do not match the radial grid")
        self.grid = grid
        self.values = v
        self.provenance = provenance
        self.model = model
        self.metadata = dict(metadata or {})
        self._dr = np.array([np.gradient(c, grid.dr, edge_order=2) for c in v])

    n = property(lambda self: self.grid.n)
    m = property(lambda self: self.values.shape[0])
    h = property(lambda self: self.grid.h)

    def _radii(self, points):
        pts = np.atleast_2d(np.asarray(points, float))
        d = pts - np.array(self.grid.center)
        rho = np.linalg.norm(d, axis=1)
        if np.any(rho > self.grid.nodes[-1] * (1 + 1e-12)):
            raise OutOfDomainError("sample points leave the radial grid")
        return d, rho

    def sample(self, points):
        _, rho = self._radii(points)
        nodes = self.grid.nodes
        return np.array([np.interp(rho, nodes, c) for c in self.values])

    def sample_gradient(self, points):
        d, rho = self._radii(points)
        nodes = self.grid.nodes
        safe = np.where(rho > 0, rho, 1.0)
        unit = d / safe[:, None]
        return np.array([(np.interp(rho, nodes, g) * unit.T) for g in self._dr])


class AnalyticField:
    """Field given by closed-form callables; ``h`` is 0 (no discretization).

    Args:
        u: callable points (P, n) -> (m, P).
        grad: callable points (P, n) -> (m, n, P).
        grid: optional box restricting where the field may be sampled.
    """

    provenance = "exact"

    def __init__(self, n: int, m: int, u: Callable, grad: Callable, grid=None, model=None,
                 metadata: dict | None = None):
        self.n, self.m = int(n), int(m)
        self._u, self._grad = u, grad
        self.grid = grid
        self.model = model
        self.metadata = dict(metadata or {})
        self.h = 0.0

    def sample(self, points):
        pts = np.atleast_2d(np.asarray(points, float))
        return np.asarray(self._u(pts), float).reshape(self.m, -1)

    def sample_gradient(self, points):
        pts = np.atleast_2d(np.asarray(points, float))
        return np.asarray(self._grad(pts), float).reshape(self.m, self.n, -1)

    def on_grid(self, grid: CartesianGrid, provenance: str = "exact") -> Field:
        """Sample onto grid nodes (gradient from finite differences afterwards)."""
        vals = self.sample(grid.points()).reshape((self.m,) + grid.counts)
        return Field(grid, vals, provenance, self.model, self.metadata)


# --------------------------------------------------------------------------
# space-time


class SpaceTimeField:
    """Sequence of slices u(t_k, .) on a SpaceTimeGrid, linear in t between slices."""

    def __init__(self, stgrid: SpaceTimeGrid, values, provenance: str = "exact", model=None,
                 metadata: dict | None = None):
        v = np.asarray(values, float)
        sc = tuple(stgrid.space.counts)
        if v.shape == (stgrid.slices,) + sc:
            v = v[:, None]
        if v.shape[0] != stgrid.slices or v.shape[2:] != sc:
            raise ValueError(f"values shape {v.shape} does not match grid")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        if model is not None and model.m != v.shape[1]:
            raise ValueError(f"field has {v.shape[1]} components, model expects {model.m}")
        self.stgrid = stgrid
        self.grid = stgrid.space
        self.values = v
        self.provenance = provenance
        self.model = model
        self.metadata = dict(metadata or {})
        self._grad_cache: dict = {}
        self._dt = None

    n = property(lambda self: self.grid.n)
    m = property(lambda self: self.values.shape[1])
    h = property(lambda self: self.grid.h)
    dt = property(lambda self: self.stgrid.dt)
    times = property(lambda self: self.stgrid.times)
    time_range = property(lambda self: (self.stgrid.t1, self.stgrid.t2))

    def slice(self, k: int) -> Field:
        return Field(self.grid, self.values[k], self.provenance, self.model, self.metadata,
                     self._slice_grad(k))

    def _slice_grad(self, k: int) -> np.ndarray:
        g = self._grad_cache.get(k)
        if g is None:
            g = _grad_nodes(self.values[k], self.grid)
            if len(self._grad_cache) > 4096:
                self._grad_cache.clear()
            self._grad_cache[k] = g
        return g

    @property
    def nodal_dt(self) -> np.ndarray:
        if self._dt is None:
            self._dt = np.gradient(self.values, self.stgrid.dt, axis=0, edge_order=2)
        return self._dt

    def _bracket(self, t: float):
        t1, t2 = self.time_range
        span = max(1.0, abs(t1), abs(t2))
        if t < t1 - 1e-12 * span or t > t2 + 1e-12 * span:
            raise OutOfDomainError(f"time {t!r} outside ({t1!r}, {t2!r})")
        s = (t - t1) / self.stgrid.dt
        k = int(np.clip(np.floor(s), 0, self.stgrid.slices - 2))
        w = float(np.clip(s - k, 0.0, 1.0))
        if w < 1e-9:
            w = 0.0
        elif w > 1 - 1e-9:
            w = 1.0
        return k, w

    def _coords(self, points):
        return Field._coords(self, points)

    def _blend(self, t, points, getter):
        k, w = self._bracket(t)
        c = self._coords(points)
        a = getter(k, c)
        if w == 0.0:
            return a
        b = getter(k + 1, c)
        if w == 1.0:
            return b
        return (1 - w) * a + w * b

    def sample(self, t: float, points) -> np.ndarray:
        return self._blend(t, points, lambda k, c: np.array(
            [_interp(self.values[k, i], c) for i in range(self.m)]))

    def sample_gradient(self, t: float, points) -> np.ndarray:
        def get(k, c):
            G = self._slice_grad(k)
            return np.array([[_interp(G[i, a], c) for a in range(self.n)]
                             for i in range(self.m)])
        return self._blend(t, points, get)

    def sample_dt(self, t: float, points) -> np.ndarray:
        D = self.nodal_dt
        return self._blend(t, points, lambda k, c: np.array(
            [_interp(D[k, i], c) for i in range(self.m)]))

    def __repr__(self):
        return (f"SpaceTimeField(n={self.n}, m={self.m}, counts={self.grid.counts}, "
                f"slices={self.stgrid.slices}, {self.provenance})")


class AnalyticSpaceTimeField:
    """Space-time field from callables u(t, P), grad(t, P), dt(t, P); h = dt = 0."""

    provenance = "exact"

    def __init__(self, n: int, m: int, u, grad, dt, time_range=None, grid=None, model=None,
                 metadata: dict | None = None):
        self.n, self.m = int(n), int(m)
        self._u, self._grad, self._dtf = u, grad, dt
        self.time_range = time_range
        self.grid = grid
        self.model = model
        self.metadata = dict(metadata or {})
        self.h = 0.0
        self.dt = 0.0
        self.times = None

    def sample(self, t, points):
        pts = np.atleast_2d(np.asarray(points, float))
        return np.asarray(self._u(t, pts), float).reshape(self.m, -1)

    def sample_gradient(self, t, points):
        pts = np.atleast_2d(np.asarray(points, float))
        return np.asarray(self._grad(t, pts), float).reshape(self.m, self.n, -1)

    def sample_dt(self, t, points):
        pts = np.atleast_2d(np.asarray(points, float))
        return np.asarray(self._dtf(t, pts), float).reshape(self.m, -1)

    def on_grid(self, stgrid: SpaceTimeGrid, provenance: str = "exact") -> SpaceTimeField:
        pts = stgrid.space.points()
        vals = np.array([self.sample(t, pts).reshape((self.m,) + stgrid.space.counts)
                         for t in stgrid.times])
        return SpaceTimeField(stgrid, vals, provenance, self.model, self.metadata)


# --------------------------------------------------------------------------
# file format


def _header(fld, times=None) -> dict:
    g = fld.grid
    head = {"n": g.n, "m": fld.m,
            "axes": [[lo, hi] for lo, hi in zip(g.lo, g.hi)],
            "counts": list(g.counts), "provenance": fld.provenance,
            "model": fld.model.to_dict() if fld.model is not None else None}
    if times is not None:
        head["times"] = [times[0], times[-1], len(times)]
    return head


def write_field(path, fld) -> None:
    """Write a Field or SpaceTimeField: JSON header line, column row, then rows.

    Floats use the shortest round-trip representation, so reading back
    reproduces the values exactly.
    """
    pts = fld.grid.points()
    n, m = fld.n, fld.m
    cols = [f"x{i + 1}" for i in range(n)] + [f"u{i + 1}" for i in range(m)]
    st = isinstance(fld, SpaceTimeField)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(_header(fld, list(fld.times) if st else None)) + "\n")
        fh.write(",".join((["t"] if st else []) + cols) + "\n")
        blocks = [(t, fld.values[k]) for k, t in enumerate(fld.times)] if st \
            else [(None, fld.values)]
        for t, vals in blocks:
            flat = vals.reshape(m, -1)
            pre = [repr(float(t))] if st else []
            for j in range(pts.shape[0]):
                row = pre + [repr(float(x)) for x in pts[j]] + \
                    [repr(float(x)) for x in flat[:, j]]
                fh.write(",".join(row) + "\n")


def read_field(path, model=None):
    """Read a file written by :func:`write_field`, validating its structure."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        try:
            head = json.loads(first)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: line 1 is not a JSON header ({exc.msg})") from None
        for key in ("n", "m", "axes", "counts"):
            if key not in head:
                raise ValueError(f"{path}: header lacks {key!r}")
        cols = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    n, m = int(head["n"]), int(head["m"])
    st = "times" in head and head["times"] is not None
    want = (["t"] if st else []) + [f"x{i + 1}" for i in range(n)] + \
        [f"u{i + 1}" for i in range(m)]
    if cols != want:
        raise ValueError(f"{path}: line 2 columns {cols} expected {want}")
    lo = [a[0] for a in head["axes"]]
    hi = [a[1] for a in head["axes"]]
    grid = CartesianGrid(tuple(lo), tuple(hi), tuple(head["counts"]))
    N = int(np.prod(grid.counts))
    pts = grid.points()
    prov = head.get("provenance") or "file"
    if prov not in PROVENANCES:
        prov = "file"
    if st:
        t1, t2, K = head["times"]
        stg = SpaceTimeGrid(grid, float(t1), float(t2), int(K))
        if data.shape != (K * N, 1 + n + m):
            raise ValueError(f"{path}: expected {K * N} rows of {1 + n + m} columns")
        xs = data[:, 1:1 + n].reshape(K, N, n)
        if not np.allclose(xs, pts[None], rtol=0, atol=1e-9 * max(1.0, np.abs(pts).max())):
            raise ValueError(f"{path}: node coordinates do not match the header grid")
        vals = data[:, 1 + n:].reshape(K, N, m).transpose(0, 2, 1)
        return SpaceTimeField(stg, vals.reshape((K, m) + grid.counts), prov, model)
    if data.shape != (N, n + m):
        raise ValueError(f"{path}: expected {N} rows of {n + m} columns")
    if not np.allclose(data[:, :n], pts, rtol=0, atol=1e-9 * max(1.0, np.abs(pts).max())):
        raise ValueError(f"{path}: node coordinates do not match the header grid")
    vals = data[:, n:].T.reshape((m,) + grid.counts)
    return Field(grid, vals, prov, model)


def write_csv_table(path, fld) -> None:
    """Plain CSV (column row then node rows) without the JSON header line."""
    with open(path, "w", encoding="utf-8") as fh:
        lines = _rows(fld)
        for line in lines:
            fh.write(line + "\n")


def _rows(fld):
    pts = fld.grid.points()
    n, m = fld.n, fld.m
    st = isinstance(fld, SpaceTimeField)
    yield ",".join((["t"] if st else []) + [f"x{i + 1}" for i in range(n)]
                   + [f"u{i + 1}" for i in range(m)])
    blocks = [(t, fld.values[k]) for k, t in enumerate(fld.times)] if st \
        else [(None, fld.values)]
    for t, vals in blocks:
        flat = vals.reshape(m, -1)
        pre = [repr(float(t))] if st else []
        for j in range(pts.shape[0]):
            yield ",".join(pre + [repr(float(x)) for x in pts[j]]
                           + [repr(float(x)) for x in flat[:, j]])


def _axis_from(values, name, path):
    ax = np.unique(values)
    if len(ax) < 2:
        raise ValueError(f"{path}: column {name} needs at least two distinct values")
    d = np.diff(ax)
    if not np.allclose(d, d[0], rtol=1e-9, atol=0):
        raise ValueError(f"{path}: column {name} is not uniformly spaced")
    return ax


def read_csv_table(path, model=None, provenance: str = "file"):
    """Read a plain CSV with columns [t,] x1..xn, u1..um on a full tensor grid.

    Rows may come in any order; they are sorted onto the grid. Missing or
    duplicated nodes are errors.
    """
    with open(path, encoding="utf-8") as fh:
        cols = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    st = bool(cols) and cols[0] == "t"
    xs = [c for c in cols if c.startswith("x")]
    us = [c for c in cols if c.startswith("u")]
    n, m = len(xs), len(us)
    want = (["t"] if st else []) + [f"x{i + 1}" for i in range(n)] + \
        [f"u{i + 1}" for i in range(m)]
    if cols != want or n == 0 or m == 0:
        raise ValueError(f"{path}: columns {cols} are not [t,] x1..xn, u1..um")
    if data.shape[1] != len(cols):
        raise ValueError(f"{path}: rows have {data.shape[1]} values, header has {len(cols)}")
    off = 1 if st else 0
    axes = [_axis_from(data[:, off + a], f"x{a + 1}", path) for a in range(n)]
    grid = CartesianGrid(tuple(float(a[0]) for a in axes), tuple(float(a[-1]) for a in axes),
                         tuple(len(a) for a in axes))
    times = _axis_from(data[:, 0], "t", path) if st else None
    K = len(times) if st else 1
    N = int(np.prod(grid.counts))
    if data.shape[0] != K * N:
        raise ValueError(f"{path}: {data.shape[0]} rows, a full grid needs {K * N}")
    idx = np.zeros(data.shape[0], dtype=np.int64)
    stride = 1
    for a in reversed(range(n)):
        sp = axes[a][1] - axes[a][0]
        k = np.rint((data[:, off + a] - axes[a][0]) / sp).astype(np.int64)
        idx += k * stride
        stride *= len(axes[a])
    if st:
        dt = times[1] - times[0]
        idx += np.rint((data[:, 0] - times[0]) / dt).astype(np.int64) * N
    if len(np.unique(idx)) != len(idx):
        raise ValueError(f"{path}: duplicated grid nodes")
    vals = np.empty((K * N, m))
    vals[idx] = data[:, off + n:]
    if st:
        stg = SpaceTimeGrid(grid, float(times[0]), float(times[-1]), K)
        v = vals.reshape(K, N, m).transpose(0, 2, 1).reshape((K, m) + grid.counts)
        return SpaceTimeField(stg, v, provenance, model)
    return Field(grid, vals.T.reshape((m,) + grid.counts), provenance, model)


def is_field_file(path) -> bool:
    """True when the first line is the JSON header of the Field format."""
    with open(path, encoding="utf-8") as fh:
        return fh.readline().lstrip().startswith("{")


def noise_field(grid: CartesianGrid, m: int = 1, seed: int = 0, amplitude: float = 1.0) -> Field:
    """Uniform random node values: the negative control for identity checks."""
    rng = np.random.default_rng(seed)
    return Field(grid, amplitude * rng.uniform(-1, 1, (m,) + grid.counts), "noise")


def noise_spacetime(stgrid: SpaceTimeGrid, m: int = 1, seed: int = 0,
                    amplitude: float = 1.0) -> SpaceTimeField:
    rng = np.random.default_rng(seed)
    vals = amplitude * rng.uniform(-1, 1, (stgrid.slices, m) + stgrid.space.counts)
    return SpaceTimeField(stgrid, vals, "noise")


__all__ = ["Field", "RadialField", "AnalyticField", "SpaceTimeField",
           "AnalyticSpaceTimeField", "write_field", "read_field", "noise_field",
           "write_csv_table", "read_csv_table", "is_field_file",
           "noise_spacetime"]
