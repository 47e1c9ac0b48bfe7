"""Field producers: exact and manufactured solutions, elliptic and parabolic solvers,
and the coincidence set of the free-boundary problem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from . import models as M
from .errors import ConvergenceError, SingularOriginError
from .fields import AnalyticField, AnalyticSpaceTimeField, Field, SpaceTimeField
from .geometry import CartesianGrid, SpaceTimeGrid


# --------------------------------------------------------------------------
# manufactured and exact fields


def manufactured_homogeneous(beta: float, profile: Callable, grid: CartesianGrid, x0=None,
                             exclusion_radius: float | None = None, model=None) -> Field:
    """u(x) = |x - x0|^beta g((x - x0)/|x - x0|) sampled on the grid nodes.

    Args:
        profile: callable on unit directions (P, n) returning (P,) or (m, P).
        exclusion_radius: for beta < 0, nodes closer than this to x0 take the
            value at that radius along the same direction.

    Raises:
        SingularOriginError: beta < 0, x0 inside the grid box, no exclusion radius.
    """
    x0 = np.zeros(grid.n) if x0 is None else np.atleast_1d(np.asarray(x0, float))
    pts = grid.points()
    d = pts - x0
    rho = np.linalg.norm(d, axis=1)
    inside = np.all((x0 >= np.array(grid.lo)) & (x0 <= np.array(grid.hi)))
    if beta < 0 and inside and not exclusion_radius:
        raise SingularOriginError(
            f"degree {beta!r} < 0 is singular at x0={x0.tolist()} inside the grid; "
            "pass exclusion_radius")
    e1 = np.zeros(grid.n)
    e1[0] = 1.0
    dirs = np.where(rho[:, None] > 0, d / np.where(rho > 0, rho, 1.0)[:, None], e1)
    g = np.asarray(profile(dirs), float)
    if g.ndim == 1:
        g = g[None]
    rr = rho if not exclusion_radius else np.maximum(rho, exclusion_radius)
    with np.errstate(divide="ignore", invalid="ignore"):
        radial = np.where(rr > 0, rr ** beta, 1.0 if beta == 0 else 0.0)
    vals = g * radial
    meta = {"beta": float(beta), "x0": x0.tolist()}
    return Field(grid, vals.reshape((g.shape[0],) + grid.counts), "manufactured", model, meta)


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    parabolic: bool
    m: int
    model: Callable
    u: Callable
    grad: Callable
    dt: Callable | None = None
    doc: str = ""


def _e1(n):
    def inner(P):
        return P[:, 0]
    return inner


def _catalog_entry(name: str, n: int, params: dict) -> CatalogEntry:
    p = dict(params or {})
    if name == "linear_sin":
        c = float(p.get("c", 0.0))

        def u(P):
            s = np.sin(P[:, 0])
            return np.stack([s, s])

        def g(P):
            out = np.zeros((2, n, len(P)))
            out[:, 0] = np.cos(P[:, 0])
            return out
        return CatalogEntry(name, False, 2, lambda: M.coupled_linear(c), u, g,
                            doc="u = v = sin(x1) solving Lu + v = 0, Lv + u = 0")
    if name == "helmholtz_sin":
        c = float(p.get("c", 0.0))

        def g(P):
            out = np.zeros((1, n, len(P)))
            out[0, 0] = np.cos(P[:, 0])
            return out
        return CatalogEntry(name, False, 1, lambda: M.helmholtz(c),
                            lambda P: np.sin(P[:, 0])[None], g)
    if name == "gl_kink":
        eps = float(p.get("epsilon", 1.0))
        k = 1.0 / (math.sqrt(2.0) * eps)

        def g(P):
            out = np.zeros((1, n, len(P)))
            out[0, 0] = k / np.cosh(k * P[:, 0]) ** 2
            return out
        return CatalogEntry(name, False, 1, lambda: M.ginzburg_landau(eps),
                            lambda P: np.tanh(k * P[:, 0])[None], g)
    if name == "caloric_linear":
        def g(t, P):
            out = np.zeros((1, n, len(P)))
            out[0, 0] = 1.0
            return out
        return CatalogEntry(name, True, 1, lambda: M.zero(1), lambda t, P: P[:, 0][None], g,
                            lambda t, P: np.zeros((1, len(P))))
    if name == "exp_growth":
        a = float(p.get("amplitude", 1.0))
        c = float(p.get("c", 0.0))
        return CatalogEntry(name, True, 1, lambda: M.helmholtz(c),
                            lambda t, P: np.full((1, len(P)), a * math.exp(t)),
                            lambda t, P: np.zeros((1, n, len(P))),
                            lambda t, P: np.full((1, len(P)), a * math.exp(t)),
                            doc="u = a e^t solving u_t - Lu = u (c shifts F only)")
    if name == "caloric_quadratic":
        x0 = np.atleast_1d(np.asarray(p.get("x0", np.zeros(n)), float))
        T = float(p.get("T", 0.0))

        def u(t, P):
            return (np.sum((P - x0) ** 2, axis=1) + 2 * n * (t - T))[None]

        def g(t, P):
            return (2.0 * (P - x0).T)[None]
        return CatalogEntry(name, True, 1, lambda: M.zero(1), u, g,
                            lambda t, P: np.full((1, len(P)), 2.0 * n),
                            doc="|x-x0|^2 + 2n(t-T): caloric, parabolically 2-homogeneous")
    if name == "obstacle_stationary":
        a = float(p.get("a", 0.0))

        def u(t, P):
            return (0.5 * np.maximum(P[:, 0] - a, 0.0) ** 2)[None]

        def g(t, P):
            out = np.zeros((1, n, len(P)))
            out[0, 0] = np.maximum(P[:, 0] - a, 0.0)
            return out
        return CatalogEntry(name, True, 1, obstacle_model, u, g,
                            lambda t, P: np.zeros((1, len(P))),
                            doc="(x1-a)_+^2/2: stationary solution of u_t - Lu = chi f, f = -1")
    raise KeyError(f"unknown exact solution {name!r}; known: {sorted(CATALOG)}")


CATALOG = ("linear_sin", "helmholtz_sin", "gl_kink", "caloric_linear", "exp_growth",
           "caloric_quadratic", "obstacle_stationary")


def obstacle_model() -> M.NonlinearityModel:
    """F = -u, f = -1: the obstacle-type reaction of the free-boundary fixture."""
    return M.custom("-u", f=lambda u: -np.ones_like(u), m=1)


def exact_analytic(name: str, n: int, params: dict | None = None, grid=None):
    """Closed-form version of a catalog entry (AnalyticField or AnalyticSpaceTimeField)."""
    e = _catalog_entry(name, n, params or {})
    if e.parabolic:
        return AnalyticSpaceTimeField(n, e.m, e.u, e.grad, e.dt, grid=grid, model=e.model(),
                                      metadata={"name": name})
    return AnalyticField(n, e.m, e.u, e.grad, grid=grid, model=e.model(),
                         metadata={"name": name})


def exact_solution(name: str, grid, params: dict | None = None):
    """Catalog solution sampled on a CartesianGrid (elliptic) or SpaceTimeGrid (parabolic)."""
    st = isinstance(grid, SpaceTimeGrid)
    e = _catalog_entry(name, grid.n, params or {})
    if e.parabolic != st:
        kind = "SpaceTimeGrid" if e.parabolic else "CartesianGrid"
        raise ValueError(f"{name} needs a {kind}")
    a = exact_analytic(name, grid.n, params)
    out = a.on_grid(grid, "exact")
    out.metadata.update({"name": name, "params": dict(params or {})})
    return out


# --------------------------------------------------------------------------
# discrete operators


def _second_difference(count: int, h: float) -> sparse.csr_matrix:
    main = np.full(count, -2.0)
    off = np.ones(count - 1)
    D = sparse.diags([off, main, off], [-1, 0, 1], format="lil")
    D[0, :] = 0
    D[count - 1, :] = 0
    return (D / (h * h)).tocsr()


def laplacian_matrix(grid: CartesianGrid) -> sparse.csr_matrix:
    """(2n+1)-point Laplacian on all nodes in C order; rows are exact at interior nodes."""
    mats = [_second_difference(c, h) for c, h in zip(grid.counts, grid.spacing)]
    eye = [sparse.identity(c, format="csr") for c in grid.counts]
    L = None
    for a in range(grid.n):
        term = None
        for b in range(grid.n):
            f = mats[a] if a == b else eye[b]
            term = f if term is None else sparse.kron(term, f, format="csr")
        L = term if L is None else L + term
    return L.tocsr()


def interior_mask(grid: CartesianGrid) -> np.ndarray:
    mask = np.ones(grid.counts, bool)
    for a in range(grid.n):
        idx = [slice(None)] * grid.n
        idx[a] = 0
        mask[tuple(idx)] = False
        idx[a] = -1
        mask[tuple(idx)] = False
    return mask.ravel()


def elliptic_residual(fld: Field, model) -> np.ndarray:
    """Delta_h u + f(u) at every interior node, shape (m, N_interior)."""
    inner = interior_mask(fld.grid)
    lap = fld.laplacian().reshape(fld.m, -1)[:, inner]
    u = fld.values.reshape(fld.m, -1)[:, inner]
    return lap + model.f(u)


@dataclass
class SolverConfig:
    max_iter: int = 50
    tol: float = 1e-10
    damping: float = 1.0
    gs_sweeps: int = 20000
    theta: float = 0.5
    newton_max: int = 30


def _cfg(cfg) -> SolverConfig:
    if cfg is None:
        return SolverConfig()
    if isinstance(cfg, SolverConfig):
        return cfg
    return SolverConfig(**cfg)


def _jac_blocks(model, u, scale=1.0):
    """Sparse block matrix of the pointwise Jacobian df_i/du_j at u (m, N)."""
    J = model.jacobian(u)
    m = model.m
    return sparse.bmat([[sparse.diags(scale * J[i, j]) for j in range(m)] for i in range(m)],
                       format="csr")


def _boundary_values(grid, boundary, m, t=None):
    pts = grid.points()
    if isinstance(boundary, Field):
        return boundary.values.reshape(boundary.m, -1).copy()
    if callable(boundary):
        vals = np.asarray(boundary(pts) if t is None else boundary(t, pts), float)
        return vals.reshape(m, -1)
    vals = np.asarray(boundary, float)
    return np.broadcast_to(vals.reshape(-1, 1) if vals.ndim <= 1 else vals,
                           (m, pts.shape[0])).copy()


def solve_elliptic(model, grid: CartesianGrid, boundary_values, cfg=None,
                   initial=None) -> Field:
    """Solve Delta u_i + f_i(u) = 0 with Dirichlet data by damped Newton.

    Args:
        boundary_values: a Field (its face values are used), a callable
            points -> (m, P), or a constant.
        cfg: SolverConfig or dict (max_iter, tol, damping, gs_sweeps).
        initial: optional starting iterate (Field or array); defaults to the
            boundary data extended into the interior.

    Raises:
        ConvergenceError: residual above tol after max_iter Newton steps and
            the Gauss-Seidel fallback; carries the residual history.
        ModelDomainError: an iterate leaves the model's admissible range.
    """
    c = _cfg(cfg)
    m = model.m
    U = _boundary_values(grid, boundary_values, m)
    if initial is not None:
        init = initial.values if isinstance(initial, Field) else np.asarray(initial, float)
        init = init.reshape(m, -1)
        inner = interior_mask(grid)
        U[:, inner] = init[:, inner]
    model.check(U)
    inner = interior_mask(grid)
    L = laplacian_matrix(grid)
    Lii = L[inner][:, inner]
    N = int(inner.sum())
    Lbig = sparse.block_diag([Lii] * m, format="csr")

    def residual(Uf):
        return (np.vstack([L[inner] @ Uf[i] for i in range(m)])
                + model.f(Uf[:, inner]))

    history = []
    R = residual(U)
    rn = float(np.abs(R).max()) if R.size else 0.0
    history.append(rn)
    lam = c.damping
    it = 0
    newton_ok = True
    while rn > c.tol and it < c.max_iter:
        it += 1
        J = Lbig + _jac_blocks(model, U[:, inner])
        try:
            delta = spla.spsolve(J.tocsc(), -R.ravel()).reshape(m, N)
        except RuntimeError:
            newton_ok = False
            break
        if not np.all(np.isfinite(delta)):
            newton_ok = False
            break
        step = lam
        accepted = False
        for _ in range(30):
            trial = U.copy()
            trial[:, inner] += step * delta
            try:
                model.check(trial)
                Rt = residual(trial)
                rt = float(np.abs(Rt).max())
            except M.ModelDomainError:
                rt = math.inf
            if rt < rn or rt <= c.tol:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            newton_ok = False
            break
        U, R, rn = trial, Rt, rt
        history.append(rn)
    method = "newton"
    if rn > c.tol:
        method = "gauss_seidel"
        U, rn, gh = _red_black_gs(model, grid, U, c.tol, c.gs_sweeps)
        history.extend(gh)
    if rn > c.tol:
        raise ConvergenceError(
            f"elliptic solve stalled at residual {rn!r} > tol {c.tol!r} "
            f"(newton {'failed' if not newton_ok else 'hit max_iter'})", history)
    model.check(U)
    meta = {"residual": rn, "iterations": it, "method": method, "history": history}
    return Field(grid, U.reshape((m,) + grid.counts), "solved", model, meta)


def _red_black_gs(model, grid, U, tol, sweeps):
    """Nonlinear red-black Gauss-Seidel with pointwise Newton updates."""
    m = model.m
    shape = grid.counts
    idx = np.indices(shape).sum(axis=0).ravel() % 2
    inner = interior_mask(grid)
    L = laplacian_matrix(grid)
    diag_lap = -2.0 * float(np.sum(1.0 / grid.spacing ** 2))
    colors = [inner & (idx == 0), inner & (idx == 1)]
    hist = []
    rn = math.inf
    for s in range(sweeps):
        for col in colors:
            lapu = np.vstack([L[col] @ U[i] for i in range(m)])
            uc = U[:, col]
            r = lapu + model.f(uc)
            J = model.jacobian(uc)
            d = np.array([diag_lap + J[i, i] for i in range(m)])
            d = np.where(np.abs(d) > 1e-300, d, -1.0)
            U[:, col] = uc - r / d
        if s % 50 == 49 or s == sweeps - 1:
            R = np.vstack([L[inner] @ U[i] for i in range(m)]) + model.f(U[:, inner])
            rn = float(np.abs(R).max())
            hist.append(rn)
            if rn <= tol:
                break
    return U, rn, hist


def solve_parabolic(model, stgrid: SpaceTimeGrid, initial, boundary="fixed", cfg=None,
                    masked: bool = False, thresholds=None) -> SpaceTimeField:
    """theta-scheme for u_t - Delta u = f(u) with Newton inner solves.

    Args:
        initial: Field (or array) at t1.
        boundary: "fixed" keeps the initial face values; a callable
            (t, points) -> (m, P) supplies Dirichlet data per slice.
        cfg: SolverConfig or dict (theta in [1/2, 1], tol, newton_max).
        masked: multiply f by the indicator of the complement of the
            coincidence set computed from the previous slice.

    Raises:
        ConvergenceError: Newton fails within newton_max iterations at a step.
        ModelDomainError: a slice leaves the admissible range.
    """
    c = _cfg(cfg)
    if not 0.5 <= c.theta <= 1.0:
        raise ValueError(f"theta must lie in [1/2, 1], got {c.theta!r}")
    grid = stgrid.space
    m = model.m
    U0 = initial.values if isinstance(initial, Field) else np.asarray(initial, float)
    U = U0.reshape(m, -1).astype(float).copy()
    model.check(U)
    inner = interior_mask(grid)
    L = laplacian_matrix(grid)
    Lii = L[inner]
    N = int(inner.sum())
    eye = sparse.identity(m * N, format="csr")
    Lbig = sparse.block_diag([L[inner][:, inner]] * m, format="csr")
    dt, th = stgrid.dt, c.theta
    times = stgrid.times
    slices = [U.reshape((m,) + grid.counts).copy()]
    worst = 0.0
    newton_total = 0

    def lap(Uf):
        return np.vstack([Lii @ Uf[i] for i in range(m)])

    for k in range(1, len(times)):
        t_new = times[k]
        chi = np.ones(N)
        if masked:
            ind = _indicator(U.reshape((m,) + grid.counts), grid, thresholds)
            chi = (~ind.ravel()[inner]).astype(float)
        f_old = chi * model.f(U[:, inner])
        explicit = U[:, inner] + dt * (1 - th) * (lap(U) + f_old)
        V = U.copy()
        if callable(boundary):
            bv = _boundary_values(grid, boundary, m, t_new)
            V[:, ~inner] = bv[:, ~inner]
        rn = math.inf
        for it in range(c.newton_max):
            fv = chi * model.f(V[:, inner])
            G = V[:, inner] - dt * th * (lap(V) + fv) - explicit
            rn = float(np.abs(G).max())
            if rn <= c.tol:
                break
            J = eye - dt * th * (Lbig + _jac_blocks(model, V[:, inner], 1.0) @ sparse.diags(
                np.tile(chi, m)))
            delta = spla.spsolve(J.tocsc(), -G.ravel()).reshape(m, N)
            V[:, inner] += delta
            model.check(V)
            newton_total += 1
        else:
            fv = chi * model.f(V[:, inner])
            G = V[:, inner] - dt * th * (lap(V) + fv) - explicit
            rn = float(np.abs(G).max())
            if rn > c.tol:
                raise ConvergenceError(
                    f"Newton did not converge at t={t_new!r} (residual {rn!r})", [rn])
        worst = max(worst, rn)
        U = V
        slices.append(U.reshape((m,) + grid.counts).copy())
    meta = {"scheme_residual": worst, "theta": th, "newton_iterations": newton_total,
            "masked": masked}
    return SpaceTimeField(stgrid, np.array(slices), "solved", model, meta)


# --------------------------------------------------------------------------
# coincidence set


def default_thresholds(values: np.ndarray, grad: np.ndarray, h: float):
    tu = 10.0 * h * h * max(1.0, float(np.abs(values).max(initial=0.0)))
    tg = 10.0 * h * h * max(1.0, float(np.abs(grad).max(initial=0.0)))
    return tu, tg


def _indicator(vals: np.ndarray, grid: CartesianGrid, thresholds=None) -> np.ndarray:
    from .fields import _grad_nodes
    g = _grad_nodes(vals, grid)
    gmag = np.sqrt(np.sum(g ** 2, axis=1))
    tu, tg = thresholds if thresholds else default_thresholds(vals, gmag, grid.h)
    return (np.abs(vals).max(axis=0) <= tu) & (gmag.max(axis=0) <= tg)


@dataclass
class CoincidenceSet:
    """Node indicator of Lambda = {u = |grad u| = 0}, shape (K, *counts) or (*counts)."""

    indicator: np.ndarray
    theta_u: float
    theta_g: float
    grid: CartesianGrid
    stgrid: SpaceTimeGrid | None = None

    def _space_coords(self, points):
        pts = np.atleast_2d(np.asarray(points, float))
        return self.grid.index_coordinates(pts)

    def omega(self, t, points) -> np.ndarray:
        """Interpolated indicator of the complement Omega at (t, points), in [0, 1]."""
        from scipy import ndimage
        c = self._space_coords(points)
        ind = self.indicator.astype(float)
        if self.stgrid is None:
            lam = ndimage.map_coordinates(ind, c, order=1, mode="nearest")
        else:
            s = (t - self.stgrid.t1) / self.stgrid.dt
            k = int(np.clip(np.floor(s), 0, self.stgrid.slices - 2))
            w = float(np.clip(s - k, 0, 1))
            a = ndimage.map_coordinates(ind[k], c, order=1, mode="nearest")
            b = ndimage.map_coordinates(ind[k + 1], c, order=1, mode="nearest")
            lam = (1 - w) * a + w * b
        return 1.0 - lam

    def contains(self, x0, t=None) -> bool:
        """True when every node of the cell (space and time) around the point is in Lambda."""
        c = self._space_coords(np.atleast_1d(np.asarray(x0, float))[None])[:, 0]
        lo = np.floor(c).astype(int)
        hi = np.ceil(c).astype(int)
        if np.any(lo < 0) or np.any(hi > np.array(self.grid.counts) - 1):
            return False
        sl = tuple(slice(a, b + 1) for a, b in zip(lo, hi))
        if self.stgrid is None:
            return bool(np.all(self.indicator[sl]))
        s = (t - self.stgrid.t1) / self.stgrid.dt
        if s < -1e-9 or s > self.stgrid.slices - 1 + 1e-9:
            return False
        k0, k1 = int(np.floor(s + 1e-9)), int(np.ceil(s - 1e-9))
        k0, k1 = max(k0, 0), min(max(k1, k0), self.stgrid.slices - 1)
        return bool(np.all(self.indicator[(slice(k0, k1 + 1),) + sl]))


def coincidence_set(fld, theta_u: float | None = None, theta_g: float | None = None) -> CoincidenceSet:
    """Nodes where max_i |u_i| <= theta_u and max_i |grad_h u_i| <= theta_g.

    Defaults are 10 h^2 scaled by max(1, max |u|) and max(1, max |grad u|).
    """
    if theta_u is not None and not theta_u > 0 or theta_g is not None and not theta_g > 0:
        raise ValueError("thresholds must be positive")
    grid = fld.grid
    if isinstance(fld, SpaceTimeField):
        vals = fld.values
        grads = np.array([fld._slice_grad(k) for k in range(vals.shape[0])])
        gmag = np.sqrt(np.sum(grads ** 2, axis=2))
        tu, tg = default_thresholds(vals, gmag, grid.h)
        tu = theta_u or tu
        tg = theta_g or tg
        ind = (np.abs(vals).max(axis=1) <= tu) & (gmag.max(axis=1) <= tg)
        return CoincidenceSet(ind, tu, tg, grid, fld.stgrid)
    gmag = np.sqrt(np.sum(fld.nodal_gradient ** 2, axis=1))
    tu, tg = default_thresholds(fld.values, gmag, grid.h)
    tu = theta_u or tu
    tg = theta_g or tg
    ind = (np.abs(fld.values).max(axis=0) <= tu) & (gmag.max(axis=0) <= tg)
    return CoincidenceSet(ind, tu, tg, grid, None)


def discrete_obstacle_profile(grid: CartesianGrid, a: float = 0.0) -> Field:
    """Discrete stationary state of the masked obstacle evolution in x1.

    u = (x1 - a)(x1 - a - h)/2 for x1 >= a + h and 0 otherwise, with a on a
    node: the 3-point Laplacian equals 1 wherever u > 0 or the node is the
    first one past the contact node, and 0 on the rest, so the masked
    scheme keeps it fixed. It is an O(h^2) shift of (x1 - a)_+^2 / 2.
    """
    h = grid.spacing[0]
    x = grid.mesh()[0]
    s = x - a
    vals = np.where(s >= h - 1e-9 * h, 0.5 * s * (s - h), 0.0)
    return Field(grid, vals[None], "exact", obstacle_model(),
                 {"name": "discrete_obstacle", "a": a})


def obstacle_thresholds(grid: CartesianGrid):
    """Thresholds (h^2, h/4) separating the contact node from the first free node."""
    h = float(grid.spacing[0])
    return h * h, 0.25 * h


def simulate_free_boundary(stgrid: SpaceTimeGrid, initial: Field, model=None, cfg=None,
                           thresholds=None):
    """Masked-forcing evolution for u_t - Delta u = chi_Omega f(u).

    The indicator of Omega is recomputed from each slice and applied
    explicitly to the next step. Returns (SpaceTimeField, CoincidenceSet).
    """
    model = model or obstacle_model()
    fld = solve_parabolic(model, stgrid, initial, "fixed", cfg, masked=True,
                          thresholds=thresholds)
    return fld, coincidence_set(fld, *(thresholds or (None, None)))


__all__ = [
    "manufactured_homogeneous", "exact_solution", "exact_analytic", "CATALOG",
    "obstacle_model", "laplacian_matrix", "elliptic_residual", "SolverConfig",
    "solve_elliptic", "solve_parabolic", "CoincidenceSet", "coincidence_set",
    "simulate_free_boundary", "interior_mask", "discrete_obstacle_profile",
    "obstacle_thresholds",
]
