"""Blow-up rescaling, homogeneity residuals and degree estimation.

The scaled sequence is u_k(x) = rho^-beta u(x0 + rho x) (elliptic) or
u_k(t, x) = rho^-beta u(T + rho^2 t, x0 + rho x) (parabolic), sampled on a
fixed probe grid so successive scales can be compared node by node.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from . import geometry as geo
from ._quad import richardson_limit
from .errors import DegreeUndefinedError, OutOfDomainError
from .fields import Field, SpaceTimeField
from .geometry import CartesianGrid, SpaceTimeGrid
from .reports import BlowupReport, parallel_map

# probe window D: annulus in space, a backward slab in space-time
ELLIPTIC_WINDOW = (0.1, 1.0)
PARABOLIC_WINDOW = (-4.0, -1.0, 2.0)

_PROBE_COUNTS = {1: 2001, 2: 257, 3: 49}
_PROBE_COUNTS_ST = {1: 801, 2: 129, 3: 33}


def _is_spacetime(field) -> bool:
    return hasattr(field, "sample_dt")


def default_probe_grid(n: int, half_width: float = 1.0, count: int | None = None):
    return CartesianGrid.cube(n, half_width, count or _PROBE_COUNTS.get(n, 33))


def default_probe_stgrid(n: int, slices: int = 61, count: int | None = None):
    t1, t2, R = PARABOLIC_WINDOW
    space = CartesianGrid.cube(n, R, count or _PROBE_COUNTS_ST.get(n, 33))
    return SpaceTimeGrid(space, t1, t2, slices)


def _window_check(field, x0, rho, probe: CartesianGrid):
    src = getattr(field, "grid", None)
    if src is None:
        return
    lo = x0 + rho * np.asarray(probe.lo, float)
    hi = x0 + rho * np.asarray(probe.hi, float)
    slo, shi = np.asarray(src.lo, float), np.asarray(src.hi, float)
    slack = 1e-9 * np.maximum(1.0, shi - slo)
    if np.any(lo < slo - slack) or np.any(hi > shi + slack):
        raise OutOfDomainError(
            f"rescaling window [{lo.tolist()}, {hi.tolist()}] (rho={rho!r}) leaves the "
            f"source grid [{slo.tolist()}, {shi.tolist()}]")


def rescale_elliptic(field, x0, rho: float, beta: float, probe: CartesianGrid | None = None
                     ) -> Field:
    """u_k(x) = rho^-beta u(x0 + rho x) on the probe grid.

    The gradient is carried over from the source (rho^(1-beta) grad u at the
    mapped point) rather than re-differenced on the probe grid.
    """
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho!r}")
    x0 = np.atleast_1d(np.asarray(x0, float))
    probe = probe or default_probe_grid(field.n)
    _window_check(field, x0, rho, probe)
    pts = x0 + rho * probe.points()
    shape = (field.m,) + tuple(probe.counts)
    vals = rho ** (-beta) * field.sample(pts).reshape(shape)
    grad = rho ** (1.0 - beta) * field.sample_gradient(pts).reshape(
        (field.m, field.n) + tuple(probe.counts))
    meta = {"source": repr(field), "rho": float(rho), "beta": float(beta),
            "x0": x0.tolist()}
    return Field(probe, vals, "rescaled", getattr(field, "model", None), meta, grad)


def rescale_parabolic(stfield, T: float, x0, rho: float, beta: float,
                      probe: SpaceTimeGrid | None = None) -> SpaceTimeField:
    """u_k(t, x) = rho^-beta u(T + rho^2 t, x0 + rho x) on the probe space-time grid."""
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho!r}")
    x0 = np.atleast_1d(np.asarray(x0, float))
    probe = probe or default_probe_stgrid(stfield.n)
    _window_check(stfield, x0, rho, probe.space)
    tr = getattr(stfield, "time_range", None)
    if tr is not None:
        a, b = T + rho * rho * probe.t1, T + rho * rho * probe.t2
        span = max(1.0, abs(tr[0]), abs(tr[1]))
        if a < tr[0] - 1e-12 * span or b > tr[1] + 1e-12 * span:
            raise OutOfDomainError(
                f"rescaled time window ({a!r}, {b!r}) leaves ({tr[0]!r}, {tr[1]!r})")
    pts = x0 + rho * probe.space.points()
    shape = (stfield.m,) + tuple(probe.space.counts)
    vals = np.array([rho ** (-beta) * stfield.sample(T + rho * rho * t, pts).reshape(shape)
                     for t in probe.times])
    meta = {"source": repr(stfield), "rho": float(rho), "beta": float(beta),
            "x0": x0.tolist(), "T": float(T)}
    return SpaceTimeField(probe, vals, "rescaled", getattr(stfield, "model", None), meta)


def annulus_rule(x0, r_in: float, r_out: float, n_radial: int = 64, quad=None):
    """Points and weights on r_in < |x - x0| < r_out, Gauss-Legendre in log r."""
    if not 0 < r_in < r_out:
        raise ValueError(f"need 0 < r_in < r_out, got ({r_in!r}, {r_out!r})")
    x0 = np.atleast_1d(np.asarray(x0, float))
    n = len(x0)
    quad = quad or geo.sphere_quadrature(n)
    s, ws = geo.leggauss(n_radial)
    la, lb = math.log(r_in), math.log(r_out)
    half = 0.5 * (lb - la)
    rho = np.exp(la + half * (s + 1.0))
    wr = ws * half * rho ** n
    pts = x0 + (rho[:, None, None] * quad.directions[None]).reshape(-1, n)
    w = (wr[:, None] * quad.weights[None]).ravel()
    return pts, w


def _euler_defect(field, x0, pts, beta):
    u = field.sample(pts)
    g = field.sample_gradient(pts)
    d = (pts - x0).T
    return np.einsum("ijp,jp->ip", g, d) - beta * u


def homogeneity_residual(field, x0, beta: float, annulus=ELLIPTIC_WINDOW,
                         n_radial: int = 64, factor: float = 2.0) -> float:
    """factor * integral over the annulus of |x-x0|^(-n-2 beta) |grad u . (x-x0) - beta u|^2.

    Zero exactly when u is homogeneous of degree beta about x0 on the annulus.
    """
    x0 = np.atleast_1d(np.asarray(x0, float))
    r_in, r_out = map(float, annulus)
    if not r_in > 0:
        raise ValueError(f"inner radius must be positive, got {r_in!r}")
    grid = getattr(field, "grid", None)
    if grid is not None:
        grid.require_ball(x0, r_out, "annulus")
    pts, w = annulus_rule(x0, r_in, r_out, n_radial)
    defect = _euler_defect(field, x0, pts, beta)
    rad = np.linalg.norm(pts - x0, axis=1)
    wt = rad ** (-field.n - 2.0 * beta)
    return factor * float((np.sum(defect ** 2, axis=0) * wt) @ w)


def sphere_rms(field, x0, r: float) -> float:
    """Root mean square of |u| over the sphere of radius r about x0."""
    x0 = np.atleast_1d(np.asarray(x0, float))
    grid = getattr(field, "grid", None)
    if grid is not None:
        grid.require_ball(x0, r, "probe sphere")
    pts, w = geo.sphere_rule(x0, r)
    u = field.sample(pts)
    return math.sqrt(float(np.sum(u ** 2, axis=0) @ w) / float(np.sum(w)))


def _fit_slope(radii, values, what) -> float:
    v = np.asarray(values, float)
    if np.any(~np.isfinite(v)) or np.any(v <= 0):
        raise DegreeUndefinedError(f"{what} vanishes on a probe radius; degree undefined")
    slope, _ = np.polyfit(np.log(np.asarray(radii, float)), np.log(v), 1)
    return float(slope)


def estimate_degree(field, x0, radii) -> float:
    """Least-squares slope of log(sphere RMS of |u|) against log r.

    Raises:
        DegreeUndefinedError: the field vanishes on one of the probe spheres.
    """
    radii = np.asarray(radii, float)
    if len(radii) < 3:
        raise ValueError(f"need at least 3 radii, got {len(radii)}")
    vals = [sphere_rms(field, x0, r) for r in radii]
    return _fit_slope(radii, vals, "field")


def _path_points(n, base_times=(-4.0, -3.0, -2.0)):
    quad = geo.sphere_quadrature(n)
    return [(t, quad.directions, quad.weights) for t in base_times]


def estimate_degree_parabolic(stfield, T: float, x0, lambdas) -> float:
    """Slope of log RMS of |u(T + l^2 t, x0 + l w)| against log l along parabolic paths.

    The RMS runs over base times t in {-4, -3, -2} and unit directions w, so
    lambdas in [1/sqrt(2), 1] keep the samples inside the default window.
    """
    lambdas = np.asarray(lambdas, float)
    if len(lambdas) < 3:
        raise ValueError(f"need at least 3 scales, got {len(lambdas)}")
    x0 = np.atleast_1d(np.asarray(x0, float))
    vals = []
    for lam in lambdas:
        tot = wsum = 0.0
        for t, dirs, w in _path_points(stfield.n):
            u = stfield.sample(T + lam * lam * t, x0 + lam * dirs)
            tot += float(np.sum(u ** 2, axis=0) @ w)
            wsum += float(np.sum(w))
        vals.append(math.sqrt(tot / wsum))
    return _fit_slope(lambdas, vals, "field")


# --------------------------------------------------------------------------
# norms and residuals on the probe window


def _h1_norm_elliptic(uk, annulus, n_radial=64):
    pts, w = annulus_rule(np.zeros(uk.n), *annulus, n_radial)
    u = uk.sample(pts)
    g = uk.sample_gradient(pts)
    dens = np.sum(u ** 2, axis=0) + np.sum(g ** 2, axis=(0, 1))
    return math.sqrt(float(dens @ w))


def _l2_diff_elliptic(a, b, annulus, n_radial=64):
    pts, w = annulus_rule(np.zeros(a.n), *annulus, n_radial)
    d = a.sample(pts) - b.sample(pts)
    return math.sqrt(float(np.sum(d ** 2, axis=0) @ w))


def _st_rule(n, window, n_time=16, n_radial=32):
    t1, t2, R = window
    tt, wt = geo.time_rule(t1, t2, n_nodes=n_time)
    pts, wx = geo.ball_rule(np.zeros(n), R, n_radial=n_radial)
    return tt, wt, pts, wx


def _h1_norm_parabolic(uk, window):
    tt, wt, pts, wx = _st_rule(uk.n, window)
    tot = 0.0
    for t, w in zip(tt, wt):
        u = uk.sample(t, pts)
        g = uk.sample_gradient(t, pts)
        tot += w * float((np.sum(u ** 2, axis=0) + np.sum(g ** 2, axis=(0, 1))) @ wx)
    return math.sqrt(tot)


def _l2_diff_parabolic(a, b, window):
    tt, wt, pts, wx = _st_rule(a.n, window)
    tot = 0.0
    for t, w in zip(tt, wt):
        d = a.sample(t, pts) - b.sample(t, pts)
        tot += w * float(np.sum(d ** 2, axis=0) @ wx)
    return math.sqrt(tot)


def parabolic_homogeneity_residual(uk, beta: float, window=PARABOLIC_WINDOW) -> float:
    """Integral over the window of (1/(-t)) |grad u . x + 2 t u_t - beta u|^2 G_(0,0)."""
    tt, wt, pts, wx = _st_rule(uk.n, window)
    tot = 0.0
    for t, w in zip(tt, wt):
        u = uk.sample(t, pts)
        g = uk.sample_gradient(t, pts)
        ut = uk.sample_dt(t, pts)
        Z = np.einsum("ijp,jp->ip", g, pts.T) + 2.0 * t * ut - beta * u
        G = geo.backward_heat_kernel(t, pts, 0.0, np.zeros(uk.n))
        tot += w * float((np.sum(Z ** 2, axis=0) * G / (-t)) @ wx)
    return tot


# --------------------------------------------------------------------------
# growth precheck


def growth_quantity(field, model, x0, beta: float, r: float) -> float:
    """r^(-n-2b+1) times the sphere integral of |u|^2 plus r^(-n-2b+2) |ball integral of 2F|."""
    x0 = np.atleast_1d(np.asarray(x0, float))
    n = field.n
    grid = getattr(field, "grid", None)
    if grid is not None:
        grid.require_ball(x0, r, "growth ball")
    pts, w = geo.sphere_rule(x0, r)
    s = float(np.sum(field.sample(pts) ** 2, axis=0) @ w)
    out = r ** (-n - 2 * beta + 1) * s
    if model is not None:
        bp, bw = geo.ball_rule(x0, r)
        out += r ** (-n - 2 * beta + 2) * abs(2.0 * float(model.F(field.sample(bp)) @ bw))
    return out


def growth_quantity_parabolic(stfield, T, x0, beta: float, r: float) -> float:
    """r^(-2b) times the Gaussian-weighted mean of |u|^2 / (T - t) over the minus layer."""
    x0 = np.atleast_1d(np.asarray(x0, float))
    val = geo.layer_gaussian_integral(
        lambda t, p: np.sum(stfield.sample(t, p) ** 2, axis=0) / (T - t),
        T, x0, r, "minus", t_range=getattr(stfield, "time_range", None),
        domain=getattr(stfield, "grid", None))
    return r ** (-2.0 * beta) * abs(float(val))


# --------------------------------------------------------------------------
# study


def _limit_M(field, model, x0, beta, scales, T=None):
    if model is None:
        return None
    try:
        if T is None:
            from .elliptic import phi
            vals = [phi(field, model, x0, beta, r).value for r in scales]
        else:
            from .parabolic import psi
            vals = [psi(field, model, T, x0, beta, r).value for r in scales]
    except (OutOfDomainError, ValueError):
        return None
    return richardson_limit(scales, vals)


def blowup_study(field, center, beta: float, rho_list, window=None, *, model=None,
                 probe=None, degree_radii=None, growth_factor: float = 10.0,
                 degenerate_slope: float = 0.5, keep_fields: bool = False) -> BlowupReport:
    """Rescale at each rho, then record norms, homogeneity residuals and degrees.

    Args:
        center: x0 for elliptic fields, (T, x0) for space-time fields.
        rho_list: strictly decreasing positive scales.
        window: probe window D; annulus (r_in, r_out) for elliptic fields,
            (t1, t2, R) for space-time fields.
        growth_factor: the growth precheck fails when the growth quantity at a
            small radius exceeds this multiple of its value at the largest.
        degenerate_slope: log-log slope of the norms against rho above which
            the limit is flagged as degenerate (norms tending to 0).
    """
    rhos = [float(r) for r in rho_list]
    if len(rhos) < 1 or any(r <= 0 for r in rhos):
        raise ValueError("rho_list must hold positive scales")
    if any(b >= a for a, b in zip(rhos, rhos[1:])):
        raise ValueError(f"rho_list must be strictly decreasing, got {rhos}")
    parabolic = _is_spacetime(field)
    model = model if model is not None else getattr(field, "model", None)
    notes = []
    if parabolic:
        T, x0 = center
        T = float(T)
        x0 = np.atleast_1d(np.asarray(x0, float))
        window = tuple(window or PARABOLIC_WINDOW)
        if probe is None:
            sp = CartesianGrid.cube(field.n, window[2], _PROBE_COUNTS_ST.get(field.n, 33))
            probe = SpaceTimeGrid(sp, window[0], window[1], 61)

        def one(rho):
            uk = rescale_parabolic(field, T, x0, rho, beta, probe)
            lams = np.geomspace(1 / math.sqrt(2.0), 1.0, 5)
            return (uk, _h1_norm_parabolic(uk, window),
                    parabolic_homogeneity_residual(uk, beta, window),
                    estimate_degree_parabolic(uk, 0.0, np.zeros(field.n), lams))
        center_out = [T, x0.tolist()]
    else:
        x0 = np.atleast_1d(np.asarray(center, float))
        window = tuple(window or ELLIPTIC_WINDOW)
        probe = probe or default_probe_grid(field.n, window[1])
        radii = degree_radii if degree_radii is not None else np.geomspace(*window, 6)

        def one(rho):
            uk = rescale_elliptic(field, x0, rho, beta, probe)
            try:
                deg = estimate_degree(uk, np.zeros(field.n), radii)
            except DegreeUndefinedError:
                deg = float("nan")
            return (uk, _h1_norm_elliptic(uk, window),
                    homogeneity_residual(uk, np.zeros(field.n), beta, window, factor=1.0),
                    deg)
        T = None
        center_out = x0.tolist()

    results = parallel_map(one, rhos)
    uks = [r[0] for r in results]
    norms = [r[1] for r in results]
    residuals = [r[2] for r in results]
    degrees = [r[3] for r in results]
    diff = _l2_diff_parabolic if parabolic else _l2_diff_elliptic
    cauchy = [diff(a, b, window) for a, b in zip(uks, uks[1:])]

    # growth precheck at the radii the windows reach
    outer = window[2] if parabolic else window[1]
    g_radii = [rho * (outer if not parabolic else 1.0) for rho in rhos]
    growth = []
    for r in g_radii:
        try:
            if parabolic:
                growth.append(growth_quantity_parabolic(field, T, x0, beta, r))
            else:
                growth.append(growth_quantity(field, model, x0, beta, r))
        except (OutOfDomainError, ValueError) as exc:
            notes.append(f"growth quantity skipped at r={r!r}: {exc}")
    growth_sup = max(growth) if growth else float("nan")
    ref = growth[0] if growth else float("nan")
    growth_ok = bool(growth) and all(math.isfinite(g) for g in growth) and (
        growth_sup <= growth_factor * ref + 1e-300)
    if not growth_ok:
        msg = (f"growth precheck failed: sup {growth_sup!r} over radii {g_radii} "
               f"exceeds {growth_factor!r} x the outer value {ref!r}")
        notes.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)

    degenerate = False
    nrm = np.asarray(norms, float)
    if np.all(nrm <= 1e-300):
        degenerate = True
    elif len(rhos) >= 2 and np.all(nrm > 0):
        slope = np.polyfit(np.log(rhos), np.log(nrm), 1)[0]
        degenerate = bool(slope > degenerate_slope)
    if degenerate:
        notes.append("norms decay with rho: the blow-up limit is degenerate (zero)")

    M = _limit_M(field, model, x0, beta, rhos, T)
    return BlowupReport(center=center_out, beta=float(beta), scales=rhos, norms=norms,
                        residuals=residuals, degree_estimates=degrees,
                        beta_hat=float(degrees[-1]), limit_M=M, cauchy=cauchy,
                        degenerate=degenerate, growth_ok=growth_ok,
                        growth_sup=float(growth_sup), parabolic=parabolic,
                        warnings=notes, fields=uks if keep_fields else [])
