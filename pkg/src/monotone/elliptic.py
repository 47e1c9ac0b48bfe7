"""Weiss-type functional Phi_{x0}(r) for Delta u + f(u) = 0 and its identities.

    Phi(r) = r^(-n-2b+2) int_{B_r} (|grad u|^2 - 2 F(u))
             - b r^(-n-2b+1) int_{dB_r} |u|^2

Its r-derivative is assembled in closed form as the sum of

    boundary part  2 r^(-n-2b+2) int_{dB_r} sum_i (grad u_i . nu - b u_i / r)^2
    interior part  2 r^(-n-2b+1) int_{B_r} (2 (b-1) F - b u . f)

and never by differencing Phi, so the integrated check in
:func:`verify_monotonicity_elliptic` compares two independent quadrature paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from ._quad import (ADMISSIBLE_RTOL, QUAD_FLOOR, check_radius, integrate_r,
                    radial_nodes_for, require_inside, richardson_limit)
from .errors import FieldNotSolutionError
from .reports import FunctionalReport, IdentityReport, parallel_map


@dataclass
class PhiTerms:
    value: float
    volume_term: float
    boundary_term: float


@dataclass
class Admissibility:
    admissible: bool
    margin: float
    tolerance: float


def _sphere(field, x0, r):
    pts, w = geo.sphere_rule(x0, r)
    return pts, w, field.sample(pts), field.sample_gradient(pts)


def _ball(field, x0, r):
    pts, w = geo.ball_rule(x0, r, n_radial=radial_nodes_for(field, r))
    return pts, w, field.sample(pts), field.sample_gradient(pts)


def _setup(field, model, x0, r):
    check_radius(r)
    x0 = np.atleast_1d(np.asarray(x0, float))
    if len(x0) != field.n:
        raise ValueError(f"x0 has {len(x0)} entries, field dimension is {field.n}")
    if model.m != field.m:
        raise ValueError(f"model has {model.m} components, field has {field.m}")
    require_inside(field, x0, r, "ball")
    return x0


def phi(field, model, x0, beta: float, r: float) -> PhiTerms:
    """Phi_{x0}(r) with its volume and boundary addends."""
    x0 = _setup(field, model, x0, r)
    n = field.n
    _, wb, ub, gb = _ball(field, x0, r)
    energy = np.sum(gb ** 2, axis=(0, 1)) - 2.0 * model.F(ub)
    vol = r ** (-n - 2 * beta + 2) * float(energy @ wb)
    _, ws, us, _ = _sphere(field, x0, r)
    bd = -beta * r ** (-n - 2 * beta + 1) * float(np.sum(us ** 2, axis=0) @ ws)
    return PhiTerms(vol + bd, vol, bd)


def phi_derivative_decomposition(field, model, x0, beta: float, r: float):
    """(boundary_part, interior_part) of dPhi/dr; the first is a sum of squares."""
    x0 = _setup(field, model, x0, r)
    n = field.n
    pts, ws, us, gs = _sphere(field, x0, r)
    nu = (pts - x0) / r
    dnu = np.einsum("mnp,pn->mp", gs, nu)
    sq = np.sum((dnu - beta * us / r) ** 2, axis=0)
    bpart = 2.0 * r ** (-n - 2 * beta + 2) * float(sq @ ws)
    _, wb, ub, _ = _ball(field, x0, r)
    integrand = 2.0 * (beta - 1.0) * model.F(ub) - beta * np.sum(ub * model.f(ub), axis=0)
    ipart = 2.0 * r ** (-n - 2 * beta + 1) * float(integrand @ wb)
    return bpart, ipart


def _identity_tol(field, scale, extra=0.0):
    """10 h^2 scale + 10 extra + floor; ``extra`` (r-quadrature error) is absolute."""
    h = getattr(field, "h", 0.0) or 0.0
    return 10.0 * h * h * scale + 10.0 * extra + QUAD_FLOOR * scale


def pohozaev_terms(field, model, x0, r):
    x0 = _setup(field, model, x0, r)
    n = field.n
    _, wb, ub, gb = _ball(field, x0, r)
    g2 = np.sum(gb ** 2, axis=(0, 1))
    F = model.F(ub)
    vol = float((n * (g2 - 2.0 * F) - 2.0 * g2) @ wb)
    pts, ws, us, gs = _sphere(field, x0, r)
    nu = (pts - x0) / r
    dnu = np.einsum("mnp,pn->mp", gs, nu)
    g2s = np.sum(gs ** 2, axis=(0, 1))
    bd = float((r * (g2s - 2.0 * model.F(us)) - 2.0 * r * np.sum(dnu ** 2, axis=0)) @ ws)
    return vol, bd


def pohozaev_residual(field, model, x0, r: float) -> float:
    """int_B [n(|grad u|^2 - 2F) - 2|grad u|^2] - int_dB [r(|grad u|^2 - 2F) - 2r (grad u . nu)^2]."""
    vol, bd = pohozaev_terms(field, model, x0, r)
    return vol - bd


def pohozaev_report(field, model, x0, r: float) -> IdentityReport:
    vol, bd = pohozaev_terms(field, model, x0, r)
    res = abs(vol - bd)
    tol = _identity_tol(field, max(1.0, abs(vol), abs(bd)))
    return IdentityReport("pohozaev", [r], vol, bd, res, tol, res <= tol,
                          {"h": getattr(field, "h", 0.0)})


def ibp_terms(field, model, x0, r):
    x0 = _setup(field, model, x0, r)
    _, wb, ub, gb = _ball(field, x0, r)
    lhs = float(np.sum(gb ** 2, axis=(0, 1)) @ wb)
    uf = float(np.sum(ub * model.f(ub), axis=0) @ wb)
    pts, ws, us, gs = _sphere(field, x0, r)
    nu = (pts - x0) / r
    dnu = np.einsum("mnp,pn->mp", gs, nu)
    flux = float(np.sum(us * dnu, axis=0) @ ws)
    return lhs, flux + uf


def ibp_residual(field, model, x0, r: float) -> float:
    """int_B |grad u|^2 - int_dB u grad u . nu - int_B u . f(u)."""
    lhs, rhs = ibp_terms(field, model, x0, r)
    return lhs - rhs


def ibp_report(field, model, x0, r: float) -> IdentityReport:
    lhs, rhs = ibp_terms(field, model, x0, r)
    res = abs(lhs - rhs)
    tol = _identity_tol(field, max(1.0, abs(lhs), abs(rhs)))
    return IdentityReport("ibp", [r], lhs, rhs, res, tol, res <= tol,
                          {"h": getattr(field, "h", 0.0)})


def beta_admissible_elliptic(field, model, x0, beta: float, r: float) -> Admissibility:
    """Condition (C1) on B_r(x0): int [2(b-1)F - b u.f] >= -tol."""
    x0 = _setup(field, model, x0, r)
    _, wb, ub, _ = _ball(field, x0, r)
    a = 2.0 * (beta - 1.0) * model.F(ub)
    b = beta * np.sum(ub * model.f(ub), axis=0)
    margin = float((a - b) @ wb)
    scale = max(1.0, float(np.abs(a) @ wb), float(np.abs(b) @ wb))
    tol = ADMISSIBLE_RTOL * scale
    return Admissibility(margin >= -tol, margin, tol)


def _gate(field, model, x0, radii):
    if getattr(field, "provenance", "exact") == "noise":
        rep = ibp_report(field, model, x0, max(radii))
        raise FieldNotSolutionError(
            f"field provenance is 'noise'; ibp residual {rep.residual!r} "
            f"(tolerance {rep.tolerance!r})", rep.residual, rep.tolerance)
    for r in radii:
        rep = ibp_report(field, model, x0, r)
        if not rep.passed:
            raise FieldNotSolutionError(
                f"ibp gate failed at r={r!r}: residual {rep.residual!r} > {rep.tolerance!r}",
                rep.residual, rep.tolerance)


def verify_monotonicity_elliptic(field, model, x0, beta: float, rho: float, sigma: float,
                                 n_quad_r: int = 16, gate: bool = True) -> IdentityReport:
    """Phi(sigma) - Phi(rho) against the r-integral of the derivative decomposition.

    Raises:
        FieldNotSolutionError: the field fails the integration-by-parts gate.
    """
    if not 0 < rho <= sigma:
        raise ValueError(f"need 0 < rho <= sigma, got ({rho!r}, {sigma!r})")
    _setup(field, model, x0, sigma)
    if gate:
        _gate(field, model, x0, sorted({rho, sigma}))
    p_s = phi(field, model, x0, beta, sigma).value
    p_r = phi(field, model, x0, beta, rho).value if rho != sigma else p_s
    lhs = p_s - p_r

    def dphi(r):
        return sum(phi_derivative_decomposition(field, model, x0, beta, r))

    rhs, err_r, _, _ = integrate_r(dphi, rho, sigma, n_quad_r,
                                   lambda f, xs: parallel_map(f, xs))
    scale = max(1.0, abs(p_s), abs(p_r))
    tol = _identity_tol(field, scale, err_r)
    res = abs(lhs - rhs)
    return IdentityReport("monotonicity_elliptic", [rho, sigma], lhs, rhs, res, tol,
                          res <= tol, {"r_quadrature_error": err_r, "scale": scale,
                                       "n_quad_r": n_quad_r, "phi_rho": p_r, "phi_sigma": p_s,
                                       "h": getattr(field, "h", 0.0)})


def _row(field, model, x0, beta, r):
    t = phi(field, model, x0, beta, r)
    b, i = phi_derivative_decomposition(field, model, x0, beta, r)
    adm = beta_admissible_elliptic(field, model, x0, beta, r)
    return {"r": float(r), "phi": t.value, "vol_term": t.volume_term,
            "bdry_term": t.boundary_term, "dphi_bdry": b, "dphi_int": i,
            "c1_margin": adm.margin, "admissible": adm.admissible,
            "c1_tolerance": adm.tolerance}


def phi_scan(field, model, x0, beta: float, r_min: float, r_max: float, n_r: int = 9,
             radii=None, check_identity: bool = True, n_quad_r: int = 8) -> FunctionalReport:
    """Phi, its decomposition and (C1) margins on a radius grid.

    Monotonicity is asserted only between consecutive radii that are both
    admissible; the r -> 0 limit is the quadratic extrapolation through the
    three smallest radii.
    """
    if radii is None:
        if not 0 < r_min < r_max or n_r < 2:
            raise ValueError("need 0 < r_min < r_max and n_r >= 2")
        radii = np.linspace(r_min, r_max, n_r)
    radii = sorted(float(r) for r in radii)
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly increasing")
    x0 = _setup(field, model, x0, radii[-1])
    rows = parallel_map(lambda r: _row(field, model, x0, beta, r), radii)
    h = getattr(field, "h", 0.0) or 0.0
    violations, pairs = 0, []
    id_max, id_tol = 0.0, 0.0
    for k in range(len(rows) - 1):
        a, b = rows[k], rows[k + 1]
        scale = max(1.0, abs(a["phi"]), abs(b["phi"]))
        err_r = 0.0
        if check_identity:
            rhs, err_r, _, _ = integrate_r(
                lambda r: sum(phi_derivative_decomposition(field, model, x0, beta, r)),
                a["r"], b["r"], n_quad_r, lambda f, xs: parallel_map(f, xs))
            res = abs((b["phi"] - a["phi"]) - rhs)
            tol_k = _identity_tol(field, scale, err_r)
            if res - tol_k > id_max - id_tol or k == 0:
                id_max, id_tol = res, tol_k
        if a["admissible"] and b["admissible"]:
            tol_mono = _identity_tol(field, scale, err_r)
            if b["phi"] < a["phi"] - tol_mono:
                violations += 1
                pairs.append([a["r"], b["r"]])
    bad = [r["r"] for r in rows if not r["admissible"]]
    M = richardson_limit([r["r"] for r in rows], [r["phi"] for r in rows])
    notes = []
    if bad:
        notes.append(f"{len(bad)} radii fail (C1) and are excluded from the monotonicity count")
    return FunctionalReport(list(map(float, x0)), float(beta), radii, rows, violations, pairs,
                            id_max, id_tol, M, bad,
                            {"h": h, "identity_factor": 10.0, "quad_floor": QUAD_FLOOR,
                             "admissible_rtol": ADMISSIBLE_RTOL, "n_quad_r": n_quad_r},
                            notes)


__all__ = ["PhiTerms", "Admissibility", "phi", "phi_derivative_decomposition",
           "pohozaev_residual", "pohozaev_report", "ibp_residual", "ibp_report",
           "beta_admissible_elliptic", "verify_monotonicity_elliptic", "phi_scan"]
