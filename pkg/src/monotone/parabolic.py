"""Gaussian-weighted functionals Psi^-/Psi^+ for u_t - Delta u = f(u).

    Psi(r) = r^(-2b) int_{T_r} (|grad u|^2 - 2F) G - (b/2) r^(-2b) int_{T_r} |u|^2 G / (T - t)

with G = G_{(T,x0)} and T_r the layer (T-4r^2, T-r^2) (minus) or
(T+r^2, T+4r^2) (plus). The derivative is assembled from

    interior part  2 r^(-2b-1) int [2(b-1)F - b u.f] G
    residual part  r^(-2b-1) int (1/(T-t)) sum_i Z_i^2 G,
                   Z_i = grad u_i . (x-x0) - 2 (T-t) d_t u_i - b u_i.

The free-boundary variant multiplies every integrand by the cutoff phi,
masks F and f by the indicator of Omega and adds C E(r). Its derivative
picks up the cutoff term

    I(r) = r^(-2b-1) int G [ -2 sum_i Z_i (grad phi . grad u_i)
                             + (|grad u|^2 - 2 chi F) ((x-x0) . grad phi)
                             - (b/2) |u|^2 ((x-x0) . grad phi) / (T-t) ]

which lives on the annulus 1/2 < |x-x0| < 3/4 where grad phi != 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from ._quad import (ADMISSIBLE_RTOL, QUAD_FLOOR, check_radius, integrate_r,
                    radial_nodes_for, richardson_limit)
from .errors import FieldNotSolutionError, HypothesisError, OutOfDomainError
from .reports import IdentityReport, ParabolicFunctionalReport, parallel_map


@dataclass
class LayerSums:
    """Unscaled layer integrals (all against G) for one radius."""

    energy: float = 0.0
    u2: float = 0.0
    interior: float = 0.0
    residual: float = 0.0
    ibp_lhs: float = 0.0
    ibp_rhs: float = 0.0
    cutoff: float = 0.0
    bound: float = 0.0
    adm_a: float = 0.0
    adm_b: float = 0.0
    tails: dict = field(default_factory=dict)


@dataclass
class PsiTerms:
    value: float
    energy_term: float
    u2_term: float
    trunc_bound: float
    E_r: float = 0.0
    C: float = 0.0
    cutoff_term: float = 0.0
    cutoff_bound: float = 0.0


@dataclass
class Admissibility:
    admissible: bool
    margin: float
    tolerance: float


def _convention(convention):
    return convention or geo.settings().kernel_plus_convention


def valid_interval(field, T: float, side: str):
    """Open radius interval on which Psi is defined for this field."""
    tr = getattr(field, "time_range", None)
    if tr is None:
        return 0.0, math.inf
    t1, t2 = tr
    if side == "minus":
        return 0.0, math.sqrt(max(T - t1, 0.0)) / 2.0
    return 0.0, math.sqrt(max(t2 - T, 0.0)) / 2.0


def _check(field, model, T, x0, r, side):
    check_radius(r)
    if side not in ("minus", "plus"):
        raise ValueError(f"side must be 'minus' or 'plus', got {side!r}")
    x0 = np.atleast_1d(np.asarray(x0, float))
    if len(x0) != field.n:
        raise ValueError(f"x0 has {len(x0)} entries, field dimension is {field.n}")
    if model.m != field.m:
        raise ValueError(f"model has {model.m} components, field has {field.m}")
    lo, hi = valid_interval(field, T, side)
    if not (lo < r < hi * (1 + 1e-12)):
        raise OutOfDomainError(
            f"radius {r!r} outside the valid interval ({lo!r}, {hi!r}) for side {side}")
    return x0


def _radial_count(field, r, cutoff):
    if cutoff:
        # the cutoff gradient is a steep bump on a quarter-width annulus
        return max(256, radial_nodes_for(field, geo.CUTOFF_OUTER))
    return radial_nodes_for(field, geo.gaussian_cutoff_radius(4 * r * r))


def layer_sums(field, model, T, x0, beta, r, side="minus", chi=None, cutoff=False,
               convention=None) -> LayerSums:
    """One pass over the layer quadrature collecting every integral used here."""
    x0 = _check(field, model, T, x0, r, side)
    conv = _convention(convention)
    if side == "plus" and conv == "literal" and not cutoff:
        raise ValueError("under the literal kernel convention the plus-side Gaussian grows "
                         "in |x|; the uncut layer integral diverges")
    slice_times = getattr(field, "times", None)
    support = geo.CUTOFF_OUTER if cutoff else None
    nodes = geo.layer_nodes(T, x0, r, side, slice_times=slice_times,
                            domain=getattr(field, "grid", None), support_radius=support,
                            convention=conv,
                            n_radial=_radial_count(field, r, cutoff),
                            n_time=256 if cutoff and slice_times is None else None)
    s = LayerSums()
    tails = {k: 0.0 for k in ("energy", "u2", "interior", "residual", "ibp")}
    for nd in nodes:
        t, pts = nd.t, nd.points
        tau = T - t
        u = field.sample(t, pts)
        g = field.sample_gradient(t, pts)
        ut = field.sample_dt(t, pts)
        d = pts - x0
        F = model.F(u)
        f = model.f(u)
        chi_v = chi.omega(t, pts) if chi is not None else 1.0
        ph = geo.cutoff_phi(pts, x0) if cutoff else 1.0
        g2 = np.sum(g ** 2, axis=(0, 1))
        uu = np.sum(u * u, axis=0)
        Z = np.einsum("mnp,pn->mp", g, d) - 2.0 * tau * ut - beta * u
        eng = (g2 - 2.0 * chi_v * F)
        adm_a = 2.0 * (beta - 1.0) * chi_v * F
        adm_b = beta * chi_v * np.sum(u * f, axis=0)
        if tau > 0 or conv == "literal":
            kfac = -1.0 / (2.0 * tau)
        else:
            kfac = -1.0 / (2.0 * abs(tau))
        # grad G = kfac (x - x0) G
        ugG = kfac * np.sum(u * np.einsum("mnp,pn->mp", g, d), axis=0)
        ibp_r = -(ugG + np.sum(u * (ut - chi_v * f), axis=0))
        vals = {
            "energy": eng * ph,
            "u2": uu * ph / tau,
            "interior": (adm_a - adm_b) * ph,
            "residual": np.sum(Z * Z, axis=0) * ph / tau,
            "ibp_lhs": g2,
            "ibp_rhs": ibp_r,
            "adm_a": np.abs(adm_a) * ph,
            "adm_b": np.abs(adm_b) * ph,
        }
        if cutoff:
            gp = geo.cutoff_phi_gradient(pts, x0)
            dgp = np.sum(d * gp, axis=1)
            gpu = np.einsum("mnp,pn->mp", g, gp)
            h1 = -2.0 * np.sum(Z * gpu, axis=0) + eng * dgp
            h2 = 0.5 * beta * uu * dgp
            vals["cutoff"] = h1 - h2 / tau
            vals["bound"] = np.abs(h1) + np.abs(h2) / abs(tau)
        wk = nd.kernel * nd.wx
        for k, v in vals.items():
            setattr(s, k, getattr(s, k) + nd.wt * float(np.asarray(v) @ wk))
        if nd.tail_mass > 0:
            for k in tails:
                src = vals["ibp_lhs"] if k == "ibp" else vals[k]
                tails[k] += abs(nd.wt) * nd.tail_mass * float(np.max(np.abs(src), initial=0.0))
    s.tails = tails
    return s


def psi(field, model, T, x0, beta: float, r: float, side: str = "minus",
        convention=None) -> PsiTerms:
    """Psi^-(r) (side='minus') or Psi^+(r) (side='plus') with its two terms."""
    s = layer_sums(field, model, T, x0, beta, r, side, convention=convention)
    w = r ** (-2.0 * beta)
    e, q = w * s.energy, -0.5 * beta * w * s.u2
    tb = w * (s.tails["energy"] + 0.5 * abs(beta) * s.tails["u2"])
    return PsiTerms(e + q, e, q, tb)


def psi_derivative_decomposition(field, model, T, x0, beta: float, r: float,
                                 side: str = "minus", convention=None):
    """(interior_part, residual_part) of dPsi/dr."""
    s = layer_sums(field, model, T, x0, beta, r, side, convention=convention)
    w = r ** (-2.0 * beta - 1.0)
    return 2.0 * w * s.interior, w * s.residual


def _tol(field, scale, trunc=0.0, extra=0.0):
    """10 (h^2 + dt^2) scale + 10 (trunc + extra) + floor; trunc and extra are absolute."""
    h = getattr(field, "h", 0.0) or 0.0
    dt = getattr(field, "dt", 0.0) or 0.0
    return 10.0 * (h * h + dt * dt) * scale + 10.0 * (trunc + extra) + QUAD_FLOOR * scale


def parabolic_ibp_terms(field, model, T, x0, r, side="minus", convention=None):
    s = layer_sums(field, model, T, x0, 0.0, r, side, convention=convention)
    return s.ibp_lhs, s.ibp_rhs, s.tails["ibp"]


def parabolic_ibp_residual(field, model, T, x0, r: float, side: str = "minus",
                           convention=None) -> float:
    """int |grad u|^2 G + int [u grad u . grad G + G u (d_t u - f)] over the layer."""
    lhs, rhs, _ = parabolic_ibp_terms(field, model, T, x0, r, side, convention)
    return lhs - rhs


def parabolic_ibp_report(field, model, T, x0, r: float, side: str = "minus",
                         convention=None) -> IdentityReport:
    lhs, rhs, tail = parabolic_ibp_terms(field, model, T, x0, r, side, convention)
    res = abs(lhs - rhs)
    tol = _tol(field, max(1.0, abs(lhs), abs(rhs)), tail)
    return IdentityReport("ibp_parabolic", [r], lhs, rhs, res, tol, res <= tol,
                          {"side": side, "trunc_bound": tail,
                           "h": getattr(field, "h", 0.0), "dt": getattr(field, "dt", 0.0)})


def beta_admissible_parabolic(field, model, T, x0, beta: float, r: float, side="minus",
                              convention=None, chi=None, cutoff=False) -> Admissibility:
    """(C2)/(C3): int_{T_r} [2(b-1)F - b u.f] G >= -tol."""
    s = layer_sums(field, model, T, x0, beta, r, side, chi=chi, cutoff=cutoff,
                   convention=convention)
    scale = max(1.0, abs(s.adm_a), abs(s.adm_b))
    tol = ADMISSIBLE_RTOL * scale
    return Admissibility(s.interior >= -tol, s.interior, tol)


def _gate(field, model, T, x0, radii, side, convention):
    for r in radii:
        rep = parabolic_ibp_report(field, model, T, x0, r, side, convention)
        if getattr(field, "provenance", "exact") == "noise" or not rep.passed:
            raise FieldNotSolutionError(
                f"parabolic ibp gate failed at r={r!r}: residual {rep.residual!r} "
                f"(tolerance {rep.tolerance!r})", rep.residual, rep.tolerance)


def verify_monotonicity_parabolic(field, model, T, x0, beta: float, rho: float, sigma: float,
                                  side: str = "minus", n_quad_r: int = 16, gate: bool = True,
                                  convention=None) -> IdentityReport:
    """Psi(sigma) - Psi(rho) against the r-integral of the derivative decomposition."""
    if not 0 < rho <= sigma:
        raise ValueError(f"need 0 < rho <= sigma, got ({rho!r}, {sigma!r})")
    if gate:
        _gate(field, model, T, x0, sorted({rho, sigma}), side, convention)
    ps = psi(field, model, T, x0, beta, sigma, side, convention)
    pr = psi(field, model, T, x0, beta, rho, side, convention) if rho != sigma else ps
    lhs = ps.value - pr.value

    def d(r):
        return sum(psi_derivative_decomposition(field, model, T, x0, beta, r, side, convention))

    rhs, err_r, _, _ = integrate_r(d, rho, sigma, n_quad_r, lambda f, xs: parallel_map(f, xs))
    scale = max(1.0, abs(ps.value), abs(pr.value))
    trunc = ps.trunc_bound + pr.trunc_bound
    tol = _tol(field, scale, trunc, err_r)
    res = abs(lhs - rhs)
    return IdentityReport(f"monotonicity_parabolic_{side}", [rho, sigma], lhs, rhs, res, tol,
                          res <= tol,
                          {"r_quadrature_error": err_r, "trunc_bound": trunc, "scale": scale,
                           "side": side, "convention": _convention(convention),
                           "psi_rho": pr.value, "psi_sigma": ps.value})


# --------------------------------------------------------------------------
# free boundary


def _require_lambda(chi, T, x0):
    if chi is None:
        raise HypothesisError("free-boundary functional needs a coincidence set")
    if not chi.contains(x0, T):
        raise HypothesisError(
            f"(x0, T) = ({np.atleast_1d(x0).tolist()}, {T!r}) is not in the coincidence set")


def psi_free_boundary(field, model, chi, T, x0, beta: float, r: float, side: str = "minus",
                      C: float = 0.0, convention=None) -> PsiTerms:
    """Cutoff-weighted Psi with chi_Omega-masked F plus C E(r).

    Raises:
        HypothesisError: (x0, T) not in the coincidence set, or C < 0.
    """
    if C < 0:
        raise HypothesisError(f"C must be non-negative, got {C!r}")
    _require_lambda(chi, T, x0)
    s = layer_sums(field, model, T, x0, beta, r, side, chi=chi, cutoff=True,
                   convention=convention)
    w = r ** (-2.0 * beta)
    e, q = w * s.energy, -0.5 * beta * w * s.u2
    E = geo.error_integral_E(r, field.n, beta)
    w1 = r ** (-2.0 * beta - 1.0)
    return PsiTerms(e + q + C * E, e, q, 0.0, E, C, w1 * s.cutoff, w1 * s.bound)


def free_boundary_decomposition(field, model, chi, T, x0, beta, r, side="minus",
                                convention=None):
    """(interior_part, residual_part, cutoff_term) of d/dr of the cutoff-weighted Psi."""
    s = layer_sums(field, model, T, x0, beta, r, side, chi=chi, cutoff=True,
                   convention=convention)
    w = r ** (-2.0 * beta - 1.0)
    return 2.0 * w * s.interior, w * s.residual, w * s.cutoff


def verify_free_boundary(field, model, chi, T, x0, beta, rho, sigma, side="minus",
                         n_quad_r=16, convention=None) -> IdentityReport:
    """Two-sided check of the cutoff-weighted identity including the I(r) term."""
    _require_lambda(chi, T, x0)
    a = psi_free_boundary(field, model, chi, T, x0, beta, rho, side, 0.0, convention)
    b = psi_free_boundary(field, model, chi, T, x0, beta, sigma, side, 0.0, convention)
    lhs = b.value - a.value
    rhs, err_r, _, _ = integrate_r(
        lambda r: sum(free_boundary_decomposition(field, model, chi, T, x0, beta, r, side,
                                                  convention)),
        rho, sigma, n_quad_r, lambda f, xs: parallel_map(f, xs))
    scale = max(1.0, abs(a.value), abs(b.value))
    tol = _tol(field, scale, 0.0, err_r)
    res = abs(lhs - rhs)
    return IdentityReport("free_boundary_" + side, [rho, sigma], lhs, rhs, res, tol, res <= tol,
                          {"r_quadrature_error": err_r})


@dataclass
class Calibration:
    C: float
    ratios: list
    radii: list
    h1_L1: float
    h2_L1: float


def _annulus_L1(field, model, chi, T, x0, beta):
    """L1 norms of h1 and h2 over {1/2 <= |x-x0| <= 3/4} x [T-1, T], clipped to the data."""
    x0 = np.atleast_1d(np.asarray(x0, float))
    tr = getattr(field, "time_range", None)
    a = T - 1.0 if tr is None else max(T - 1.0, tr[0])
    b = T if tr is None else min(T, tr[1])
    if not b > a:
        return 0.0, 0.0
    times = getattr(field, "times", None)
    tt, wt = geo.time_rule(a, b, times, 32)
    quad = geo.sphere_quadrature(field.n)
    pts, wx = geo.ball_rule(x0, geo.CUTOFF_OUTER, n_radial=32, quad=quad,
                            r_inner=geo.CUTOFF_INNER)
    grid = getattr(field, "grid", None)
    if grid is not None:
        lo, hi = np.array(grid.lo), np.array(grid.hi)
        keep = np.all((pts >= lo) & (pts <= hi), axis=1)
        pts, wx = pts[keep], wx[keep]
    d = pts - x0
    gp = geo.cutoff_phi_gradient(pts, x0)
    dgp = np.sum(d * gp, axis=1)
    L1 = L2 = 0.0
    for t, w in zip(tt, wt):
        u = field.sample(t, pts)
        g = field.sample_gradient(t, pts)
        ut = field.sample_dt(t, pts)
        chi_v = chi.omega(t, pts) if chi is not None else 1.0
        Z = np.einsum("mnp,pn->mp", g, d) - 2.0 * (T - t) * ut - beta * u
        eng = np.sum(g ** 2, axis=(0, 1)) - 2.0 * chi_v * model.F(u)
        h1 = -2.0 * np.sum(Z * np.einsum("mnp,pn->mp", g, gp), axis=0) + eng * dgp
        h2 = 0.5 * beta * np.sum(u * u, axis=0) * dgp
        L1 += w * float(np.abs(h1) @ wx)
        L2 += w * float(np.abs(h2) @ wx)
    return L1, L2


def calibrate_C(field, model, chi, T, x0, beta: float, radii=None, side="minus",
                convention=None) -> Calibration:
    """Smallest C making C E'(r) dominate the cutoff-term bound on the probed radii.

    The bound is r^(-2b-1) int (|h1| + |h2|/|T-t|) G over the layer, and
    E'(r) = r^(-n-2b-1) exp(-1/(16 r^2)); C is the largest ratio.
    """
    x0 = np.atleast_1d(np.asarray(x0, float))
    grid = getattr(field, "grid", None)
    if grid is not None:
        grid.require_ball(x0, geo.CUTOFF_OUTER, "cutoff support")
    if radii is None:
        hi = valid_interval(field, T, side)[1]
        hi = min(hi, 0.5) * (1 - 1e-9)
        radii = np.linspace(0.2 * hi, hi, 9)
    ratios = []
    for r in radii:
        s = layer_sums(field, model, T, x0, beta, r, side, chi=chi, cutoff=True,
                       convention=convention)
        bound = r ** (-2.0 * beta - 1.0) * s.bound
        env = geo.envelope_rate(r, field.n, beta)
        ratios.append(bound / env if env > 0 else (0.0 if bound == 0 else math.inf))
    h1, h2 = _annulus_L1(field, model, chi, T, x0, beta)
    return Calibration(float(max(ratios)) if ratios else 0.0, ratios,
                       [float(r) for r in radii], h1, h2)


# --------------------------------------------------------------------------
# scans


def _row(field, model, T, x0, beta, r, side, chi, C, convention):
    if chi is None:
        s = layer_sums(field, model, T, x0, beta, r, side, convention=convention)
        E = 0.0
    else:
        s = layer_sums(field, model, T, x0, beta, r, side, chi=chi, cutoff=True,
                       convention=convention)
        E = geo.error_integral_E(r, field.n, beta)
    w = r ** (-2.0 * beta)
    w1 = r ** (-2.0 * beta - 1.0)
    e, q = w * s.energy, -0.5 * beta * w * s.u2
    tb = w * (s.tails["energy"] + 0.5 * abs(beta) * s.tails["u2"])
    scale = max(1.0, abs(s.adm_a), abs(s.adm_b))
    atol = ADMISSIBLE_RTOL * scale
    Cv = float(C or 0.0)
    row = {"r": float(r), "side": side, "psi": e + q + Cv * E, "energy_term": e, "u2_term": q,
           "dpsi_res": w1 * s.residual, "dpsi_int": 2.0 * w1 * s.interior,
           "c23_margin": s.interior, "trunc_bound": tb, "E_r": E, "C": Cv,
           "admissible": bool(s.interior >= -atol), "c23_tolerance": atol}
    if chi is not None:
        row["cutoff_term"] = w1 * s.cutoff
        row["cutoff_bound"] = w1 * s.bound
    return row


def psi_scan(field, model, T, x0, beta: float, radii=None, side: str = "minus",
             r_min=None, r_max=None, n_r: int = 9, chi=None, C=None,
             check_identity: bool = True, n_quad_r: int = 8,
             convention=None) -> ParabolicFunctionalReport:
    """Psi (or the free-boundary Psi + C E when chi is given) over a radius grid."""
    if radii is None:
        if r_min is None or r_max is None or not 0 < r_min < r_max:
            raise ValueError("give radii or 0 < r_min < r_max")
        radii = np.linspace(r_min, r_max, n_r)
    radii = sorted(float(r) for r in radii)
    x0 = np.atleast_1d(np.asarray(x0, float))
    if chi is not None:
        _require_lambda(chi, T, x0)
        if C is None:
            C = calibrate_C(field, model, chi, T, x0, beta, radii, side, convention).C
    conv = _convention(convention)
    rows = parallel_map(lambda r: _row(field, model, T, x0, beta, r, side, chi, C, conv),
                        radii)
    violations, pairs = 0, []
    id_max = id_tol = 0.0
    for k in range(len(rows) - 1):
        a, b = rows[k], rows[k + 1]
        scale = max(1.0, abs(a["psi"]), abs(b["psi"]))
        trunc = a["trunc_bound"] + b["trunc_bound"]
        err_r = 0.0
        if check_identity:
            if chi is None:
                fn = lambda r: sum(psi_derivative_decomposition(field, model, T, x0, beta, r,
                                                                side, conv))
            else:
                fn = lambda r: sum(free_boundary_decomposition(field, model, chi, T, x0, beta,
                                                               r, side, conv)) \
                    + (C or 0.0) * geo.envelope_rate(r, field.n, beta)
            rhs, err_r, _, _ = integrate_r(fn, a["r"], b["r"], n_quad_r,
                                           lambda f, xs: parallel_map(f, xs))
            res = abs((b["psi"] - a["psi"]) - rhs)
            tol_k = _tol(field, scale, trunc, err_r)
            if k == 0 or res - tol_k > id_max - id_tol:
                id_max, id_tol = res, tol_k
        if a["admissible"] and b["admissible"]:
            if b["psi"] < a["psi"] - _tol(field, scale, trunc, err_r):
                violations += 1
                pairs.append([a["r"], b["r"]])
    bad = [r["r"] for r in rows if not r["admissible"]]
    M = richardson_limit([r["r"] for r in rows], [r["psi"] for r in rows])
    notes = []
    if side == "plus":
        notes.append(f"plus side evaluated under kernel convention '{conv}'")
    return ParabolicFunctionalReport(
        float(T), x0.tolist(), float(beta), side, radii, rows, violations, pairs, id_max,
        id_tol, M, bad, conv, chi is not None, None if C is None else float(C),
        {"h": getattr(field, "h", 0.0), "dt": getattr(field, "dt", 0.0),
         "identity_factor": 10.0, "quad_floor": QUAD_FLOOR,
         "admissible_rtol": ADMISSIBLE_RTOL, "n_quad_r": n_quad_r,
         "gaussian_threshold": geo.settings().gaussian_threshold}, notes)


__all__ = ["PsiTerms", "LayerSums", "psi", "psi_derivative_decomposition",
           "parabolic_ibp_residual", "parabolic_ibp_report", "beta_admissible_parabolic",
           "verify_monotonicity_parabolic", "psi_free_boundary", "free_boundary_decomposition",
           "verify_free_boundary", "calibrate_C", "Calibration", "psi_scan", "valid_interval",
           "layer_sums"]
