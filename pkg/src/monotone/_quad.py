"""Shared helpers for the functional modules: field sampling, r-quadrature,
tolerance scales."""

from __future__ import annotations

import math

import numpy as np

from .errors import OutOfDomainError
from .geometry import leggauss

# relative floor added to every identity tolerance; covers round-off in the
# sphere/ball rules when the field itself carries no discretization error
QUAD_FLOOR = 1e-10

# admissibility margins are compared against this fraction of the integrand scale
ADMISSIBLE_RTOL = 1e-9


def radial_nodes_for(field, r: float) -> int:
    h = getattr(field, "h", 0.0) or 0.0
    if h <= 0:
        return 64
    return int(np.clip(math.ceil(2.0 * r / h), 32, 400))


def require_inside(field, x0, r, what):
    grid = getattr(field, "grid", None)
    if grid is not None:
        grid.require_ball(x0, r, what)


def gl_interval(a: float, b: float, n: int):
    x, w = leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), w * half


def integrate_r(fn, a: float, b: float, n: int, workers_map=None):
    """Integral of fn over [a, b] by Gauss-Legendre in s = log r, with an error estimate.

    Working in log r keeps power-law integrands (r^-k weights) smooth. The
    estimate is |Q_n - Q_ceil(n/2)| from a second, coarser rule.
    Returns (value, error_estimate, nodes, values).
    """
    if b == a:
        return 0.0, 0.0, [], []
    mp = workers_map or (lambda f, xs: [f(x) for x in xs])
    la, lb = math.log(a), math.log(b)

    def rule(k):
        s, w = gl_interval(la, lb, k)
        r = np.exp(s)
        return r, w * r

    r1, w1 = rule(n)
    r2, w2 = rule(max(1, math.ceil(n / 2)))
    v1 = np.array(mp(fn, list(r1)), float)
    v2 = np.array(mp(fn, list(r2)), float)
    q1 = float(v1 @ w1)
    q2 = float(v2 @ w2)
    return q1, abs(q1 - q2), list(r1), list(v1)


def richardson_limit(radii, values) -> float:
    """Value at r = 0 of the quadratic through the three smallest radii."""
    r = np.asarray(radii, float)
    v = np.asarray(values, float)
    if len(r) < 3:
        return float(v[np.argmin(r)]) if len(r) else float("nan")
    idx = np.argsort(r)[:3]
    rr, vv = r[idx], v[idx]
    # Lagrange basis at 0
    tot = 0.0
    for i in range(3):
        li = 1.0
        for j in range(3):
            if j != i:
                li *= (0.0 - rr[j]) / (rr[i] - rr[j])
        tot += li * vv[i]
    return float(tot)


def check_radius(r):
    if not (r > 0 and math.isfinite(r)):
        raise OutOfDomainError(f"radius must be positive and finite, got {r!r}")
