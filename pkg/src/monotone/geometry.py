"""Grids, sphere/ball/space-time-layer quadrature and the backward heat kernel.

Every functional in the package is assembled from the rules defined here:

* sphere rules on the unit (n-1)-sphere, scaled to radius r;
* ball rules as radial Gauss-Legendre times a sphere rule, so the sphere
  boundary is exactly a quadrature surface;
* layer rules for the Gaussian-weighted integrals over the horizontal
  slabs (T-4r^2, T-r^2) x R^n and (T+r^2, T+4r^2) x R^n, truncated where
  the Gaussian drops below a fixed threshold.

Quadrature sizes and the kernel convention for t > t0 are module-level
settings (see :func:`configure`) so a run configuration can change them in
one place.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, optimize, special

from .errors import OutOfDomainError, SingularTimeError

KERNEL_CONVENTIONS = ("signed_abs_exponent", "literal")


@dataclass
class QuadratureSettings:
    sphere_points_2d: int = 256
    sphere_polar_3d: int = 64
    sphere_azimuth_3d: int = 128
    radial_nodes: int = 64
    time_nodes: int = 64
    gaussian_threshold: float = 1e-16
    truncation_tolerance: float = 1e-10
    kernel_plus_convention: str = "signed_abs_exponent"

    def __post_init__(self):
        if self.kernel_plus_convention not in KERNEL_CONVENTIONS:
            raise ValueError(
                f"kernel_plus_convention must be one of {KERNEL_CONVENTIONS}, "
                f"got {self.kernel_plus_convention!r}")
        for name in ("sphere_points_2d", "sphere_polar_3d", "sphere_azimuth_3d",
                     "radial_nodes", "time_nodes"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.gaussian_threshold < 1.0:
            raise ValueError("gaussian_threshold must lie in (0, 1)")


_SETTINGS = QuadratureSettings()


def settings() -> QuadratureSettings:
    """Current module-level quadrature settings."""
    return _SETTINGS


def configure(**changes) -> QuadratureSettings:
    """Replace quadrature settings; returns the previous settings object.

    Intended to be called once at program start (the CLI does this from the
    run configuration). Quadrature rules are cached per size, so changing
    sizes is cheap.
    """
    global _SETTINGS
    previous = _SETTINGS
    _SETTINGS = replace(_SETTINGS, **changes)
    return previous


def restore(previous: QuadratureSettings) -> None:
    global _SETTINGS
    _SETTINGS = previous


# --------------------------------------------------------------------------
# grids


@dataclass(frozen=True)
class CartesianGrid:
    """Uniform tensor-product grid on a box in R^n.

    Args:
        lo: lower corner, one entry per axis.
        hi: upper corner.
        counts: nodes per axis (at least 3, so central differences exist).
    """

    lo: tuple
    hi: tuple
    counts: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        counts = tuple(int(c) for c in np.atleast_1d(self.counts))
        if not (len(lo) == len(hi) == len(counts)) or len(lo) == 0:
            raise ValueError("lo, hi and counts must have the same positive length")
        if any(c < 3 for c in counts):
            raise ValueError(f"every axis needs at least 3 nodes, got {counts}")
        if any(not b > a for a, b in zip(lo, hi)):
            raise ValueError(f"extents must be strictly ordered, got lo={lo} hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def cube(cls, n: int, half_width: float, count: int, center=None) -> "CartesianGrid":
        c = np.zeros(n) if center is None else np.asarray(center, float)
        return cls(tuple(c - half_width), tuple(c + half_width), (count,) * n)

    @property
    def n(self) -> int:
        return len(self.counts)

    @property
    def spacing(self) -> np.ndarray:
        return (np.array(self.hi) - np.array(self.lo)) / (np.array(self.counts) - 1)

    @property
    def h(self) -> float:
        """Largest spacing; the O(h^2) error budgets use this."""
        return float(self.spacing.max())

    @property
    def shape(self) -> tuple:
        return self.counts

    def axes(self) -> list:
        return [np.linspace(a, b, c) for a, b, c in zip(self.lo, self.hi, self.counts)]

    def mesh(self) -> list:
        return np.meshgrid(*self.axes(), indexing="ij")

    def points(self) -> np.ndarray:
        """All nodes as an (N, n) array in row-major (C) order."""
        return np.stack([m.ravel() for m in self.mesh()], axis=1)

    def index_coordinates(self, points: np.ndarray) -> np.ndarray:
        """Fractional node indices of points, shape (n, P)."""
        pts = np.atleast_2d(points)
        return ((pts - np.array(self.lo)) / self.spacing).T

    def contains_ball(self, x0, radius: float, slack: float = 1e-12) -> bool:
        x0 = np.asarray(x0, float)
        lo, hi = np.array(self.lo), np.array(self.hi)
        tol = slack * max(1.0, float(np.abs(np.concatenate([lo, hi])).max()))
        return bool(np.all(x0 - radius >= lo - tol) and np.all(x0 + radius <= hi + tol))

    def require_ball(self, x0, radius: float, what: str = "ball") -> None:
        if not self.contains_ball(x0, radius):
            raise OutOfDomainError(
                f"{what} of radius {radius!r} about {np.atleast_1d(np.asarray(x0, float)).tolist()} leaves "
                f"the grid box lo={list(self.lo)} hi={list(self.hi)}")

    def to_dict(self) -> dict:
        return {"type": "cartesian", "lo": list(self.lo), "hi": list(self.hi),
                "counts": list(self.counts)}


@dataclass(frozen=True)
class RadialGrid:
    """Cell-centred radial grid for radially symmetric data in R^n.

    Nodes sit at (k + 1/2) dr, k = 0..count-1, so no node lies on the
    coordinate singularity r = 0.
    """

    n: int
    r_max: float
    count: int
    center: tuple = ()

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("dimension must be >= 1")
        if not self.r_max > 0:
            raise ValueError("r_max must be positive")
        if self.count < 3:
            raise ValueError("radial grid needs at least 3 nodes")
        c = tuple(float(v) for v in self.center) if len(self.center) else (0.0,) * self.n
        if len(c) != self.n:
            raise ValueError("center must have n entries")
        object.__setattr__(self, "center", c)

    @property
    def dr(self) -> float:
        return self.r_max / self.count

    @property
    def h(self) -> float:
        return self.dr

    @property
    def nodes(self) -> np.ndarray:
        return (np.arange(self.count) + 0.5) * self.dr

    @property
    def shape(self) -> tuple:
        return (self.count,)

    def contains_ball(self, x0, radius: float, slack: float = 1e-12) -> bool:
        d = float(np.linalg.norm(np.asarray(x0, float) - np.array(self.center)))
        return d + radius <= self.nodes[-1] * (1 + slack)

    def require_ball(self, x0, radius: float, what: str = "ball") -> None:
        if not self.contains_ball(x0, radius):
            raise OutOfDomainError(
                f"{what} of radius {radius!r} about {np.atleast_1d(np.asarray(x0, float)).tolist()} leaves "
                f"the radial grid (last node {self.nodes[-1]!r})")

    def to_dict(self) -> dict:
        return {"type": "radial", "n": self.n, "r_max": self.r_max,
                "count": self.count, "center": list(self.center)}


@dataclass(frozen=True)
class SpaceTimeGrid:
    """Spatial grid times uniform time slices t1 = s_0 < ... < s_{K-1} = t2."""

    space: CartesianGrid
    t1: float
    t2: float
    slices: int

    def __post_init__(self):
        if not self.t2 > self.t1:
            raise ValueError(f"need t1 < t2, got ({self.t1}, {self.t2})")
        if self.slices < 3:
            raise ValueError("need at least 3 time slices")

    @classmethod
    def from_step(cls, space: CartesianGrid, t1: float, t2: float, dt: float) -> "SpaceTimeGrid":
        k = (t2 - t1) / dt
        slices = int(round(k)) + 1
        if abs(k - round(k)) > 1e-8 * max(1.0, abs(k)):
            raise ValueError(f"dt={dt} does not divide (t2 - t1)={t2 - t1}")
        return cls(space, float(t1), float(t2), slices)

    @property
    def dt(self) -> float:
        return (self.t2 - self.t1) / (self.slices - 1)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t1, self.t2, self.slices)

    @property
    def n(self) -> int:
        return self.space.n

    def to_dict(self) -> dict:
        return {"type": "spacetime", "space": self.space.to_dict(), "t1": self.t1,
                "t2": self.t2, "slices": self.slices}


# --------------------------------------------------------------------------
# sphere and ball rules


def unit_sphere_area(n: int) -> float:
    """Surface measure s_n of the unit sphere in R^n (s_1 = 2 counts points)."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


@dataclass(frozen=True)
class SphereQuadrature:
    """Nodes on the unit (n-1)-sphere and positive weights summing to s_n."""

    n: int
    directions: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    degree: int = 0

    @property
    def size(self) -> int:
        return len(self.weights)


@lru_cache(maxsize=32)
def _sphere_rule(n: int, m2: int, polar: int, azimuth: int) -> SphereQuadrature:
    if n == 1:
        d = np.array([[1.0], [-1.0]])
        w = np.array([1.0, 1.0])
        deg = 1
    elif n == 2:
        theta = 2.0 * np.pi * np.arange(m2) / m2
        d = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        w = np.full(m2, 2.0 * np.pi / m2)
        deg = m2 - 1
    elif n == 3:
        z, wz = leggauss(polar)
        phi = 2.0 * np.pi * np.arange(azimuth) / azimuth
        s = np.sqrt(1.0 - z ** 2)
        d = np.stack([np.outer(s, np.cos(phi)).ravel(),
                      np.outer(s, np.sin(phi)).ravel(),
                      np.repeat(z, azimuth)], axis=1)
        w = np.outer(wz, np.full(azimuth, 2.0 * np.pi / azimuth)).ravel()
        deg = min(2 * polar - 1, azimuth - 1)
    else:
        raise NotImplementedError("sphere quadrature ships for n <= 3 only")
    d.setflags(write=False)
    w.setflags(write=False)
    return SphereQuadrature(n, d, w, deg)


def sphere_quadrature(n: int, *, points_2d: int | None = None, polar: int | None = None,
                      azimuth: int | None = None) -> SphereQuadrature:
    """Sphere rule for dimension n using the configured sizes unless overridden."""
    s = _SETTINGS
    return _sphere_rule(int(n), int(points_2d or s.sphere_points_2d),
                        int(polar or s.sphere_polar_3d), int(azimuth or s.sphere_azimuth_3d))


def sphere_rule(x0, r: float, quad: SphereQuadrature | None = None):
    """Points and weights approximating the surface integral over the r-sphere about x0."""
    x0 = np.atleast_1d(np.asarray(x0, float))
    quad = quad or sphere_quadrature(len(x0))
    pts = x0 + r * quad.directions
    return pts, quad.weights * r ** (len(x0) - 1)


@lru_cache(maxsize=64)
def leggauss(n: int):
    """Cached Gauss-Legendre nodes and weights on [-1, 1]."""
    x, w = np.polynomial.legendre.leggauss(int(n))
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def radial_rule(r_in: float, r_out: float, n_radial: int, n: int):
    """Gauss-Legendre radii on [r_in, r_out] with the Jacobian rho^(n-1) folded in."""
    x, w = leggauss(n_radial)
    half = 0.5 * (r_out - r_in)
    rho = r_in + half * (x + 1.0)
    return rho, w * half * rho ** (n - 1)


def ball_rule(x0, r: float, *, n_radial: int | None = None,
              quad: SphereQuadrature | None = None, r_inner: float = 0.0):
    """Product rule for the ball (or the annulus r_inner < |x-x0| < r).

    Returns points (P, n), weights (P,), the radii (R,) and the sphere size,
    with points ordered radius-major so reshaping to (R, S) recovers shells.
    """
    x0 = np.atleast_1d(np.asarray(x0, float))
    n = len(x0)
    quad = quad or sphere_quadrature(n)
    rho, wr = radial_rule(r_inner, r, n_radial or _SETTINGS.radial_nodes, n)
    pts = x0 + (rho[:, None, None] * quad.directions[None, :, :]).reshape(-1, n)
    w = (wr[:, None] * quad.weights[None, :]).ravel()
    return pts, w


def _domain_of(g, domain):
    if domain is not None:
        return domain
    return getattr(g, "grid", None)


def sphere_integral(g: Callable, x0, r: float, quad: SphereQuadrature | None = None,
                    domain=None):
    """Quadrature of the surface integral of g over the sphere of radius r about x0.

    Args:
        g: callable mapping points (P, n) to values (P,) or (k, P).
        domain: grid that must contain the sphere; taken from ``g.grid`` if
            the sampler carries one.
    """
    if not r > 0:
        raise ValueError(f"radius must be positive, got {r!r}")
    dom = _domain_of(g, domain)
    if dom is not None:
        dom.require_ball(x0, r, "sphere")
    pts, w = sphere_rule(x0, r, quad)
    return np.asarray(g(pts)) @ w


def ball_integral(g: Callable, x0, r: float, quad: SphereQuadrature | None = None,
                  domain=None, n_radial: int | None = None):
    """Quadrature of the volume integral of g over the ball B_r(x0)."""
    if not r > 0:
        raise ValueError(f"radius must be positive, got {r!r}")
    dom = _domain_of(g, domain)
    if dom is not None:
        dom.require_ball(x0, r, "ball")
    pts, w = ball_rule(x0, r, n_radial=n_radial, quad=quad)
    return np.asarray(g(pts)) @ w


# --------------------------------------------------------------------------
# backward heat kernel


def _convention(convention):
    c = convention or _SETTINGS.kernel_plus_convention
    if c not in KERNEL_CONVENTIONS:
        raise ValueError(f"unknown kernel convention {c!r}")
    return c


def backward_heat_kernel(t: float, x, t0: float, x0, n: int | None = None,
                         convention: str | None = None):
    """G_{(t0,x0)}(t, x) = 4 pi (t0-t) |4 pi (t0-t)|^(-n/2-1) exp(-|x-x0|^2 / (4 (t0-t))).

    For t < t0 this is the positive Gaussian of variance 2 (t0 - t) per
    axis. For t > t0 the signed prefactor is kept (negative); under the
    default ``signed_abs_exponent`` convention the exponent uses |t0 - t| so
    the kernel decays in x, while ``literal`` evaluates the formula as
    written, which grows in |x|.

    Args:
        x: a point (n,) or points (P, n).
    """
    if t == t0:
        raise SingularTimeError(f"backward heat kernel is singular at t = t0 = {t0!r}")
    x = np.asarray(x, float)
    pts = np.atleast_2d(x) if x.ndim > 0 else x.reshape(1, 1)
    x0 = np.atleast_1d(np.asarray(x0, float))
    n = n or pts.shape[1]
    tau = t0 - t
    d2 = np.sum((pts - x0) ** 2, axis=1)
    pref = math.copysign(abs(4.0 * math.pi * tau) ** (-n / 2.0), tau)
    if tau > 0 or _convention(convention) == "literal":
        val = pref * np.exp(-d2 / (4.0 * tau))
    else:
        val = pref * np.exp(-d2 / (4.0 * abs(tau)))
    return val if x.ndim > 1 else val[0]


def heat_kernel_gradient(t: float, x, t0: float, x0, n: int | None = None,
                         convention: str | None = None):
    """Analytic spatial gradient of :func:`backward_heat_kernel`, shape (P, n)."""
    pts = np.atleast_2d(np.asarray(x, float))
    x0 = np.atleast_1d(np.asarray(x0, float))
    g = backward_heat_kernel(t, pts, t0, x0, n, convention)
    tau = t0 - t
    if tau < 0 and _convention(convention) == "signed_abs_exponent":
        tau = -tau
    return -(pts - x0) * (g / (2.0 * tau))[:, None]


def gaussian_cutoff_radius(tau: float, threshold: float | None = None) -> float:
    """Radius where exp(-R^2 / (4 |tau|)) equals the threshold."""
    eps = threshold or _SETTINGS.gaussian_threshold
    return math.sqrt(4.0 * abs(tau) * math.log(1.0 / eps))


def gaussian_tail_mass(n: int, radius: float, tau: float) -> float:
    """Mass of the normalized heat kernel of width |tau| outside the ball of radius R."""
    return float(special.gammaincc(n / 2.0, radius ** 2 / (4.0 * abs(tau))))


def layer_interval(T: float, r: float, side: str):
    if side not in ("minus", "plus"):
        raise ValueError(f"side must be 'minus' or 'plus', got {side!r}")
    if not r > 0:
        raise ValueError(f"radius must be positive, got {r!r}")
    if side == "minus":
        return T - 4.0 * r * r, T - r * r
    return T + r * r, T + 4.0 * r * r


def time_rule(a: float, b: float, slice_times=None, n_nodes: int | None = None):
    """Time nodes and weights on [a, b].

    With slice times, the trapezoid rule over the slices strictly inside
    (a, b) plus the two endpoints; otherwise Gauss-Legendre.
    """
    if slice_times is None:
        x, w = leggauss(n_nodes or _SETTINGS.time_nodes)
        half = 0.5 * (b - a)
        return a + half * (x + 1.0), w * half
    s = np.asarray(slice_times, float)
    span = max(abs(a), abs(b), 1.0)
    inner = s[(s > a + 1e-12 * span) & (s < b - 1e-12 * span)]
    t = np.concatenate([[a], inner, [b]])
    dt = np.diff(t)
    w = np.zeros_like(t)
    w[:-1] += 0.5 * dt
    w[1:] += 0.5 * dt
    return t, w


@dataclass
class LayerNode:
    t: float
    wt: float
    points: np.ndarray
    wx: np.ndarray
    kernel: np.ndarray
    radius: float
    tail_mass: float


@dataclass
class LayerIntegral:
    """Value of a Gaussian-weighted layer integral with its truncation bound."""

    value: float | np.ndarray
    tail_bound: float
    warning: str | None = None

    def __float__(self):
        return float(self.value)


def layer_nodes(T: float, x0, r: float, side: str, *, slice_times=None,
                t_range=None, domain=None, support_radius: float | None = None,
                n_radial: int | None = None, quad: SphereQuadrature | None = None,
                convention: str | None = None, n_time: int | None = None) -> list:
    """Space-time quadrature nodes for integrals of g * G_{(T,x0)} over a layer.

    The spatial ball at time t has radius R_cut(t) (where the Gaussian falls
    to the configured threshold), capped by ``support_radius`` when the
    integrand is known to vanish outside that ball.
    """
    x0 = np.atleast_1d(np.asarray(x0, float))
    a, b = layer_interval(T, r, side)
    if t_range is not None:
        lo, hi = t_range
        span = max(abs(lo), abs(hi), 1.0)
        if a < lo - 1e-12 * span or b > hi + 1e-12 * span:
            raise OutOfDomainError(
                f"layer ({a!r}, {b!r}) for radius {r!r} leaves the time range ({lo!r}, {hi!r})")
    conv = _convention(convention)
    n = len(x0)
    tt, wt = time_rule(a, b, slice_times, n_time)
    out = []
    for t, w in zip(tt, wt):
        tau = T - t
        R = gaussian_cutoff_radius(tau)
        tail = gaussian_tail_mass(n, R, tau)
        if support_radius is not None and support_radius < R:
            R, tail = support_radius, 0.0
        if domain is not None:
            domain.require_ball(x0, R, f"Gaussian window at t={t!r} (layer radius {r!r})")
        pts, wx = ball_rule(x0, R, n_radial=n_radial, quad=quad)
        G = backward_heat_kernel(t, pts, T, x0, n, conv)
        out.append(LayerNode(float(t), float(w), pts, wx, G, R, tail))
    return out


def layer_gaussian_integral(g: Callable, T: float, x0, r: float, side: str = "minus", *,
                            slice_times=None, t_range=None, domain=None,
                            support_radius: float | None = None,
                            convention: str | None = None, n_radial: int | None = None,
                            tolerance: float | None = None) -> LayerIntegral:
    """Integral of g(t, x) G_{(T,x0)}(t, x) over the layer T_r^minus or T_r^plus.

    Args:
        g: callable ``g(t, points)`` returning (P,) or (k, P) values.
        slice_times: time slices of the data; trapezoid in time over them.
            Without it a Gauss-Legendre time rule is used.
        t_range: (t_lo, t_hi) that must contain the layer.
        domain: spatial grid that must contain every truncated Gaussian ball.

    Returns:
        :class:`LayerIntegral` whose ``tail_bound`` estimates the mass lost
        to spatial truncation times the largest |g| sampled at that time.
    """
    dom = _domain_of(g, domain)
    if t_range is None and hasattr(g, "time_range"):
        t_range = g.time_range
    nodes = layer_nodes(T, x0, r, side, slice_times=slice_times, t_range=t_range,
                        domain=dom, support_radius=support_radius,
                        convention=convention, n_radial=n_radial)
    total = 0.0
    tail = 0.0
    for nd in nodes:
        vals = np.asarray(g(nd.t, nd.points))
        total = total + nd.wt * ((vals * nd.kernel) @ nd.wx)
        if nd.tail_mass > 0:
            tail += abs(nd.wt) * nd.tail_mass * float(np.max(np.abs(vals), initial=0.0))
    tol = _SETTINGS.truncation_tolerance if tolerance is None else tolerance
    warn = None
    if tail > tol:
        warn = f"Gaussian truncation bound {tail!r} exceeds tolerance {tol!r}"
    return LayerIntegral(total, tail, warn)


def kernel_mass(n: int, tau: float, n_radial: int | None = None) -> LayerIntegral:
    """Integral over R^n of G_{(0,0)}(-tau, .), truncated at the cutoff radius.

    The truncated mass is reported as ``tail_bound``; value + tail is 1 up
    to quadrature error.
    """
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau!r}")
    R = gaussian_cutoff_radius(tau)
    x0 = np.zeros(n)
    pts, w = ball_rule(x0, R, n_radial=n_radial)
    val = float(backward_heat_kernel(-tau, pts, 0.0, x0, n) @ w)
    return LayerIntegral(val, gaussian_tail_mass(n, R, tau))


def kernel_heat_residual(n: int, tau: float, h: float = 1e-3, n_points: int = 64,
                         seed: int = 0) -> float:
    """max |dG/dt + Laplacian G| by central differences, relative to max |G| / tau.

    Points are drawn inside the ball where G carries most of its mass.
    """
    rng = np.random.default_rng(seed)
    x0 = np.zeros(n)
    pts = rng.normal(scale=math.sqrt(2.0 * tau), size=(n_points, n))
    t = -tau

    def G(tt, p):
        return backward_heat_kernel(tt, p, 0.0, x0, n)

    dt = (G(t + h * tau, pts) - G(t - h * tau, pts)) / (2.0 * h * tau)
    hx = h * math.sqrt(tau)
    lap = -2.0 * n * G(t, pts)
    for a in range(n):
        e = np.zeros(n)
        e[a] = hx
        lap = lap + G(t, pts + e) + G(t, pts - e)
    lap = lap / hx ** 2
    scale = float(np.max(np.abs(G(t, pts)))) / tau
    return float(np.max(np.abs(dt + lap))) / scale


# --------------------------------------------------------------------------
# cutoff and envelope


def _bump(s):
    s = np.asarray(s, float)
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos])
    return out


def _bump_prime(s):
    s = np.asarray(s, float)
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos]) / s[pos] ** 2
    return out


def smoothstep(s):
    """C-infinity step: 0 for s <= 0, 1 for s >= 1, psi(s)/(psi(s)+psi(1-s)) between,
    with psi(s) = exp(-1/s) for s > 0."""
    a, b = _bump(s), _bump(1.0 - np.asarray(s, float))
    return a / (a + b)


def _smoothstep_prime(s):
    s = np.asarray(s, float)
    a, b = _bump(s), _bump(1.0 - s)
    da, db = _bump_prime(s), -_bump_prime(1.0 - s)
    den = (a + b) ** 2
    return (da * b - a * db) / den


CUTOFF_INNER = 0.5
CUTOFF_OUTER = 0.75


def cutoff_phi(x, x0):
    """Smooth cutoff: 1 on |x-x0| <= 1/2, 0 on |x-x0| >= 3/4.

    phi(x) = 1 - smoothstep((|x - x0| - 1/2) / (1/4)); at |x-x0| = 5/8 the
    value is exactly 1/2.
    """
    pts = np.atleast_2d(np.asarray(x, float))
    rho = np.linalg.norm(pts - np.atleast_1d(np.asarray(x0, float)), axis=1)
    val = 1.0 - smoothstep((rho - CUTOFF_INNER) / (CUTOFF_OUTER - CUTOFF_INNER))
    return val if np.ndim(x) > 1 else val[0]


def cutoff_phi_gradient(x, x0):
    """Analytic gradient of :func:`cutoff_phi`, shape (P, n)."""
    pts = np.atleast_2d(np.asarray(x, float))
    d = pts - np.atleast_1d(np.asarray(x0, float))
    rho = np.linalg.norm(d, axis=1)
    width = CUTOFF_OUTER - CUTOFF_INNER
    dphi = -_smoothstep_prime((rho - CUTOFF_INNER) / width) / width
    safe = np.where(rho > 0, rho, 1.0)
    return d * (dphi / safe)[:, None]


def _envelope_log_integrand(s, k):
    return -k * math.log(s) - 1.0 / (16.0 * s * s)


def error_integral_E(r: float, n: int, beta: float, underflow: float = 1e-300) -> float:
    """E(r) = integral over (0, r) of s^(-n-2 beta-1) exp(-1/(16 s^2)) ds.

    The integrand has an essential zero at s = 0, so integration starts at
    the first s where it exceeds ``underflow``; the neglected piece is below
    ``underflow * r``.
    """
    if r < 0:
        raise ValueError("r must be non-negative")
    if r == 0:
        return 0.0
    k = n + 2.0 * beta + 1.0
    log_floor = math.log(underflow)

    def integrand(s):
        return math.exp(_envelope_log_integrand(s, k))

    if _envelope_log_integrand(r, k) < log_floor:
        # the integrand is below underflow on all of (0, r]; keep strict positivity
        return float(integrand(r) * r) if integrand(r) > 0 else 0.0
    lo = 1e-3 / math.sqrt(-log_floor)
    lo = min(lo, r)
    if _envelope_log_integrand(lo, k) < log_floor:
        s_min = optimize.brentq(lambda s: _envelope_log_integrand(s, k) - log_floor, lo, r,
                                xtol=1e-15, rtol=1e-14)
    else:
        s_min = lo
    # integrand peaks at s* = 1/sqrt(8 k) when k > 0
    pts = None
    if k > 0:
        s_star = 1.0 / math.sqrt(8.0 * k)
        if s_min < s_star < r:
            pts = [s_star]
    val, _ = integrate.quad(integrand, s_min, r, points=pts, epsabs=0.0, epsrel=1e-13,
                            limit=400)
    return float(val)


def envelope_rate(r: float, n: int, beta: float) -> float:
    """dE/dr = r^(-n-2 beta-1) exp(-1/(16 r^2))."""
    return math.exp(_envelope_log_integrand(r, n + 2.0 * beta + 1.0)) if r > 0 else 0.0


def as_points(x, n: int) -> np.ndarray:
    pts = np.asarray(x, float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, n) if n > 1 else pts.reshape(-1, 1)
    return pts


__all__ = [
    "QuadratureSettings", "settings", "configure", "restore",
    "CartesianGrid", "RadialGrid", "SpaceTimeGrid", "SphereQuadrature",
    "unit_sphere_area", "sphere_quadrature", "sphere_rule", "radial_rule", "ball_rule",
    "sphere_integral", "ball_integral", "backward_heat_kernel", "heat_kernel_gradient",
    "gaussian_cutoff_radius", "gaussian_tail_mass", "layer_interval", "time_rule",
    "layer_nodes", "layer_gaussian_integral", "LayerIntegral", "smoothstep",
    "cutoff_phi", "cutoff_phi_gradient", "error_integral_E", "envelope_rate",
    "KERNEL_CONVENTIONS",
]
