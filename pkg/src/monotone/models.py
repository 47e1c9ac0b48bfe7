"""Nonlinearity catalog: potentials F, gradients f = grad F and admissible u-ranges.

All evaluation functions take ``u`` either as an m-vector or as an array of
shape (m, ...) holding m component arrays; F returns the matching scalar
shape and f returns shape (m, ...).
"""

from __future__ import annotations

import ast
import math
import operator
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ModelDomainError

DEFAULT_FLOOR = 1e-8


@dataclass(frozen=True)
class Interval:
    lo: float = -math.inf
    hi: float = math.inf
    lo_open: bool = True
    hi_open: bool = True

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        ok = np.isfinite(x)
        ok &= (x > self.lo) if self.lo_open else (x >= self.lo)
        ok &= (x < self.hi) if self.hi_open else (x <= self.hi)
        return ok

    def __str__(self):
        left = "(" if self.lo_open else "["
        right = ")" if self.hi_open else "]"
        return f"{left}{self.lo!r}, {self.hi!r}{right}"

    def to_list(self):
        return [self.lo, self.hi, self.lo_open, self.hi_open]


REALS = Interval()
NONNEG = Interval(0.0, math.inf, False, True)


def _positive(floor: float) -> Interval:
    return Interval(float(floor), math.inf, True, True)


# --------------------------------------------------------------------------
# expression evaluator for custom potentials

_FUNCS = {
    "exp": np.exp, "log": np.log, "sqrt": np.sqrt, "sin": np.sin, "cos": np.cos,
    "tan": np.tan, "tanh": np.tanh, "sinh": np.sinh, "cosh": np.cosh, "abs": np.abs,
}
_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}
_CONSTS = {"pi": math.pi, "e": math.e}


def compile_expression(expr: str, m: int, prefix: str = "u") -> Callable:
    """Compile an arithmetic expression in u1..um into a vectorized callable.

    ``prefix`` renames the variables (d1..dn for direction profiles).

    Only numbers, the variables, + - * / ** and a small set of elementary
    functions are accepted; anything else raises ValueError.
    """
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"cannot parse expression {expr!r}: {exc.msg}") from None
    names = {f"{prefix}{i + 1}": i for i in range(m)}
    if m == 1:
        names[prefix] = 0

    def check(node):
        if isinstance(node, ast.Expression):
            check(node.body)
        elif isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            check(node.left)
            check(node.right)
        elif isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            check(node.operand)
        elif isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            pass
        elif isinstance(node, ast.Name):
            if node.id not in names and node.id not in _CONSTS:
                raise ValueError(f"unknown variable {node.id!r} in {expr!r}")
        elif isinstance(node, ast.Call) and isinstance(node.func, ast.Name) \
                and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords:
            check(node.args[0])
        else:
            raise ValueError(f"unsupported construct {ast.dump(node)[:40]} in {expr!r}")

    check(tree)

    def ev(node, u):
        if isinstance(node, ast.Expression):
            return ev(node.body, u)
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](ev(node.left, u), ev(node.right, u))
        if isinstance(node, ast.UnaryOp):
            return _UNOPS[type(node.op)](ev(node.operand, u))
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            return u[names[node.id]] if node.id in names else _CONSTS[node.id]
        return _FUNCS[node.func.id](ev(node.args[0], u))

    def F(u):
        u = np.asarray(u, float)
        with np.errstate(all="ignore"):
            val = ev(tree, u)
        return np.broadcast_to(val, u.shape[1:]).astype(float)

    return F


def _central_gradient(F: Callable, m: int) -> Callable:
    def f(u):
        u = np.asarray(u, float)
        out = np.empty_like(u)
        for i in range(m):
            step = 1e-5 * np.maximum(1.0, np.abs(u[i]))
            up, um = u.copy(), u.copy()
            up[i] = up[i] + step
            um[i] = um[i] - step
            out[i] = (F(up) - F(um)) / (2.0 * step)
        return out
    return f


# --------------------------------------------------------------------------
# the model type


@dataclass(frozen=True, eq=False)
class NonlinearityModel:
    """Reaction pair (F, f = grad F) with per-component admissible intervals.

    Build instances with the constructors below (``zero``, ``coupled_linear``
    ...) or :func:`build_model`; direct construction skips validation.
    """

    kind: str
    m: int
    params: dict
    domain: tuple
    _F: Callable = field(repr=False)
    _f: Callable = field(repr=False)
    _jac: Callable | None = field(default=None, repr=False)

    def _prep(self, u):
        u = np.asarray(u, float)
        scalar = u.ndim == 1
        if scalar:
            u = u.reshape(self.m, 1) if u.shape[0] == self.m else None
        if u is None or u.shape[0] != self.m:
            raise ValueError(f"model {self.kind!r} expects {self.m} components")
        return u, scalar

    def check(self, u) -> None:
        """Raise ModelDomainError if any component leaves its interval."""
        u, _ = self._prep(u)
        for i, iv in enumerate(self.domain):
            ok = iv.contains(u[i])
            if not np.all(ok):
                bad = np.asarray(u[i])[~ok].ravel()[0]
                raise ModelDomainError(
                    f"{self.kind}: component u{i + 1}={bad!r} outside admissible interval {iv}",
                    component=i)

    def F(self, u):
        u, scalar = self._prep(u)
        self.check(u)
        val = np.asarray(self._F(u), float)
        return float(val[0]) if scalar else val

    def f(self, u):
        u, scalar = self._prep(u)
        self.check(u)
        val = np.asarray(self._f(u), float)
        return val[:, 0] if scalar else val

    def jacobian(self, u):
        """Matrix df_i/du_j, shape (m, m, ...)."""
        u, scalar = self._prep(u)
        self.check(u)
        if self._jac is not None:
            J = np.asarray(self._jac(u), float)
        else:
            J = np.empty((self.m,) + u.shape)
            for j in range(self.m):
                step = 1e-6 * np.maximum(1.0, np.abs(u[j]))
                up, um = u.copy(), u.copy()
                up[j] += step
                um[j] -= step
                J[:, j] = (self._f(up) - self._f(um)) / (2.0 * step)
        return J[:, :, 0] if scalar else J

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "m": self.m}
        d.update({k: v for k, v in self.params.items() if not callable(v)})
        return d

    def __repr__(self):
        ps = ", ".join(f"{k}={v!r}" for k, v in self.params.items() if not callable(v))
        return f"NonlinearityModel({self.kind}, m={self.m}{', ' if ps else ''}{ps})"


def _model(kind, m, params, domain, F, f, jac=None):
    if isinstance(domain, Interval):
        domain = (domain,) * m
    return NonlinearityModel(kind, int(m), dict(params), tuple(domain), F, f, jac)


def zero(m: int = 1) -> NonlinearityModel:
    """F = 0, f = 0: the harmonic / caloric case."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return _model("zero", m, {}, REALS,
                  lambda u: np.zeros(u.shape[1:]),
                  lambda u: np.zeros_like(u),
                  lambda u: np.zeros((m,) + u.shape))


def coupled_linear(c: float = 0.0) -> NonlinearityModel:
    """F(u, v) = u v + c, f = (v, u)."""
    c = float(c)

    def jac(u):
        J = np.zeros((2,) + u.shape)
        J[0, 1] = 1.0
        J[1, 0] = 1.0
        return J
    return _model("coupled_linear", 2, {"c": c}, REALS,
                  lambda u: u[0] * u[1] + c, lambda u: np.stack([u[1], u[0]]), jac)


def helmholtz(c: float = 0.0, m: int = 1) -> NonlinearityModel:
    """F = |u|^2/2 + c, f = u; the single-equation form of the coupled linear system."""
    c = float(c)

    def jac(u):
        J = np.zeros((m,) + u.shape)
        for i in range(m):
            J[i, i] = 1.0
        return J
    return _model("helmholtz", m, {"c": c}, REALS,
                  lambda u: 0.5 * np.sum(u * u, axis=0) + c, lambda u: u.copy(), jac)


def ginzburg_landau(epsilon: float = 1.0, m: int = 1) -> NonlinearityModel:
    """F = -(1 - |u|^2)^2 / (4 eps^2), f = u (1 - |u|^2) / eps^2.

    The sign of F is fixed by f = grad F for the equation
    Laplace(u) + u (1 - |u|^2) / eps^2 = 0.
    """
    eps = float(epsilon)
    if not eps > 0:
        raise ValueError("epsilon must be positive")
    e2 = eps * eps

    def F(u):
        s = np.sum(u * u, axis=0)
        return -(1.0 - s) ** 2 / (4.0 * e2)

    def f(u):
        s = np.sum(u * u, axis=0)
        return u * (1.0 - s) / e2

    def jac(u):
        s = np.sum(u * u, axis=0)
        J = -2.0 * u[:, None] * u[None, :] / e2
        for i in range(m):
            J[i, i] += (1.0 - s) / e2
        return J
    return _model("ginzburg_landau", m, {"epsilon": eps}, REALS, F, f, jac)


def _is_int(p: float) -> bool:
    return float(p).is_integer()


def coupled_power(p: float, q: float, c: float = 0.0) -> NonlinearityModel:
    """F = u^(p+1) v^(q+1) / ((p+1)(q+1)) + c with p, q >= 0."""
    p, q, c = float(p), float(q), float(c)
    if p < 0 or q < 0:
        raise ValueError("coupled power needs p >= 0 and q >= 0")
    a, b = p + 1.0, q + 1.0
    dom = (REALS if _is_int(p) else NONNEG, REALS if _is_int(q) else NONNEG)

    def F(u):
        return u[0] ** a * u[1] ** b / (a * b) + c

    def f(u):
        return np.stack([u[0] ** p * u[1] ** b / b, u[0] ** a * u[1] ** q / a])

    def jac(u):
        x, y = u[0], u[1]
        J = np.empty((2, 2) + x.shape)
        J[0, 0] = p * x ** (p - 1) * y ** b / b if p != 0 else 0.0
        J[0, 1] = x ** p * y ** q
        J[1, 0] = x ** p * y ** q
        J[1, 1] = q * x ** a * y ** (q - 1) / a if q != 0 else 0.0
        return J
    return _model("coupled_power", 2, {"p": p, "q": q, "c": c}, dom, F, f, jac)


def single_power(p: float, floor: float = DEFAULT_FLOOR) -> NonlinearityModel:
    """F = u^(p+1)/(p+1), f = u^p.

    Non-integer p restricts u to [0, inf); negative p to (floor, inf).
    """
    p = float(p)
    if p in (1.0, -1.0):
        raise ValueError("single power needs p != +-1 (use helmholtz or log_potential)")
    if p < 0:
        dom = _positive(floor)
    elif _is_int(p):
        dom = REALS
    else:
        dom = NONNEG
    a = p + 1.0

    def jac(u):
        if p == 0:
            return np.zeros((1,) + u.shape)
        return (p * u ** (p - 1.0))[None]
    return _model("single_power", 1, {"p": p, "floor": float(floor)}, dom,
                  lambda u: u[0] ** a / a, lambda u: u ** p, jac)


def log_potential(c: float = 0.0, floor: float = DEFAULT_FLOOR) -> NonlinearityModel:
    """F = log u + c, f = 1/u on (floor, inf)."""
    c = float(c)
    return _model("log_potential", 1, {"c": c, "floor": float(floor)}, _positive(floor),
                  lambda u: np.log(u[0]) + c, lambda u: 1.0 / u,
                  lambda u: (-1.0 / u ** 2)[None])


def custom(F, f=None, m: int = 1, domain: Sequence | None = None,
           n_check: int = 64, rtol: float = 1e-5, seed: int = 0) -> NonlinearityModel:
    """Model from a user potential.

    Args:
        F: expression string in u1..um (``u`` also allowed when m = 1) or a
            callable on arrays of shape (m, ...).
        f: callable gradient; central differences of F when omitted.
        domain: per-component (lo, hi) pairs; the reals by default.

    Raises:
        ValueError: when the supplied f disagrees with the gradient of F on a
            random sample of the domain.
    """
    expr = F if isinstance(F, str) else None
    Fc = compile_expression(F, m) if expr is not None else F
    dom = REALS if domain is None else tuple(
        d if isinstance(d, Interval) else Interval(float(d[0]), float(d[1]), True, True)
        for d in domain)
    given_f = f is not None
    fc = f if given_f else _central_gradient(Fc, m)
    model = _model("custom", m, {"F": expr} if expr else {}, dom,
                   lambda u: np.asarray(Fc(u), float), lambda u: np.asarray(fc(u), float))
    u = _sample_domain(model.domain, n_check, np.random.default_rng(seed))
    Fv = np.asarray(Fc(u), float)
    if not np.all(np.isfinite(Fv)):
        raise ValueError("custom F is not finite on its declared domain")
    if given_f:
        fd = _central_gradient(Fc, m)(u)
        fv = np.asarray(fc(u), float)
        err = np.abs(fv - fd)
        scale = np.maximum(1.0, np.abs(fd))
        if np.any(err > rtol * scale):
            k = int(np.argmax(err / scale))
            raise ValueError(
                f"custom f is not the gradient of F (mismatch {err.ravel()[k]!r} "
                f"at sample {u[:, k % u.shape[1]].tolist()})")
    return model


def _sample_domain(domain, n: int, rng) -> np.ndarray:
    cols = []
    for iv in domain:
        lo = iv.lo if np.isfinite(iv.lo) else -3.0
        hi = iv.hi if np.isfinite(iv.hi) else max(lo, 0.0) + 3.0
        if lo >= hi:
            hi = lo + 1.0
        span = hi - lo
        cols.append(rng.uniform(lo + 0.05 * span, hi - 0.05 * span, n))
    return np.array(cols)


KINDS = {
    "zero": zero,
    "coupled_linear": coupled_linear,
    "helmholtz": helmholtz,
    "ginzburg_landau": ginzburg_landau,
    "coupled_power": coupled_power,
    "single_power": single_power,
    "log_potential": log_potential,
    "custom": custom,
}


def builtin_models() -> dict:
    """One representative instance of every shipped model family."""
    return {
        "zero": zero(1),
        "coupled_linear": coupled_linear(0.0),
        "helmholtz": helmholtz(0.0),
        "ginzburg_landau": ginzburg_landau(1.0),
        "ginzburg_landau_eps0.5": ginzburg_landau(0.5),
        "coupled_power": coupled_power(0.5, 2.0),
        "single_power_p0.5": single_power(0.5),
        "single_power_p3": single_power(3.0),
        "single_power_p-0.5": single_power(-0.5),
        "log_potential": log_potential(),
    }


@dataclass
class GradientCheck:
    error_h: float
    error_h2: float
    ratio: float | None
    exact: bool
    passed: bool


def gradient_check(model: NonlinearityModel, n_points: int = 1000, h: float = 1e-2,
                   seed: int = 0, ratio_band=(3.5, 4.5), exact_tol: float = 1e-9
                   ) -> GradientCheck:
    """Compare f with central differences of F at steps h and h/2.

    Central differences are second order, so the error ratio sits near 4.
    Quadratic potentials are differenced exactly; their error stays at
    round-off and they pass through ``exact`` instead of the ratio test.
    """
    rng = np.random.default_rng(seed)
    u = _sample_domain(model.domain, n_points, rng)
    f = model.f(u)
    scale = np.maximum(1.0, np.abs(f))

    def err(step):
        worst = 0.0
        for i in range(model.m):
            up, um = u.copy(), u.copy()
            up[i] += step
            um[i] -= step
            fd = (model.F(up) - model.F(um)) / (2.0 * step)
            worst = max(worst, float(np.max(np.abs(fd - f[i]) / scale[i])))
        return worst

    e1, e2 = err(h), err(h / 2.0)
    exact = e1 <= exact_tol and e2 <= exact_tol
    ratio = e1 / e2 if e2 > 0 else None
    ok = exact or (ratio is not None and ratio_band[0] <= ratio <= ratio_band[1])
    return GradientCheck(e1, e2, ratio, exact, bool(ok))


def build_model(spec: dict) -> NonlinearityModel:
    """Model from a config block such as ``{"kind": "single_power", "p": 0.5}``."""
    spec = dict(spec)
    try:
        kind = spec.pop("kind")
    except KeyError:
        raise ValueError("model block needs a 'kind'") from None
    if kind not in KINDS:
        raise ValueError(f"unknown model kind {kind!r}; known: {sorted(KINDS)}")
    if kind == "custom" and "domain" in spec:
        spec["domain"] = [tuple(d) for d in spec["domain"]]
    try:
        return KINDS[kind](**spec)
    except TypeError as exc:
        raise ValueError(f"bad parameters for model {kind!r}: {exc}") from None


# --------------------------------------------------------------------------
# evaluation helpers


def evaluate_F(model: NonlinearityModel, u):
    return model.F(u)


def evaluate_f(model: NonlinearityModel, u):
    return model.f(u)


def interior_integrand(model: NonlinearityModel, beta: float, u):
    """2 (beta - 1) F(u) - beta u . f(u)."""
    u = np.asarray(u, float)
    F = model.F(u)
    f = model.f(u)
    return 2.0 * (beta - 1.0) * F - beta * np.sum(u * f, axis=0) if u.ndim > 1 \
        else 2.0 * (beta - 1.0) * F - beta * float(np.dot(u, f))


def gl_assertion_bracket(beta: float, s, epsilon: float = 1.0):
    """(1/(2 eps^2)) [(beta-1) - 2(2 beta-1) s + (3 beta-1) s^2] with s = |u|^2.

    This is the bracket obtained from the pair F = (1 - s)^2/(4 eps^2),
    f = u (1 - s)/eps^2, which is not a gradient pair; kept for comparison
    with the consistent model in :func:`ginzburg_landau`.
    """
    s = np.asarray(s, float)
    return ((beta - 1.0) - 2.0 * (2.0 * beta - 1.0) * s + (3.0 * beta - 1.0) * s * s) \
        / (2.0 * epsilon ** 2)


def gl_interior_closed_form(beta: float, s, epsilon: float = 1.0):
    """Interior integrand of :func:`ginzburg_landau` as a function of s = |u|^2."""
    s = np.asarray(s, float)
    return (-(beta - 1.0) - 2.0 * s + (beta + 1.0) * s * s) / (2.0 * epsilon ** 2)


@dataclass
class AdmissibilityReport:
    betas: list
    minima: list
    admissible: list
    tolerance: float
    probed: dict = field(default_factory=dict)

    def admissible_betas(self) -> list:
        return [b for b, ok in zip(self.betas, self.admissible) if ok]

    def to_dict(self) -> dict:
        return {"betas": list(self.betas), "minima": list(self.minima),
                "admissible": list(self.admissible), "tolerance": self.tolerance,
                "probed": self.probed}


def _box_samples(box, n_total: int) -> np.ndarray:
    m = len(box)
    per = max(3, int(round(n_total ** (1.0 / m))))
    axes = [np.linspace(lo, hi, per) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.array([g.ravel() for g in mesh])


def pointwise_beta_interval(model: NonlinearityModel, u_box, beta_range=(-10.0, 10.0),
                            n_beta: int = 81, n_samples: int = 40401,
                            rtol: float = 1e-9) -> AdmissibilityReport:
    """Scan beta for pointwise non-negativity of the interior integrand on a u-box.

    Args:
        u_box: one (lo, hi) pair per component (a bare pair is accepted for
            m = 1); sampled on a uniform tensor grid including the corners.
        beta_range: (beta_min, beta_max) of the uniform beta grid.
        rtol: the admissibility tolerance is rtol times the largest magnitude
            of the two integrand terms on the box.
    """
    box = [tuple(map(float, u_box))] if np.ndim(u_box) == 1 else [tuple(map(float, b)) for b in u_box]
    if len(box) != model.m:
        raise ValueError(f"u_box needs {model.m} intervals")
    if any(not hi >= lo for lo, hi in box):
        raise ValueError(f"empty u_box {box}")
    if n_beta < 2:
        raise ValueError("n_beta must be >= 2")
    U = _box_samples(box, n_samples)
    model.check(U)
    F = model.F(U)
    uf = np.sum(U * model.f(U), axis=0)
    betas = np.linspace(beta_range[0], beta_range[1], n_beta)
    minima, flags = [], []
    tol_max = 0.0
    for b in betas:
        vals = 2.0 * (b - 1.0) * F - b * uf
        scale = max(1.0, float(np.max(np.abs(2.0 * (b - 1.0) * F))),
                    float(np.max(np.abs(b * uf))))
        tol = rtol * scale
        tol_max = max(tol_max, tol)
        mn = float(vals.min())
        minima.append(mn)
        flags.append(bool(mn >= -tol))
    return AdmissibilityReport([float(b) for b in betas], minima, flags, tol_max,
                               {"u_box": [list(b) for b in box], "samples": int(U.shape[1])})


__all__ = [
    "Interval", "NonlinearityModel", "AdmissibilityReport", "zero", "coupled_linear",
    "helmholtz", "ginzburg_landau", "coupled_power", "single_power", "log_potential",
    "custom", "build_model", "evaluate_F", "evaluate_f", "interior_integrand",
    "pointwise_beta_interval", "gl_assertion_bracket", "gl_interior_closed_form",
    "compile_expression", "KINDS",
]
