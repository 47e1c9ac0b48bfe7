"""Built-in acceptance suite shared by ``monotone selftest`` and the test-suite.

Each criterion returns a :class:`CriterionResult` holding one or more
measured-vs-tolerance checks. Fixtures are built lazily and cached on a
:class:`Fixtures` object so criteria can share them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import blowup as B
from . import elliptic as E
from . import geometry as geo
from . import models as M
from . import parabolic as P
from . import solvers as S
from .fields import AnalyticField, Field, SpaceTimeField, noise_field, noise_spacetime
from .reports import csv_text, dumps


@dataclass
class Check:
    name: str
    measured: float
    tolerance: float
    passed: bool
    skipped: bool = False
    note: str = ""


@dataclass
class CriterionResult:
    number: int
    title: str
    checks: list = field(default_factory=list)

    @property
    def skipped(self) -> bool:
        return bool(self.checks) and all(c.skipped for c in self.checks)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if not c.skipped)

    @property
    def status(self) -> str:
        if self.skipped:
            return "SKIP"
        return "PASS" if self.passed else "FAIL"

    def worst(self) -> Check | None:
        live = [c for c in self.checks if not c.skipped]
        if not live:
            return None
        failing = [c for c in live if not c.passed]
        pool = failing or live
        return max(pool, key=lambda c: _ratio(c))

    def line(self) -> str:
        w = self.worst()
        if w is None:
            return f"criterion {self.number:>2} [{self.status}] {self.title}: all checks skipped"
        n_skip = sum(c.skipped for c in self.checks)
        extra = f", {n_skip} skipped" if n_skip else ""
        return (f"criterion {self.number:>2} [{self.status}] {self.title}: "
                f"{len(self.checks) - n_skip} checks{extra}; worst {w.name} "
                f"measured={w.measured!r} tol={w.tolerance!r}")


def _ratio(c: Check) -> float:
    if c.tolerance == 0:
        return math.inf if c.measured else 0.0
    return abs(c.measured) / abs(c.tolerance)


def _le(name, measured, tol, note=""):
    measured = float(measured)
    return Check(name, measured, float(tol), bool(measured <= tol), note=note)


def _skip(name, note):
    return Check(name, float("nan"), float("nan"), True, True, note)


# --------------------------------------------------------------------------
# fixtures


def _x1(n):
    def u(P):
        return P[:, 0][None]

    def g(P):
        out = np.zeros((1, n, len(P)))
        out[0, 0] = 1.0
        return out
    return u, g


def _x1x2(n):
    def u(P):
        return (P[:, 0] * P[:, 1])[None]

    def g(P):
        out = np.zeros((1, n, len(P)))
        out[0, 0] = P[:, 1]
        out[0, 1] = P[:, 0]
        return out
    return u, g


class Fixtures:
    """Desk-scale fields: n=1 on 2001 nodes, n=2 on 257^2, n=3 on 97^3."""

    X0_1 = [0.25]
    T = 0.25

    @cached_property
    def grid1(self):
        return geo.CartesianGrid((-4.0,), (4.0,), (2001,))

    @cached_property
    def grid2(self):
        return geo.CartesianGrid.cube(2, 1.2, 257)

    @cached_property
    def grid3(self):
        return geo.CartesianGrid.cube(3, 1.2, 97)

    @cached_property
    def zero(self):
        return M.zero(1)

    @cached_property
    def x1_3(self) -> Field:
        u, g = _x1(3)
        return AnalyticField(3, 1, u, g, model=self.zero).on_grid(self.grid3)

    @cached_property
    def x1x2_3(self) -> Field:
        u, g = _x1x2(3)
        return AnalyticField(3, 1, u, g, model=self.zero).on_grid(self.grid3)

    def exact1(self, name, **params) -> Field:
        return S.exact_solution(name, self.grid1, params)

    @cached_property
    def elliptic_fixtures(self) -> dict:
        return {
            "x1_n3": (self.x1_3, self.zero, [0.0, 0.0, 0.0]),
            "linear_sin": (self.exact1("linear_sin"), M.coupled_linear(0.0), self.X0_1),
            "helmholtz_sin": (self.exact1("helmholtz_sin"), M.helmholtz(0.0), self.X0_1),
            "gl_kink": (self.exact1("gl_kink"), M.ginzburg_landau(1.0), self.X0_1),
        }

    @cached_property
    def stgrid1(self):
        space = geo.CartesianGrid((-8.0,), (8.0,), (2001,))
        return geo.SpaceTimeGrid.from_step(space, 0.0, 2 * self.T, 1e-4)

    @cached_property
    def caloric(self) -> SpaceTimeField:
        return S.exact_solution("caloric_linear", self.stgrid1)

    @cached_property
    def exp_growth(self) -> SpaceTimeField:
        return S.exact_solution("exp_growth", self.stgrid1)

    @cached_property
    def noise_st(self) -> SpaceTimeField:
        space = geo.CartesianGrid((-8.0,), (8.0,), (401,))
        return noise_spacetime(geo.SpaceTimeGrid.from_step(space, 0.0, self.T, 1e-3), seed=3)

    @cached_property
    def obstacle(self):
        """Simulated free-boundary fixture: (field, chi, T, x0)."""
        space = geo.CartesianGrid((-2.0,), (2.0,), (801,))
        st = geo.SpaceTimeGrid.from_step(space, 0.0, 1.0, 2e-3)
        init = S.discrete_obstacle_profile(space)
        fld, chi = S.simulate_free_boundary(st, init, thresholds=S.obstacle_thresholds(space))
        return fld, chi, 1.0, [-0.1]


# --------------------------------------------------------------------------
# criteria


def criterion_1(fx: Fixtures) -> CriterionResult:
    res = CriterionResult(1, "gradient structure f = grad F")
    for name, model in M.builtin_models().items():
        gc = M.gradient_check(model, n_points=1000)
        if gc.exact:
            res.checks.append(_le(f"{name}:error", gc.error_h2, 1e-9, "quadratic F, exact"))
        else:
            res.checks.append(_le(f"{name}:|ratio-4|", abs(gc.ratio - 4.0), 0.5))
    return res


def criterion_2(fx: Fixtures) -> CriterionResult:
    res = CriterionResult(2, "geometry oracles")
    r = 0.7
    for n in (2, 3):
        s_n = geo.unit_sphere_area(n)
        x0 = np.zeros(n)
        one = geo.sphere_integral(lambda p: np.ones(len(p)), x0, r)
        exact = s_n * r ** (n - 1)
        res.checks.append(_le(f"n{n}:sphere_1", abs(one - exact) / exact, 1e-8))
        m2 = geo.sphere_integral(lambda p: p[:, 0] ** 2, x0, r)
        exact = s_n * r ** (n + 1) / n
        res.checks.append(_le(f"n{n}:sphere_x1^2", abs(m2 - exact) / exact, 1e-8))
        m4 = geo.sphere_integral(lambda p: p[:, 0] ** 4, x0, r)
        exact = 3.0 * s_n * r ** (n + 3) / (n * (n + 2))
        res.checks.append(_le(f"n{n}:sphere_x1^4", abs(m4 - exact) / exact, 1e-8))
    for n in (1, 2, 3):
        mass = geo.kernel_mass(n, 0.5)
        res.checks.append(_le(f"n{n}:kernel_mass", abs(mass.value - 1.0), 1e-6))
        res.checks.append(_le(f"n{n}:heat_residual", geo.kernel_heat_residual(n, 0.5), 1e-4))
    return res


def criterion_3(fx: Fixtures) -> CriterionResult:
    res = CriterionResult(3, "elliptic Pohozaev and integration-by-parts identities")
    for name, (fld, model, x0) in fx.elliptic_fixtures.items():
        radii = (0.5, 1.0) if fld.n == 3 else (0.5, 1.0, 2.0)
        for r in radii:
            for rep in (E.pohozaev_report(fld, model, x0, r), E.ibp_report(fld, model, x0, r)):
                res.checks.append(_le(f"{name}:{rep.name}@{r}", rep.residual, rep.tolerance))
    # negative control: noise must miss by more than 10x the tolerance
    noise = noise_field(fx.grid1, 1, seed=1)
    model = M.helmholtz(0.0)
    for r in (0.5, 1.0):
        for rep in (E.pohozaev_report(noise, model, fx.X0_1, r),
                    E.ibp_report(noise, model, fx.X0_1, r)):
            ratio = 10.0 * rep.tolerance / rep.residual
            res.checks.append(_le(f"noise:{rep.name}@{r}:10tol/residual", ratio, 1.0))
    return res


def criterion_4(fx: Fixtures) -> CriterionResult:
    res = CriterionResult(4, "elliptic monotonicity identity and boundary summand sign")
    setups = {"x1_n3": (1.5, 0.2, 1.0, 6), "linear_sin": (2.0, 0.2, 2.0, 16),
              "helmholtz_sin": (2.0, 0.2, 2.0, 16), "gl_kink": (2.0, 0.2, 2.0, 16)}
    for name, (fld, model, x0) in fx.elliptic_fixtures.items():
        beta, a, b, nq = setups[name]
        scan = E.phi_scan(fld, model, x0, beta, a, b, n_r=11, n_quad_r=nq)
        res.checks.append(_le(f"{name}:identity(10 pairs)", scan.identity_residual_max,
                              scan.identity_tolerance))
        res.checks.append(_le(f"{name}:-min(boundary summand)",
                              -min(scan.column("dphi_bdry").min(), 0.0), 0.0))
    noise = noise_field(fx.grid1, 1, seed=2)
    bd = [E.phi_derivative_decomposition(noise, M.helmholtz(0.0), fx.X0_1, 2.0, r)[0]
          for r in np.linspace(0.1, 2.0, 11)]
    res.checks.append(_le("noise:-min(boundary summand)", -min(min(bd), 0.0), 0.0))
    return res


def criterion_5(fx: Fixtures) -> CriterionResult:
    res = CriterionResult(5, "homogeneous invariance of Phi")
    radii = np.linspace(0.2, 1.0, 9)
    for name, fld, beta in (("x1", fx.x1_3, 1.0), ("x1x2", fx.x1x2_3, 2.0)):
        vals = np.array([E.phi(fld, fx.zero, [0.0, 0.0, 0.0], beta, r).value for r in radii])
        spread = float(vals.max() - vals.min())
        tol = 1e-3 * (1.0 + float(np.max(np.abs(vals))))
        res.checks.append(_le(f"{name}:spread", spread, tol))
        if name == "x1":
            res.checks.append(_le("x1:max|Phi|", float(np.max(np.abs(vals))), 1e-3))
    return res


def criterion_6(fx: Fixtures) -> CriterionResult:
    res = CriterionResult(6, "beta-admissibility intervals")
    rep = M.pointwise_beta_interval(M.single_power(0.5), (0.0, 2.0))
    betas = np.asarray(rep.betas)
    adm = np.asarray(rep.admissible)
    res.checks.append(_le("p=1/2:mismatches with beta>=4",
                          int(np.sum(adm != (betas >= 4.0 - 1e-12))), 0))
    rep = M.pointwise_beta_interval(M.single_power(3.0), (-2.0, 2.0))
    betas = np.asarray(rep.betas)
    adm = np.asarray(rep.admissible)
    res.checks.append(_le("p=3:mismatches with beta<=-1",
                          int(np.sum(adm != (betas <= -1.0 + 1e-12))), 0))
    theta = np.linspace(0.0, 2 * np.pi, 17)
    for beta in (1.5, 2.0, 3.0):
        v1 = M.interior_integrand(M.ginzburg_landau(1.0), beta, np.array([[1.0, -1.0]]))
        v2 = M.interior_integrand(M.ginzburg_landau(1.0, m=2), beta,
                                  np.stack([np.cos(theta), np.sin(theta)]))
        worst = max(float(np.max(np.abs(v1))), float(np.max(np.abs(v2))))
        res.checks.append(_le(f"GL beta={beta}:|integrand| at |u|=1", worst, 1e-12))
    return res


def criterion_7(fx: Fixtures) -> CriterionResult:
    res = CriterionResult(7, "caloric invariance of Psi-minus")
    fld, model = fx.caloric, fx.caloric.model
    for r in np.linspace(0.05, 0.2, 4):
        v = P.psi(fld, model, fx.T, [0.0], 1.0, r).value
        res.checks.append(_le(f"|Psi-|@{r:.3g}", abs(v), 1e-3))
        _, resid = P.psi_derivative_decomposition(fld, model, fx.T, [0.0], 1.0, r)
        res.checks.append(_le(f"residual part@{r:.3g}", abs(resid), 1e-6))
    return res


def criterion_8(fx: Fixtures) -> CriterionResult:
    res = CriterionResult(8, "parabolic monotonicity identity, both sides")
    plus_ok = geo.settings().kernel_plus_convention != "literal"
    for name, fld, beta in (("caloric_linear", fx.caloric, 1.0),
                            ("exp_growth", fx.exp_growth, 2.0)):
        for side in ("minus", "plus"):
            tag = f"{name}:{side}"
            if side == "plus" and not plus_ok:
                res.checks.append(_skip(tag, "literal kernel convention"))
                continue
            rep = P.verify_monotonicity_parabolic(fld, fld.model, fx.T, [0.0], beta, 0.05, 0.2,
                                                  side=side, n_quad_r=8)
            res.checks.append(_le(tag, rep.residual, rep.tolerance))
    for name, fld, model in (("caloric_linear", fx.caloric, fx.caloric.model),
                             ("exp_growth", fx.exp_growth, fx.exp_growth.model),
                             ("noise", fx.noise_st, M.helmholtz(0.0))):
        worst = 0.0
        for r in (0.05, 0.1, 0.2):
            _, resid = P.psi_derivative_decomposition(model=model, field=fld, T=fx.T, x0=[0.0],
                                                      beta=2.0, r=r)
            worst = min(worst, resid)
        res.checks.append(_le(f"{name}:-min(residual summand)", -worst, 0.0))
    return res


def criterion_9(fx: Fixtures) -> CriterionResult:
    res = CriterionResult(9, "free-boundary envelope")
    fld, chi, T, x0 = fx.obstacle
    model = fld.model
    beta = 2.0
    zero = SpaceTimeField(fld.stgrid, np.zeros_like(fld.values), "exact", model)
    C = 0.37
    worst = 0.0
    for r in np.linspace(0.1, 0.45, 5):
        v = P.psi_free_boundary(zero, model, chi, T, x0, beta, r, C=C).value
        ce = C * geo.error_integral_E(r, 1, beta)
        worst = max(worst, abs(v - ce) / max(1.0, abs(ce)))
    res.checks.append(_le("u=0:|Psi - C E|", worst, 1e-12))
    for n in (1, 2, 3):
        rr = np.linspace(0.05, 0.5, 50)
        Ev = np.array([geo.error_integral_E(r, n, beta) for r in rr])
        res.checks.append(_le(f"E n={n}:non-increasing steps", int(np.sum(np.diff(Ev) <= 0)), 0))
    radii = np.linspace(0.1, 0.45, 8)
    cal = P.calibrate_C(fld, model, chi, T, x0, beta, radii)
    scan = P.psi_scan(fld, model, T, x0, beta, radii=radii, chi=chi, C=cal.C)
    res.checks.append(_le("(*) fixture:violations", scan.violations, 0,
                          f"calibrated C={cal.C!r}"))
    res.checks.append(_le("(*) fixture:identity", scan.identity_residual_max,
                          scan.identity_tolerance))
    return res


def criterion_10(fx: Fixtures) -> CriterionResult:
    res = CriterionResult(10, "blow-up degree and residual decay")
    radii = np.linspace(0.2, 1.0, 9)
    for beta in (0.5, 1.0, 1.5, 2.0):
        f = S.manufactured_homogeneous(beta, lambda d: 1.0 + 0.3 * d[:, 0] ** 2, fx.grid2)
        est = B.estimate_degree(f, [0.0, 0.0], radii)
        res.checks.append(_le(f"degree {beta}", abs(est - beta), 1e-3))
    gk = fx.elliptic_fixtures["gl_kink"][0]
    rep = B.blowup_study(gk, [0.0], 1.0, [0.4, 0.2, 0.1, 0.05])
    ups = int(np.sum(np.diff(rep.residuals) >= 0))
    res.checks.append(_le("gl_kink:residual increases", ups, 0))
    res.checks.append(_le("gl_kink:|beta_hat-1|", abs(rep.beta_hat - 1.0), 0.02))
    return res


def criterion_11(fx: Fixtures) -> CriterionResult:
    """In-process repeatability probe; the two-run byte comparison lives in the tests."""
    res = CriterionResult(11, "deterministic report rendering")
    fld, model, x0 = fx.elliptic_fixtures["gl_kink"]
    a = E.phi_scan(fld, model, x0, 2.0, 0.5, 1.5, n_r=4, check_identity=False)
    b = E.phi_scan(fld, model, x0, 2.0, 0.5, 1.5, n_r=4, check_identity=False)
    same = a.csv() == b.csv() and dumps(a) == dumps(b)
    res.checks.append(_le("repeat:differing bytes", 0 if same else 1, 0))
    return res


CRITERIA = (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10, criterion_11)


def run_suite(only=None, fixtures: Fixtures | None = None, on_result=None) -> list:
    fx = fixtures or Fixtures()
    out = []
    for fn in CRITERIA:
        num = int(fn.__name__.split("_")[1])
        if only and num not in only:
            continue
        r = fn(fx)
        out.append(r)
        if on_result:
            on_result(r)
    return out


SUITE_COLUMNS = ["criterion", "title", "check", "measured", "tolerance", "status", "note"]


def suite_rows(results) -> list:
    rows = []
    for r in results:
        for c in r.checks:
            status = "SKIP" if c.skipped else ("PASS" if c.passed else "FAIL")
            rows.append({"criterion": r.number, "title": r.title, "check": c.name,
                         "measured": c.measured, "tolerance": c.tolerance,
                         "status": status, "note": c.note})
    return rows


def suite_csv(results) -> str:
    return csv_text(SUITE_COLUMNS, suite_rows(results))


def suite_json(results, settings=None) -> str:
    return dumps({"criteria": [{"number": r.number, "title": r.title, "status": r.status,
                                "checks": r.checks} for r in results],
                  "quadrature": settings if settings is not None else geo.settings(),
                  "passed": all(r.passed for r in results)})
