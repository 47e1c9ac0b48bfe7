"""Command line front end: ``monotone run``, ``monotone selftest``, ``monotone field convert``.

Exit status: 0 on success, 2 when an identity or monotonicity check fails
beyond tolerance, 1 on usage, configuration or domain errors.
"""

from __future__ import annotations

import argparse
import logging
import os
import platform
import sys
import time

import numpy as np
import scipy

from . import __version__
from . import acceptance, blowup as B, config as C, elliptic as E, geometry as geo
from . import models as M, parabolic as P, solvers as S
from ._quad import ADMISSIBLE_RTOL, QUAD_FLOOR
from .errors import ConfigError, FieldNotSolutionError, MonotoneError
from .fields import (AnalyticField, Field, RadialField, SpaceTimeField, is_field_file,
                     noise_field, noise_spacetime, read_csv_table, read_field,
                     write_csv_table, write_field)
from .reports import IDENTITY_COLUMNS, clean, csv_text, dumps, write_text

log = logging.getLogger("monotone")

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


class TaskOutcome:
    """What a task hands back to ``run``: report payload, CSV text, pass flag."""

    def __init__(self, report: dict, table: str, passed: bool, extra_files=None,
                 tolerances=None, truncation=None):
        self.report = report
        self.table = table
        self.passed = passed
        self.extra_files = dict(extra_files or {})
        self.tolerances = dict(tolerances or {})
        self.truncation = list(truncation or [])


# --------------------------------------------------------------------------
# config -> objects


def build_grid(cfg: dict):
    g = cfg["grid"]
    kind = g.get("type", "cartesian")
    if kind == "radial":
        n = int(C.number(g, "n", "grid"))
        return geo.RadialGrid(n, C.number(g, "r_max", "grid", positive=True),
                              int(C.number(g, "count", "grid")))
    if "counts" in g or "lo" in g:
        lo = C.number_list(g, "lo", "grid")
        hi = C.number_list(g, "hi", "grid", length=len(lo))
        counts = [int(c) for c in C.number_list(g, "counts", "grid", length=len(lo))]
        space = geo.CartesianGrid(tuple(lo), tuple(hi), tuple(counts))
    else:
        n = int(C.number(g, "n", "grid"))
        center = C.number_list(g, "center", "grid", default=[0.0] * n, length=n)
        space = geo.CartesianGrid.cube(n, C.number(g, "half_width", "grid", positive=True),
                                       int(C.number(g, "count", "grid")), center)
    if kind == "cartesian":
        return space
    t1 = C.number(g, "t1", "grid")
    t2 = C.number(g, "t2", "grid")
    if "dt" in g:
        return geo.SpaceTimeGrid.from_step(space, t1, t2, C.number(g, "dt", "grid", positive=True))
    return geo.SpaceTimeGrid(space, t1, t2, int(C.number(g, "slices", "grid")))


def build_model(cfg: dict):
    if "model" not in cfg:
        return None
    try:
        return M.build_model(cfg["model"])
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from None


def _path(cfg, p):
    base = cfg.get("_meta", {}).get("config_dir", os.getcwd())
    return p if os.path.isabs(p) else os.path.join(base, p)


def build_field(cfg: dict, grid, model):
    """Field described by the [field] table, or None when the task needs none."""
    f = cfg.get("field")
    if f is None:
        return None
    src = f.get("source", "exact")
    st = isinstance(grid, geo.SpaceTimeGrid)
    if src == "exact":
        name = C._need(f, "name", "field", str)
        try:
            fld = S.exact_solution(name, grid, f.get("params", {}))
        except KeyError as exc:
            raise ConfigError(f"field.name: {exc.args[0]}") from None
        if model is not None:
            fld.model = model
        return fld
    if src == "analytic":
        name = C._need(f, "name", "field", str)
        n = grid.n
        a = S.exact_analytic(name, n, f.get("params", {}), grid.space if st else grid)
        if st:
            a.time_range = (grid.t1, grid.t2)
        if model is not None:
            a.model = model
        return a
    if src == "manufactured":
        if st:
            raise ConfigError("field.source: manufactured fields are elliptic only")
        beta = C.number(f, "beta", "field")
        expr = f.get("profile", "1")
        prof = M.compile_expression(str(expr), grid.n, prefix="d")
        x0 = C.number_list(f, "x0", "field", default=[0.0] * grid.n, length=grid.n)
        excl = f.get("exclusion_radius")
        return S.manufactured_homogeneous(beta, lambda d: prof(d.T), grid, x0, excl, model)
    if src == "radial":
        if not isinstance(grid, geo.RadialGrid):
            raise ConfigError("field.source: radial fields need grid.type = 'radial'")
        prof = M.compile_expression(str(C._need(f, "profile", "field", str)), 1, prefix="r")
        return RadialField(grid, prof(grid.nodes[None]), "exact", model)
    if src == "noise":
        m = int(f.get("m", model.m if model else 1))
        seed = int(f.get("seed", 0))
        amp = C.number(f, "amplitude", "field", default=1.0)
        fld = noise_spacetime(grid, m, seed, amp) if st else noise_field(grid, m, seed, amp)
        fld.model = model
        return fld
    if src == "zero":
        m = model.m if model else 1
        if st:
            return SpaceTimeField(grid, np.zeros((grid.slices, m) + grid.space.counts),
                                  "exact", model)
        return Field(grid, np.zeros((m,) + grid.counts), "exact", model)
    if src == "file":
        p = _path(cfg, C._need(f, "path", "field", str))
        try:
            fld = read_field(p, model) if is_field_file(p) else read_csv_table(p, model)
        except OSError as exc:
            raise ConfigError(f"field.path: cannot read {p}: {exc.strerror}") from None
        return fld
    if src == "solve":
        if model is None:
            raise ConfigError("field.source = 'solve' needs a [model] table")
        return _solve(cfg, grid, model)[0]
    raise ConfigError(f"field.source: unknown {src!r}; expected exact, analytic, manufactured, "
                      "radial, noise, zero, file or solve")


def _boundary(cfg, grid, model):
    f = cfg.get("field", {})
    b = f.get("boundary", f.get("name"))
    if b is None:
        raise ConfigError("field.boundary: give a catalog name or a constant")
    if isinstance(b, (int, float)) and not isinstance(b, bool):
        return float(b), None
    if isinstance(b, list):
        return [float(v) for v in b], None
    try:
        a = S.exact_analytic(str(b), grid.n, f.get("params", {}))
    except KeyError as exc:
        raise ConfigError(f"field.boundary: {exc.args[0]}") from None
    return a, a


def _solve(cfg, grid, model):
    scfg = S.SolverConfig(**cfg.get("solver", {}))
    if isinstance(grid, geo.SpaceTimeGrid):
        bnd, ref = _boundary(cfg, grid.space, model)
        if ref is not None and hasattr(ref, "sample_dt"):
            init = Field(grid.space, ref.sample(grid.t1, grid.space.points()).reshape(
                (ref.m,) + grid.space.counts), "exact", model)
            boundary = ref.sample
        else:
            val = np.broadcast_to(np.asarray(bnd, float).reshape(-1, 1),
                                  (model.m, int(np.prod(grid.space.counts))))
            init = Field(grid.space, val.reshape((model.m,) + grid.space.counts), "exact", model)
            boundary = "fixed"
        return S.solve_parabolic(model, grid, init, boundary, scfg), ref, scfg
    bnd, ref = _boundary(cfg, grid, model)
    data = ref.sample if ref is not None else bnd
    return S.solve_elliptic(model, grid, data, scfg), ref, scfg


# --------------------------------------------------------------------------
# task helpers


def _x0(task, n):
    return C.number_list(task, "x0", "task", default=[0.0] * n, length=n)


def _radii(task, default=None):
    if "radii" in task:
        r = C.number_list(task, "radii", "task")
    elif "r_min" in task or "r_max" in task:
        a = C.number(task, "r_min", "task", positive=True)
        b = C.number(task, "r_max", "task", positive=True)
        k = int(C.number(task, "n_r", "task", default=9))
        if not a < b or k < 2:
            raise ConfigError("task: need r_min < r_max and n_r >= 2")
        r = list(np.linspace(a, b, k))
    elif default is not None:
        r = list(default)
    else:
        raise ConfigError("task.radii: missing (or give r_min, r_max, n_r)")
    if any(not x > 0 for x in r):
        raise ConfigError(f"task.radii: radii must be positive, got {r}")
    return [float(x) for x in r]


def _require(obj, what):
    if obj is None:
        raise ConfigError(f"this task needs {what}")
    return obj


def _model_of(model, fld):
    m = model if model is not None else getattr(fld, "model", None)
    if m is None:
        raise ConfigError("no [model] table and the field carries no model")
    return m


def _sides(task):
    s = task.get("sides", task.get("side", ["minus"]))
    s = [s] if isinstance(s, str) else list(s)
    for v in s:
        if v not in ("minus", "plus"):
            raise ConfigError(f"task.sides: unknown side {v!r}")
    return s


def _functional_tolerances(fld):
    return {"identity_factor": 10.0, "quad_floor": QUAD_FLOOR,
            "admissible_rtol": ADMISSIBLE_RTOL, "h": float(getattr(fld, "h", 0.0) or 0.0),
            "dt": float(getattr(fld, "dt", 0.0) or 0.0)}


# --------------------------------------------------------------------------
# tasks


def task_solve_elliptic(cfg, grid, model, fld):
    model = _require(model, "a [model] table")
    out, ref, scfg = _solve(cfg, grid, model)
    res = float(np.abs(S.elliptic_residual(out, model)).max())
    rep = {"task": "solve-elliptic", "residual_max": res, "method": out.metadata["method"],
           "iterations": out.metadata["iterations"], "history": out.metadata["history"]}
    if ref is not None:
        exact = ref.sample(grid.points()).reshape(out.values.shape)
        rep["error_max"] = float(np.abs(out.values - exact).max())
    rows = [{"iteration": k, "residual": v} for k, v in enumerate(out.metadata["history"])]
    name = cfg.get("output", {}).get("field", "solution.field")
    return TaskOutcome(rep, csv_text(["iteration", "residual"], rows),
                       res <= max(scfg.tol, 1e-300) * 10, {name: out},
                       {"solver": vars(scfg)})


def task_solve_parabolic(cfg, grid, model, fld):
    model = _require(model, "a [model] table")
    out, ref, scfg = _solve(cfg, grid, model)
    rows = []
    for k, t in enumerate(out.times):
        row = {"t": float(t), "max_abs_u": float(np.abs(out.values[k]).max())}
        if ref is not None and hasattr(ref, "sample_dt"):
            ex = ref.sample(t, grid.space.points()).reshape(out.values[k].shape)
            row["error_max"] = float(np.abs(out.values[k] - ex).max())
        rows.append(row)
    stride = max(1, len(rows) // 100)
    table_rows = rows[::stride] + ([rows[-1]] if (len(rows) - 1) % stride else [])
    rep = {"task": "solve-parabolic", "slices": grid.slices, "dt": grid.dt,
           "final_error_max": rows[-1].get("error_max")}
    name = cfg.get("output", {}).get("field", "solution.field")
    return TaskOutcome(rep, csv_text(["t", "max_abs_u", "error_max"], table_rows), True,
                       {name: out}, {"solver": vars(scfg)})


def task_phi_scan(cfg, grid, model, fld):
    fld = _require(fld, "a [field] table")
    model = _model_of(model, fld)
    task = cfg["task"]
    beta = C.number(task, "beta", "task")
    radii = _radii(task)
    rep = E.phi_scan(fld, model, _x0(task, fld.n), beta, 0, 0, radii=radii,
                     check_identity=bool(task.get("check_identity", True)),
                     n_quad_r=int(task.get("n_quad_r", 8)))
    ok = rep.violations == 0 and rep.identity_residual_max <= rep.identity_tolerance
    return TaskOutcome(rep.to_dict(), rep.csv(), ok, tolerances=rep.tolerances)


def task_psi_scan(cfg, grid, model, fld):
    fld = _require(fld, "a [field] table")
    model = _model_of(model, fld)
    task = cfg["task"]
    beta = C.number(task, "beta", "task")
    T = C.number(task, "T", "task")
    radii = _radii(task)
    reps, csvs, ok, trunc = [], [], True, []
    for side in _sides(task):
        rep = P.psi_scan(fld, model, T, _x0(task, fld.n), beta, radii=radii, side=side,
                         check_identity=bool(task.get("check_identity", True)),
                         n_quad_r=int(task.get("n_quad_r", 8)))
        reps.append(rep.to_dict())
        csvs.append(rep.csv() if not csvs else rep.csv().split("\n", 1)[1])
        ok &= rep.violations == 0 and rep.identity_residual_max <= rep.identity_tolerance
        trunc += [{"side": side, "r": r["r"], "trunc_bound": r["trunc_bound"]} for r in rep.rows]
    return TaskOutcome({"task": "psi-scan", "scans": reps}, "".join(csvs), ok,
                       tolerances=reps[0]["tolerances"], truncation=trunc)


def task_verify(cfg, grid, model, fld):
    fld = _require(fld, "a [field] table")
    model = _model_of(model, fld)
    task = cfg["task"]
    x0 = _x0(task, fld.n)
    radii = _radii(task)
    beta = task.get("beta")
    reports = []
    gate_error = None
    st = hasattr(fld, "sample_dt")
    if st:
        T = C.number(task, "T", "task")
        for side in _sides(task):
            for r in radii:
                reports.append(P.parabolic_ibp_report(fld, model, T, x0, r, side))
    else:
        for r in radii:
            reports.append(E.pohozaev_report(fld, model, x0, r))
            reports.append(E.ibp_report(fld, model, x0, r))
    if beta is not None and len(radii) >= 2:
        beta = C.number(task, "beta", "task")
        pairs = task.get("pairs") or [[radii[0], radii[-1]]]
        nq = int(task.get("n_quad_r", 16))
        try:
            for rho, sigma in pairs:
                if st:
                    for side in _sides(task):
                        reports.append(P.verify_monotonicity_parabolic(
                            fld, model, T, x0, beta, rho, sigma, side=side, n_quad_r=nq))
                else:
                    reports.append(E.verify_monotonicity_elliptic(fld, model, x0, beta, rho,
                                                                  sigma, n_quad_r=nq))
        except FieldNotSolutionError as exc:
            gate_error = {"message": str(exc), "residual": exc.residual,
                          "tolerance": exc.tolerance}
    ok = all(r.passed for r in reports) and gate_error is None
    body = {"task": "verify", "reports": [r.to_dict() for r in reports],
            "gate_error": gate_error, "passed": ok}
    trunc = [{"name": r.name, "radii": r.radii, "trunc_bound": r.details.get("trunc_bound")}
             for r in reports if "trunc_bound" in r.details]
    return TaskOutcome(body, csv_text(IDENTITY_COLUMNS, [r.row() for r in reports]), ok,
                       tolerances=_functional_tolerances(fld), truncation=trunc)


def task_beta_scan(cfg, grid, model, fld):
    task = cfg["task"]
    model = _model_of(model, fld)
    lo, hi = C.number_list(task, "beta_range", "task", default=[-10.0, 10.0], length=2)
    n_beta = int(C.number(task, "n_beta", "task", default=81))
    box = task.get("u_box")
    body = {"task": "beta-scan"}
    betas = list(np.linspace(lo, hi, n_beta))
    rows = [{"beta": b} for b in betas]
    cols = ["beta"]
    if box is not None:
        rtol = C.number(task, "rtol", "task", default=1e-9)
        rep = M.pointwise_beta_interval(model, box, (lo, hi), n_beta, rtol=rtol)
        body["pointwise"] = rep.to_dict()
        body["pointwise_admissible_betas"] = rep.admissible_betas()
        for row, mn, ok in zip(rows, rep.minima, rep.admissible):
            row["pointwise_min"] = mn
            row["pointwise_admissible"] = ok
        cols += ["pointwise_min", "pointwise_admissible"]
    if fld is not None and not hasattr(fld, "sample_dt"):
        x0 = _x0(task, fld.n)
        radii = _radii(task, default=[])
        for r in radii:
            key = f"margin_r{r!r}"
            cols += [key, f"admissible_r{r!r}"]
            for row in rows:
                a = E.beta_admissible_elliptic(fld, model, x0, row["beta"], r)
                row[key] = a.margin
                row[f"admissible_r{r!r}"] = a.admissible
    if box is None and (fld is None or len(cols) == 1):
        raise ConfigError("beta-scan needs task.u_box or a field with task.radii")
    body["rows"] = rows
    return TaskOutcome(body, csv_text(cols, rows), True,
                       tolerances={"admissible_rtol": ADMISSIBLE_RTOL})


def task_free_boundary(cfg, grid, model, fld):
    task = cfg["task"]
    if not isinstance(grid, geo.SpaceTimeGrid):
        raise ConfigError("free-boundary needs a spacetime grid")
    space = grid.space
    init_kind = task.get("initial", "obstacle")
    if init_kind == "obstacle":
        init = S.discrete_obstacle_profile(space, C.number(task, "a", "task", default=0.0))
    else:
        init = _require(fld, "a [field] table for the initial slice")
        if hasattr(init, "slice"):
            init = init.slice(0)
    th = task.get("thresholds")
    if th is None:
        thresholds = S.obstacle_thresholds(space) if init_kind == "obstacle" else None
    else:
        thresholds = tuple(C.number_list(task, "thresholds", "task", length=2))
    fmodel = model or S.obstacle_model()
    scfg = S.SolverConfig(**cfg.get("solver", {}))
    sim, chi = S.simulate_free_boundary(grid, init, fmodel, scfg, thresholds)
    T = C.number(task, "T", "task", default=grid.t2)
    x0 = _x0(task, space.n)
    beta = C.number(task, "beta", "task")
    radii = _radii(task)
    if "C" in task:
        Cval = C.number(task, "C", "task")
        cal = None
    else:
        cal = P.calibrate_C(sim, fmodel, chi, T, x0, beta, radii)
        Cval = cal.C
    scan = P.psi_scan(sim, fmodel, T, x0, beta, radii=radii, chi=chi, C=Cval,
                      n_quad_r=int(task.get("n_quad_r", 8)))
    ok = scan.violations == 0 and scan.identity_residual_max <= scan.identity_tolerance
    body = {"task": "free-boundary", "C": Cval,
            "calibration": None if cal is None else clean(cal),
            "thresholds": list(thresholds) if thresholds else None,
            "scan": scan.to_dict()}
    files = {}
    if cfg.get("output", {}).get("field"):
        files[cfg["output"]["field"]] = sim
    tol = dict(scan.tolerances)
    tol["thresholds"] = list(thresholds) if thresholds else "default (10 h^2 max(1, |u|))"
    return TaskOutcome(body, scan.csv(), ok, files, tol,
                       [{"r": r["r"], "trunc_bound": r["trunc_bound"]} for r in scan.rows])


def task_blowup(cfg, grid, model, fld):
    fld = _require(fld, "a [field] table")
    task = cfg["task"]
    beta = C.number(task, "beta", "task")
    rhos = C.number_list(task, "rho", "task")
    window = task.get("window")
    if hasattr(fld, "sample_dt"):
        center = (C.number(task, "T", "task"), _x0(task, fld.n))
    else:
        center = _x0(task, fld.n)
    rep = B.blowup_study(fld, center, beta, rhos, window, model=model,
                         keep_fields=bool(task.get("dump_fields", False)))
    files = {f"rescaled_rho{r!r}.field": u for r, u in zip(rep.scales, rep.fields)}
    ok = all(np.isfinite(rep.norms))
    return TaskOutcome(rep.to_dict(), rep.csv(), ok, files,
                       {"growth_factor": 10.0, "degenerate_slope": 0.5})


def task_kernel_check(cfg, grid, model, fld):
    task = cfg.get("task", {})
    dims = [int(d) for d in task.get("dims", [1, 2, 3])]
    taus = C.number_list(task, "taus", "task", default=[0.5])
    mass_tol = C.number(task, "mass_tolerance", "task", default=1e-6)
    heat_tol = C.number(task, "heat_tolerance", "task", default=1e-4)
    rows = []
    for n in dims:
        for tau in taus:
            m = geo.kernel_mass(n, tau)
            rows.append({"n": n, "tau": tau, "mass": m.value, "tail": m.tail_bound,
                         "mass_error": abs(m.value - 1.0),
                         "heat_residual": geo.kernel_heat_residual(n, tau)})
    ok = all(r["mass_error"] <= mass_tol and r["heat_residual"] <= heat_tol for r in rows)
    cols = ["n", "tau", "mass", "tail", "mass_error", "heat_residual"]
    return TaskOutcome({"task": "kernel-check", "rows": rows}, csv_text(cols, rows), ok,
                       tolerances={"mass_tolerance": mass_tol, "heat_tolerance": heat_tol},
                       truncation=[{"n": r["n"], "tau": r["tau"], "tail": r["tail"]}
                                   for r in rows])


TASK_HANDLERS = {
    "solve-elliptic": task_solve_elliptic,
    "solve-parabolic": task_solve_parabolic,
    "phi-scan": task_phi_scan,
    "psi-scan": task_psi_scan,
    "verify": task_verify,
    "beta-scan": task_beta_scan,
    "free-boundary": task_free_boundary,
    "blowup": task_blowup,
    "kernel-check": task_kernel_check,
}


# --------------------------------------------------------------------------
# run


def versions() -> dict:
    return {"monotone": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def _prepare_output(cfg, out_override=None) -> tuple:
    out = cfg.get("output", {})
    d = out_override or out.get("dir", ".")
    prefix = out.get("prefix", "report")
    try:
        os.makedirs(d, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output.dir: cannot create {d}: {exc.strerror}") from None
    if not os.access(d, os.W_OK):
        raise ConfigError(f"output.dir: {d} is not writable")
    return d, prefix


def execute(cfg: dict, out_dir=None) -> int:
    """Run the configured task, write report/table/manifest and return the exit status."""
    previous = geo.configure(**cfg.get("quadrature", {}))
    try:
        d, prefix = _prepare_output(cfg, out_dir)
        kind = cfg["task"]["kind"]
        grid = build_grid(cfg) if kind != "kernel-check" else None
        model = build_model(cfg)
        fld = None
        if kind not in ("kernel-check", "solve-elliptic", "solve-parabolic") and "field" in cfg:
            fld = build_field(cfg, grid, model)
        log.info("running task %s", kind)
        outcome = TASK_HANDLERS[kind](cfg, grid, model, fld)
        status = EXIT_OK if outcome.passed else EXIT_FAIL
        files = {"report": f"{prefix}.json", "table": f"{prefix}.csv",
                 "manifest": f"{prefix}.manifest.json"}
        write_text(os.path.join(d, files["report"]), dumps(outcome.report))
        write_text(os.path.join(d, files["table"]), outcome.table)
        for name, obj in outcome.extra_files.items():
            write_field(os.path.join(d, name), obj)
        manifest = {
            "config": C.effective(cfg),
            "versions": versions(),
            "quadrature": geo.settings(),
            "tolerances": outcome.tolerances,
            "truncation_bounds": outcome.truncation,
            "outputs": sorted(list(files.values()) + list(outcome.extra_files)),
            "passed": outcome.passed,
            "exit_status": status,
        }
        write_text(os.path.join(d, files["manifest"]), dumps(manifest))
        return status
    finally:
        geo.restore(previous)


def cmd_run(args) -> int:
    cfg = C.load(args.config, args.set or ())
    status = execute(cfg, args.out)
    print(f"{cfg['task']['kind']}: {'PASS' if status == EXIT_OK else 'FAIL'} "
          f"(exit {status})")
    return status


# --------------------------------------------------------------------------
# selftest


def cmd_selftest(args) -> int:
    cfg = {}
    for a in args.set or ():
        C.apply_override(cfg, a)
    extra = [k for k in cfg if k != "quadrature"]
    if extra:
        raise ConfigError(f"selftest accepts only quadrature.* overrides, got {extra}")
    q = cfg.get("quadrature", {})
    for k in q:
        if k not in C.QUADRATURE_KEYS:
            raise ConfigError(f"quadrature.{k}: unknown key")
    only = None
    if args.only:
        try:
            only = {int(x) for x in args.only.split(",")}
        except ValueError:
            raise ConfigError(f"--only expects comma separated numbers, got {args.only!r}")
    previous = geo.configure(**q)
    try:
        t0 = time.perf_counter()

        def show(r):
            print(r.line(), flush=True)
        results = acceptance.run_suite(only, on_result=show)
        os.makedirs(args.out, exist_ok=True)
        write_text(os.path.join(args.out, "selftest.csv"), acceptance.suite_csv(results))
        write_text(os.path.join(args.out, "selftest.json"), acceptance.suite_json(results))
        print(f"elapsed {time.perf_counter() - t0:.1f}s; reports in {args.out}", file=sys.stderr)
    finally:
        geo.restore(previous)
    failed = [r for r in results if not r.passed]
    if failed:
        names = ", ".join(f"{r.number} ({r.title})" for r in failed)
        print(f"selftest FAILED: criterion {names}", file=sys.stderr)
        return EXIT_FAIL
    print("selftest passed")
    return EXIT_OK


# --------------------------------------------------------------------------
# field convert


def cmd_field_convert(args) -> int:
    src = args.input
    try:
        header = is_field_file(src)
    except OSError as exc:
        raise ConfigError(f"cannot read {src}: {exc.strerror}") from None
    fld = read_field(src) if header else read_csv_table(src)
    target = args.to or ("csv" if header else "field")
    kind = "space-time" if isinstance(fld, SpaceTimeField) else "field"
    if args.output:
        if target == "csv":
            write_csv_table(args.output, fld)
        else:
            write_field(args.output, fld)
    print(f"valid {kind}: n={fld.n} m={fld.m} counts={list(fld.grid.counts)}"
          + (f" slices={fld.stgrid.slices}" if kind == "space-time" else "")
          + (f" -> {args.output} ({target})" if args.output else ""))
    return EXIT_OK


# --------------------------------------------------------------------------


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="monotone", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"monotone {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="execute one task from a TOML config")
    r.add_argument("config")
    r.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config value (repeatable)")
    r.add_argument("--out", help="output directory (overrides output.dir)")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("selftest", help="run the built-in acceptance suite")
    s.add_argument("--out", default="selftest-report")
    s.add_argument("--only", help="comma separated criterion numbers")
    s.add_argument("--set", action="append", metavar="quadrature.KEY=VALUE")
    s.set_defaults(func=cmd_selftest)

    f = sub.add_parser("field", help="field file utilities")
    fsub = f.add_subparsers(dest="field_command", required=True)
    c = fsub.add_parser("convert", help="validate and convert between CSV and Field format")
    c.add_argument("input")
    c.add_argument("output", nargs="?")
    c.add_argument("--to", choices=("csv", "field"))
    c.set_defaults(func=cmd_field_convert)
    return p


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, MonotoneError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
