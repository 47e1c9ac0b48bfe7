"""Report records with JSON and CSV serialization.

Floats are written with ``repr`` (shortest round-trip form), so identical
inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, is_dataclass

import numpy as np

ELLIPTIC_COLUMNS = ["r", "phi", "vol_term", "bdry_term", "dphi_bdry", "dphi_int", "c1_margin"]
PARABOLIC_COLUMNS = ["r", "side", "psi", "energy_term", "u2_term", "dpsi_res", "dpsi_int",
                     "c23_margin", "trunc_bound", "E_r", "C"]


def clean(obj):
    """Convert numpy scalars/arrays and non-finite floats into JSON-safe values."""
    if is_dataclass(obj) and not isinstance(obj, type):
        return clean(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def dumps(obj) -> str:
    return json.dumps(clean(obj), indent=2, sort_keys=True) + "\n"


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if x is None:
        return ""
    return str(x)


def csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def thread_count() -> int:
    """Worker cap from MONOTONE_THREADS (default 1)."""
    raw = os.environ.get("MONOTONE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def parallel_map(fn, items) -> list:
    """Map preserving input order; runs on MONOTONE_THREADS threads."""
    items = list(items)
    k = min(thread_count(), len(items))
    if k <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=k) as ex:
        return list(ex.map(fn, items))


@dataclass
class IdentityReport:
    name: str
    radii: list
    lhs: float
    rhs: float
    residual: float
    tolerance: float
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return clean(self)

    def row(self) -> dict:
        return {"name": self.name, "radii": " ".join(repr(float(r)) for r in self.radii),
                "lhs": self.lhs, "rhs": self.rhs, "residual": self.residual,
                "tolerance": self.tolerance, "passed": self.passed}


IDENTITY_COLUMNS = ["name", "radii", "lhs", "rhs", "residual", "tolerance", "passed"]


@dataclass
class FunctionalReport:
    """r -> Phi(r) scan with the two derivative summands per radius."""

    x0: list
    beta: float
    radii: list
    rows: list
    violations: int
    violation_pairs: list
    identity_residual_max: float
    identity_tolerance: float
    limit_M: float
    inadmissible_radii: list
    tolerances: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return clean(self)

    def csv(self) -> str:
        return csv_text(ELLIPTIC_COLUMNS, self.rows)

    def column(self, name) -> np.ndarray:
        return np.array([r[name] for r in self.rows], float)


@dataclass
class ParabolicFunctionalReport:
    T: float
    x0: list
    beta: float
    side: str
    radii: list
    rows: list
    violations: int
    violation_pairs: list
    identity_residual_max: float
    identity_tolerance: float
    limit_M: float
    inadmissible_radii: list
    convention: str
    free_boundary: bool = False
    C: float | None = None
    tolerances: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return clean(self)

    def csv(self) -> str:
        return csv_text(PARABOLIC_COLUMNS, self.rows)

    def column(self, name) -> np.ndarray:
        return np.array([r[name] for r in self.rows], float)


@dataclass
class BlowupReport:
    center: list
    beta: float
    scales: list
    norms: list
    residuals: list
    degree_estimates: list
    beta_hat: float
    limit_M: float | None
    cauchy: list
    degenerate: bool
    growth_ok: bool
    growth_sup: float
    parabolic: bool = False
    warnings: list = field(default_factory=list)
    fields: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        d = clean({k: v for k, v in asdict(self).items() if k != "fields"})
        d["notes"] = ["limits are compared scale-to-scale on a fixed probe grid "
                      "(L2 Cauchy check); no weak-limit extraction is attempted"]
        return d

    def csv(self) -> str:
        rows = [{"rho": s, "norm": n, "residual": r, "degree": d,
                 "cauchy": (self.cauchy[i - 1] if i > 0 else None)}
                for i, (s, n, r, d) in enumerate(zip(self.scales, self.norms,
                                                     self.residuals, self.degree_estimates))]
        return csv_text(["rho", "norm", "residual", "degree", "cauchy"], rows)


def write_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
