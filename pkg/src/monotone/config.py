"""Run configuration: TOML file plus ``--set key=value`` overrides.

A run file has the tables ``model``, ``grid``, ``field``, ``task`` and
optionally ``solver``, ``quadrature`` and ``output``. Every value can be
overridden from the command line with a dotted key, e.g.
``--set task.beta=2.5`` or ``--set grid.counts=[401]``.
"""

from __future__ import annotations

import copy
import os
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError

TASKS = ("solve-elliptic", "solve-parabolic", "phi-scan", "psi-scan", "verify", "beta-scan",
         "free-boundary", "blowup", "kernel-check")
GRID_TYPES = ("cartesian", "radial", "spacetime")
SECTIONS = ("model", "grid", "field", "task", "solver", "quadrature", "output")

QUADRATURE_KEYS = ("sphere_points_2d", "sphere_polar_3d", "sphere_azimuth_3d", "radial_nodes",
                   "time_nodes", "gaussian_threshold", "truncation_tolerance",
                   "kernel_plus_convention")


def parse_value(text: str):
    """TOML scalar/array/inline-table literal, falling back to a bare string."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_override(cfg: dict, assignment: str) -> None:
    if "=" not in assignment:
        raise ConfigError(f"--set expects key=value, got {assignment!r}")
    key, _, raw = assignment.partition("=")
    parts = [p for p in key.strip().split(".") if p]
    if not parts:
        raise ConfigError(f"--set has an empty key in {assignment!r}")
    node = cfg
    for p in parts[:-1]:
        nxt = node.setdefault(p, {})
        if not isinstance(nxt, dict):
            raise ConfigError(f"--set {key}: {p!r} is not a table")
        node = nxt
    node[parts[-1]] = parse_value(raw.strip())


def loads(text: str, overrides=(), source: str = "<config>") -> dict:
    try:
        cfg = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        # the decoder message carries "(at line L, column C)"
        raise ConfigError(f"{source}: {exc}") from None
    for a in overrides:
        apply_override(cfg, a)
    validate(cfg, source)
    return cfg


def load(path, overrides=()) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    cfg = loads(text, overrides, str(path))
    cfg.setdefault("_meta", {})["config_dir"] = os.path.dirname(os.path.abspath(path))
    return cfg


def _need(block: dict, key: str, where: str, types=None):
    if key not in block:
        raise ConfigError(f"{where}.{key}: missing")
    v = block[key]
    if types is not None and not isinstance(v, types):
        raise ConfigError(f"{where}.{key}: expected {_tname(types)}, got {v!r}")
    return v


def _tname(types):
    if isinstance(types, tuple):
        return " or ".join(t.__name__ for t in types)
    return types.__name__


def number(block, key, where, default=None, positive=False):
    if key not in block:
        if default is None:
            raise ConfigError(f"{where}.{key}: missing")
        return default
    v = block[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key}: expected a number, got {v!r}")
    if positive and not v > 0:
        raise ConfigError(f"{where}.{key}: must be positive, got {v!r}")
    return float(v)


def number_list(block, key, where, default=None, length=None):
    if key not in block:
        if default is None:
            raise ConfigError(f"{where}.{key}: missing")
        return list(default)
    v = block[key]
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        v = [v]
    if not isinstance(v, list) or not all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        raise ConfigError(f"{where}.{key}: expected a list of numbers, got {v!r}")
    if length is not None and len(v) != length:
        raise ConfigError(f"{where}.{key}: expected {length} entries, got {len(v)}")
    return [float(x) for x in v]


def validate(cfg: dict, source: str = "<config>") -> None:
    """Structural checks done before any work starts."""
    unknown = [k for k in cfg if k not in SECTIONS and not k.startswith("_")]
    if unknown:
        raise ConfigError(f"{source}: unknown table(s) {unknown}; expected {list(SECTIONS)}")
    for sec in SECTIONS:
        if sec in cfg and not isinstance(cfg[sec], dict):
            raise ConfigError(f"{source}: [{sec}] must be a table")
    task = cfg.get("task")
    if task is None:
        raise ConfigError(f"{source}: missing [task] table")
    kind = _need(task, "kind", "task", str)
    if kind not in TASKS:
        raise ConfigError(f"task.kind: unknown task {kind!r}; expected one of {list(TASKS)}")
    if kind != "kernel-check":
        grid = cfg.get("grid")
        if grid is None:
            raise ConfigError(f"{source}: task {kind!r} needs a [grid] table")
        gtype = grid.get("type", "cartesian")
        if gtype not in GRID_TYPES:
            raise ConfigError(f"grid.type: unknown {gtype!r}; expected one of {list(GRID_TYPES)}")
        parabolic = kind in ("solve-parabolic", "psi-scan", "free-boundary")
        if parabolic and gtype != "spacetime":
            raise ConfigError(f"grid.type: task {kind!r} needs a spacetime grid")
    if kind not in ("kernel-check", "free-boundary") and "model" not in cfg \
            and cfg.get("field", {}).get("source") not in ("exact", "analytic"):
        raise ConfigError(f"{source}: task {kind!r} needs a [model] table")
    q = cfg.get("quadrature", {})
    for k in q:
        if k not in QUADRATURE_KEYS:
            raise ConfigError(f"quadrature.{k}: unknown key; expected one of {list(QUADRATURE_KEYS)}")
    out = cfg.get("output", {})
    d = out.get("dir", ".")
    if not isinstance(d, str):
        raise ConfigError(f"output.dir: expected a string, got {d!r}")


def effective(cfg: dict) -> dict:
    """Copy of the configuration without private bookkeeping keys."""
    return {k: copy.deepcopy(v) for k, v in cfg.items() if not k.startswith("_")}
