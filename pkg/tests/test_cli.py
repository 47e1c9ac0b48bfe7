import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from monotone import config, geometry as geo
from monotone.cli import main
from monotone.errors import ConfigError
from monotone.fields import noise_field, read_field, write_field

CONFIGS = Path(__file__).resolve().parents[1] / "demos" / "configs"


def _run(tmp_path, name, *extra):
    return main(["run", str(CONFIGS / name), "--out", str(tmp_path), *extra])


def test_verify_exact_solution_exits_zero(tmp_path):
    assert _run(tmp_path, "verify_linear_sin.toml") == 0
    man = json.loads((tmp_path / "verify.manifest.json").read_text())
    assert man["passed"] and man["exit_status"] == 0
    assert "timestamp" not in json.dumps(man)
    assert (tmp_path / "verify.csv").exists()


def test_verify_noise_exits_two(tmp_path):
    assert _run(tmp_path, "verify_noise.toml") == 2


def test_phi_scan_rerun_gives_identical_bytes(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _run(a, "phi_scan_gl.toml") == _run(b, "phi_scan_gl.toml")
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes(), n


def test_thread_count_does_not_change_output(tmp_path, monkeypatch):
    a, b = tmp_path / "a", tmp_path / "b"
    monkeypatch.setenv("MONOTONE_THREADS", "1")
    _run(a, "phi_scan_gl.toml")
    monkeypatch.setenv("MONOTONE_THREADS", "2")
    _run(b, "phi_scan_gl.toml")
    for p in a.iterdir():
        assert p.read_bytes() == (b / p.name).read_bytes(), p.name


def test_set_override_reaches_the_run(tmp_path):
    assert _run(tmp_path, "phi_scan_gl.toml", "--set", "task.beta=1.25") in (0, 2)
    man = json.loads(next(tmp_path.glob("*.manifest.json")).read_text())
    assert man["config"]["task"]["beta"] == 1.25


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.toml")
                                        if p.name not in ("verify_noise.toml",
                                                          "phi_scan_gl.toml")))
def test_demo_configs_run(tmp_path, name):
    assert _run(tmp_path, name) in (0, 2)
    assert list(tmp_path.glob("*.manifest.json"))


def test_malformed_toml_exits_one(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("[task]\nkind = \n")
    assert main(["run", str(bad)]) == 1
    assert "line 2" in capsys.readouterr().err


@pytest.mark.parametrize("text, needle", [
    ('[task]\nkind = "dance"\n', "task.kind"),
    ('[task]\nkind = "phi-scan"\n', "[grid]"),
    ('[task]\nkind = "kernel-check"\n[quadrature]\nbogus = 1\n', "quadrature.bogus"),
    ('[task]\nkind = "psi-scan"\n[model]\nkind="zero"\n[grid]\ntype="cartesian"\n', "spacetime"),
])
def test_config_validation_messages(text, needle):
    with pytest.raises(ConfigError) as exc:
        config.loads(text)
    assert needle in str(exc.value)


def test_override_parsing():
    cfg = {}
    config.apply_override(cfg, "grid.counts=[401, 3]")
    config.apply_override(cfg, "field.name=gl_kink")
    assert cfg == {"grid": {"counts": [401, 3]}, "field": {"name": "gl_kink"}}
    with pytest.raises(ConfigError):
        config.apply_override(cfg, "novalue")


def test_bad_override_value_exits_one(tmp_path):
    assert _run(tmp_path, "phi_scan_gl.toml", "--set", "task.beta=abc") == 1


def test_out_of_grid_radius_exits_one(tmp_path):
    assert _run(tmp_path, "phi_scan_gl.toml", "--set", "task.r_max=50.0") == 1


def test_field_convert_round_trip(tmp_path, restore_settings):
    g = geo.CartesianGrid((0.0, 0.0), (1.0, 2.0), (5, 7))
    f = noise_field(g, seed=3)
    write_field(tmp_path / "a.field", f)
    assert main(["field", "convert", str(tmp_path / "a.field"), str(tmp_path / "a.csv")]) == 0
    assert main(["field", "convert", str(tmp_path / "a.csv"), str(tmp_path / "b.field")]) == 0
    back = read_field(tmp_path / "b.field")
    assert np.array_equal(back.values, f.values)


def test_field_convert_rejects_garbage(tmp_path):
    p = tmp_path / "junk.csv"
    p.write_text("x1,u1\n0,1\n0.3,2\n1,3\n")
    assert main(["field", "convert", str(p)]) == 1
    assert main(["field", "convert", str(tmp_path / "missing.csv")]) == 1


def test_selftest_subset_and_negative_control(tmp_path, restore_settings):
    assert main(["selftest", "--only", "2", "--out", str(tmp_path / "ok")]) == 0
    rc = main(["selftest", "--only", "2", "--out", str(tmp_path / "bad"),
               "--set", "quadrature.sphere_points_2d=4",
               "--set", "quadrature.sphere_polar_3d=2",
               "--set", "quadrature.sphere_azimuth_3d=2"])
    assert rc == 2
    rows = json.loads((tmp_path / "bad" / "selftest.json").read_text())
    assert "FAIL" in json.dumps(rows)


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "monotone", "--version"], capture_output=True,
                         text=True, env={**os.environ, "MONOTONE_THREADS": "1"})
    assert out.returncode == 0 and "monotone" in out.stdout
