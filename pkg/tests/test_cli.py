import json
import os
import subprocess
import sys

import pytest
import yaml

from surfdelta import cli, geometry
from surfdelta.records import from_keyed_text


def run(tmp_path, *args):
    return cli.main([*args, "--out", str(tmp_path)])


def header(path):
    return [line for line in path.read_text().splitlines() if line.startswith("#")]


def test_critical_outputs(tmp_path):
    assert run(tmp_path, "critical", "--levels", "1,2,3", "--format", "both") == 0
    summary = from_keyed_text((tmp_path / "critical_summary.txt").read_text())
    assert summary["interaction_radius_extrapolated"] == pytest.approx(1.0, rel=1e-3)
    h = header(tmp_path / "critical.csv")
    assert any(line.startswith("# config_hash: ") for line in h)
    assert "# levels: 1,2,3" in h
    doc = json.loads((tmp_path / "critical.json").read_text())
    assert doc["levels"] == [1, 2, 3] and len(doc["critical"]) == 3
    assert doc["config_hash"] in (tmp_path / "critical.csv").read_text()


def test_radial_eps0_matches_sphere(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(a, "critical", "--levels", "0,1,2") == 0
    assert run(b, "critical", "--levels", "0,1,2", "--set", "surface={shape: radial, r0: 1, epsilon: 0, rho: [[2,0,1]]}") == 0
    body = lambda p: [line for line in (p / "critical.csv").read_text().splitlines() if not line.startswith("#")]
    assert body(a) == body(b)


def test_capacity_with_config_file(tmp_path):
    cfg = {"surface": {"shape": "sphere", "radius": 2.0}, "levels": [1, 2, 3], "format": "json"}
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(cfg))
    assert cli.main(["capacity", "--config", str(path), "--out", str(tmp_path / "o")]) == 0
    summary = from_keyed_text((tmp_path / "o" / "capacity_summary.txt").read_text())
    assert summary["capacity_extrapolated"] == pytest.approx(2.0, rel=1e-3)
    assert summary["radius_minus_capacity"] <= 1e-3
    assert (tmp_path / "o" / "capacity_sigma_L3.csv").exists() is False  # json only
    doc = json.loads((tmp_path / "o" / "capacity.json").read_text())
    assert len(doc["capacity_sigma_L3"]) == 1280


def test_deterministic_across_thread_counts(tmp_path):
    outs = []
    for threads in ("1", "2"):
        d = tmp_path / threads
        assert run(d, "bound-state", "--levels", "0,1,2", "--threads", threads, "--set", "alpha0=[1.5]") == 0
        outs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
    assert outs[0] == outs[1]


def test_bound_state_verdicts(tmp_path):
    assert run(tmp_path, "bound-state", "--levels", "1,2,3", "--set", "alpha0=[0.9,1.0,1.1]") == 0
    s = from_keyed_text((tmp_path / "bound_state_summary.txt").read_text())
    assert s["classification[0]"] == "subcritical"
    assert s["kappa_star[0]"] is None
    assert s["classification[1]"] == "critical"
    assert s["classification[2]"] == "supercritical"
    assert s["kappa_star[2]"] == pytest.approx(s["oracle_kappa_star[2]"], rel=1e-2)


def test_deform_scan_zero_profile(tmp_path):
    assert run(tmp_path, "deform-scan", "--levels", "0,1,2", "--set", "surface={shape: radial, rho: []}",
               "--set", "eps_grid=[0.1]") == 0
    s = from_keyed_text((tmp_path / "deform_summary.txt").read_text())
    assert s["max_abs_deficit"] == 0.0


def test_elongated_and_mesh_export(tmp_path):
    assert run(tmp_path / "e", "elongated", "--levels", "0", "--set", "alpha0=0.01", "--set", "eps_grid=[2.0, 1.0]") == 0
    s = from_keyed_text((tmp_path / "e" / "elongated_summary.txt").read_text())
    assert s["certified"] is True and s["eps_star"] == 2.0
    assert run(tmp_path / "m", "mesh-export", "--levels", "0,1") == 0
    mesh = geometry.import_mesh(tmp_path / "m" / "mesh_L1.txt")
    assert mesh.n_panels == 80
    assert any("config_hash" in line for line in header(tmp_path / "m" / "mesh_L1.txt"))


@pytest.mark.parametrize(
    "args",
    [
        ["critical", "--levels", "3,2,1"],
        ["critical", "--levels", "1,2"],
        ["critical", "--set", "bogus=1"],
        ["critical", "--set", "surface={shape: torus}"],
        ["deform-scan", "--levels", "0,1,2", "--set", "eps_grid=[-0.1]"],
        ["deform-scan", "--levels", "0,1,2", "--set", "eps_grid=[2.0]"],
        ["bound-state", "--set", "alpha0=-1"],
        ["elongated", "--set", "surface={shape: sphere}"],
        ["critical", "--set", "nokey"],
    ],
)
def test_config_errors_exit_2(tmp_path, args):
    assert run(tmp_path, *args) == 2


def test_config_file_errors(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("levels: [1, 2\n")
    assert cli.main(["critical", "--config", str(bad)]) == 2
    wrong = tmp_path / "wrong.yaml"
    wrong.write_text("command: capacity\n")
    assert cli.main(["critical", "--config", str(wrong)]) == 2
    assert cli.main(["critical", "--config", str(tmp_path / "missing.yaml")]) == 2


def test_numerical_failure_exit_3(tmp_path):
    # no certificate anywhere on a short sweep with a huge coupling
    assert run(tmp_path, "elongated", "--levels", "0", "--set", "alpha0=50", "--set", "eps_grid=[1.0]") == 3
    assert (tmp_path / "elongated.csv").exists()


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "surfdelta", "mesh-export", "--levels", "0", "--out", str(tmp_path)],
                          capture_output=True, text=True, env={**os.environ})
    assert proc.returncode == 0, proc.stderr
    assert "mesh_L0.txt" in proc.stdout
