import json
from pathlib import Path

import numpy as np
import pytest

from kgprop.cli import main
from kgprop.fileio import read_matrix

STATIC_CFG = """
[scenario]
name = static

[lattice]
n_sites = 16
spacing = 1.0

[params]
m = 1.0

[evolution]
t_start = 0.0
t_end = 1.0
steps = 64
grid_points = 5

[propagators]
labels = PJ,ret
tau = 0.5
t_grid = 0.25,0.75
s_grid = 0.0,0.5
"""


def write_cfg(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_assemble_static(tmp_path):
    cfg = write_cfg(tmp_path, STATIC_CFG)
    out = tmp_path / "out"
    rc = main(["assemble", "--config", str(cfg), "--out", str(out)])
    assert rc == 0
    summary = (out / "eigen_summary.csv").read_text().splitlines()
    assert summary[0] == "time,min_eig_L,a_bound"
    # min eig of the static m=1 operator is 1 (k=0 mode)
    min_eig = float(summary[1].split(",")[1])
    assert min_eig == pytest.approx(1.0, abs=1e-12)
    L, ts, label = read_matrix(out / "L_t0000.csv")
    assert label == "L" and ts == 0.0 and L.shape == (16, 16)
    report = json.loads((out / "assumption_report.json").read_text())
    assert report["assumption1_ok"] is True


def test_missing_key_exit_2(tmp_path, capsys):
    broken = STATIC_CFG.replace("n_sites = 16\n", "")
    cfg = write_cfg(tmp_path, broken)
    rc = main(["assemble", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert rc == 2
    assert "n_sites" in capsys.readouterr().err


def test_assumption_violation_exit_3(tmp_path):
    violating = STATIC_CFG.replace("m = 1.0", "m = 1.0\nbeta = 1.5")
    cfg = write_cfg(tmp_path, violating)
    out = tmp_path / "out3"
    rc = main(["assemble", "--config", str(cfg), "--out", str(out)])
    assert rc == 3
    report = json.loads((out / "assumption_report.json").read_text())
    assert report["assumption1_ok"] is False


def test_evolve_richardson_manifest(tmp_path):
    cfg = write_cfg(tmp_path, STATIC_CFG)
    out = tmp_path / "ev"
    rc = main(["evolve", "--config", str(cfg), "--out", str(out),
               "--richardson", "on"])
    assert rc == 0
    manifest = json.loads((out / "evolve_manifest.json").read_text())
    assert "richardson_error" in manifest
    U0, _, _ = read_matrix(out / "U_t0000.csv")
    assert np.array_equal(U0, np.eye(32))
    U4, ts, _ = read_matrix(out / "U_t0004.csv")
    assert ts == 1.0 and U4.shape == (32, 32)


def test_propagate_and_window_error(tmp_path):
    cfg = write_cfg(tmp_path, STATIC_CFG)
    out = tmp_path / "pr"
    rc = main(["propagate", "--config", str(cfg), "--out", str(out)])
    assert rc == 0
    manifest = json.loads((out / "propagate_manifest.json").read_text())
    files = {k["file"] for k in manifest["kernels"]}
    assert files == {"kernel_PJ_G.csv", "kernel_ret_G.csv"}
    bad = write_cfg(tmp_path, STATIC_CFG.replace("tau = 0.5", "tau = 9.0"), "bad.cfg")
    rc = main(["propagate", "--config", str(bad), "--out", str(tmp_path / "pr2")])
    assert rc == 2


def test_spectrum(tmp_path):
    cfg = write_cfg(tmp_path, STATIC_CFG)
    out = tmp_path / "sp"
    rc = main(["spectrum", "--config", str(cfg), "--out", str(out)])
    assert rc == 0
    lines = (out / "spectrum.csv").read_text().splitlines()
    assert lines[1] == "time,k,eig_L,a_bound"
    # 5 grid times x 16 eigenvalues
    assert len(lines) == 2 + 5 * 16


def test_verify_subset(tmp_path):
    cfg = write_cfg(tmp_path, STATIC_CFG + "\n[checks]\nsuite = oracle.evolution\n")
    out = tmp_path / "vf"
    rc = main(["verify", "--config", str(cfg), "--out", str(out)])
    assert rc == 0
    recs = [json.loads(line) for line in
            (out / "reports.jsonl").read_text().splitlines()]
    assert recs and all(r["check_id"].startswith("oracle.evolution") for r in recs)
    assert all(r["passed"] for r in recs)
    assert (out / "summary.txt").exists()


def _normalized_tree(root: Path) -> dict:
    out = {}
    for p in sorted(root.rglob("*")):
        if p.is_file():
            body = p.read_bytes()
            if p.suffix == ".json":
                data = json.loads(body)
                data.pop("created_at", None)
                body = json.dumps(data, sort_keys=True).encode()
            out[str(p.relative_to(root))] = body
    return out


def test_idempotent_reruns(tmp_path):
    cfg = write_cfg(tmp_path, STATIC_CFG)
    outs = []
    for name in ("r1", "r2"):
        out = tmp_path / name
        assert main(["assemble", "--config", str(cfg), "--out", str(out)]) == 0
        assert main(["evolve", "--config", str(cfg), "--out", str(out)]) == 0
        assert main(["propagate", "--config", str(cfg), "--out", str(out)]) == 0
        outs.append(_normalized_tree(out))
    assert outs[0] == outs[1]
