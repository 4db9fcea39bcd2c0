import json

import numpy as np
import pytest

from kgprop.errors import ConfigError
from kgprop.fileio import (config_hash, read_matrix, summary_table, write_kernel_dump,
                           write_manifest, write_matrix, write_reports)
from kgprop.verification import CheckReport


def test_matrix_round_trip_bit_exact(tmp_path, rng):
    M = rng.standard_normal((9, 5)) + 1j * rng.standard_normal((9, 5))
    M[0, 0] = -0.0 + 0.0j
    M[1, 2] = 1e-300 + 1e300j
    M[2, 2] = np.pi * 1e-17 - 1j / 3
    path = tmp_path / "m.csv"
    write_matrix(path, M, time_stamp=0.637, label="L")
    back, ts, label = read_matrix(path)
    assert label == "L"
    assert ts == 0.637
    assert back.shape == (9, 5)
    assert np.array_equal(back, M)  # bit-exact


def test_matrix_header_and_errors(tmp_path):
    path = tmp_path / "m.csv"
    write_matrix(path, np.eye(2), 1.0, "H")
    first = path.read_text().splitlines()[0]
    assert first.startswith("# kgprop-matrix v1 2 2 1 H")
    with pytest.raises(ValueError):
        write_matrix(path, np.eye(2), 0.0, "bad label")
    bad = tmp_path / "bad.csv"
    bad.write_text("# something else\n")
    with pytest.raises(ConfigError):
        read_matrix(bad)


def test_kernel_dump_and_manifest(tmp_path):
    entries = [(0.0, 0.5, np.array([[1.0 + 2.0j]])), (0.5, 0.0, np.array([[0.0]]))]
    path = tmp_path / "kern.csv"
    write_kernel_dump(path, entries, config_hash="abc")
    lines = path.read_text().splitlines()
    assert lines[0] == "# kgprop-kernel v1 config=abc"
    assert lines[1] == "t,s,row,col,re,im"
    assert lines[2] == "0,0.5,0,0,1,2"
    write_manifest(tmp_path / "man.json", {"a": 1}, timestamp="T")
    data = json.loads((tmp_path / "man.json").read_text())
    assert data == {"a": 1, "created_at": "T"}


def test_reports_jsonl_and_summary(tmp_path):
    reports = [
        CheckReport.from_measurement("b.check", "s", 0.5, 1.0, 0.0),
        CheckReport.from_measurement("a.control", "s", 2.0, 1.0, 0.0,
                                     metadata={"control": True}),
    ]
    path = tmp_path / "reports.jsonl"
    write_reports(path, reports, config_hash="xyz")
    lines = path.read_text().splitlines()
    recs = [json.loads(line) for line in lines]
    assert [r["check_id"] for r in recs] == ["a.control", "b.check"]  # sorted
    assert recs[0]["config"] == "xyz"
    assert recs[0]["passed"] is False
    table = summary_table(reports)
    assert "XFAIL" in table  # failing control
    assert "PASS" in table


def test_config_hash_sensitivity():
    base = {"scenario.name": "static", "rng.seed": "1"}
    h1 = config_hash(base)
    assert h1 == config_hash(dict(base))
    assert h1 != config_hash({**base, "rng.seed": "2"})
    assert h1 != config_hash({**base, "lattice.n_sites": "64"})
