"""Deterministic file formats: matrix CSV, kernel dumps, report records.

All writes go to a temporary file followed by an atomic rename.  Floats are
serialized with 17 significant digits, which round-trips IEEE doubles
exactly; matrix files are required to survive a write/read cycle bit for
bit.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import ConfigError

MATRIX_FORMAT_VERSION = 1


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def atomic_write_text(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_matrix(path: Path, M: np.ndarray, time_stamp: float, label: str) -> None:
    """Write a complex matrix as column-major re,im pairs with a header line."""
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2:
        raise ValueError("write_matrix expects a 2-d array")
    rows, cols = M.shape
    if any(ch.isspace() for ch in label):
        raise ValueError("matrix label must not contain whitespace")
    lines = [f"# kgprop-matrix v{MATRIX_FORMAT_VERSION} {rows} {cols} {_fmt(time_stamp)} {label}"]
    flat = M.flatten(order="F")
    lines.extend(f"{_fmt(z.real)},{_fmt(z.imag)}" for z in flat)
    atomic_write_text(Path(path), "\n".join(lines) + "\n")


def read_matrix(path: Path) -> tuple[np.ndarray, float, str]:
    """Read a matrix file written by ``write_matrix``; exact value round trip."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        # layout: '#' 'kgprop-matrix' 'vN' rows cols time_stamp label
        parts = header.split()
        if len(parts) != 7 or parts[0] != "#" or parts[1] != "kgprop-matrix":
            raise ConfigError(f"not a kgprop matrix file: {path}")
        if parts[2] != f"v{MATRIX_FORMAT_VERSION}":
            raise ConfigError(f"unsupported matrix format version {parts[2]} in {path}")
        rows, cols = int(parts[3]), int(parts[4])
        time_stamp = float(parts[5])
        label = parts[6]
        vals = np.empty(rows * cols, dtype=complex)
        for k in range(rows * cols):
            line = fh.readline()
            re_s, im_s = line.strip().split(",")
            vals[k] = complex(float(re_s), float(im_s))
    return vals.reshape((rows, cols), order="F"), time_stamp, label


def write_kernel_dump(path: Path, entries, config_hash: str = "") -> None:
    """CSV of kernel values over a (t, s) grid: columns t, s, row, col, re, im."""
    lines = [f"# kgprop-kernel v1 config={config_hash}", "t,s,row,col,re,im"]
    for (t, s, M) in entries:
        M = np.asarray(M)
        for (r, c), z in np.ndenumerate(M):
            lines.append(f"{_fmt(t)},{_fmt(s)},{r},{c},{_fmt(z.real)},{_fmt(z.imag)}")
    atomic_write_text(Path(path), "\n".join(lines) + "\n")


def write_manifest(path: Path, payload: dict, timestamp: str | None = None) -> None:
    """Manifest JSON with sorted keys; the timestamp (if any) lives only here."""
    body = dict(payload)
    if timestamp is not None:
        body["created_at"] = timestamp
    atomic_write_text(Path(path), json.dumps(body, indent=2, sort_keys=True) + "\n")


def write_reports(path: Path, reports, config_hash: str = "") -> None:
    """Line-delimited JSON records, one per CheckReport, sorted by check id."""
    recs = [r.as_record() for r in sorted(reports, key=lambda r: r.check_id)]
    lines = [json.dumps({"config": config_hash, **rec}, sort_keys=True) for rec in recs]
    atomic_write_text(Path(path), "\n".join(lines) + "\n")


def summary_table(reports) -> str:
    """Human-readable pass/fail table, one line per check."""
    rows = []
    width = max((len(r.check_id) for r in reports), default=8)
    for r in sorted(reports, key=lambda r: r.check_id):
        status = "PASS" if r.passed else "FAIL"
        if r.is_control:
            status = "XFAIL" if not r.passed else "XPASS"
        rows.append(f"{r.check_id:<{width}}  {status:<5}  measured={r.measured:.6e}  "
                    f"target={r.bound_or_target:.6e}  tol={r.tolerance:.1e}")
    return "\n".join(rows) + "\n"


def config_hash(items: dict) -> str:
    """Stable hash over the semantically meaningful config entries."""
    lines = [f"{k}={items[k]}" for k in sorted(items)]
    return hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()[:16]
