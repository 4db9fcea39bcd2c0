"""Batch front-end: assemble | evolve | propagate | verify | spectrum.

Exit codes: 0 success, 1 internal error, 2 config error, 3 assumption
violation.  Every output file carries the config hash; wall-clock timestamps
appear only in manifests and are excluded from the hash, so re-runs with the
same config and seed are byte-identical everywhere else.
"""

from __future__ import annotations

import argparse
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from ._threads import blas_single_thread
from .config import RunConfig, load_config
from .errors import AssumptionViolation, ConfigError, KgpropError, ScenarioError, WindowExceeded
from .evolution import StepSchedule, UProvider, evolve
from .fileio import (atomic_write_text, summary_table, write_kernel_dump, write_manifest,
                     write_matrix, write_reports)
from .geometry import sample_slice
from .operators import make_operator_set, ops_provider, verify_assumptions
from .propagators import (classical_kernel, feynman_kernel, freq_projection,
                          instantaneous_kernel, to_G_form)
from .spaces import build_norm_family
from .verification import SuiteConfig, run_default_suite, suite_passed

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_CONFIG = 2
EXIT_ASSUMPTION = 3


def _pin_threads() -> None:
    # single-threaded BLAS keeps outputs reproducible across runs
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS"):
        os.environ.setdefault(var, "1")


def _now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _grid_times(cfg: RunConfig) -> np.ndarray:
    return np.linspace(cfg.t_start, cfg.t_end, cfg.grid_points)


def cmd_assemble(cfg: RunConfig) -> int:
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    chash = cfg.hash()
    times = _grid_times(cfg)
    violation = None
    try:
        model = cfg.model()
    except AssumptionViolation as exc:
        write_manifest(out / "assumption_report.json",
                       {"config": chash, "assumption1_ok": False, "assumption2_ok": False,
                        "violation": str(exc)}, timestamp=_now())
        print(f"assumption violation: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION

    sets = []
    summary_lines = ["time,min_eig_L,a_bound"]
    for idx, t in enumerate(times):
        try:
            sl = sample_slice(model, cfg.lattice, t, check=False)
            ops = make_operator_set(sl, cfg.lattice, model.mass_shift, strict=False)
        except AssumptionViolation as exc:
            violation = str(exc)
            break
        sets.append(ops)
        for name, M in (("L", ops.L), ("W", ops.W), ("H", ops.H), ("B", ops.B)):
            write_matrix(out / f"{name}_t{idx:04d}.csv", M, t, name)
        summary_lines.append(f"{t:.17g},{ops.min_eig_L:.17g},{ops.a_bound:.17g}")
    atomic_write_text(out / "eigen_summary.csv", "\n".join(summary_lines) + "\n")

    report = verify_assumptions(sets) if len(sets) >= 2 else None
    payload = {"config": chash, "times": [float(t) for t in times[:len(sets)]]}
    if report is not None:
        payload.update({
            "assumption1_ok": report.assumption1_ok,
            "assumption2_ok": report.assumption2_ok,
            "integral_C": report.integral_C,
            "a_bounds": [float(a) for a in report.a_bounds],
            "min_eigs_L": [float(m) for m in report.min_eigs_L],
            "notes": list(report.notes),
        })
    if violation:
        payload["violation"] = violation
        payload["assumption1_ok"] = False
    write_manifest(out / "assumption_report.json", payload, timestamp=_now())
    if violation or (report is not None and not report.assumption1_ok):
        print("assumption violation recorded in assumption_report.json", file=sys.stderr)
        return EXIT_ASSUMPTION
    return EXIT_OK


def _provider_for(cfg: RunConfig):
    model = cfg.model()
    return model, ops_provider(model, cfg.lattice)


def _u_provider(cfg: RunConfig, provider) -> UProvider:
    times = _grid_times(cfg)
    cell = (cfg.t_end - cfg.t_start) / (cfg.grid_points - 1)
    n_sub = max(1, int(np.ceil(cfg.steps / (cfg.grid_points - 1))))
    return UProvider(provider, float(times[0]), abs(cell), min(times), max(times),
                     n_sub=n_sub, sampling=cfg.sampling)


def cmd_evolve(cfg: RunConfig) -> int:
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    chash = cfg.hash()
    model, provider = _provider_for(cfg)
    times = _grid_times(cfg)
    up = _u_provider(cfg, provider)
    for idx, t in enumerate(times):
        write_matrix(out / f"U_t{idx:04d}.csv", up.U(t, times[0]), t, f"U({t:g},{times[0]:g})")
    manifest = {"config": chash, "grid": [float(t) for t in times],
                "steps": cfg.steps, "sampling": cfg.sampling,
                "scenario": cfg.scenario_name}
    if cfg.richardson:
        U = evolve(provider, StepSchedule(cfg.t_start, cfg.t_end, cfg.steps, cfg.sampling),
                   richardson=True)
        manifest["richardson_error"] = float(U.richardson_error)
    write_manifest(out / "evolve_manifest.json", manifest, timestamp=_now())
    return EXIT_OK


def cmd_propagate(cfg: RunConfig) -> int:
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    chash = cfg.hash()
    model, provider = _provider_for(cfg)
    up = _u_provider(cfg, provider)
    lo, hi = min(cfg.t_start, cfg.t_end), max(cfg.t_start, cfg.t_end)
    if not (lo <= cfg.tau <= hi):
        raise ConfigError(f"propagators.tau={cfg.tau} outside the evolution window [{lo}, {hi}]")
    for grid_name, grid in (("t_grid", cfg.t_grid), ("s_grid", cfg.s_grid)):
        for t in grid:
            up.grid_index(float(t))

    needs_proj = bool(set(cfg.labels) & {"pos", "neg", "F", "aF"})
    proj_plus = proj_minus = None
    if needs_proj:
        tau = up.grid_time(up.grid_index(cfg.tau))
        ops_tau = provider(tau)
        family = build_norm_family(ops_tau)
        proj_plus = freq_projection(ops_tau, family, "+")
        proj_minus = freq_projection(ops_tau, family, "-")
    else:
        tau = cfg.tau

    written = []
    for label in cfg.labels:
        if label in ("PJ", "ret", "adv"):
            kern = classical_kernel(label, up)
        elif label in ("pos", "neg"):
            sign = "+" if label == "pos" else "-"
            proj = proj_plus if label == "pos" else proj_minus
            kern = instantaneous_kernel(sign, tau, up, proj)
        else:
            kern = feynman_kernel(label, tau, up, proj_plus, proj_minus)
        forms = ("E", "G") if cfg.form == "both" else (cfg.form,)
        for form in forms:
            k = to_G_form(kern, model, cfg.lattice) if form == "G" else kern
            entries = [(float(t), float(s), k.eval(float(t), float(s)))
                       for t in cfg.t_grid for s in cfg.s_grid]
            fname = f"kernel_{label}_{form}.csv"
            write_kernel_dump(out / fname, entries, config_hash=chash)
            written.append({"file": fname, "label": label, "form": form,
                            "tau_ref": tau if label in ("pos", "neg", "F", "aF") else None})
    write_manifest(out / "propagate_manifest.json",
                   {"config": chash, "kernels": written,
                    "t_grid": [float(t) for t in cfg.t_grid],
                    "s_grid": [float(s) for s in cfg.s_grid],
                    "steps": cfg.steps, "sampling": cfg.sampling,
                    "scheme": "frozen-generator product (Pade exponentials)"},
                   timestamp=_now())
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    chash = cfg.hash()
    suite_cfg = SuiteConfig(seed=cfg.seed)
    checks = None if cfg.suite == "default" else [c.strip() for c in cfg.suite.split(",")]
    reports = run_default_suite(suite_cfg, include_controls=cfg.include_controls,
                                checks=checks)
    write_reports(out / "reports.jsonl", reports, config_hash=chash)
    atomic_write_text(out / "summary.txt", summary_table(reports))
    write_manifest(out / "verify_manifest.json",
                   {"config": chash, "n_checks": len(reports),
                    "passed": suite_passed(reports)}, timestamp=_now())
    print(summary_table(reports), end="")
    return EXIT_OK if suite_passed(reports) else EXIT_INTERNAL


def cmd_spectrum(cfg: RunConfig) -> int:
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    chash = cfg.hash()
    model, provider = _provider_for(cfg)
    times = _grid_times(cfg)
    lines = [f"# kgprop-spectrum v1 config={chash}", "time,k,eig_L,a_bound"]
    for t in times:
        ops = provider(float(t))
        eigs = np.linalg.eigvalsh(ops.L)
        for k, ev in enumerate(eigs):
            lines.append(f"{t:.17g},{k},{ev:.17g},{ops.a_bound:.17g}")
    atomic_write_text(out / "spectrum.csv", "\n".join(lines) + "\n")
    return EXIT_OK


_COMMANDS = {
    "assemble": cmd_assemble,
    "evolve": cmd_evolve,
    "propagate": cmd_propagate,
    "verify": cmd_verify,
    "spectrum": cmd_spectrum,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kgprop",
                                description="Klein-Gordon propagator laboratory")
    p.add_argument("command", choices=sorted(_COMMANDS))
    p.add_argument("--config", required=True, help="path to the run config file")
    p.add_argument("--out", default=None, help="output directory (overrides config)")
    p.add_argument("--seed", type=int, default=None, help="RNG seed (overrides config)")
    p.add_argument("--steps", type=int, default=None, help="scheme steps (overrides config)")
    p.add_argument("--sampling", choices=("left", "midpoint"), default=None,
                   help="generator sampling (overrides config)")
    p.add_argument("--richardson", choices=("on", "off"), default=None,
                   help="step-doubling error estimate (overrides config)")
    return p


def main(argv=None) -> int:
    _pin_threads()
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(Path(args.config), overrides={
            "output.directory": args.out,
            "rng.seed": args.seed,
            "evolution.steps": args.steps,
            "evolution.sampling": args.sampling,
            "evolution.richardson": args.richardson,
        })
        with blas_single_thread():
            return _COMMANDS[args.command](cfg)
    except (ConfigError, ScenarioError, WindowExceeded) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AssumptionViolation as exc:
        print(f"assumption violation: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except KgpropError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
