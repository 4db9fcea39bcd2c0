"""Run configuration: flat key-value sections, parsed fail-closed.

Unknown sections or keys are hard errors; every key is listed in the schema
below and documented in the README.  Grids are given either as a comma list
of floats or as ``start:stop:num``.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .fileio import config_hash
from .geometry import Lattice, ScenarioModel, builtin_scenario
from .verification import DEFAULT_SEED

# section -> {key: parser}; [params] is scenario-specific and validated there
_SCHEMA = {
    "scenario": {"name": str},
    "lattice": {"n_sites": int, "spacing": float},
    "params": None,
    "evolution": {"t_start": float, "t_end": float, "steps": int,
                  "grid_points": int, "sampling": str, "richardson": str},
    "propagators": {"labels": str, "tau": float, "t_grid": str, "s_grid": str,
                    "form": str},
    "checks": {"suite": str, "include_controls": str},
    "output": {"directory": str},
    "rng": {"seed": int},
}

_DEFAULTS = {
    "evolution": {"steps": 1024, "grid_points": 17, "sampling": "midpoint",
                  "richardson": "off"},
    "propagators": {"labels": "PJ,ret,adv", "tau": 0.0, "form": "G"},
    "checks": {"suite": "default", "include_controls": "on"},
    "output": {"directory": "out"},
    "rng": {"seed": DEFAULT_SEED},
}

_ONOFF = {"on": True, "off": False, "true": True, "false": False,
          "yes": True, "no": False, "1": True, "0": False}


def _parse_onoff(value: str, key: str) -> bool:
    try:
        return _ONOFF[str(value).strip().lower()]
    except KeyError:
        raise ConfigError(f"key '{key}' expects on/off, got {value!r}") from None


def parse_grid(spec: str, key: str) -> np.ndarray:
    """Grid from 'a,b,c' (comma list) or 'start:stop:num' (inclusive linspace)."""
    spec = str(spec).strip()
    try:
        if ":" in spec:
            start_s, stop_s, num_s = spec.split(":")
            num = int(num_s)
            if num < 1:
                raise ValueError
            return np.linspace(float(start_s), float(stop_s), num)
        return np.array([float(v) for v in spec.split(",") if v.strip() != ""])
    except (ValueError, TypeError):
        raise ConfigError(f"key '{key}' has a malformed grid: {spec!r}") from None


@dataclass
class RunConfig:
    """Parsed and validated run configuration."""

    scenario_name: str
    lattice: Lattice
    params: dict
    t_start: float
    t_end: float
    steps: int
    grid_points: int
    sampling: str
    richardson: bool
    labels: tuple
    tau: float
    t_grid: np.ndarray
    s_grid: np.ndarray
    form: str
    suite: str
    include_controls: bool
    out_dir: Path
    seed: int
    raw_items: dict = field(default_factory=dict)

    def model(self) -> ScenarioModel:
        return builtin_scenario(self.scenario_name, self.params)

    def hash(self) -> str:
        """Hash over every semantically meaningful key (output dir excluded)."""
        items = {k: v for k, v in self.raw_items.items() if not k.startswith("output.")}
        return config_hash(items)


def _read_sections(path: Path) -> dict[str, dict[str, str]]:
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    parser.optionxform = str
    read = parser.read(path, encoding="utf-8")
    if not read:
        raise ConfigError(f"config file not found: {path}")
    out: dict[str, dict[str, str]] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        out[section] = dict(parser.items(section))
    return out


def load_config(path: Path, overrides: dict | None = None) -> RunConfig:
    """Load, validate and normalize a config file.

    ``overrides`` maps 'section.key' to values (CLI flags) applied before
    validation and hashing.
    """
    sections = _read_sections(Path(path))
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        sec, key = dotted.split(".", 1)
        sections.setdefault(sec, {})[key] = str(value)

    for required in ("scenario", "lattice"):
        if required not in sections:
            raise ConfigError(f"missing required config section [{required}]")

    values: dict[str, dict] = {}
    for sec, content in sections.items():
        schema = _SCHEMA[sec]
        if schema is None:
            values[sec] = dict(content)
            continue
        parsed = {}
        for key, raw in content.items():
            if key not in schema:
                raise ConfigError(f"unknown key '{key}' in section [{sec}]")
            caster = schema[key]
            try:
                parsed[key] = caster(raw)
            except (ValueError, TypeError):
                raise ConfigError(f"key '{sec}.{key}' has malformed value {raw!r}") from None
        values[sec] = parsed
    for sec, defaults in _DEFAULTS.items():
        block = values.setdefault(sec, {})
        for key, val in defaults.items():
            block.setdefault(key, val)

    sc = values["scenario"]
    if "name" not in sc:
        raise ConfigError("missing key 'name' in section [scenario]")
    lt = values["lattice"]
    for key in ("n_sites", "spacing"):
        if key not in lt:
            raise ConfigError(f"missing key '{key}' in section [lattice]")
    ev = values["evolution"]
    if "t_start" not in ev or "t_end" not in ev:
        raise ConfigError("section [evolution] needs t_start and t_end")
    if ev["sampling"] not in ("left", "midpoint"):
        raise ConfigError(f"evolution.sampling must be left or midpoint, got {ev['sampling']!r}")

    pg = values["propagators"]
    labels = tuple(v.strip() for v in str(pg["labels"]).split(",") if v.strip())
    from .propagators import E_LABELS

    bad = set(labels) - set(E_LABELS)
    if bad:
        raise ConfigError(f"unknown propagator labels: {sorted(bad)}")
    if pg.get("form", "G") not in ("E", "G", "both"):
        raise ConfigError(f"propagators.form must be E, G or both, got {pg.get('form')!r}")
    default_grid = f"{ev['t_start']}:{ev['t_end']}:5"
    t_grid = parse_grid(pg.get("t_grid", default_grid), "propagators.t_grid")
    s_grid = parse_grid(pg.get("s_grid", default_grid), "propagators.s_grid")

    params = {k: float(v) for k, v in values.get("params", {}).items()}

    raw_items: dict[str, str] = {}
    for sec, content in values.items():
        for key, val in content.items():
            raw_items[f"{sec}.{key}"] = str(val)

    return RunConfig(
        scenario_name=str(sc["name"]),
        lattice=Lattice(int(lt["n_sites"]), float(lt["spacing"])),
        params=params,
        t_start=float(ev["t_start"]), t_end=float(ev["t_end"]),
        steps=int(ev["steps"]), grid_points=int(ev["grid_points"]),
        sampling=str(ev["sampling"]),
        richardson=_parse_onoff(ev["richardson"], "evolution.richardson"),
        labels=labels, tau=float(pg["tau"]), t_grid=t_grid, s_grid=s_grid,
        form=str(pg.get("form", "G")),
        suite=str(values["checks"]["suite"]),
        include_controls=_parse_onoff(values["checks"]["include_controls"],
                                      "checks.include_controls"),
        out_dir=Path(values["output"]["directory"]),
        seed=int(values["rng"]["seed"]),
        raw_items=raw_items,
    )
