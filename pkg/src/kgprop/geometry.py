"""Spacetime scenarios in 1+1 split form and their sampling onto a periodic lattice.

A scenario is a collection of coefficient functions of ``(t, x)``: lapse
``alpha``, shift ``beta``, spatial metric component ``g_sigma``, density
``gamma = alpha**-1 * sqrt(g_sigma)``, electromagnetic potential ``(A0, A1)``
and scalar potential ``Y``.  Time derivatives of ``alpha`` and ``gamma`` are
part of the model contract and are never obtained by differencing samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import AssumptionViolation, ScenarioError

ScalarField = Callable[[float, np.ndarray], np.ndarray]

#: relative tolerance for the density identity gamma = alpha**-1 * sqrt(g_sigma)
GAMMA_CONSISTENCY_RTOL = 1e-12


@dataclass(frozen=True)
class Lattice:
    """Uniform periodic spatial lattice (circle of circumference n_sites*spacing)."""

    n_sites: int
    spacing: float

    def __post_init__(self):
        if self.n_sites < 4:
            raise ScenarioError(f"n_sites must be >= 4, got {self.n_sites}")
        if not self.spacing > 0:
            raise ScenarioError(f"spacing must be positive, got {self.spacing}")

    @property
    def circumference(self) -> float:
        return self.n_sites * self.spacing

    @property
    def sites(self) -> np.ndarray:
        return self.spacing * np.arange(self.n_sites)

    def periodic_distance(self, x: np.ndarray, center: float) -> np.ndarray:
        """Shortest distance on the circle between points x and center."""
        L = self.circumference
        d = np.abs(np.asarray(x, dtype=float) - center) % L
        return np.minimum(d, L - d)


@dataclass(frozen=True)
class ScenarioModel:
    """Continuum coefficient data for one spacetime scenario.

    All fields are vectorized callables ``f(t, x) -> array`` with ``x`` an
    array of site coordinates.  ``mass_shift`` is the operator-level shift b;
    it is stored here but applied only during operator assembly.
    """

    name: str
    alpha: ScalarField
    alpha_dot: ScalarField
    beta: ScalarField
    gamma: ScalarField
    gamma_dot: ScalarField
    g_sigma: ScalarField
    A0: ScalarField
    A1: ScalarField
    Y: ScalarField
    mass_shift: float = 0.0
    time_independent: bool = False
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mass_shift < 0:
            raise ScenarioError(f"mass_shift must be nonnegative, got {self.mass_shift}")


@dataclass(frozen=True)
class FieldSlice:
    """Coefficient fields sampled at the lattice sites at one fixed time.

    ``g_sigma_inv_tilde`` is alpha**2/g_sigma, ``Y_tilde`` is alpha**2*Y and
    ``V`` is -A0 + A1*beta.  The mass shift b is not folded into Y_tilde.
    """

    time_stamp: float
    alpha: np.ndarray
    alpha_dot: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    gamma_dot: np.ndarray
    g_sigma_inv_tilde: np.ndarray
    Y_tilde: np.ndarray
    V: np.ndarray
    A1: np.ndarray

    def __post_init__(self):
        n = len(self.alpha)
        for name in ("alpha_dot", "beta", "gamma", "gamma_dot",
                     "g_sigma_inv_tilde", "Y_tilde", "V", "A1"):
            if len(getattr(self, name)) != n:
                raise ScenarioError(f"field '{name}' has length {len(getattr(self, name))}, expected {n}")
        if np.any(self.g_sigma_inv_tilde <= 0):
            j = int(np.argmin(self.g_sigma_inv_tilde))
            raise AssumptionViolation(f"g_sigma_inv_tilde must be positive; violated at site {j}")


def _const(value: float) -> ScalarField:
    def f(t, x):
        return np.full_like(np.asarray(x, dtype=float), value)
    return f


def _require(params: dict, keys: tuple[str, ...], scenario: str) -> None:
    missing = [k for k in keys if k not in params]
    if missing:
        raise ScenarioError(f"scenario '{scenario}' requires parameter(s): {', '.join(missing)}")


def _unknown_keys(params: dict, allowed: set, scenario: str) -> None:
    unknown = sorted(set(params) - allowed)
    if unknown:
        raise ScenarioError(f"unknown parameter(s) for scenario '{scenario}': {', '.join(unknown)}")


def _bump_profile(r: np.ndarray) -> np.ndarray:
    """Compactly supported mollifier: exp(1 - 1/(1-r^2)) for |r|<1, else 0."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = np.abs(r) < 1.0
    ri = r[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - ri * ri))
    return out


def builtin_scenario(name: str, params: dict | None = None) -> ScenarioModel:
    """Construct one of the built-in scenarios.

    static
        Flat static spacetime, alpha=1, beta=0, g_sigma=1, Y=m^2 (A=0).
        Requires ``m > 0`` unless ``y`` overrides the potential.  Optional
        constant ``beta``, ``a1`` (electromagnetic A1) and ``b`` (mass shift).
    frw
        Spatially flat expanding universe with scale factor interpolating
        between a0 (past) and a1 (future):
        a(t) = ((a0+a1) + (a1-a0)*tanh(rho*t))/2.  Optional mass m (default 1).
    bump
        Static background plus a compactly supported bump in Y, localized in
        space (center, width) and optionally in time (t_center, t_width).
    step-potential
        Static background with Y = m^2 + height inside a spatial band.
    """
    params = dict(params or {})
    b = float(params.pop("b", 0.0))

    if name == "static":
        _unknown_keys(params, {"m", "y", "beta", "a1"}, name)
        if "y" in params:
            y_val = float(params["y"])
        else:
            _require(params, ("m",), name)
            m = float(params["m"])
            if not m > 0:
                raise AssumptionViolation(
                    f"static scenario: Y lower-bound violation (m = {m} must be positive)")
            y_val = m * m
        beta_val = float(params.get("beta", 0.0))
        a1_val = float(params.get("a1", 0.0))
        if beta_val ** 2 >= 1.0:
            raise AssumptionViolation(
                f"static scenario: timelike condition violated (g_sigma*beta^2 = {beta_val**2} >= alpha^2 = 1)")
        return ScenarioModel(
            name="static", alpha=_const(1.0), alpha_dot=_const(0.0),
            beta=_const(beta_val), gamma=_const(1.0), gamma_dot=_const(0.0),
            g_sigma=_const(1.0), A0=_const(0.0), A1=_const(a1_val),
            Y=_const(y_val), mass_shift=b, time_independent=True,
            params={"m": params.get("m"), "y": y_val, "beta": beta_val, "a1": a1_val})

    if name == "frw":
        _unknown_keys(params, {"a0", "a1", "rho", "m"}, name)
        _require(params, ("a0", "a1", "rho"), name)
        a0, a1, rho = float(params["a0"]), float(params["a1"]), float(params["rho"])
        if a0 <= 0 or a1 <= 0:
            raise AssumptionViolation(
                f"frw scenario: scale factors must be positive (a0={a0}, a1={a1})")
        m = float(params.get("m", 1.0))
        if not m > 0:
            raise AssumptionViolation(f"frw scenario: Y lower-bound violation (m = {m} must be positive)")

        def a_of_t(t):
            return 0.5 * ((a0 + a1) + (a1 - a0) * math.tanh(rho * t))

        def a_dot_of_t(t):
            return 0.5 * (a1 - a0) * rho / math.cosh(rho * t) ** 2

        def gamma_f(t, x):
            return np.full_like(np.asarray(x, dtype=float), a_of_t(t))

        def gamma_dot_f(t, x):
            return np.full_like(np.asarray(x, dtype=float), a_dot_of_t(t))

        def g_sigma_f(t, x):
            return np.full_like(np.asarray(x, dtype=float), a_of_t(t) ** 2)

        return ScenarioModel(
            name="frw", alpha=_const(1.0), alpha_dot=_const(0.0),
            beta=_const(0.0), gamma=gamma_f, gamma_dot=gamma_dot_f,
            g_sigma=g_sigma_f, A0=_const(0.0), A1=_const(0.0),
            Y=_const(m * m), mass_shift=b, time_independent=False,
            params={"a0": a0, "a1": a1, "rho": rho, "m": m})

    if name == "bump":
        _unknown_keys(params, {"m", "amplitude", "width", "center", "t_center", "t_width"}, name)
        _require(params, ("amplitude", "width", "center"), name)
        m = float(params.get("m", 1.0))
        if not m > 0:
            raise AssumptionViolation(f"bump scenario: Y lower-bound violation (m = {m} must be positive)")
        amp = float(params["amplitude"])
        width = float(params["width"])
        center = float(params["center"])
        t_center = float(params.get("t_center", 0.0))
        t_width = params.get("t_width")
        t_width = float(t_width) if t_width is not None else None
        if width <= 0 or (t_width is not None and t_width <= 0):
            raise ScenarioError("bump scenario: widths must be positive")

        def y_f(t, x):
            x = np.asarray(x, dtype=float)
            # periodic spatial distance; the circumference is not known here,
            # so the profile is evaluated against raw distance and the caller
            # must keep the bump well inside the circle
            d = np.abs(x - center)
            prof = _bump_profile(d / width)
            if t_width is not None:
                prof = prof * float(_bump_profile(np.array([(t - t_center) / t_width]))[0])
            return m * m + amp * prof

        time_indep = t_width is None
        return ScenarioModel(
            name="bump", alpha=_const(1.0), alpha_dot=_const(0.0),
            beta=_const(0.0), gamma=_const(1.0), gamma_dot=_const(0.0),
            g_sigma=_const(1.0), A0=_const(0.0), A1=_const(0.0),
            Y=y_f, mass_shift=b, time_independent=time_indep,
            params={"m": m, "amplitude": amp, "width": width, "center": center,
                    "t_center": t_center, "t_width": t_width})

    if name == "step-potential":
        _unknown_keys(params, {"m", "height", "x0", "x1"}, name)
        _require(params, ("height", "x0", "x1"), name)
        m = float(params.get("m", 1.0))
        if not m > 0:
            raise AssumptionViolation(
                f"step-potential scenario: Y lower-bound violation (m = {m} must be positive)")
        height, x0, x1 = float(params["height"]), float(params["x0"]), float(params["x1"])

        def y_f(t, x):
            x = np.asarray(x, dtype=float)
            return m * m + height * ((x >= x0) & (x < x1)).astype(float)

        return ScenarioModel(
            name="step-potential", alpha=_const(1.0), alpha_dot=_const(0.0),
            beta=_const(0.0), gamma=_const(1.0), gamma_dot=_const(0.0),
            g_sigma=_const(1.0), A0=_const(0.0), A1=_const(0.0),
            Y=y_f, mass_shift=b, time_independent=True,
            params={"m": m, "height": height, "x0": x0, "x1": x1})

    raise ScenarioError(f"unknown scenario name: '{name}'")


def sample_slice(model: ScenarioModel, lattice: Lattice, t: float,
                 check: bool = True) -> FieldSlice:
    """Sample the model fields at time t on the lattice sites.

    Derived fields follow the standard shorthands: V = -A0 + A1*beta,
    g_sigma_inv_tilde = alpha**2/g_sigma, Y_tilde = alpha**2*Y.  With
    ``check=True`` (default) the scenario invariants are verified sitewise and
    a violation raises ``ScenarioError`` naming the first offending site.
    """
    x = lattice.sites
    alpha = np.asarray(model.alpha(t, x), dtype=float)
    alpha_dot = np.asarray(model.alpha_dot(t, x), dtype=float)
    beta = np.asarray(model.beta(t, x), dtype=float)
    gamma = np.asarray(model.gamma(t, x), dtype=float)
    gamma_dot = np.asarray(model.gamma_dot(t, x), dtype=float)
    g_sigma = np.asarray(model.g_sigma(t, x), dtype=float)
    A0 = np.asarray(model.A0(t, x), dtype=float)
    A1 = np.asarray(model.A1(t, x), dtype=float)
    Y = np.asarray(model.Y(t, x), dtype=float)

    fields = (alpha, alpha_dot, beta, gamma, gamma_dot, g_sigma, A0, A1, Y)
    if any(not np.all(np.isfinite(f)) for f in fields):
        raise ScenarioError(f"non-finite field value sampled at t={t}")

    if check:
        if np.any(alpha <= 0):
            j = int(np.argmin(alpha))
            raise AssumptionViolation(f"lapse alpha must be positive; violated at site {j} (t={t})")
        if np.any(g_sigma <= 0):
            j = int(np.argmin(g_sigma))
            raise AssumptionViolation(f"g_sigma must be positive; violated at site {j} (t={t})")
        timelike = g_sigma * beta ** 2 < alpha ** 2
        if not np.all(timelike):
            j = int(np.argmax(~timelike))
            raise AssumptionViolation(
                f"timelike condition g_sigma*beta^2 < alpha^2 violated at site {j} (t={t})")
        gamma_ref = np.sqrt(g_sigma) / alpha
        if np.any(np.abs(gamma - gamma_ref) > GAMMA_CONSISTENCY_RTOL * np.abs(gamma_ref)):
            j = int(np.argmax(np.abs(gamma - gamma_ref)))
            raise AssumptionViolation(
                f"density gamma inconsistent with alpha**-1*sqrt(g_sigma) at site {j} (t={t})")

    return FieldSlice(
        time_stamp=float(t),
        alpha=alpha, alpha_dot=alpha_dot, beta=beta,
        gamma=gamma, gamma_dot=gamma_dot,
        g_sigma_inv_tilde=alpha ** 2 / g_sigma,
        Y_tilde=alpha ** 2 * Y,
        V=-A0 + A1 * beta,
        A1=A1,
    )


def alpha_diagonal(model: ScenarioModel, lattice: Lattice, t: float) -> np.ndarray:
    """Lapse values at the sites, as used for the alpha-conjugations."""
    return np.asarray(model.alpha(t, lattice.sites), dtype=float)
