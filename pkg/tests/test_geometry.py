import math

import numpy as np
import pytest

from kgprop.errors import AssumptionViolation, ScenarioError
from kgprop.geometry import Lattice, builtin_scenario, sample_slice


def test_lattice_validation():
    with pytest.raises(ScenarioError):
        Lattice(3, 1.0)
    with pytest.raises(ScenarioError):
        Lattice(8, 0.0)
    lat = Lattice(8, 0.5)
    assert lat.circumference == 4.0
    assert np.allclose(lat.sites, 0.5 * np.arange(8))


def test_periodic_distance():
    lat = Lattice(8, 1.0)
    d = lat.periodic_distance(lat.sites, 0.0)
    assert d[1] == 1.0 and d[7] == 1.0 and d[4] == 4.0


def test_static_flat_case(lattice4):
    model = builtin_scenario("static", {"m": 1.0})
    x = lattice4.sites
    assert np.all(model.alpha(0.0, x) == 1.0)
    assert np.all(model.beta(0.0, x) == 0.0)
    assert np.all(model.g_sigma(0.0, x) == 1.0)
    assert np.all(model.Y(0.0, x) == 1.0)
    assert np.all(model.A0(0.0, x) == 0.0)
    assert model.time_independent


def test_static_negative_mass_rejected():
    with pytest.raises(AssumptionViolation, match="Y lower-bound"):
        builtin_scenario("static", {"m": -1.0})


def test_unknown_scenario_and_keys():
    with pytest.raises(ScenarioError, match="unknown scenario"):
        builtin_scenario("warp", {})
    with pytest.raises(ScenarioError, match="unknown parameter"):
        builtin_scenario("static", {"m": 1.0, "typo": 2.0})
    with pytest.raises(ScenarioError, match="requires parameter"):
        builtin_scenario("frw", {"a0": 1.0})


def test_frw_interpolation_values():
    model = builtin_scenario("frw", {"a0": 1.0, "a1": 2.0, "rho": 1.0})
    x = np.array([0.0, 1.0])
    # a(t) = ((a0+a1) + (a1-a0) tanh(rho t))/2, so a(0) = 1.5
    assert np.allclose(model.g_sigma(0.0, x), 2.25)
    assert np.allclose(model.gamma(0.0, x), 1.5)
    # derivative of the stated interpolation
    rho = 1.0
    expected = 0.5 * (2.0 - 1.0) * rho / math.cosh(rho * 0.7) ** 2
    assert np.allclose(model.gamma_dot(0.7, x), expected, rtol=1e-13)


def test_frw_asymptote(lattice64):
    model = builtin_scenario("frw", {"a0": 1.0, "a1": 2.0, "rho": 1.0})
    sl = sample_slice(model, lattice64, 20.0)
    assert np.max(np.abs(sl.g_sigma_inv_tilde - 0.25)) < 1e-8


def test_sample_slice_static_values(lattice4):
    model = builtin_scenario("static", {"m": 1.0})
    sl = sample_slice(model, lattice4, 0.0)
    assert np.all(sl.V == 0.0)
    assert np.all(sl.g_sigma_inv_tilde == 1.0)
    assert np.all(sl.Y_tilde == 1.0)


def test_sample_slice_deterministic_and_time_independent(frw_model, static_model, lattice64):
    a = sample_slice(frw_model, lattice64, 0.3)
    b = sample_slice(frw_model, lattice64, 0.3)
    for name in ("alpha", "gamma", "gamma_dot", "g_sigma_inv_tilde", "Y_tilde", "V"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    s1 = sample_slice(static_model, lattice64, -3.0)
    s2 = sample_slice(static_model, lattice64, 7.0)
    for name in ("alpha", "gamma", "g_sigma_inv_tilde", "Y_tilde", "V", "A1"):
        assert np.array_equal(getattr(s1, name), getattr(s2, name))


def test_timelike_condition_enforced(lattice64):
    model = builtin_scenario("static", {"m": 1.0, "beta": 0.5})
    sl = sample_slice(model, lattice64, 0.0)
    assert np.all(sl.V == 0.0)
    with pytest.raises(AssumptionViolation, match="timelike"):
        builtin_scenario("static", {"m": 1.0, "beta": 1.2})


def test_timelike_violation_reports_site(lattice64):
    base = builtin_scenario("static", {"m": 1.0})
    from kgprop.geometry import ScenarioModel

    def bad_beta(t, x):
        out = np.zeros_like(np.asarray(x, dtype=float))
        out[5] = 2.0
        return out

    model = ScenarioModel(name="bad", alpha=base.alpha, alpha_dot=base.alpha_dot,
                          beta=bad_beta, gamma=base.gamma, gamma_dot=base.gamma_dot,
                          g_sigma=base.g_sigma, A0=base.A0, A1=base.A1, Y=base.Y)
    with pytest.raises(AssumptionViolation, match="site 5"):
        sample_slice(model, lattice64, 0.0)
    # check=False permits diagnostic sampling
    sl = sample_slice(model, lattice64, 0.0, check=False)
    assert sl.beta[5] == 2.0


def test_bump_locality(lattice64):
    static = builtin_scenario("static", {"m": 1.0})
    bump = builtin_scenario("bump", {"m": 1.0, "amplitude": 0.5, "width": 4.0,
                                     "center": 32.0})
    s0 = sample_slice(static, lattice64, 0.0)
    s1 = sample_slice(bump, lattice64, 0.0)
    diff = np.abs(s1.Y_tilde - s0.Y_tilde)
    inside = np.abs(lattice64.sites - 32.0) < 4.0
    assert np.all(diff[~inside] == 0.0)
    assert np.any(diff[inside] > 0.0)
    for name in ("alpha", "beta", "gamma", "g_sigma_inv_tilde", "V"):
        assert np.array_equal(getattr(s1, name), getattr(s0, name))


def test_bump_in_time_support(lattice64):
    bump = builtin_scenario("bump", {"m": 1.0, "amplitude": 0.5, "width": 4.0,
                                     "center": 32.0, "t_center": 0.0, "t_width": 1.0})
    early = sample_slice(bump, lattice64, -2.0)
    mid = sample_slice(bump, lattice64, 0.0)
    assert np.all(early.Y_tilde == 1.0)
    assert np.max(mid.Y_tilde) > 1.0


def test_step_potential(lattice64):
    model = builtin_scenario("step-potential", {"m": 1.0, "height": 2.0, "x0": 10.0,
                                                "x1": 20.0})
    sl = sample_slice(model, lattice64, 0.0)
    x = lattice64.sites
    band = (x >= 10.0) & (x < 20.0)
    assert np.all(sl.Y_tilde[band] == 3.0)
    assert np.all(sl.Y_tilde[~band] == 1.0)


def test_gamma_consistency_invariant(lattice64):
    base = builtin_scenario("frw", {"a0": 1.0, "a1": 2.0, "rho": 1.0})
    from kgprop.geometry import ScenarioModel

    broken = ScenarioModel(name="broken", alpha=base.alpha, alpha_dot=base.alpha_dot,
                           beta=base.beta, gamma=lambda t, x: base.gamma(t, x) * 1.001,
                           gamma_dot=base.gamma_dot, g_sigma=base.g_sigma,
                           A0=base.A0, A1=base.A1, Y=base.Y)
    with pytest.raises(AssumptionViolation, match="gamma"):
        sample_slice(broken, lattice64, 0.0)
