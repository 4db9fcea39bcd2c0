import numpy as np
import pytest

from kgprop.errors import AssumptionViolation
from kgprop.geometry import Lattice, builtin_scenario, sample_slice
from kgprop.operators import (assemble_B, assemble_H, assemble_H0, assemble_L,
                              assemble_W, charge_matrix, estimate_appendixB_constants,
                              fractional_power, make_operator_set, ops_provider,
                              verify_assumptions)


def circulant_symbol(m, n, h, k):
    return m * m + (2.0 / h ** 2) * (1.0 - np.cos(2 * np.pi * k / n))


def test_static_L_eigenvalues_N4(lattice4, static_model):
    sl = sample_slice(static_model, lattice4, 0.0)
    L = assemble_L(sl, lattice4, 0.0)
    got = np.sort(np.linalg.eigvalsh(L))
    expected = np.sort([circulant_symbol(1.0, 4, np.pi / 2, k) for k in range(4)])
    np.testing.assert_allclose(got, expected, rtol=1e-12)
    # frozen values from the closed form
    np.testing.assert_allclose(
        got, [1.0, 1.8105694691387022, 1.8105694691387022, 2.6211389382774044],
        rtol=1e-12)


def test_L_hermitian_bit_exact(frw_model, lattice64):
    sl = sample_slice(frw_model, lattice64, 0.4)
    L = assemble_L(sl, lattice64, 0.0)
    assert np.linalg.norm(L - L.conj().T) == 0.0
    H = assemble_H(L, assemble_W(sl, lattice64))
    assert np.linalg.norm(H - H.conj().T) == 0.0


def test_gauge_shift_spectrum(lattice64, static_model):
    # flux-quantized constant A1 conjugates L by a diagonal phase
    n, h = lattice64.n_sites, lattice64.spacing
    c = 2 * np.pi * 3 / (n * h)
    plain = sample_slice(static_model, lattice64, 0.0)
    gauged = sample_slice(builtin_scenario("static", {"m": 1.0, "a1": c}), lattice64, 0.0)
    L0 = assemble_L(plain, lattice64, 0.0)
    Lc = assemble_L(gauged, lattice64, 0.0)
    phase = np.exp(1j * c * lattice64.sites)
    conj = (phase[:, None] * L0) * np.conj(phase)[None, :]
    np.testing.assert_allclose(Lc, conj, atol=1e-12)
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(Lc)),
                               np.sort(np.linalg.eigvalsh(L0)), rtol=1e-12)


def test_gauge_shift_symbol_general(lattice64, static_model):
    # non-quantized constant A1 shifts the circulant symbol in k
    n, h = lattice64.n_sites, lattice64.spacing
    c = 0.17
    gauged = sample_slice(builtin_scenario("static", {"m": 1.0, "a1": c}), lattice64, 0.0)
    Lc = assemble_L(gauged, lattice64, 0.0)
    theta = 2 * np.pi * np.arange(n) / n
    expected = np.sort(1.0 + (4.0 / h ** 2) * np.sin((theta - c * h) / 2.0) ** 2)
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(Lc)), expected, rtol=1e-10)


def test_negative_Y_with_shift(lattice64):
    # Y = -0.5 shifted by b = 1: Weyl bound against the kinetic part >= 0
    model = builtin_scenario("static", {"m": 1.0, "y": -0.5})
    sl = sample_slice(model, lattice64, 0.0)
    L = assemble_L(sl, lattice64, 1.0)
    assert np.linalg.eigvalsh(L)[0] >= 0.5 - 1e-12
    with pytest.raises(AssumptionViolation, match="not positive definite"):
        make_operator_set(sl, lattice64, 0.0)


def test_W_trivial_and_frw(lattice64, frw_model):
    sl = sample_slice(builtin_scenario("static", {"m": 1.0}), lattice64, 0.0)
    assert np.linalg.norm(assemble_W(sl, lattice64)) == 0.0
    t = 0.3
    sl = sample_slice(frw_model, lattice64, t)
    W = assemble_W(sl, lattice64)
    x = lattice64.sites
    expected = 0.5j * frw_model.gamma_dot(t, x)[0] / frw_model.gamma(t, x)[0]
    np.testing.assert_allclose(W, expected * np.eye(64), atol=1e-14)


def test_W_shift_symbol_bound(lattice64):
    # constant beta: ||W L^{-1/2}|| stays below |beta| sqrt(g_sigma)/alpha < 1
    model = builtin_scenario("static", {"m": 1.0, "beta": 0.6})
    ops = make_operator_set(sample_slice(model, lattice64, 0.0), lattice64)
    assert ops.a_bound < 0.6
    assert ops.a_bound > 0.3


def test_frw_a_bound_formula(lattice64, frw_model):
    t = 0.0
    ops = make_operator_set(sample_slice(frw_model, lattice64, t), lattice64)
    x = lattice64.sites
    gdot = frw_model.gamma_dot(t, x)[0]
    g = frw_model.gamma(t, x)[0]
    omega_min = np.sqrt(np.linalg.eigvalsh(ops.L)[0])
    expected = abs(gdot) / (2 * g) / omega_min
    np.testing.assert_allclose(ops.a_bound, expected, rtol=1e-10)


def test_block_layout_and_mode_example():
    L = np.array([[4.0 + 0j]])
    W = np.array([[0.0 + 0j]])
    B = assemble_B(L, W)
    np.testing.assert_allclose(B, [[0, 1], [4, 0]])
    np.testing.assert_allclose(np.sort(np.linalg.eigvals(B).real), [-2, 2])
    H = assemble_H(L, W)
    np.testing.assert_allclose(H, assemble_H0(L))  # W=0 -> H = H0
    Q = charge_matrix(1)
    assert np.array_equal(Q @ H, B)


def test_QH_equals_B_exactly(frw_model, lattice64):
    ops = make_operator_set(sample_slice(frw_model, lattice64, 0.2), lattice64)
    assert np.array_equal(ops.Q @ ops.H, ops.B)
    # H = QB = B*Q both ways
    assert np.linalg.norm(ops.B.conj().T @ ops.Q - ops.Q @ ops.B) == 0.0


def test_B_factorization(frw_model, lattice64):
    ops = make_operator_set(sample_slice(frw_model, lattice64, 0.1), lattice64)
    n = ops.n
    I = np.eye(n)
    lower = np.block([[I, np.zeros((n, n))], [ops.W.conj().T, I]])
    mid = np.block([[np.zeros((n, n)), I],
                    [ops.L - ops.W.conj().T @ ops.W, np.zeros((n, n))]])
    upper = np.block([[I, np.zeros((n, n))], [ops.W, I]])
    assert np.linalg.norm(lower @ mid @ upper - ops.B, 2) < 1e-12


def test_form_bounds(frw_model, lattice64, rng):
    ops = make_operator_set(sample_slice(frw_model, lattice64, 0.0), lattice64)
    a = ops.a_bound
    for _ in range(50):
        u = rng.standard_normal(2 * ops.n) + 1j * rng.standard_normal(2 * ops.n)
        h0 = np.real(np.vdot(u, ops.H0 @ u))
        h = np.real(np.vdot(u, ops.H @ u))
        assert (1 - a) * h0 - 1e-9 <= h <= (1 + a) * h0 + 1e-9


def test_dual_bounds(frw_model, lattice64, rng):
    ops = make_operator_set(sample_slice(frw_model, lattice64, 0.0), lattice64)
    a = ops.a_bound
    Q = ops.Q
    H0_inv = np.linalg.inv(ops.H0)
    S0 = Q @ H0_inv @ Q
    for _ in range(50):
        u = rng.standard_normal(2 * ops.n) + 1j * rng.standard_normal(2 * ops.n)
        s = np.real(np.vdot(u, ops.S_dual @ u))
        s0 = np.real(np.vdot(u, S0 @ u))
        assert s0 / (1 + a) - 1e-9 <= s <= s0 / (1 - a) + 1e-9


def test_fractional_power():
    M = np.diag([1.0, 4.0]).astype(complex)
    np.testing.assert_allclose(fractional_power(M, 0.5), np.diag([1.0, 2.0]), atol=1e-14)
    np.testing.assert_allclose(fractional_power(M, 0.0), np.eye(2))
    with pytest.raises(AssumptionViolation):
        fractional_power(np.diag([1.0, -1.0]).astype(complex), 0.5)


def test_fractional_power_involution(frw_model, lattice64):
    ops = make_operator_set(sample_slice(frw_model, lattice64, 0.0), lattice64)
    P = fractional_power(ops.L, 0.37)
    Pm = fractional_power(ops.L, -0.37)
    assert np.linalg.norm(P @ Pm - np.eye(ops.n), 2) < 1e-12


def test_fractional_power_reciprocal_N4(lattice4, static_model):
    sl = sample_slice(static_model, lattice4, 0.0)
    L = assemble_L(sl, lattice4, 0.0)
    inv = fractional_power(L, -1.0)
    expected = np.sort(1.0 / np.array(
        [circulant_symbol(1.0, 4, np.pi / 2, k) for k in range(4)]))
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(inv)), expected, rtol=1e-12)


def test_verify_assumptions_static(static_model, lattice64):
    sets = [make_operator_set(sample_slice(static_model, lattice64, t), lattice64)
            for t in np.linspace(0, 2, 5)]
    rep = verify_assumptions(sets)
    assert rep.integral_C == 0.0
    assert rep.assumption1_ok and rep.assumption2_ok
    assert np.all(rep.a_bounds == rep.a_bounds[0])


def test_verify_assumptions_flags_large_potential(lattice64):
    from kgprop.geometry import ScenarioModel

    base = builtin_scenario("static", {"m": 1.0})
    strong = ScenarioModel(
        name="klein", alpha=base.alpha, alpha_dot=base.alpha_dot, beta=base.beta,
        gamma=base.gamma, gamma_dot=base.gamma_dot, g_sigma=base.g_sigma,
        A0=lambda t, x: np.full_like(np.asarray(x, float), 30.0), A1=base.A1,
        Y=base.Y, time_independent=True)
    sets = [make_operator_set(sample_slice(strong, lattice64, t, check=False),
                              lattice64, strict=False) for t in (0.0, 1.0)]
    rep = verify_assumptions(sets)
    assert not rep.assumption1_ok
    assert any("1.b" in note for note in rep.notes)


def test_verify_assumptions_global_flag(frw_model, lattice64):
    wide = [make_operator_set(sample_slice(frw_model, lattice64, t), lattice64)
            for t in np.linspace(-8, 8, 33)]
    narrow = [make_operator_set(sample_slice(frw_model, lattice64, t), lattice64)
              for t in np.linspace(-0.5, 0.5, 9)]
    assert verify_assumptions(wide).assumption2_ok
    assert not verify_assumptions(narrow).assumption2_ok


def test_appendixB_constants_static(static_model, lattice64):
    table = estimate_appendixB_constants(static_model, lattice64, np.linspace(0, 1, 9))
    for arr in (table.C_Y, table.C_W, table.C_A, table.C_gamma, table.C_g,
                table.C_composite):
        assert np.all(arr == 0.0)


def test_appendixB_constants_frw(frw_model, lattice64):
    times = np.linspace(-2, 2, 81)
    table = estimate_appendixB_constants(frw_model, lattice64, times)
    x = lattice64.sites
    expected = np.array([2 * abs(frw_model.gamma_dot(t, x)[0]) / frw_model.gamma(t, x)[0]
                         for t in times])
    # C_g = |d/dt g_tilde|/g_tilde = 2|adot|/a, up to the finite differencing
    np.testing.assert_allclose(table.C_g, expected, atol=5e-3)
    assert np.all(table.C_gamma == 0.0)  # gamma spatially constant
    assert table.integral(-1, 1) > 0


def test_appendixB_constants_bump_in_time(lattice64):
    model = builtin_scenario("bump", {"m": 1.0, "amplitude": 0.5, "width": 5.0,
                                      "center": 32.0, "t_center": 0.0, "t_width": 1.0})
    times = np.linspace(-3, 3, 61)
    table = estimate_appendixB_constants(model, lattice64, times)
    inside = np.abs(times) < 1.0
    assert np.max(table.C_Y[inside]) > 0
    assert np.max(table.C_Y[np.abs(times) > 1.5]) < 1e-12


def test_a_bound_stability_under_N_doubling(frw_model):
    # stability check, no rate claim
    a_vals = []
    for n in (32, 64, 128):
        lat = Lattice(n, 64.0 / n)
        ops = make_operator_set(sample_slice(frw_model, lat, 0.0), lat)
        a_vals.append(ops.a_bound)
    assert abs(a_vals[2] - a_vals[1]) <= abs(a_vals[1] - a_vals[0]) + 1e-6


def test_ops_provider_static_caching(static_model, lattice64):
    provider = ops_provider(static_model, lattice64)
    assert provider(0.0).L is provider(5.0).L  # matrices shared, stamp updated
    assert provider(5.0).time_stamp == 5.0
    assert provider.time_independent
