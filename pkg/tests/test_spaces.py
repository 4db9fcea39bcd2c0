import numpy as np
import pytest

from kgprop.geometry import sample_slice
from kgprop.operators import (assemble_L, estimate_appendixB_constants,
                              make_operator_set, operator_set_from_matrices)
from kgprop.spaces import build_norm_family, charge_form_bound, k_delta_norm, norm


@pytest.fixture(scope="module")
def mode2():
    # single mode omega = 2: L = [[4]], W = 0
    return operator_set_from_matrices(np.array([[4.0 + 0j]]), np.array([[0.0 + 0j]]))


def test_mode_dual_gram_and_absB(mode2):
    fam = build_norm_family(mode2)
    np.testing.assert_allclose(np.diag(mode2.S_dual).real, [1.0, 0.25], atol=1e-14)
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(fam.abs_B)), [2.0, 2.0],
                               atol=1e-12)
    np.testing.assert_allclose(fam.gram(0.0), np.diag([2.0, 0.5]), atol=1e-12)
    assert norm(np.array([1.0, 0.0]), fam, 0.0) == pytest.approx(np.sqrt(2.0), rel=1e-12)


def test_lambda_endpoints(mode2):
    fam = build_norm_family(mode2)
    np.testing.assert_allclose(fam.gram(-1.0), mode2.S_dual, atol=1e-14)
    assert np.linalg.norm(fam.gram(1.0) - mode2.H, 2) < 1e-10


def test_lambda_endpoints_nontrivial(frw_model, lattice64):
    ops = make_operator_set(sample_slice(frw_model, lattice64, 0.0), lattice64)
    fam = build_norm_family(ops)
    assert np.linalg.norm(fam.gram(-1.0) - ops.S_dual, 2) < 1e-12
    assert np.linalg.norm(fam.gram(1.0) - ops.H, 2) < 1e-10 * np.linalg.norm(ops.H, 2)


def test_absB_identities(frw_model, lattice64):
    ops = make_operator_set(sample_slice(frw_model, lattice64, 0.3), lattice64)
    fam = build_norm_family(ops)
    scale = np.linalg.norm(ops.B, 2) ** 2
    assert np.linalg.norm(fam.abs_B @ fam.abs_B - ops.B @ ops.B, 2) < 1e-10 * scale
    # H = (Q H^-1 Q) |B|^2
    assert np.linalg.norm(ops.H - ops.S_dual @ fam.abs_B @ fam.abs_B, 2) < 1e-10 * scale
    assert fam.herm_residual < 1e-10


def test_euclidean_polar_differs(frw_model, lattice64):
    # |B| in the Euclidean geometry is a different operator; using it breaks
    # the dual-geometry self-adjointness of spectral projections
    from scipy.linalg import sqrtm

    ops = make_operator_set(sample_slice(frw_model, lattice64, 0.0), lattice64)
    fam = build_norm_family(ops)
    absB_euclid = sqrtm(ops.B.conj().T @ ops.B)
    assert np.linalg.norm(absB_euclid - fam.abs_B, 2) > 1e-3
    # the transformed generator is Hermitian in the dual geometry but B itself
    # is not Hermitian in the Euclidean one
    assert np.linalg.norm(ops.B - ops.B.conj().T, 2) > 1e-3


def test_norm_N4_example(lattice4, static_model):
    sl = sample_slice(static_model, lattice4, 0.0)
    ops = make_operator_set(sl, lattice4)
    fam = build_norm_family(ops)
    u = np.zeros(8, dtype=complex)
    u[0] = 1.0
    expected = np.sqrt(1.0 + 8.0 / np.pi ** 2)
    assert norm(u, fam, 1.0) == pytest.approx(expected, rel=1e-10)
    assert expected == pytest.approx(1.3456, abs=5e-5)


def test_zero_vector_and_dimension(mode2):
    fam = build_norm_family(mode2)
    assert norm(np.zeros(2), fam, 0.5) == 0.0
    with pytest.raises(ValueError):
        norm(np.zeros(3), fam, 0.0)
    with pytest.raises(ValueError):
        norm(np.zeros(2), fam, 1.5)


def test_k_delta_norm(lattice4, static_model):
    sl = sample_slice(static_model, lattice4, 0.0)
    L = assemble_L(sl, lattice4, 0.0)
    eigs, vecs = np.linalg.eigh(L)
    v = vecs[:, -1]
    assert k_delta_norm(v, L, 1.0) == pytest.approx(np.sqrt(eigs[-1]), rel=1e-12)
    rng = np.random.default_rng(0)
    w = rng.standard_normal(4)
    assert k_delta_norm(w, L, 0.0) == pytest.approx(np.linalg.norm(w), rel=1e-14)
    e0 = np.zeros(4)
    e0[0] = 1.0
    Linv = np.linalg.inv(L)
    assert k_delta_norm(e0, L, -1.0) == pytest.approx(np.sqrt(Linv[0, 0].real), rel=1e-10)
    with pytest.raises(ValueError):
        k_delta_norm(e0, L, 1.5)


def test_norm_equivalence_across_time(frw_model, lattice64, rng):
    # ||u||_{lam,s} <= ||u||_{lam,t} exp(c int C) with measured constants
    times = np.linspace(-1.0, 1.0, 41)
    table = estimate_appendixB_constants(frw_model, lattice64, times)
    pairs = [(-0.5, 0.5), (0.0, 1.0), (-1.0, 0.0)]
    fams = {t: build_norm_family(make_operator_set(
        sample_slice(frw_model, lattice64, t), lattice64)) for t in
        sorted({t for p in pairs for t in p})}
    for (s, t) in pairs:
        factor = np.exp(table.c_factor(s, t) * table.integral(s, t))
        for lam in (-1.0, 0.0, 1.0):
            for _ in range(100):
                u = rng.standard_normal(128) + 1j * rng.standard_normal(128)
                ns = norm(u, fams[s], lam)
                nt = norm(u, fams[t], lam)
                assert ns <= nt * factor * (1 + 1e-9)
                assert nt <= ns * factor * (1 + 1e-9)


def test_charge_form_bounded_on_dyn(frw_model, lattice64, rng):
    ops = make_operator_set(sample_slice(frw_model, lattice64, 0.0), lattice64)
    fam = build_norm_family(ops)
    bound = charge_form_bound(fam)
    assert np.isfinite(bound)
    G0 = fam.gram(0.0)
    Q = ops.Q
    worst = 0.0
    for _ in range(100):
        u = rng.standard_normal(128) + 1j * rng.standard_normal(128)
        v = rng.standard_normal(128) + 1j * rng.standard_normal(128)
        nu = np.sqrt(np.real(np.vdot(u, G0 @ u)))
        nv = np.sqrt(np.real(np.vdot(v, G0 @ v)))
        q = np.vdot(u, Q @ v)
        worst = max(worst, abs(q) / (nu * nv))
        # symplectic antisymmetry of the imaginary part
        assert np.imag(np.vdot(v, Q @ u)) == pytest.approx(-np.imag(q), abs=1e-12)
    assert worst <= bound * (1 + 1e-9)


def test_lambda_interpolation_two_sided(frw_model, lattice64, rng):
    # the lam=0 norm is equivalent to the norm built from (L (+) L)^{1/4},
    # within the interpolation factor c^{1/2} from the delta=1 comparison
    ops = make_operator_set(sample_slice(frw_model, lattice64, 0.0), lattice64)
    fam = build_norm_family(ops)
    n = ops.n
    LL = np.zeros_like(ops.H)
    LL[:n, :n] = ops.L
    LL[n:, n:] = ops.L
    from kgprop.operators import fractional_power

    LL_half = fractional_power(LL, 0.5)
    LL_quarter = fractional_power(LL, 0.25)
    # c: dual-geometry equivalence constant between |B| and (L (+) L)^{1/2}
    M = fam.S_half @ LL_half @ fam.S_invhalf
    A = fam.S_half @ fam.abs_B @ fam.S_invhalf
    ratios = np.linalg.svd(A @ np.linalg.inv(M), compute_uv=False)
    c = max(ratios[0], 1.0 / ratios[-1])
    assert c >= 1.0
    for _ in range(50):
        u = rng.standard_normal(2 * n) + 1j * rng.standard_normal(2 * n)
        mid = norm(u, fam, 0.0)
        w = LL_quarter @ u
        ref = np.sqrt(max(np.real(np.vdot(w, ops.S_dual @ w)), 0.0))
        assert mid <= np.sqrt(c) * ref * (1 + 1e-8) + 1e-12
        assert ref <= np.sqrt(c) * mid * (1 + 1e-8) + 1e-12


def test_lambda_cache_keys(mode2):
    fam = build_norm_family(mode2, lambdas=(-1.0, 0.0, 1.0, 0.5))
    assert set(fam.lambda_cache) == {-1.0, 0.0, 1.0, 0.5}
    # uncached values computed on the fly without mutating the cache
    fam.gram(0.25)
    assert 0.25 not in fam.lambda_cache
