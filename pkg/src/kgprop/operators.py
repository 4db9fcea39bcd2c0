"""Assembly of the dense operator matrices L, W, H0, H, B and the charge form.

L is assembled through its quadratic form (never through the pointwise
differential expression), with the forward difference inside the form,
Peierls link phases for the electromagnetic potential A1, site-valued density
weights and midpoint geometric means of the rescaled spatial metric.  The
lattice L^2 weight (one factor of the spacing) cancels between the form and
the inner product, so the matrices act on plain site vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .errors import AssumptionViolation
from .geometry import FieldSlice, Lattice, ScenarioModel, sample_slice

#: flag threshold for the positive-mass bound on a(t) = ||W L^{-1/2}||
A_BOUND_MARGIN = 1e-6


def hermitian_fill(M: np.ndarray) -> np.ndarray:
    """Return M with the lower triangle and diagonal filled from the upper one.

    Entry (i,j) with i<j is computed once and mirrored, so the result is
    Hermitian at the bit level without averaging the two triangles.
    """
    out = np.array(M, dtype=complex)
    iu, ju = np.triu_indices(out.shape[0], k=1)
    out[ju, iu] = np.conj(out[iu, ju])
    di = np.diag_indices(out.shape[0])
    out[di] = out[di].real
    return out


def forward_difference(lattice: Lattice) -> np.ndarray:
    """Forward difference D u|_j = -i (u_{j+1} - u_j)/spacing (periodic)."""
    n, h = lattice.n_sites, lattice.spacing
    D = np.zeros((n, n), dtype=complex)
    idx = np.arange(n)
    D[idx, idx] = 1j / h
    D[idx, (idx + 1) % n] = -1j / h
    return D


def centered_difference(lattice: Lattice) -> np.ndarray:
    """Centered difference D_c u|_j = -i (u_{j+1} - u_{j-1})/(2 spacing)."""
    n, h = lattice.n_sites, lattice.spacing
    D = np.zeros((n, n), dtype=complex)
    idx = np.arange(n)
    D[idx, (idx + 1) % n] = -1j / (2 * h)
    D[idx, (idx - 1) % n] = 1j / (2 * h)
    return D


def link_derivative(slice_: FieldSlice, lattice: Lattice) -> np.ndarray:
    """Matrix of the covariant link derivative gamma^{1/2} (D - A) gamma^{-1/2}.

    Row j is the value on the link between sites j and j+1.  The gauge
    potential enters through the Peierls phase exp(-i A_mid h) on the hop, so
    a constant shift of A1 conjugates L by a diagonal phase exactly (up to the
    flux through the circle).  The density weights use site values combined to
    the link by geometric means.
    """
    n, h = lattice.n_sites, lattice.spacing
    gamma = slice_.gamma
    nxt = (np.arange(n) + 1) % n
    a_mid = 0.5 * (slice_.A1 + slice_.A1[nxt])
    phase = np.exp(-1j * a_mid * h)
    # r_j = (gamma_{j+1}/gamma_j)^{1/4}; the outer gamma^{1/2} on the link is
    # the geometric mean (gamma_j gamma_{j+1})^{1/4}
    r = (gamma[nxt] / gamma) ** 0.25
    R = np.zeros((n, n), dtype=complex)
    idx = np.arange(n)
    R[idx, idx] = 1j * r / h
    R[idx, nxt] = -1j * phase / (h * r)
    return R


def assemble_L(slice_: FieldSlice, lattice: Lattice, b: float = 0.0) -> np.ndarray:
    """Assemble the Hermitian operator L = R^dag g_tilde_mid R + diag(Y_tilde + b).

    The kinetic part is the matrix of the discrete quadratic form, hence
    Hermitian positive semidefinite by construction.  ``b`` is the mass shift
    applied uniformly (L + b).
    """
    if b < 0:
        raise ValueError(f"mass shift b must be nonnegative, got {b}")
    n = lattice.n_sites
    nxt = (np.arange(n) + 1) % n
    g_mid = np.sqrt(slice_.g_sigma_inv_tilde * slice_.g_sigma_inv_tilde[nxt])
    R = link_derivative(slice_, lattice)
    L = R.conj().T @ (g_mid[:, None] * R)
    L[np.diag_indices(n)] += slice_.Y_tilde + b
    if not np.all(np.isfinite(L)):
        raise AssumptionViolation(f"non-finite entries in L at t={slice_.time_stamp}")
    return hermitian_fill(L)


def assemble_W(slice_: FieldSlice, lattice: Lattice) -> np.ndarray:
    """Assemble W = sym(beta D_c) + V - (1/2) gamma^{-1} (-i gamma_dot - beta D_c gamma).

    The principal part beta*D_c is symmetrized as (beta o D_c + D_c o beta)/2;
    the remaining terms are diagonal multiplication operators.
    """
    n = lattice.n_sites
    Dc = centered_difference(lattice)
    beta = slice_.beta
    W = 0.5 * (beta[:, None] * Dc + Dc * beta[None, :])
    dc_gamma = Dc @ slice_.gamma.astype(complex)
    diag = slice_.V - 0.5 / slice_.gamma * (-1j * slice_.gamma_dot - beta * dc_gamma)
    W[np.diag_indices(n)] += diag
    if not np.all(np.isfinite(W)):
        raise AssumptionViolation(f"non-finite entries in W at t={slice_.time_stamp}")
    return W


def charge_matrix(n: int) -> np.ndarray:
    """The 2n x 2n charge/swap form Q = [[0, 1], [1, 0]]."""
    Q = np.zeros((2 * n, 2 * n), dtype=complex)
    Q[:n, n:] = np.eye(n)
    Q[n:, :n] = np.eye(n)
    return Q


def assemble_H0(L: np.ndarray) -> np.ndarray:
    """Free Hamiltonian H0 = L (+) 1."""
    n = L.shape[0]
    H0 = np.zeros((2 * n, 2 * n), dtype=complex)
    H0[:n, :n] = L
    H0[n:, n:] = np.eye(n)
    return H0


def assemble_H(L: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Instantaneous Hamiltonian H = [[L, W^dag], [W, 1]] (exactly Hermitian)."""
    n = L.shape[0]
    H = np.zeros((2 * n, 2 * n), dtype=complex)
    H[:n, :n] = L
    H[:n, n:] = W.conj().T
    H[n:, :n] = W
    H[n:, n:] = np.eye(n)
    return H


def assemble_B(L: np.ndarray, W: np.ndarray, check: bool = True) -> np.ndarray:
    """Evolution generator B = [[W, 1], [L, W^dag]] = Q H.

    With ``check`` the minimum singular value is verified positive (0 in the
    resolvent set).  Callers that already hold min eig L > 0 and a < 1 may
    skip the check; invertibility then follows from the triangular
    factorization of B.
    """
    n = L.shape[0]
    B = np.zeros((2 * n, 2 * n), dtype=complex)
    B[:n, :n] = W
    B[:n, n:] = np.eye(n)
    B[n:, :n] = L
    B[n:, n:] = W.conj().T
    if check:
        smin = np.linalg.svd(B, compute_uv=False)[-1]
        if smin <= 0:
            raise AssumptionViolation(
                "B is singular (positive-mass violation: 0 must be in the resolvent set)")
    return B


def fractional_power(M: np.ndarray, delta: float) -> np.ndarray:
    """M**delta for Hermitian positive-definite M, by full eigendecomposition."""
    M = np.asarray(M)
    eigs, V = np.linalg.eigh(M)
    if eigs[0] <= 0:
        raise AssumptionViolation(
            f"fractional_power requires a positive-definite matrix (min eig {eigs[0]:.3e})")
    if delta == 0:
        return np.eye(M.shape[0], dtype=complex)
    return hermitian_fill((V * eigs ** delta) @ V.conj().T)


@dataclass(frozen=True)
class OperatorSet:
    """All dense operators of one time slice, plus the measured bound a(t).

    The dual Gram S_dual = Q H^{-1} Q is computed on first access (it is
    needed for norm families but not for plain evolution stepping).
    """

    time_stamp: float
    L: np.ndarray
    W: np.ndarray
    H0: np.ndarray
    H: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    a_bound: float
    min_eig_L: float

    @property
    def n(self) -> int:
        return self.L.shape[0]

    @cached_property
    def S_dual(self) -> np.ndarray:
        if not (self.min_eig_L > 0 and self.a_bound < 1.0):
            return np.full(self.H.shape, np.nan, dtype=complex)
        h_eigs, h_vecs = np.linalg.eigh(self.H)
        H_inv = (h_vecs / h_eigs) @ h_vecs.conj().T
        return hermitian_fill(self.Q @ H_inv @ self.Q)


def make_operator_set(slice_: FieldSlice, lattice: Lattice, b: float = 0.0,
                      strict: bool = True) -> OperatorSet:
    """Assemble the full operator set at one time.

    With ``strict`` (default) the positive-mass assumptions are enforced:
    min eig L > 0 and a_bound <= 1 - 1e-6; a violation raises
    ``AssumptionViolation``.  With ``strict=False`` the set is still returned
    so diagnostics can report the violation.
    """
    L = assemble_L(slice_, lattice, b)
    W = assemble_W(slice_, lattice)
    return operator_set_from_matrices(L, W, slice_.time_stamp, strict=strict)


def operator_set_from_matrices(L: np.ndarray, W: np.ndarray, time_stamp: float = 0.0,
                               strict: bool = True) -> OperatorSet:
    """Operator set from explicit L (Hermitian) and W matrices (mode tests, limits)."""
    L = hermitian_fill(L)
    n = L.shape[0]
    l_eigs, l_vecs = np.linalg.eigh(L)
    min_eig = float(l_eigs[0])
    if min_eig <= 0:
        if strict:
            raise AssumptionViolation(
                f"L is not positive definite at t={time_stamp} (min eig {min_eig:.3e}); "
                "a mass shift b may restore positivity")
        a_bound = np.inf
    else:
        L_inv_half = hermitian_fill((l_vecs * l_eigs ** -0.5) @ l_vecs.conj().T)
        a_bound = float(np.linalg.svd(W @ L_inv_half, compute_uv=False)[0])
        if strict and a_bound > 1.0 - A_BOUND_MARGIN:
            raise AssumptionViolation(
                f"positive-mass violation at t={time_stamp}: ||W L^(-1/2)|| = {a_bound:.6f} "
                f"exceeds 1 - {A_BOUND_MARGIN}")

    return OperatorSet(time_stamp=float(time_stamp), L=L, W=W,
                       H0=assemble_H0(L), H=assemble_H(L, W),
                       B=assemble_B(L, W, check=False), Q=charge_matrix(n),
                       a_bound=a_bound, min_eig_L=min_eig)


def ops_provider(model: ScenarioModel, lattice: Lattice, strict: bool = True):
    """Return a callable t -> OperatorSet for the given scenario.

    For time-independent scenarios the set is assembled once and reused.
    """
    b = model.mass_shift
    if model.time_independent:
        cached = make_operator_set(sample_slice(model, lattice, 0.0), lattice, b, strict=strict)

        def provider(t: float) -> OperatorSet:
            if t == cached.time_stamp:
                return cached
            clone = replace(cached, time_stamp=float(t))
            if "S_dual" in cached.__dict__:
                clone.__dict__["S_dual"] = cached.__dict__["S_dual"]
            return clone
    else:
        def provider(t: float) -> OperatorSet:
            return make_operator_set(sample_slice(model, lattice, t), lattice, b, strict=strict)

    provider.time_independent = model.time_independent
    provider.model = model
    provider.lattice = lattice
    return provider


# ---------------------------------------------------------------------------
# assumption diagnostics


@dataclass(frozen=True)
class AssumptionReport:
    """Diagnostic record for Assumptions 1 (local) and 2 (global in time)."""

    times: np.ndarray
    a_bounds: np.ndarray
    min_eigs_L: np.ndarray
    pair_increments: np.ndarray      # per adjacent pair: the two-norm sum estimate
    integral_C: float
    assumption1_ok: bool
    assumption2_ok: bool
    notes: tuple = ()


def _pair_increment(ops_t: OperatorSet, ops_s: OperatorSet) -> float:
    """||L_t^{-1/2}(L_t - L_s)L_t^{-1/2}|| + 2||(W_t - W_s)L_t^{-1/2}||."""
    Lt_inv_half = fractional_power(ops_t.L, -0.5)
    term1 = np.linalg.norm(Lt_inv_half @ (ops_t.L - ops_s.L) @ Lt_inv_half, 2)
    term2 = 2.0 * np.linalg.norm((ops_t.W - ops_s.W) @ Lt_inv_half, 2)
    return float(term1 + term2)


def verify_assumptions(ops_at_times, window=None, tail_fraction: float = 0.1,
                       tail_share: float = 0.05) -> AssumptionReport:
    """Check the positive-mass and growth assumptions on a sequence of operator sets.

    Always returns a report; violations are flags, not exceptions.  The global
    flag additionally requires the window to look asymptotically settled: the
    first and last ``tail_fraction`` of the adjacent-pair increments must
    together carry at most ``tail_share`` of the total integral estimate.
    """
    ops_list = list(ops_at_times)
    if len(ops_list) < 2:
        raise ValueError("verify_assumptions needs at least 2 time samples")
    if window is not None:
        lo, hi = min(window), max(window)
        ops_list = [o for o in ops_list if lo <= o.time_stamp <= hi]
        if len(ops_list) < 2:
            raise ValueError("fewer than 2 samples inside the requested window")
    ops_list.sort(key=lambda o: o.time_stamp)

    times = np.array([o.time_stamp for o in ops_list])
    a_bounds = np.array([o.a_bound for o in ops_list])
    min_eigs = np.array([o.min_eig_L for o in ops_list])
    increments = np.array([
        _pair_increment(ops_list[j + 1], ops_list[j]) if min_eigs[j + 1] > 0 else np.inf
        for j in range(len(ops_list) - 1)
    ])
    integral_C = float(np.sum(increments))

    notes = []
    ok1 = bool(np.all(min_eigs > 0))
    if not ok1:
        notes.append("Assumption 1.a violated: L not positive definite at some time")
    if not np.all(a_bounds <= 1.0 - A_BOUND_MARGIN):
        ok1 = False
        notes.append(f"Assumption 1.b violated: max a(t) = {np.max(a_bounds):.6f}")
    if not np.isfinite(integral_C):
        ok1 = False
        notes.append("Assumption 1.c estimate not finite")

    ok2 = ok1
    if ok2 and integral_C > 0:
        k = max(1, int(np.ceil(tail_fraction * len(increments))))
        tails = float(np.sum(increments[:k]) + np.sum(increments[-k:]))
        if tails > tail_share * integral_C:
            ok2 = False
            notes.append(
                f"window does not look asymptotically settled: tail share {tails / integral_C:.3f}")

    return AssumptionReport(times=times, a_bounds=a_bounds, min_eigs_L=min_eigs,
                            pair_increments=increments, integral_C=integral_C,
                            assumption1_ok=ok1, assumption2_ok=ok2, notes=tuple(notes))


# ---------------------------------------------------------------------------
# concrete growth constants


@dataclass(frozen=True)
class ConstantTable:
    """Tabulated growth constants realizing the integral bound on the window.

    ``C_composite`` is c(t)(2 C_D + C_D^2) + C_gamma + C_Y + C_g + C_W with
    C_D = C_A + C_gamma/2 and c(t) = 1 + int_{t-1}^{t+1} C_g.  ``a_bounds``
    carries ||W L^{-1/2}|| on the same grid for the norm-bound checks.
    Time derivatives of the sampled coefficient fields are taken by finite
    differences over the grid (flagged approximate); gamma_dot is exact.
    """

    times: np.ndarray
    C_Y: np.ndarray
    C_W: np.ndarray
    C_A: np.ndarray
    C_gamma: np.ndarray
    C_g: np.ndarray
    C_composite: np.ndarray
    a_bounds: np.ndarray
    approximate_derivatives: bool = True

    def integral(self, s: float, t: float) -> float:
        """Trapezoid integral of the composite C over [min(s,t), max(s,t)]."""
        lo, hi = (s, t) if s <= t else (t, s)
        mask = (self.times >= lo - 1e-12) & (self.times <= hi + 1e-12)
        if np.count_nonzero(mask) < 2:
            raise ValueError(f"constant table does not cover [{lo}, {hi}]")
        return float(np.trapezoid(self.C_composite[mask], self.times[mask]))

    def c_factor(self, s: float, t: float) -> float:
        """sup over the window of (1 - a(tau))^{-1}."""
        lo, hi = (s, t) if s <= t else (t, s)
        mask = (self.times >= lo - 1e-12) & (self.times <= hi + 1e-12)
        a_max = float(np.max(self.a_bounds[mask]))
        if a_max >= 1.0:
            raise AssumptionViolation(f"a(t) >= 1 on [{lo}, {hi}]")
        return 1.0 / (1.0 - a_max)


def _time_derivative(samples: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Columnwise d/dt by centered differences (one-sided at the ends)."""
    return np.gradient(samples, times, axis=0)


def estimate_appendixB_constants(model: ScenarioModel, lattice: Lattice,
                                 times) -> ConstantTable:
    """Estimate the concrete per-time constants and their composite C(t).

    Each constituent bounds the corresponding weighted norm of a time
    derivative: C_Y for Y_tilde, C_W for W, C_A for A, C_gamma for the
    logarithmic density gradient, C_g for the rescaled metric.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) < 2:
        raise ValueError("times grid must contain at least 2 points")
    b = model.mass_shift
    slices = [sample_slice(model, lattice, t) for t in times]
    ops = [make_operator_set(s, lattice, b) for s in slices]
    Dc = centered_difference(lattice)

    y_t = np.array([s.Y_tilde for s in slices])
    a1_t = np.array([s.A1 for s in slices])
    g_t = np.array([s.g_sigma_inv_tilde for s in slices])
    # gamma^{-1} d gamma at the sites (the 1-form component), from exact gamma
    log_gamma_grad = np.array([np.real(Dc @ np.log(s.gamma).astype(complex)) for s in slices])

    y_dot = _time_derivative(y_t, times)
    a1_dot = _time_derivative(a1_t, times)
    g_dot = _time_derivative(g_t, times)
    lg_dot = _time_derivative(log_gamma_grad, times)

    m = len(times)
    C_Y = np.zeros(m)
    C_W = np.zeros(m)
    C_A = np.zeros(m)
    C_gamma = np.zeros(m)
    C_g = np.zeros(m)
    a_bounds = np.zeros(m)

    w_mats = [assemble_W(s, lattice) for s in slices]
    w_dot = _time_derivative(np.array(w_mats), times)

    for k in range(m):
        L_inv_half = fractional_power(ops[k].L, -0.5)
        g_half = np.sqrt(slices[k].g_sigma_inv_tilde)
        C_Y[k] = np.linalg.norm(L_inv_half @ np.diag(y_dot[k]) @ L_inv_half, 2)
        C_W[k] = np.linalg.norm(w_dot[k] @ L_inv_half, 2)
        C_A[k] = np.linalg.norm((g_half * a1_dot[k])[:, None] * L_inv_half, 2)
        C_gamma[k] = np.linalg.norm((g_half * lg_dot[k])[:, None] * L_inv_half, 2)
        C_g[k] = float(np.max(np.abs(g_dot[k]) / g_t[k]))
        a_bounds[k] = ops[k].a_bound

    # c(t) = 1 + integral of C_g over [t-1, t+1] intersected with the grid
    c_of_t = np.zeros(m)
    for k in range(m):
        mask = (times >= times[k] - 1.0) & (times <= times[k] + 1.0)
        if np.count_nonzero(mask) >= 2:
            c_of_t[k] = 1.0 + float(np.trapezoid(C_g[mask], times[mask]))
        else:
            c_of_t[k] = 1.0
    C_D = C_A + 0.5 * C_gamma
    composite = c_of_t * (2.0 * C_D + C_D ** 2) + C_gamma + C_Y + C_g + C_W

    return ConstantTable(times=times, C_Y=C_Y, C_W=C_W, C_A=C_A, C_gamma=C_gamma,
                         C_g=C_g, C_composite=composite, a_bounds=a_bounds,
                         approximate_derivatives=True)
