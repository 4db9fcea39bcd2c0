"""Two-sided evolution by the product of frozen-generator exponentials.

The step scheme freezes the generator at the left endpoint (the faithful
construction) or at the midpoint (order 2, the practical default) of each
step and multiplies the exponentials in time order, later factors on the
left.  Each factor is exactly charge-unitary, so the reverse-direction
evolution equals the charge-conjugate adjoint Q U^dag Q of the forward one;
this is how inverse evolutions are formed throughout (U itself is never
numerically inverted).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import expm

from .errors import AssumptionViolation, WindowExceeded
from .operators import OperatorSet, charge_matrix, fractional_power

SAMPLINGS = ("left", "midpoint")


@dataclass(frozen=True)
class StepSchedule:
    """Stepping plan for one evolution window (either time order is allowed)."""

    t_start: float
    t_end: float
    n_steps: int
    sampling: str = "midpoint"

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")
        if self.sampling not in SAMPLINGS + ("mixed",):
            raise ValueError(f"sampling must be one of {SAMPLINGS}, got '{self.sampling}'")

    @property
    def dt(self) -> float:
        return (self.t_end - self.t_start) / self.n_steps

    def sample_times(self) -> np.ndarray:
        j = np.arange(self.n_steps)
        if self.sampling == "left":
            return self.t_start + j * self.dt
        if self.sampling == "midpoint":
            return self.t_start + (j + 0.5) * self.dt
        raise ValueError("a mixed schedule cannot be re-sampled")


@dataclass(frozen=True)
class EvolutionOperator:
    """Dense evolution matrix U(t_end, t_start) with its schedule metadata."""

    U: np.ndarray
    schedule: StepSchedule
    richardson_error: float = 0.0

    @property
    def t_start(self) -> float:
        return self.schedule.t_start

    @property
    def t_end(self) -> float:
        return self.schedule.t_end


def reverse_matrix(U: np.ndarray) -> np.ndarray:
    """Inverse of a charge-unitary evolution matrix: Q U^dag Q."""
    n = U.shape[0] // 2
    Q = charge_matrix(n)
    return Q @ U.conj().T @ Q


def _dual_norm(M: np.ndarray, ops: OperatorSet) -> float:
    """Operator norm in the dual geometry of the given operator set."""
    S_half = fractional_power(ops.S_dual, 0.5)
    S_invhalf = fractional_power(ops.S_dual, -0.5)
    return float(np.linalg.norm(S_half @ M @ S_invhalf, 2))


def _product(ops_provider, schedule: StepSchedule, perturbation=None) -> np.ndarray:
    taus = schedule.sample_times()
    dt = schedule.dt
    # time-independent generator: one exponential serves every step
    static = getattr(ops_provider, "time_independent", False) and perturbation is None
    U = None
    step = None
    for tau in taus:
        if step is None or not static:
            ops = ops_provider(tau)
            if not ops.a_bound < 1.0:
                raise AssumptionViolation(
                    f"positive-mass violation at sampled time t={tau}: a = {ops.a_bound:.6f}")
            gen = ops.B
            if perturbation is not None:
                P = np.asarray(perturbation(tau))
                if np.any(P):
                    gen = gen + P
            step = expm(-1j * dt * gen)
        U = step if U is None else step @ U
    if U is None:
        raise AssumptionViolation("empty schedule")
    return U


def evolve(ops_provider, schedule: StepSchedule, richardson: bool = False) -> EvolutionOperator:
    """Evolution operator for the window of the schedule.

    ``ops_provider`` maps a time to its OperatorSet.  With ``richardson`` the
    window is recomputed once at doubled step count and the dual-norm
    difference ||U_2n - U_n|| is recorded (the returned matrix stays at the
    requested step count).  A coinciding window returns the identity with no
    steps taken.
    """
    if schedule.t_end == schedule.t_start:
        ops = ops_provider(schedule.t_start)
        return EvolutionOperator(U=np.eye(2 * ops.n, dtype=complex), schedule=schedule)
    U = _product(ops_provider, schedule)
    err = 0.0
    if richardson:
        fine = replace(schedule, n_steps=2 * schedule.n_steps)
        U2 = _product(ops_provider, fine)
        err = _dual_norm(U2 - U, ops_provider(schedule.t_start))
    if not np.all(np.isfinite(U)):
        raise AssumptionViolation("non-finite entries in the evolution matrix")
    return EvolutionOperator(U=U, schedule=schedule, richardson_error=err)


def perturbed_evolve(base_provider, perturbation, schedule: StepSchedule,
                     richardson: bool = False) -> EvolutionOperator:
    """Evolution for the perturbed generator B(t) + P(t).

    ``perturbation`` maps a time to a bounded 2N x 2N matrix; the product
    scheme is applied to the summed generator.  With P identically zero the
    output is bitwise identical to ``evolve``.  The main use is undoing the
    mass shift with P = [[0, 0], [-b, 0]].
    """
    if schedule.t_end == schedule.t_start:
        ops = base_provider(schedule.t_start)
        return EvolutionOperator(U=np.eye(2 * ops.n, dtype=complex), schedule=schedule)
    U = _product(base_provider, schedule, perturbation=perturbation)
    err = 0.0
    if richardson:
        fine = replace(schedule, n_steps=2 * schedule.n_steps)
        U2 = _product(base_provider, fine, perturbation=perturbation)
        err = _dual_norm(U2 - U, base_provider(schedule.t_start))
    if not np.all(np.isfinite(U)):
        raise AssumptionViolation("non-finite entries in the evolution matrix")
    return EvolutionOperator(U=U, schedule=schedule, richardson_error=err)


def mass_shift_perturbation(b: float, n: int):
    """Perturbation t -> [[0, 0], [-b, 0]] that removes a mass shift b from B_b."""
    P = np.zeros((2 * n, 2 * n), dtype=complex)
    P[n:, :n] = -b * np.eye(n)

    def perturbation(t: float) -> np.ndarray:
        return P

    return perturbation


def compose(U1: EvolutionOperator, U2: EvolutionOperator) -> EvolutionOperator:
    """Chain two evolutions: U1 covers [r, t], U2 covers [s, r]; result covers [s, t]."""
    if U1.schedule.t_start != U2.schedule.t_end:
        raise WindowExceeded(
            f"incompatible endpoints: U1 starts at {U1.schedule.t_start}, "
            f"U2 ends at {U2.schedule.t_end}")
    sampling = U1.schedule.sampling if U1.schedule.sampling == U2.schedule.sampling else "mixed"
    schedule = StepSchedule(t_start=U2.schedule.t_start, t_end=U1.schedule.t_end,
                            n_steps=U1.schedule.n_steps + U2.schedule.n_steps,
                            sampling=sampling)
    return EvolutionOperator(U=U1.U @ U2.U, schedule=schedule,
                             richardson_error=U1.richardson_error + U2.richardson_error)


class UProvider:
    """Grid-anchored evolution cache.

    Stores U(t_j, t0) for the uniform grid t_j = t0 + j*cell, built lazily by
    chaining per-cell evolutions; U(t, s) = U(t, t0) Q U(s, t0)^dag Q.  Only
    grid times inside [t_min, t_max] may be requested.
    """

    def __init__(self, ops_provider, t0: float, cell: float, t_min: float, t_max: float,
                 n_sub: int = 8, sampling: str = "midpoint"):
        if cell <= 0:
            raise ValueError("cell must be positive")
        if not (t_min <= t0 <= t_max):
            raise ValueError("t0 must lie inside [t_min, t_max]")
        self.ops_provider = ops_provider
        self.t0 = float(t0)
        self.cell = float(cell)
        self.t_min = float(t_min)
        self.t_max = float(t_max)
        self.n_sub = int(n_sub)
        self.sampling = sampling
        dim = 2 * ops_provider(t0).n
        self._from_origin: dict[int, np.ndarray] = {0: np.eye(dim, dtype=complex)}

    def grid_index(self, t: float) -> int:
        if t < self.t_min - 1e-9 or t > self.t_max + 1e-9:
            raise WindowExceeded(f"t={t} outside the covered window [{self.t_min}, {self.t_max}]")
        j = round((t - self.t0) / self.cell)
        if abs(self.t0 + j * self.cell - t) > 1e-9 * max(1.0, abs(t)):
            raise WindowExceeded(f"t={t} is not on the provider grid (cell {self.cell})")
        return int(j)

    def grid_time(self, j: int) -> float:
        return self.t0 + j * self.cell

    def grid_times(self, t_from: float, t_to: float) -> np.ndarray:
        """All grid times from t_from to t_to inclusive, in traversal order."""
        j0, j1 = self.grid_index(t_from), self.grid_index(t_to)
        step = 1 if j1 >= j0 else -1
        return np.array([self.grid_time(j) for j in range(j0, j1 + step, step)])

    def _extend_to(self, j: int) -> None:
        known = sorted(self._from_origin)
        while j > max(self._from_origin):
            k = max(self._from_origin)
            seg = evolve(self.ops_provider,
                         StepSchedule(self.grid_time(k), self.grid_time(k + 1),
                                      self.n_sub, self.sampling))
            self._from_origin[k + 1] = seg.U @ self._from_origin[k]
        while j < min(self._from_origin):
            k = min(self._from_origin)
            seg = evolve(self.ops_provider,
                         StepSchedule(self.grid_time(k), self.grid_time(k - 1),
                                      self.n_sub, self.sampling))
            self._from_origin[k - 1] = seg.U @ self._from_origin[k]

    def from_origin(self, t: float) -> np.ndarray:
        j = self.grid_index(t)
        if j not in self._from_origin:
            self._extend_to(j)
        return self._from_origin[j]

    def U(self, t: float, s: float) -> np.ndarray:
        """Evolution matrix U(t, s) between two grid times."""
        if t == s:
            dim = self._from_origin[0].shape[0]
            self.grid_index(t)
            return np.eye(dim, dtype=complex)
        return self.from_origin(t) @ reverse_matrix(self.from_origin(s))


@dataclass(frozen=True)
class BoundRow:
    lam: float
    ref_time: float
    measured: float
    bound: float
    passed: bool


@dataclass(frozen=True)
class BoundReport:
    """Measured evolution norms against the exponential-integral bound."""

    t_start: float
    t_end: float
    rows: tuple
    all_passed: bool


def check_norm_bound(U: EvolutionOperator, family_provider, constants,
                     lambdas=(-1.0, 0.0, 1.0), ref_times=None,
                     slack: float = 1e-6) -> BoundReport:
    """Compare the measured norm of U in the (lambda, s) geometries to the bound.

    The bound is exp(2 c_{r,t} int C) with c and the composite C from the
    constant table; ``family_provider`` maps a reference time s to its
    NormFamily.  Diagnostic: always returns a report.
    """
    r, t = U.schedule.t_start, U.schedule.t_end
    if ref_times is None:
        ref_times = (r, 0.5 * (r + t), t)
    c = constants.c_factor(r, t)
    integral = constants.integral(r, t)
    bound = float(np.exp(2.0 * c * integral))
    rows = []
    for s in ref_times:
        family = family_provider(s)
        for lam in lambdas:
            measured = family.operator_norm(U.U, lam)
            rows.append(BoundRow(lam=lam, ref_time=float(s), measured=measured,
                                 bound=bound, passed=measured <= bound * (1.0 + slack)))
    return BoundReport(t_start=r, t_end=t, rows=tuple(rows),
                       all_passed=all(row.passed for row in rows))
