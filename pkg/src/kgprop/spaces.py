"""Time-dependent Gram matrices and norms for the energy/dynamical/dual scale.

The scale is built from the absolute value of the generator taken in the dual
geometry: with S = Q H^{-1} Q and B_tilde = S^{1/2} B S^{-1/2} (Hermitian),
the Gram of the lambda space is S^{1/2} |B_tilde|^{1+lambda} S^{1/2}.
lambda = -1 reproduces the dual Gram, lambda = +1 the energy Gram H.
Computing |B| in the Euclidean geometry instead would silently break the
self-adjointness of the frequency projections, so everything here goes
through the similarity transform.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import KgpropError
from .operators import OperatorSet, fractional_power, hermitian_fill

#: hard error threshold on the Hermiticity defect of the transformed generator
BTILDE_HERMITICITY_LIMIT = 1e-8

#: lambda values cached by default
DEFAULT_LAMBDAS = (-1.0, 0.0, 1.0)


def _lambda_key(lam: float) -> float:
    return round(float(lam), 12)


@dataclass(frozen=True)
class NormFamily:
    """Gram matrices of the instantaneous norm scale at one time.

    ``gram_en`` is H(t), ``gram_dual`` is Q H(t)^{-1} Q and ``abs_B`` is the
    modulus of B(t) with respect to the dual geometry.  ``b_eigs``/``b_vecs``
    are the eigendecomposition of the Hermitian transformed generator; they
    also drive the spectral projections.
    """

    time_stamp: float
    gram_en: np.ndarray
    gram_dual: np.ndarray
    abs_B: np.ndarray
    S_half: np.ndarray
    S_invhalf: np.ndarray
    B_tilde: np.ndarray
    b_eigs: np.ndarray
    b_vecs: np.ndarray
    herm_residual: float
    lambda_cache: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.gram_en.shape[0]

    def gram(self, lam: float) -> np.ndarray:
        """Gram matrix of the lambda space (cached for the build-time set)."""
        _check_lambda(lam)
        key = _lambda_key(lam)
        cached = self.lambda_cache.get(key)
        if cached is not None:
            return cached
        return self._make_gram(lam)

    def _make_gram(self, lam: float) -> np.ndarray:
        weighted = (self.b_vecs * np.abs(self.b_eigs) ** (1.0 + lam)) @ self.b_vecs.conj().T
        return hermitian_fill(self.S_half @ weighted @ self.S_half)

    def norm_factor(self, lam: float) -> tuple[np.ndarray, np.ndarray]:
        """Factor F with Gram = F^dag F, plus its inverse.

        Used to measure operator norms in the lambda geometry as the plain
        2-norm of F M F^{-1}.
        """
        _check_lambda(lam)
        half = (self.b_vecs * np.abs(self.b_eigs) ** (0.5 * (1.0 + lam))) @ self.b_vecs.conj().T
        half_inv = (self.b_vecs * np.abs(self.b_eigs) ** (-0.5 * (1.0 + lam))) @ self.b_vecs.conj().T
        return half @ self.S_half, self.S_invhalf @ half_inv

    def operator_norm(self, M: np.ndarray, lam: float) -> float:
        """Operator norm of M acting on the lambda space at this time."""
        F, F_inv = self.norm_factor(lam)
        return float(np.linalg.norm(F @ M @ F_inv, 2))


def _check_lambda(lam: float) -> None:
    if not -1.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [-1, 1], got {lam}")


def build_norm_family(ops: OperatorSet, lambdas=DEFAULT_LAMBDAS) -> NormFamily:
    """Build the norm scale from one operator set.

    Raises ``KgpropError`` if the transformed generator deviates from
    Hermitian beyond 1e-8, which signals a broken operator set (Assumption
    failure upstream).
    """
    S = ops.S_dual
    if not np.all(np.isfinite(S)):
        raise KgpropError("operator set has no valid dual Gram (positive-mass violation)")
    S_half = fractional_power(S, 0.5)
    S_invhalf = fractional_power(S, -0.5)
    B_tilde = S_half @ ops.B @ S_invhalf
    scale = np.linalg.norm(B_tilde, 2)
    herm_residual = float(np.linalg.norm(B_tilde - B_tilde.conj().T, 2) / scale)
    if herm_residual > BTILDE_HERMITICITY_LIMIT:
        raise KgpropError(
            f"transformed generator deviates from Hermitian by {herm_residual:.3e} "
            "(broken OperatorSet)")
    b_eigs, b_vecs = np.linalg.eigh(hermitian_fill(B_tilde))
    abs_B_tilde = (b_vecs * np.abs(b_eigs)) @ b_vecs.conj().T
    abs_B = S_invhalf @ abs_B_tilde @ S_half

    family = NormFamily(time_stamp=ops.time_stamp, gram_en=ops.H, gram_dual=S,
                        abs_B=abs_B, S_half=S_half, S_invhalf=S_invhalf,
                        B_tilde=B_tilde, b_eigs=b_eigs, b_vecs=b_vecs,
                        herm_residual=herm_residual)
    for lam in lambdas:
        _check_lambda(lam)
        family.lambda_cache[_lambda_key(lam)] = family._make_gram(lam)
    return family


def norm(u: np.ndarray, family: NormFamily, lam: float) -> float:
    """Norm of a Cauchy-data vector in the lambda geometry at the family time."""
    u = np.asarray(u)
    if u.shape != (family.dim,):
        raise ValueError(f"expected a vector of length {family.dim}, got shape {u.shape}")
    G = family.gram(lam)
    val = np.real(np.vdot(u, G @ u))
    return float(np.sqrt(max(val, 0.0)))


def k_delta_norm(v: np.ndarray, L: np.ndarray, delta: float) -> float:
    """Norm of a scalar lattice function in the K^delta scale: ||L^{delta/2} v||_2.

    delta is restricted to [-1, 1], the range on which the spaces are
    identified across time.
    """
    if not -1.0 <= delta <= 1.0:
        raise ValueError(f"delta must lie in [-1, 1], got {delta}")
    v = np.asarray(v)
    if v.shape != (L.shape[0],):
        raise ValueError(f"expected a vector of length {L.shape[0]}, got shape {v.shape}")
    half = fractional_power(L, delta / 2.0)
    return float(np.linalg.norm(half @ v))


def charge_form_bound(family: NormFamily) -> float:
    """Bound of the charge form on the dynamical space: ||G0^{-1/2} Q G0^{-1/2}||."""
    n = family.dim // 2
    from .operators import charge_matrix

    G0 = family.gram(0.0)
    eigs, vecs = np.linalg.eigh(hermitian_fill(G0))
    G0_invhalf = (vecs * eigs ** -0.5) @ vecs.conj().T
    return float(np.linalg.norm(G0_invhalf @ charge_matrix(n) @ G0_invhalf, 2))
