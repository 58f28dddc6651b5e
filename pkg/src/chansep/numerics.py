"""Dense complex linear-algebra kernels.

Everything here works on plain ``numpy`` arrays. Hermitian checks use the
relative tolerance ``HERMITIAN_TOL`` on the largest entry magnitude.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.linalg

HERMITIAN_TOL = 1e-10
RANK1_TOL = 1e-8
DEGENERATE_GAP = 1e-10
POWER_MAX_ITER = 10_000
POWER_TOL = 1e-12


class NumericalError(ArithmeticError):
    """A computation broke down (non-convergence, impossible pivot)."""


class RankDeficiencyError(NumericalError):
    """Matrix is singular or too ill-conditioned for the requested quantity."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class EigenPair(NamedTuple):
    value: float
    vector: np.ndarray


class ReducedEig(NamedTuple):
    vector: np.ndarray
    value: float
    degenerate: bool


def check_hermitian(A, name="matrix"):
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"{name} must be square, got shape {A.shape}")
    scale = np.max(np.abs(A)) if A.size else 0.0
    dev = np.max(np.abs(A - A.conj().T)) if A.size else 0.0
    if dev > HERMITIAN_TOL * scale:
        raise ValueError(
            f"{name} is not Hermitian: max |A - A^H| = {dev:.3e} "
            f"(scale {scale:.3e})"
        )
    return A


def fix_phase(v):
    """Unit-normalise ``v`` and rotate so its largest-magnitude entry is real >= 0."""
    v = np.asarray(v, dtype=complex)
    norm = np.linalg.norm(v)
    if norm == 0:
        return v
    v = v / norm
    i = int(np.argmax(np.abs(v)))
    if abs(v[i]) > 0:
        v = v * (abs(v[i]) / v[i])
        v[i] = abs(v[i])  # exactly real, no rounding residue
    return v


def hermitian_max_eigenpair(A):
    """Largest eigenvalue of a Hermitian matrix with its unit eigenvector."""
    A = check_hermitian(A)
    A = 0.5 * (A + A.conj().T)
    vals, vecs = np.linalg.eigh(A)
    return EigenPair(float(vals[-1]), fix_phase(vecs[:, -1]))


def _residual_ok(A, value, vec, rtol):
    scale = max(np.linalg.norm(A), abs(value), 1e-300)
    return np.linalg.norm(A @ vec - value * vec) <= rtol * scale


def power_iteration(A, max_iter=POWER_MAX_ITER, tol=POWER_TOL, x0=None):
    """Plain power iteration on ``A``.

    Converges to the eigenvalue of largest modulus; callers that need the
    largest real part should shift ``A`` so both coincide.
    """
    A = np.asarray(A, dtype=complex)
    n = A.shape[0]
    x = np.ones(n, dtype=complex) if x0 is None else np.asarray(x0, dtype=complex)
    x = x / np.linalg.norm(x)
    value = 0.0
    for it in range(1, max_iter + 1):
        y = A @ x
        ny = np.linalg.norm(y)
        if ny == 0:
            return EigenPair(0.0, fix_phase(x)), it
        y = y / ny
        new_value = np.vdot(y, A @ y)
        # align phase before comparing iterates
        i = int(np.argmax(np.abs(y)))
        y = y * (abs(y[i]) / y[i])
        if np.linalg.norm(A @ y - new_value * y) <= tol * max(abs(new_value), 1.0):
            return EigenPair(float(new_value.real), fix_phase(y)), it
        x, value = y, new_value
    raise NumericalError(
        f"power iteration did not converge in {max_iter} iterations "
        f"(last estimate {complex(value):.6g})"
    )


def general_max_eigenpair(A, pencil=None):
    """Eigenvalue of largest real part of a (possibly non-Hermitian) matrix.

    Parameters
    ----------
    A : ndarray, shape (K, K)
    pencil : tuple of ndarray, optional
        Hermitian ``(F, G)`` with ``G`` positive definite such that
        ``A y = lam y`` iff ``F y = lam G y``. When given, the top pair is
        taken from the definite pencil, which is well conditioned; the
        result is still checked against ``A``.

    Falls back to a dense eigensolver, then shifted power iteration.
    """
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got {A.shape}")

    if pencil is not None:
        F, G = pencil
        try:
            F = 0.5 * (F + np.conj(F).T)
            G = 0.5 * (G + np.conj(G).T)
            vals, vecs = scipy.linalg.eigh(F, G)
            pair = EigenPair(float(vals[-1]), fix_phase(vecs[:, -1]))
            if _residual_ok(A, pair.value, pair.vector, 1e-8):
                return pair
        except (np.linalg.LinAlgError, ValueError):
            pass

    try:
        vals, vecs = np.linalg.eig(A)
        i = int(np.argmax(vals.real))
        pair = EigenPair(float(vals[i].real), fix_phase(vecs[:, i]))
        if _residual_ok(A, pair.value, pair.vector, 1e-8):
            return pair
    except np.linalg.LinAlgError:
        pass

    # shift so the largest real part also has the largest modulus
    shift = np.linalg.norm(A, 2)
    pair, _ = power_iteration(A + shift * np.eye(A.shape[0]))
    return EigenPair(pair.value - shift, pair.vector)


def rank1_svd(H, tol=RANK1_TOL):
    """Factor a numerically rank-1 matrix as ``d1 * u1 @ v1^H``.

    Returns ``(d1, u1, v1)``. ``u1`` follows the phase convention of
    :func:`fix_phase`; ``v1`` is rotated to match.
    """
    H = np.asarray(H, dtype=complex)
    U, s, Vh = np.linalg.svd(H, full_matrices=False)
    if s[0] == 0:
        raise ValueError("rank1_svd: zero matrix has no dominant singular pair")
    ratio = s[1] / s[0] if s.size > 1 else 0.0
    if ratio > tol:
        raise ValueError(f"matrix is not rank 1: sigma2/sigma1 = {ratio:.3e}")
    u = U[:, 0]
    v = Vh[0].conj()
    i = int(np.argmax(np.abs(u)))
    # same unit rotation on both factors keeps u v^H unchanged
    rot = abs(u[i]) / u[i]
    return float(s[0]), u * rot, v * rot


def smw_inverse(Q_inv, w):
    """``(Q + w w^H)^{-1}`` from a precomputed ``Q^{-1}`` (Sherman-Morrison)."""
    Q_inv = np.asarray(Q_inv, dtype=complex)
    w = np.asarray(w, dtype=complex)
    Pw = Q_inv @ w
    denom = 1.0 + np.vdot(w, Pw).real
    if not denom > 0:
        raise NumericalError(f"1 + w^H Q^-1 w = {denom:.3e} <= 0; Q is not PD")
    S = Q_inv - np.outer(Pw, Pw.conj()) / denom
    return 0.5 * (S + S.conj().T)


def reduced_max_eigvec(alpha, B, C, pencil=None):
    """Top eigenvector of ``alpha I_N + C B C^H`` through a ``K x K`` problem.

    With ``y`` the top eigenvector of ``alpha I_K + B C^H C``, ``x = C y`` is
    an eigenvector of the ``N x N`` matrix for the same eigenvalue, because
    ``B C^H C`` and ``C B C^H`` share their nonzero spectrum.

    Returns ``ReducedEig(vector, value, degenerate)``; ``vector`` is
    unit-norm and phase-fixed, ``degenerate`` flags a relative gap below
    ``DEGENERATE_GAP`` between the top two eigenvalues.
    """
    B = np.asarray(B, dtype=complex)
    C = np.asarray(C, dtype=complex)
    K = B.shape[0]
    if C.shape[1] != K:
        raise ValueError(f"C has {C.shape[1]} columns, B is {K}x{K}")
    Y = alpha * np.eye(K) + B @ (C.conj().T @ C)
    pair = general_max_eigenpair(Y, pencil=pencil)

    degenerate = False
    if K > 1:
        vals = np.sort(np.linalg.eigvals(Y).real)
        gap = vals[-1] - vals[-2]
        if gap <= DEGENERATE_GAP * max(abs(vals[-1]), 1e-300):
            degenerate = True

    x = C @ pair.vector
    if np.linalg.norm(x) == 0:
        # y in the null space of C: the top eigenvalue is alpha, any vector will do
        x = np.zeros(C.shape[0], dtype=complex)
        x[0] = 1.0
        return ReducedEig(x, float(alpha), True)
    return ReducedEig(fix_phase(x), pair.value, degenerate)
