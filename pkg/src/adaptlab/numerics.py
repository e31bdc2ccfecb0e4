"""Small dense linear-algebra kernel.

Everything here operates on plain numpy arrays.  The matrices that show up in
the adaptive systems are tiny (n <= 32), so the Lyapunov equation is solved by
brute-force vectorization and symmetric eigenvalues come from a cyclic Jacobi
sweep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Tolerances:
    lyap_residual: float = 1e-10
    symmetry: float = 1e-9
    jacobi_offdiag: float = 1e-12
    jacobi_max_sweeps: int = 100
    vdot: float = 1e-9
    boundary: float = 1e-7
    contraction: float = 1e-6
    determinant: float = 1e-6
    pe_threshold: float = 1e-8
    grid: float = 1e-12


TOL = Tolerances()

MAX_DIM = 32


class NumericsError(ValueError):
    pass


class NotPositiveDefiniteError(NumericsError):
    """Raised when a Lyapunov solve yields an indefinite P (A not Hurwitz)."""


def as_vector(x, name="vector") -> np.ndarray:
    v = np.atleast_1d(np.asarray(x, dtype=float))
    if v.ndim != 1 or v.size == 0:
        raise NumericsError(f"{name} must be a non-empty 1-d array, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise NumericsError(f"{name} has non-finite entries")
    return v


def as_matrix(m, name="matrix") -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.size == 0:
        raise NumericsError(f"{name} must be a non-empty 2-d array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericsError(f"{name} has non-finite entries")
    return a


def _require_square(a: np.ndarray, name: str) -> int:
    if a.shape[0] != a.shape[1]:
        raise NumericsError(f"{name} must be square, got {a.shape}")
    if a.shape[0] > MAX_DIM:
        raise NumericsError(f"{name} is {a.shape[0]}x{a.shape[0]}; at most {MAX_DIM} supported")
    return a.shape[0]


def is_symmetric(m: np.ndarray, rtol: float = TOL.symmetry) -> bool:
    scale = max(np.max(np.abs(m)), 1.0)
    return bool(np.max(np.abs(m - m.T)) <= rtol * scale)


def jacobi_eigenvalues(m) -> np.ndarray:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps over every off-diagonal pair until the off-diagonal Frobenius norm
    falls below ``TOL.jacobi_offdiag`` times the Frobenius norm of ``m``.
    Returned in ascending order.
    """
    a = as_matrix(m).copy()
    n = _require_square(a, "M")
    if not is_symmetric(a):
        raise NumericsError("matrix is not symmetric")
    a = 0.5 * (a + a.T)
    scale = np.linalg.norm(a)
    if n == 1 or scale == 0.0:
        return np.sort(np.diag(a))
    target = TOL.jacobi_offdiag * scale
    for _ in range(TOL.jacobi_max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= target:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = float((a[q, q] - a[p, p]) / (2.0 * apq))
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                # A <- J^T A J with J the (p, q) plane rotation
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                a[p, q] = a[q, p] = 0.0
    else:
        raise NumericsError("Jacobi iteration did not converge")
    return np.sort(np.diag(a))


def sym_eig_bounds(m) -> tuple[float, float]:
    """Return ``(min_eig, max_eig)`` of a symmetric matrix."""
    ev = jacobi_eigenvalues(m)
    return float(ev[0]), float(ev[-1])


def solve_lyapunov(A, Q) -> np.ndarray:
    """Solve ``A^T P + P A = -Q`` for symmetric positive-definite ``P``.

    The equation is vectorized into an n^2 x n^2 dense system.  Raises
    ``NotPositiveDefiniteError`` when the solution is not positive definite,
    which happens exactly when ``A`` is not Hurwitz.
    """
    A = as_matrix(A, "A")
    Q = as_matrix(Q, "Q")
    n = _require_square(A, "A")
    if _require_square(Q, "Q") != n:
        raise NumericsError(f"A is {A.shape} but Q is {Q.shape}")
    if not is_symmetric(Q):
        raise NumericsError("Q is not symmetric")
    eye = np.eye(n)
    # column-stacked vec: vec(A^T P) = (I kron A^T) vec P, vec(P A) = (A^T kron I) vec P
    K = np.kron(eye, A.T) + np.kron(A.T, eye)
    rhs = -Q.reshape(-1, order="F")
    try:
        x = np.linalg.solve(K, rhs)
        # one step of iterative refinement
        x = x + np.linalg.solve(K, rhs - K @ x)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"Lyapunov operator is singular: {exc}") from None
    P = x.reshape(n, n, order="F")
    P = 0.5 * (P + P.T)
    if not np.all(np.isfinite(P)) or sym_eig_bounds(P)[0] <= 0.0:
        raise NotPositiveDefiniteError("solution P is not positive definite; A is not Hurwitz")
    return P


def lyapunov_residual(A, P, Q) -> float:
    """Relative Frobenius residual of ``A^T P + P A + Q``."""
    A, P, Q = as_matrix(A), as_matrix(P), as_matrix(Q)
    return float(np.linalg.norm(A.T @ P + P @ A + Q) / np.linalg.norm(Q))


def trapezoid_integral(times, values) -> np.ndarray:
    """Composite trapezoid rule along the first axis of ``values``.

    ``values`` may hold scalars, vectors or matrices per sample.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise NumericsError("need at least two sample times")
    if v.shape[0] != t.size:
        raise NumericsError(f"{t.size} times but {v.shape[0]} samples")
    if np.any(np.diff(t) <= 0.0):
        raise NumericsError("times must be strictly increasing")
    return np.trapezoid(v, t, axis=0)
