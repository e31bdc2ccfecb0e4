import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from adaptlab.numerics import (
    MAX_DIM,
    TOL,
    NotPositiveDefiniteError,
    NumericsError,
    jacobi_eigenvalues,
    lyapunov_residual,
    solve_lyapunov,
    sym_eig_bounds,
    trapezoid_integral,
)


def random_hurwitz(rng, n):
    m = rng.standard_normal((n, n))
    shift = np.max(np.linalg.eigvals(m).real)
    return m - (shift + rng.uniform(0.1, 2.0)) * np.eye(n)


def random_spd(rng, n):
    m = rng.standard_normal((n, n))
    return m @ m.T + n * np.eye(n) * 0.1


# --- Lyapunov ---------------------------------------------------------------


def test_lyapunov_scalar():
    assert solve_lyapunov([[-1.0]], [[2.0]]) == pytest.approx(np.array([[1.0]]), abs=1e-14)


def test_lyapunov_decoupled():
    np.testing.assert_allclose(solve_lyapunov(-np.eye(2), np.eye(2)), np.eye(2) / 2, atol=1e-14)


def test_lyapunov_companion_matrix():
    A = np.array([[0.0, 1.0], [-2.0, -3.0]])
    P = solve_lyapunov(A, np.eye(2))
    assert lyapunov_residual(A, P, np.eye(2)) <= 1e-10
    assert sym_eig_bounds(P)[0] > 0
    assert np.max(np.abs(P - P.T)) <= 1e-12


def test_lyapunov_random_suite(rng):
    worst = 0.0
    for k in range(100):
        n = 1 + k % 8
        A = random_hurwitz(rng, n)
        Q = random_spd(rng, n)
        P = solve_lyapunov(A, Q)
        worst = max(worst, lyapunov_residual(A, P, Q))
        assert sym_eig_bounds(P)[0] > 0
    assert worst <= TOL.lyap_residual


def test_lyapunov_rejects_non_hurwitz():
    with pytest.raises(NotPositiveDefiniteError):
        solve_lyapunov([[1.0, 0.0], [0.0, -1.0]], np.eye(2))


def test_lyapunov_rejects_bad_shapes():
    with pytest.raises(NumericsError):
        solve_lyapunov(np.ones((2, 3)), np.eye(2))
    with pytest.raises(NumericsError):
        solve_lyapunov(-np.eye(2), np.eye(3))
    with pytest.raises(NumericsError):
        solve_lyapunov(-np.eye(2), [[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(NumericsError):
        solve_lyapunov(-np.eye(MAX_DIM + 1), np.eye(MAX_DIM + 1))


# --- eigenvalues ------------------------------------------------------------


@pytest.mark.parametrize(
    "m, expected",
    [
        (np.eye(2), (1.0, 1.0)),
        (np.diag([math.pi, 3 * math.pi]), (math.pi, 3 * math.pi)),
        ([[2.0, 1.0], [1.0, 2.0]], (1.0, 3.0)),
    ],
)
def test_sym_eig_examples(m, expected):
    assert sym_eig_bounds(m) == pytest.approx(expected, rel=1e-12)


def test_sym_eig_rejects_asymmetric():
    with pytest.raises(NumericsError):
        sym_eig_bounds([[1.0, 2.0], [0.0, 1.0]])


def test_rayleigh_quotient_bracketed(rng):
    for n in range(1, 9):
        m = rng.standard_normal((n, n))
        m = m + m.T
        lo, hi = sym_eig_bounds(m)
        v = rng.standard_normal((100, n))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        q = np.einsum("ij,jk,ik->i", v, m, v)
        scale = max(1.0, abs(lo), abs(hi))
        assert np.all(q >= lo - 1e-9 * scale)
        assert np.all(q <= hi + 1e-9 * scale)


@given(arrays(np.float64, (5, 5), elements=st.floats(-100, 100)))
def test_jacobi_matches_reference(m):
    m = m + m.T
    ours = jacobi_eigenvalues(m)
    ref = np.linalg.eigvalsh(m)
    scale = max(1.0, np.max(np.abs(ref)))
    np.testing.assert_allclose(ours, ref, atol=1e-9 * scale)


# --- quadrature -------------------------------------------------------------


def test_trapezoid_constant_matrix():
    M = np.array([[1.0, 2.0], [3.0, 4.0]])
    t = np.linspace(0, 1, 11)
    np.testing.assert_allclose(trapezoid_integral(t, np.broadcast_to(M, (11, 2, 2))), M, atol=1e-14)


def test_trapezoid_linear_is_exact():
    t = np.linspace(0, 1, 101)
    assert trapezoid_integral(t, t) == pytest.approx(0.5, abs=1e-14)


def test_trapezoid_sin_squared():
    t = np.linspace(0, 2 * math.pi, 2001)
    assert trapezoid_integral(t, np.sin(t) ** 2) == pytest.approx(math.pi, abs=1e-5)


def test_trapezoid_second_order():
    exact = 1.0 - math.cos(1.0)
    errs = []
    for n in (11, 21, 41):
        t = np.linspace(0, 1, n)
        errs.append(abs(trapezoid_integral(t, np.sin(t)) - exact))
    assert errs[0] / errs[1] >= 3.5
    assert errs[1] / errs[2] >= 3.5


def test_trapezoid_rejects_mismatch():
    with pytest.raises(NumericsError):
        trapezoid_integral([0.0, 1.0, 2.0], [1.0, 2.0])
    with pytest.raises(NumericsError):
        trapezoid_integral([0.0], [1.0])
    with pytest.raises(NumericsError):
        trapezoid_integral([0.0, 0.0], [1.0, 2.0])
