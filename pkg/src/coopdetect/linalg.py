"""Dense Hermitian positive-definite kernels for the covariance likelihood.

Everything here works on plain complex128 ndarrays.  Matrices passed in are
expected to be Hermitian; only the lower triangle is ever factorized, and the
positive-definiteness check is a Cholesky pivot test relative to the trace.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_solve, cholesky

from .errors import DimensionMismatch, NotPositiveDefinite, SingularDowndate

# Cholesky pivots below this fraction of the trace count as non-positive.
PIVOT_RTOL = 1e-12
# 1 - gamma * v^H A^-1 v at or below this kills a downdate.
DOWNDATE_TOL = 1e-12


def _as_square(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    return a


def cholesky_factor(a: np.ndarray) -> np.ndarray:
    """Lower-triangular Cholesky factor of a Hermitian PD matrix.

    Raises
    ------
    NotPositiveDefinite
        If the factorization hits a non-positive pivot, or any pivot falls
        at or below ``PIVOT_RTOL * trace(a)``.
    """
    a = _as_square(a)
    trace = float(np.real(np.trace(a)))
    try:
        low = cholesky(a, lower=True, check_finite=False)
    except np.linalg.LinAlgError as err:
        raise NotPositiveDefinite(str(err)) from err
    pivots = np.real(np.diagonal(low)) ** 2
    if trace <= 0.0 or np.min(pivots) <= PIVOT_RTOL * trace:
        raise NotPositiveDefinite(
            f"pivot {np.min(pivots):.3e} below tolerance {PIVOT_RTOL * trace:.3e}"
        )
    return low


def logdet(a: np.ndarray) -> float:
    """ln det(A) for Hermitian positive definite A, via Cholesky."""
    low = cholesky_factor(a)
    return 2.0 * float(np.sum(np.log(np.real(np.diagonal(low)))))


def logdet_from_factor(low: np.ndarray) -> float:
    """ln det(A) given a lower Cholesky factor of A."""
    return 2.0 * float(np.sum(np.log(np.real(np.diagonal(low)))))


def solve(a: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Solve A x = v for Hermitian positive definite A."""
    a = _as_square(a)
    v = np.asarray(v)
    if v.shape[0] != a.shape[0]:
        raise DimensionMismatch(f"matrix dim {a.shape[0]} vs vector dim {v.shape[0]}")
    return solve_from_factor(cholesky_factor(a), v)


def solve_from_factor(low: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Solve A x = v given the lower Cholesky factor of A; v may be a matrix."""
    return cho_solve((low, True), v, check_finite=False)


def rank1_update(a: np.ndarray, c: float, v: np.ndarray) -> np.ndarray:
    """Return ``A + c * v v^H`` (Hermitian whenever A is)."""
    a = _as_square(a)
    v = np.asarray(v)
    if v.shape[0] != a.shape[0]:
        raise DimensionMismatch(f"matrix dim {a.shape[0]} vs vector dim {v.shape[0]}")
    return a + c * np.outer(v, v.conj())


def downdate_quadforms(
    a: np.ndarray, gamma: float, v: np.ndarray, b: np.ndarray
) -> tuple[float, float]:
    """Quadratic forms of the inverse of the rank-one downdate of ``a``.

    With ``A_d = A - gamma * v v^H`` (never formed), returns

        q1 = v^H A_d^-1 v
        q2 = v^H A_d^-1 B A_d^-1 v

    using the Sherman-Morrison identity: for u = A^-1 v and alpha = v^H u,
    A_d^-1 v = u / (1 - gamma * alpha).

    Raises
    ------
    SingularDowndate
        If ``1 - gamma * v^H A^-1 v <= DOWNDATE_TOL``, i.e. gamma is
        inconsistent with ``a``.
    """
    a = _as_square(a)
    b = _as_square(b)
    u = solve(a, v)
    alpha = float(np.real(np.vdot(v, u)))
    denom = 1.0 - gamma * alpha
    if denom <= DOWNDATE_TOL:
        raise SingularDowndate(f"1 - gamma * v^H A^-1 v = {denom:.3e}")
    w = u / denom
    q1 = alpha / denom
    q2 = float(np.real(np.vdot(w, b @ w)))
    return q1, q2


def downdate_quadforms_batch(
    low: np.ndarray, cols: np.ndarray, gammas: np.ndarray, b: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`downdate_quadforms` over the columns of ``cols``.

    ``low`` is the lower Cholesky factor of A; ``gammas[n]`` is the downdate
    coefficient paired with column ``cols[:, n]``.  One triangular solve and
    one matrix product, O(L^2 N) total.
    """
    u = solve_from_factor(low, cols)
    alpha = np.real(np.einsum("ln,ln->n", cols.conj(), u))
    denom = 1.0 - np.asarray(gammas) * alpha
    bad = denom <= DOWNDATE_TOL
    if np.any(bad):
        n = int(np.argmax(bad))
        raise SingularDowndate(
            f"column {n}: 1 - gamma * v^H A^-1 v = {denom[n]:.3e}"
        )
    q1 = alpha / denom
    ubu = np.real(np.einsum("ln,ln->n", u.conj(), b @ u))
    q2 = ubu / denom**2
    return q1, q2
