"""Kernel tests against independent dense-algebra oracles."""

import numpy as np
import pytest

from coopdetect.errors import DimensionMismatch, NotPositiveDefinite, SingularDowndate
from coopdetect.linalg import (
    cholesky_factor,
    downdate_quadforms,
    downdate_quadforms_batch,
    logdet,
    rank1_update,
    solve,
)


def random_hpd(rng, dim, extra=3):
    x = rng.normal(size=(dim, dim + extra)) + 1j * rng.normal(size=(dim, dim + extra))
    a = x @ x.conj().T / (dim + extra)
    return a + 0.1 * np.eye(dim)


def random_psd(rng, dim):
    x = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return x @ x.conj().T / dim


class TestLogdet:
    def test_identity(self):
        assert logdet(np.eye(4, dtype=complex)) == pytest.approx(0.0, abs=1e-14)

    def test_scaled_identity(self):
        assert logdet(2.0 * np.eye(3, dtype=complex)) == pytest.approx(3 * np.log(2.0))

    def test_matches_eigenvalue_product_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            a = random_hpd(rng, 5)
            oracle = float(np.sum(np.log(np.linalg.eigvalsh(a))))
            assert abs(logdet(a) - oracle) < 1e-9

    def test_rejects_indefinite(self):
        with pytest.raises(NotPositiveDefinite):
            logdet(np.diag([1.0, -1.0]).astype(complex))

    def test_rejects_tiny_pivot(self):
        a = np.diag([1.0, 1e-16]).astype(complex)
        with pytest.raises(NotPositiveDefinite):
            cholesky_factor(a)

    def test_pure_function(self):
        rng = np.random.default_rng(5)
        a = random_hpd(rng, 6)
        assert logdet(a) == logdet(a.copy())


class TestSolve:
    def test_identity(self):
        rng = np.random.default_rng(0)
        v = rng.normal(size=4) + 1j * rng.normal(size=4)
        np.testing.assert_allclose(solve(np.eye(4, dtype=complex), v), v)

    def test_scaled_identity(self):
        rng = np.random.default_rng(1)
        v = rng.normal(size=4) + 1j * rng.normal(size=4)
        np.testing.assert_allclose(solve(2 * np.eye(4, dtype=complex), v), v / 2)

    def test_matches_explicit_inverse_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            a = random_hpd(rng, 6)
            v = rng.normal(size=6) + 1j * rng.normal(size=6)
            np.testing.assert_allclose(solve(a, v), np.linalg.inv(a) @ v,
                                       rtol=1e-9, atol=1e-9)

    def test_residual_bound(self):
        rng = np.random.default_rng(3)
        a = random_hpd(rng, 8)
        v = rng.normal(size=8) + 1j * rng.normal(size=8)
        x = solve(a, v)
        assert np.linalg.norm(a @ x - v) <= 1e-10 * np.linalg.norm(v)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            solve(np.eye(3, dtype=complex), np.ones(4))


class TestRank1Update:
    def test_zero_coefficient(self):
        v = np.ones(3, dtype=complex)
        np.testing.assert_array_equal(rank1_update(np.eye(3, dtype=complex), 0.0, v),
                                      np.eye(3))

    def test_basis_vector(self):
        e1 = np.zeros(3, dtype=complex)
        e1[0] = 1.0
        out = rank1_update(np.eye(3, dtype=complex), 1.0, e1)
        expected = np.eye(3, dtype=complex)
        expected[0, 0] = 2.0
        np.testing.assert_array_equal(out, expected)

    def test_sequence_matches_direct_assembly(self):
        rng = np.random.default_rng(4)
        l, n = 6, 9
        pilots = (rng.normal(size=(l, n)) + 1j * rng.normal(size=(l, n))) / np.sqrt(2)
        gammas = rng.uniform(0.1, 2.0, size=n)
        sigma2 = 0.5
        a = sigma2 * np.eye(l, dtype=complex)
        for k in range(n):
            a = rank1_update(a, gammas[k], pilots[:, k])
        direct = sigma2 * np.eye(l, dtype=complex)
        for k in range(n):
            direct = direct + gammas[k] * np.outer(pilots[:, k], pilots[:, k].conj())
        np.testing.assert_allclose(a, direct, atol=1e-10)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            rank1_update(np.eye(3, dtype=complex), 1.0, np.ones(2))


class TestDowndateQuadforms:
    def test_gamma_zero_reduces_to_plain_quadforms(self):
        rng = np.random.default_rng(6)
        a = random_hpd(rng, 5)
        b = random_psd(rng, 5)
        v = rng.normal(size=5) + 1j * rng.normal(size=5)
        q1, q2 = downdate_quadforms(a, 0.0, v, b)
        ainv = np.linalg.inv(a)
        assert q1 == pytest.approx(np.real(v.conj() @ ainv @ v), rel=1e-10)
        assert q2 == pytest.approx(np.real(v.conj() @ ainv @ b @ ainv @ v), rel=1e-10)

    def test_identity_unit_vector(self):
        v = np.zeros(4, dtype=complex)
        v[1] = 1.0
        q1, q2 = downdate_quadforms(np.eye(4, dtype=complex), 0.0, v,
                                    np.eye(4, dtype=complex))
        assert q1 == pytest.approx(1.0)
        assert q2 == pytest.approx(1.0)

    def test_matches_explicit_downdate_oracle(self):
        # gamma and v scaled so the downdate stays PD, as the caller guarantees.
        rng = np.random.default_rng(7)
        for _ in range(10):
            a = random_hpd(rng, 6)
            b = random_psd(rng, 6)
            v = rng.normal(size=6) + 1j * rng.normal(size=6)
            gamma = 0.3
            v *= np.sqrt(0.5 / (gamma * np.real(v.conj() @ np.linalg.solve(a, v))))
            a_down = a - gamma * np.outer(v, v.conj())
            inv = np.linalg.inv(a_down)
            q1, q2 = downdate_quadforms(a, gamma, v, b)
            assert q1 == pytest.approx(np.real(v.conj() @ inv @ v), rel=1e-9)
            assert q2 == pytest.approx(np.real(v.conj() @ inv @ b @ inv @ v), rel=1e-9)

    def test_nonnegative_outputs(self):
        rng = np.random.default_rng(8)
        a = random_hpd(rng, 5)
        b = random_psd(rng, 5)
        v = rng.normal(size=5) + 1j * rng.normal(size=5)
        q1, q2 = downdate_quadforms(a, 0.1, v, b)
        assert q1 >= 0.0 and q2 >= 0.0

    def test_singular_downdate_raises(self):
        v = np.zeros(3, dtype=complex)
        v[0] = 1.0
        with pytest.raises(SingularDowndate):
            downdate_quadforms(np.eye(3, dtype=complex), 1.0, v, np.eye(3, dtype=complex))

    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(9)
        l, n = 6, 8
        a = random_hpd(rng, l)
        b = random_psd(rng, l)
        cols = rng.normal(size=(l, n)) + 1j * rng.normal(size=(l, n))
        gammas = rng.uniform(0.0, 0.2, size=n)
        for k in range(n):  # keep every downdate admissible
            quad = gammas[k] * np.real(cols[:, k].conj() @ np.linalg.solve(a, cols[:, k]))
            if quad > 0:
                cols[:, k] *= np.sqrt(min(1.0, 0.5 / quad))
        q1s, q2s = downdate_quadforms_batch(cholesky_factor(a), cols, gammas, b)
        for k in range(n):
            q1, q2 = downdate_quadforms(a, gammas[k], cols[:, k], b)
            assert q1s[k] == pytest.approx(q1, rel=1e-10)
            assert q2s[k] == pytest.approx(q2, rel=1e-10)


class TestIdentities:
    def test_sherman_morrison_vector_identity(self):
        # Implicit downdated solve equals the explicit one.
        rng = np.random.default_rng(10)
        for _ in range(10):
            a = random_hpd(rng, 6)
            v = rng.normal(size=6) + 1j * rng.normal(size=6)
            gamma = float(rng.uniform(0.0, 0.5))
            u = np.linalg.solve(a, v)
            alpha = np.real(v.conj() @ u)
            implicit = u / (1 - gamma * alpha)
            explicit = np.linalg.solve(a - gamma * np.outer(v, v.conj()), v)
            np.testing.assert_allclose(implicit, explicit, rtol=1e-9, atol=1e-12)

    def test_logdet_rank1_identity(self):
        # ln det(A + g v v^H) - ln det(A) == ln(1 + g v^H A^-1 v)
        rng = np.random.default_rng(12)
        for _ in range(10):
            a = random_hpd(rng, 6)
            v = rng.normal(size=6) + 1j * rng.normal(size=6)
            gamma = float(rng.uniform(0.0, 1.0))
            lhs = logdet(rank1_update(a, gamma, v)) - logdet(a)
            rhs = np.log(1 + gamma * np.real(v.conj() @ np.linalg.solve(a, v)))
            assert lhs == pytest.approx(rhs, abs=1e-9)

    def test_update_then_downdate_roundtrip(self):
        rng = np.random.default_rng(13)
        a = random_hpd(rng, 6)
        b = random_psd(rng, 6)
        v = rng.normal(size=6) + 1j * rng.normal(size=6)
        gamma = 0.4
        updated = rank1_update(a, gamma, v)
        q1, q2 = downdate_quadforms(updated, gamma, v, b)
        ainv = np.linalg.inv(a)
        assert q1 == pytest.approx(np.real(v.conj() @ ainv @ v), rel=1e-9)
        assert q2 == pytest.approx(np.real(v.conj() @ ainv @ b @ ainv @ v), rel=1e-9)
