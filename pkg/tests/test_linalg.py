import numpy as np
import pytest

from primepr.errors import DegenerateMatrixError, InvalidArgumentError, SingularGramError
from primepr.linalg import (
    gram_solve,
    lambda_max_gram,
    lambda_max_phi,
    leading_eigpair,
    phi_matvec,
    power_iteration,
)
from primepr.problem import (
    MatrixKind,
    MeasurementEnsemble,
    complex_normal,
    gen_dft_ensemble,
    gen_gaussian_ensemble,
)

from conftest import explicit_phi, random_hermitian


def aligned(u, v):
    """Distance between unit vectors up to a global phase."""
    return np.linalg.norm(u - v * np.exp(1j * np.angle(np.vdot(v, u))))


class TestPowerIteration:
    def test_diagonal(self):
        pair = power_iteration(np.diag([3.0, 1.0]), 50, np.array([1, 1]) / np.sqrt(2))
        assert pair.value == pytest.approx(3.0, rel=1e-12)
        assert aligned(pair.vector, np.array([1.0, 0.0])) < 1e-12

    def test_identity_one_step(self, rng):
        v = complex_normal(rng, 2)
        v /= np.linalg.norm(v)
        pair = power_iteration(np.eye(2), 1, v)
        assert pair.value == pytest.approx(1.0)
        np.testing.assert_allclose(pair.vector, v, atol=1e-15)

    def test_matches_dense_eigensolver(self, rng):
        # eigen-gap forced: leading eigenvalue well separated
        Q, _ = np.linalg.qr(complex_normal(rng, (4, 4)))
        lam = np.array([10.0, 4.0, -3.0, 1.0])
        M = (Q * lam) @ Q.conj().T
        ref_val, ref_vec = np.linalg.eigh(M)
        pair = power_iteration(M, 200, np.ones(4))
        assert pair.value == pytest.approx(ref_val[-1], rel=1e-8)
        assert aligned(pair.vector, ref_vec[:, -1]) < 1e-8

    def test_unit_norm(self, rng):
        pair = power_iteration(random_hermitian(rng, 5), 7, complex_normal(rng, 5))
        assert np.linalg.norm(pair.vector) == pytest.approx(1.0, abs=1e-12)

    def test_zero_start(self):
        with pytest.raises(InvalidArgumentError):
            power_iteration(np.eye(3), 1, np.zeros(3))

    def test_degenerate_matrix_reports_step(self):
        with pytest.raises(DegenerateMatrixError) as err:
            power_iteration(np.zeros((3, 3)), 4, np.ones(3))
        assert err.value.step == 1

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            power_iteration(np.eye(3), 1, np.ones(2))

    def test_rayleigh_quotient_nondecreasing(self):
        # positive semidefinite: the Rayleigh quotient of M^k v is monotone in k
        for seed in range(100):
            r = np.random.default_rng(seed)
            G = complex_normal(r, (5, 5))
            M = G @ G.conj().T
            start = complex_normal(r, 5)
            rq = [power_iteration(M, s, start).value for s in range(1, 12)]
            assert np.all(np.diff(rq) >= -1e-10 * np.abs(rq[1:])), seed


class TestLeadingEigpair:
    def test_diag(self):
        pair = leading_eigpair(np.diag([5.0, 2.0, 2.0]), tol=1e-10)
        assert pair.converged
        assert pair.value == pytest.approx(5.0, rel=1e-10)

    def test_rank_one(self, rng):
        x = complex_normal(rng, 4)
        x /= np.linalg.norm(x)
        pair = leading_eigpair(np.outer(x, x.conj()), tol=1e-10)
        assert pair.value == pytest.approx(1.0, rel=1e-10)
        assert aligned(pair.vector, x) < 1e-10

    def test_random_matches_oracle(self):
        for seed in range(20):
            r = np.random.default_rng(seed)
            G = complex_normal(r, (6, 6))
            M = G @ G.conj().T
            ev, V = np.linalg.eigh(M)
            pair = leading_eigpair(M, tol=1e-10)
            assert pair.converged
            assert abs(pair.value - ev[-1]) <= 1e-10 * ev[-1]
            assert aligned(pair.vector, V[:, -1]) < 1e-8

    def test_unconverged_is_status(self):
        # +1 and -1 eigenvalues of equal magnitude never settle
        pair = leading_eigpair(np.diag([1.0, -1.0]), tol=1e-12, max_steps=20, start=np.array([1.0, 1.0]))
        assert not pair.converged
        assert pair.steps == 20

    def test_bad_tol(self):
        with pytest.raises(InvalidArgumentError):
            leading_eigpair(np.eye(2), tol=0)


class TestGram:
    def test_identity_ensemble(self, rng):
        A = MeasurementEnsemble(np.eye(4), MatrixKind.GAUSSIAN)
        b = complex_normal(rng, 4)
        np.testing.assert_allclose(gram_solve(A, b), b, atol=1e-14)

    def test_dft_is_scaled_adjoint(self, rng):
        A = gen_dft_ensemble(6, 20)
        b = complex_normal(rng, 20)
        np.testing.assert_allclose(gram_solve(A, b), A.matrix @ b / 20, atol=1e-14)

    def test_dft_cholesky_route_agrees(self, rng):
        # same matrix tagged Gaussian goes through the cached factorization
        D = gen_dft_ensemble(6, 20)
        G = MeasurementEnsemble(D.matrix, MatrixKind.GAUSSIAN)
        b = complex_normal(rng, 20)
        np.testing.assert_allclose(gram_solve(G, b), gram_solve(D, b), atol=1e-13)

    def test_exact_recovery(self, rng):
        A = gen_gaussian_ensemble(3, 8, 5)
        x0 = complex_normal(rng, 3)
        b = A.matrix.conj().T @ x0
        x = gram_solve(A, b)
        np.testing.assert_allclose(x, x0, atol=1e-10)
        assert np.linalg.norm(A.matrix.conj().T @ x - b) < 1e-10

    def test_normal_equations(self):
        for seed in range(50):
            r = np.random.default_rng(seed)
            A = gen_gaussian_ensemble(5, 17, seed)
            b = complex_normal(r, 17)
            x = gram_solve(A, b)
            M = A.matrix
            Ab = M @ b
            assert np.linalg.norm(M @ (M.conj().T @ x) - Ab) <= 1e-8 * np.linalg.norm(Ab)

    def test_factor_cached(self, rng):
        A = gen_gaussian_ensemble(3, 9, 1)
        gram_solve(A, complex_normal(rng, 9))
        first = A._cache["gram_cholesky"]
        gram_solve(A, complex_normal(rng, 9))
        assert A._cache["gram_cholesky"] is first

    def test_rank_deficient(self):
        M = np.ones((2, 5), dtype=complex)
        with pytest.raises(SingularGramError):
            gram_solve(MeasurementEnsemble(M, MatrixKind.GAUSSIAN), np.ones(5))

    def test_wide_signal(self):
        with pytest.raises(SingularGramError):
            gram_solve(gen_gaussian_ensemble(6, 4, 0), np.ones(4))

    def test_rhs_length(self):
        with pytest.raises(InvalidArgumentError):
            gram_solve(gen_gaussian_ensemble(2, 4, 0), np.ones(3))


class TestSpectralConstants:
    @pytest.mark.parametrize("K,N", [(2, 2), (10, 50), (1, 1), (7, 64)])
    def test_lambda_gram_dft(self, K, N):
        assert lambda_max_gram(gen_dft_ensemble(K, N)) == N

    def test_lambda_gram_dft_grid(self):
        for N in range(1, 65):
            for K in range(1, N + 1):
                assert lambda_max_gram(gen_dft_ensemble(K, N)) == N

    def test_lambda_gram_gaussian(self):
        A = gen_gaussian_ensemble(3, 12, 4)
        M = A.matrix
        ref = np.linalg.eigvalsh(M @ M.conj().T)[-1]
        assert lambda_max_gram(A) == pytest.approx(ref, rel=1e-8)
        assert A.cached_lambda_gram == lambda_max_gram(A)

    @pytest.mark.parametrize("K,N,expected", [(2, 2, 4), (10, 40, 400)])
    def test_lambda_phi_dft(self, K, N, expected):
        assert lambda_max_phi(gen_dft_ensemble(K, N)) == expected

    def test_lambda_phi_dft_grid(self):
        for K in range(1, 9):
            for N in range(K, 17):
                assert lambda_max_phi(gen_dft_ensemble(K, N)) == N * K

    def test_dft_explicit_phi_agrees(self):
        # the closed form is also what the dense oracle finds
        for K, N in [(2, 3), (3, 5), (4, 4)]:
            A = gen_dft_ensemble(K, N)
            assert np.linalg.eigvalsh(explicit_phi(A))[-1] == pytest.approx(N * K, rel=1e-12)

    @pytest.mark.parametrize("K", [1, 2, 3, 4])
    def test_lambda_phi_gaussian(self, K):
        for seed in range(5):
            A = gen_gaussian_ensemble(K, 5, seed)
            ref = np.linalg.eigvalsh(explicit_phi(A))[-1]
            assert lambda_max_phi(A) == pytest.approx(ref, rel=1e-8)


class TestPhiMatvec:
    def test_zero(self):
        A = gen_gaussian_ensemble(3, 6, 0)
        np.testing.assert_array_equal(phi_matvec(A, np.zeros((3, 3))), 0)

    def test_scalar_dft(self):
        A = gen_dft_ensemble(1, 7)
        np.testing.assert_allclose(phi_matvec(A, np.array([[2.5 - 1j]])), [[7 * (2.5 - 1j)]])

    @pytest.mark.parametrize("K", [1, 2, 3, 4])
    def test_matches_explicit(self, K):
        for seed in range(5):
            r = np.random.default_rng(seed)
            A = gen_gaussian_ensemble(K, 6, seed)
            V = complex_normal(r, (K, K))
            ref = (explicit_phi(A) @ V.ravel(order="F")).reshape(K, K, order="F")
            assert np.max(np.abs(phi_matvec(A, V) - ref)) < 1e-10

    def test_shape_check(self):
        with pytest.raises(InvalidArgumentError):
            phi_matvec(gen_gaussian_ensemble(3, 6, 0), np.eye(2))
