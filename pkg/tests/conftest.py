import numpy as np
import pytest

from primepr.problem import (
    complex_normal,
    gen_dft_ensemble,
    gen_gaussian_ensemble,
    make_instance,
)


def unit_signal(seed, K):
    x = complex_normal(np.random.default_rng(seed), K)
    return x / np.linalg.norm(x)


def random_hermitian(rng, n):
    M = complex_normal(rng, (n, n))
    return 0.5 * (M + M.conj().T)


def instance(seed, K=5, N=20, noise=0.0, dft=False):
    """Problem instance with a unit-norm ground truth; returns (P, x_o)."""
    x = unit_signal(seed, K)
    A = gen_dft_ensemble(K, N) if dft else gen_gaussian_ensemble(K, N, seed)
    return make_instance(A, x, noise, seed + 1), x


def explicit_phi(A):
    """The K^2 x K^2 lifted operator, formed term by term (small K only)."""
    M = A.matrix
    K = M.shape[0]
    Phi = np.zeros((K * K, K * K), dtype=complex)
    for a in M.T:
        v = np.outer(a, a.conj()).ravel(order="F")
        Phi += np.outer(v, v.conj())
    return Phi


def fd_gradient(f, x, h=1e-5):
    """Central differences of a real function of a complex vector in (Re x, Im x)."""
    K = x.size
    out = np.empty(2 * K)
    for j in range(2 * K):
        e = np.zeros(K, dtype=complex)
        e[j % K] = h if j < K else 1j * h
        out[j] = (f(x + e) - f(x - e)) / (2 * h)
    return out


def monotone(trace, slack=1e-10):
    tr = np.asarray(trace)
    return bool(np.all(np.diff(tr) <= slack * (1 + np.abs(tr[:-1]))))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
