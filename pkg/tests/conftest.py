import numpy as np
import pytest


def rand_op(rng, L):
    return rng.standard_normal((L, L)) + 1j * rng.standard_normal((L, L))


def rand_herm(rng, L):
    A = rand_op(rng, L)
    return 0.5 * (A + A.conj().T)


def rand_psd(rng, L):
    A = rand_op(rng, L)
    return A @ A.conj().T / L


def gsf_bruteforce(H):
    """Half-alpha spreading function straight from the defining double sum."""
    L = H.shape[0]
    S = np.zeros((L, L), dtype=complex)
    for m in range(L):
        for k in range(L):
            S[m, k] = sum(H[n, (n - m) % L] * np.exp(-2j * np.pi * k * n / L) for n in range(L))
    return S


def centered_grid(L):
    c = np.where(np.arange(L) < L // 2, np.arange(L), np.arange(L) - L)
    return np.meshgrid(c, c, indexing="ij")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
