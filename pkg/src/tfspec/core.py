"""Discrete time-frequency operator algebra on a periodic grid of length ``L``.

Signals are length-``L`` complex vectors, operators are ``L x L`` kernels
``h[n, n']`` (row = output time).  Lags, Doppler bins, times and frequency
bins are all integers taken modulo ``L``.

Sign conventions
----------------
The time-frequency shift modulates with ``exp(+i 2 pi k n / L)``.  All
Fourier-type analysis (spreading function, Weyl symbol, symplectic DFT) uses
the opposite sign, so that the spreading function is exactly the coefficient
field of an operator in the shift basis::

    H = (1/L) sum_{m,k} S_H[m, k] S^{(m, k)}

Normalizations are pinned by ``weyl_symbol(I) == 1``,
``spreading_function(I) == L * delta`` and
``<A, B>_HS == (1/L) <S_A, S_B>``.  Consequently one time-frequency cell
carries the measure ``1/L``.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "TFField",
    "AmbiguityField",
    "check_length",
    "centered",
    "lattice_product",
    "alpha_phase",
    "tf_shift",
    "shift_operator",
    "operator_tf_shift",
    "hs_inner",
    "hs_norm",
    "is_hermitian",
    "spreading_function",
    "weyl_symbol",
    "symplectic_dft",
    "kernel_from_spreading",
]


@dataclass(frozen=True)
class TFField:
    """Values over (time sample n, frequency bin l)."""

    values: np.ndarray
    alpha: float = 0.0

    @property
    def L(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class AmbiguityField:
    """Values over (lag m, Doppler bin k), indices modulo L."""

    values: np.ndarray
    alpha: float = 0.5

    @property
    def L(self):
        return self.values.shape[0]


def check_length(L):
    L = int(L)
    if L < 4 or L % 2:
        raise ValueError(f"grid length must be even and >= 4, got {L}")
    return L


def _check_alpha(alpha):
    alpha = float(alpha)
    if abs(alpha) > 0.5:
        raise ValueError(f"|alpha| must not exceed 1/2, got {alpha}")
    return alpha


def _square(A, name="kernel"):
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {A.shape}")
    return A


def centered(L):
    """Centered representatives ``[0, 1, ..., L/2 - 1, -L/2, ..., -1]`` of ``0..L-1``."""
    idx = np.arange(L)
    return np.where(idx < L // 2, idx, idx - L)


@lru_cache(maxsize=64)
def _lattice_product(L):
    m = centered(L)[:, None] * np.ones((1, L), dtype=np.int64)
    k = np.ones((L, 1), dtype=np.int64) * centered(L)[None, :]
    h = L // 2
    # Cells on the Nyquist row/column have two equally central representatives.
    # Pick them so that the cell (-m, -k) is represented by (-m_r, -k_r); the
    # product is then even under negation, which keeps Hermitian symmetry of
    # the alpha phase exact.
    row = (m == -h) & (k < 0) & (k != -h)
    col = (k == -h) & (m < 0) & (m != -h)
    m = np.where(row, h, m)
    k = np.where(col, h, k)
    p = m * k
    p.setflags(write=False)
    return p


def lattice_product(L):
    """Integer array ``p[m, k]``: product of centered lag and Doppler indices.

    ``p[m, k] == (m * k) mod L`` and ``p[-m, -k] == p[m, k]``.
    """
    return _lattice_product(check_length(L))


def alpha_phase(L, alpha):
    """Unit-modulus factor mapping the alpha = 1/2 spreading function to ``alpha``."""
    alpha = _check_alpha(alpha)
    return np.exp(-2j * np.pi * (alpha - 0.5) * lattice_product(L) / L)


def tf_shift(x, m, k):
    """Delay ``x`` by ``m`` samples, then modulate by ``exp(+i 2 pi k n / L)``."""
    x = np.asarray(x)
    L = x.shape[-1]
    n = np.arange(L)
    return np.roll(x, int(m) % L, axis=-1) * np.exp(2j * np.pi * (int(k) % L) * n / L)


def shift_operator(L, m, k):
    """Kernel of the shift ``x -> tf_shift(x, m, k)``."""
    return tf_shift(np.eye(L, dtype=complex).T, m, k).T


def operator_tf_shift(P, m, k):
    """``S P S^+`` for the shift ``S = S^{(m, k)}``.

    ``p'[n, n'] = p[n - m, n' - m] exp(i 2 pi k (n - n') / L)``.
    """
    P = _square(P)
    L = P.shape[0]
    m, k = int(m) % L, int(k) % L
    n = np.arange(L)
    Q = np.roll(P, (m, m), axis=(0, 1))
    if k == 0:
        return Q.astype(complex, copy=True)
    ramp = np.exp(2j * np.pi * k * n / L)
    return ramp[:, None] * Q * ramp.conj()[None, :]


def hs_inner(A, B):
    """Hilbert-Schmidt inner product ``sum a[n, n'] conj(b[n, n'])``."""
    A = _square(A, "A")
    B = _square(B, "B")
    if A.shape != B.shape:
        raise ValueError(f"dimension mismatch: {A.shape} vs {B.shape}")
    return complex(np.vdot(B, A))


def hs_norm(A):
    return float(np.linalg.norm(np.asarray(A)))


def is_hermitian(A, rtol=1e-12):
    A = _square(A)
    scale = max(np.abs(A).max(), np.finfo(float).tiny)
    return bool(np.abs(A - A.conj().T).max() <= rtol * scale)


def _gsf_half(H):
    # row m of A holds the m-th lag diagonal: A[m, n] = h[n, n - m]
    L = H.shape[0]
    n = np.arange(L)
    A = H[n[None, :], (n[None, :] - n[:, None]) % L]
    return np.fft.fft(A, axis=1)


def spreading_function(H, alpha=0.5):
    """Generalized spreading function ``S^{(alpha)}_H[m, k]``.

    Computed exactly at ``alpha = 1/2`` as ``sum_n h[n, n - m] exp(-i 2 pi k n / L)``
    and moved to other ``alpha`` by the phase ``exp(-i 2 pi (alpha - 1/2) m k / L)``
    evaluated on centered indices (see :func:`lattice_product`).
    """
    H = _square(H)
    alpha = _check_alpha(alpha)
    S = _gsf_half(H)
    if alpha != 0.5:
        S = S * alpha_phase(H.shape[0], alpha)
    return AmbiguityField(S, alpha)


def kernel_from_spreading(S):
    """Inverse of :func:`spreading_function`; ``S`` carries its ``alpha``."""
    values = np.asarray(S.values)
    L = values.shape[0]
    half = values if S.alpha == 0.5 else values * alpha_phase(L, S.alpha).conj()
    A = np.fft.ifft(half, axis=1)
    n = np.arange(L)
    H = np.empty((L, L), dtype=complex)
    H[n[None, :], (n[None, :] - n[:, None]) % L] = A
    return H


def symplectic_dft(field, direction="forward"):
    """Symplectic DFT between TF fields and ambiguity fields.

    forward:  ``S[m, k] = (1/L) sum_{n,l} F[n, l] exp(-i 2 pi (k n - m l) / L)``
    inverse:  ``F[n, l] = (1/L) sum_{m,k} S[m, k] exp(+i 2 pi (k n - m l) / L)``

    The transform is unitary and its own inverse, so both directions share one
    kernel; ``direction`` only selects the output type.
    """
    if direction not in ("forward", "inverse"):
        raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")
    values = np.asarray(field.values if hasattr(field, "values") else field)
    alpha = getattr(field, "alpha", 0.5 if direction == "inverse" else 0.0)
    out = np.fft.fft(np.fft.ifft(values, axis=1), axis=0).T
    if direction == "forward":
        return AmbiguityField(out, alpha)
    return TFField(out, alpha)


def weyl_symbol(H, alpha=0.0):
    """Generalized Weyl symbol ``L^{(alpha)}_H[n, l]``; ``weyl_symbol(I) == 1``."""
    return symplectic_dft(spreading_function(H, alpha), "inverse")
