"""Matched multi-window estimators and sinusoidal multitapers."""
from dataclasses import dataclass

import numpy as np

from .core import check_length
from .estimator import _hermitize

__all__ = [
    "WindowSet",
    "RankChoice",
    "interval_indices",
    "ideal_bandpass",
    "matched_windows",
    "multiwindow_prototype",
    "rank_distance",
    "optimal_rank",
    "rank_proxy",
    "sinusoidal_tapers",
    "embed_tapers",
    "sinusoidal_multitaper_estimate",
    "sinusoidal_multitaper_taperform",
]


@dataclass(frozen=True)
class WindowSet:
    windows: np.ndarray  # (N, L), orthonormal rows
    eigenvalues: np.ndarray
    T_support: int

    @property
    def N(self):
        return self.windows.shape[0]

    @property
    def weights(self):
        return np.full(self.N, 1.0 / self.N)


def interval_indices(L, T_len):
    """Grid indices ``-floor(T/2) .. ceil(T/2) - 1`` (mod L) of the centered interval."""
    return (np.arange(T_len) - T_len // 2) % L


def ideal_bandpass(L, W):
    """Time-invariant projection onto frequency bins ``|l| <= W``."""
    L = check_length(L)
    if not 0 <= W < L // 2:
        raise ValueError(f"band half-width must lie in [0, L/2), got {W}")
    symbol = np.zeros(L, dtype=complex)
    symbol[np.r_[0 : W + 1, L - W : L] if W else [0]] = 1.0
    h = np.fft.ifft(symbol)  # impulse response h[d]
    n = np.arange(L)
    return h[(n[:, None] - n[None, :]) % L]


def _canonical_block(V, tol=1e-8):
    # Orthonormal basis of span(V) built from projected unit vectors taken in
    # index order; unique for a given subspace.
    d = V.shape[1]
    Pi = V @ V.conj().T
    basis = []
    for j in range(V.shape[0]):
        v = Pi[:, j].copy()
        for b in basis:
            v -= np.vdot(b, v) * b
        nv = np.linalg.norm(v)
        if nv > tol:
            basis.append(v / nv)
            if len(basis) == d:
                break
    return np.column_stack(basis)


def _fix_phase(v, tol=1e-12):
    i = np.flatnonzero(np.abs(v) > tol * np.abs(v).max())[0]
    return v * (abs(v[i]) / v[i])


def matched_windows(P_mvub, T_len, N, gap_tol=1e-9):
    """Top-N eigenvectors of the interval-compressed prototype.

    Eigenvalue clusters closer than ``gap_tol`` (relative) get a canonical
    basis, and each window's first nonzero sample is made real positive, so
    the result is reproducible and independent of ``N``.
    """
    P = np.asarray(P_mvub)
    L = P.shape[0]
    T_len, N = int(T_len), int(N)
    if not 1 <= T_len <= L:
        raise ValueError(f"T_len must lie in [1, L={L}], got {T_len}")
    if not 1 <= N <= T_len:
        raise ValueError(f"rank N must lie in [1, T_len={T_len}], got {N}")
    idx = interval_indices(L, T_len)  # time order, canonical ordering follows it
    C = _hermitize(P[np.ix_(idx, idx)])
    w, V = np.linalg.eigh(C)
    w, V = w[::-1], V[:, ::-1]
    scale = max(abs(w).max(), 1.0)
    start = 0
    while start < T_len:
        stop = start + 1
        while stop < T_len and w[stop - 1] - w[stop] <= gap_tol * scale:
            stop += 1
        if stop - start > 1:
            V[:, start:stop] = _canonical_block(V[:, start:stop])
        start = stop
    windows = np.zeros((N, L), dtype=complex)
    for j in range(N):
        windows[j, idx] = _fix_phase(V[:, j])
    return WindowSet(windows, w[:N].copy(), T_len)


def multiwindow_prototype(ws):
    """``(1/N) sum_k gamma_k (x) gamma_k``."""
    G = ws.windows
    return (G.T @ G.conj()) / ws.N


def rank_distance(P_mvub, ws):
    """``||P_mvub - P_N||^2`` in HS norm."""
    return float(np.linalg.norm(np.asarray(P_mvub) - multiwindow_prototype(ws)) ** 2)


@dataclass(frozen=True)
class RankChoice:
    N: int
    condition_holds: bool
    proxy: np.ndarray  # proxy bound for N = 1 .. len(proxy)

    def __int__(self):
        return self.N


def rank_proxy(N, s_x, sigma_n2, trace_R, hs_norm2_R=None):
    """Integrated-MSE bound of an ideal rank-N multi-window prototype.

    ``||P_mvub - P_N||^2 = |s_x - 1/N|`` for an MVUB prototype acting as a
    uniform projection of rank ``1/s_x``; ``||R||^2`` defaults to its
    underspread estimate ``s_x tr^2 R``.
    """
    N = np.asarray(N, dtype=float)
    if hs_norm2_R is None:
        hs_norm2_R = s_x * trace_R ** 2
    return np.abs(s_x - 1.0 / N) * trace_R ** 2 + (hs_norm2_R + 2 * sigma_n2 * trace_R) / N


def optimal_rank(s_x, sigma_n2, trace_R, n_max=None, hs_norm2_R=None):
    """Rank of the matched multi-window estimator.

    Returns ``round(1/s_x)`` while ``sigma_n2 / trace_R < (1 - s_x) / 2``;
    otherwise the minimizer of :func:`rank_proxy` over ``1 .. n_max`` with
    ``condition_holds=False``.
    """
    if s_x <= 0:
        raise ValueError(f"s_x must be positive, got {s_x}")
    if s_x > 1:
        raise ValueError(f"s_x must not exceed 1, got {s_x}")
    if sigma_n2 < 0:
        raise ValueError("sigma_n2 must be nonnegative")
    if trace_R <= 0:
        raise ValueError("trace_R must be positive")
    n_star = max(1, int(round(1.0 / s_x)))
    if n_max is None:
        n_max = 4 * n_star
    n_max = max(int(n_max), 1)
    proxy = rank_proxy(np.arange(1, n_max + 1), s_x, sigma_n2, trace_R, hs_norm2_R)
    holds = sigma_n2 / trace_R < (1.0 - s_x) / 2.0
    if holds:
        return RankChoice(min(n_star, n_max), True, proxy)
    return RankChoice(int(np.argmin(proxy)) + 1, False, proxy)


def sinusoidal_tapers(N_len, K):
    """Sine tapers ``v_n^{(k)} = sqrt(2/(N+1)) sin(pi k n / (N+1))``.

    ``n = 1..N_len``, ``k = 1..K``.  Returned as a WindowSet of K rows of
    length ``N_len``; the tapers live entirely on their interval, so each
    carries eigenvalue 1 of the interval projection.
    """
    N_len, K = int(N_len), int(K)
    if N_len < 1:
        raise ValueError("N_len must be positive")
    if not 1 <= K <= N_len:
        raise ValueError(f"K must lie in [1, N_len={N_len}], got {K}")
    n = np.arange(1, N_len + 1)
    k = np.arange(1, K + 1)
    V = np.sqrt(2.0 / (N_len + 1)) * np.sin(np.pi * np.outer(k, n) / (N_len + 1))
    return WindowSet(V, np.ones(K), N_len)


def embed_tapers(tapers, L):
    """Place length-N tapers (array or WindowSet) on the centered interval of a length-L grid."""
    tapers = np.atleast_2d(getattr(tapers, "windows", tapers))
    K, N_len = tapers.shape
    if N_len > L:
        raise ValueError(f"taper length {N_len} exceeds grid length {L}")
    out = np.zeros((K, L), dtype=complex)
    out[:, interval_indices(L, N_len)] = tapers
    return WindowSet(out, np.full(K, 1.0 / K), N_len)


def _segments(y, N_len):
    L = y.size
    off = np.arange(N_len) - N_len // 2
    return y[(np.arange(L)[:, None] + off[None, :]) % L]  # [t, n-1]


def _check_mt(y, N_len, K):
    y = np.asarray(y, dtype=complex)
    if y.ndim != 1:
        raise ValueError("y must be one-dimensional")
    if not 1 <= N_len <= y.size:
        raise ValueError(f"N_len must lie in [1, L={y.size}], got {N_len}")
    if not 1 <= K <= N_len:
        raise ValueError(f"K must lie in [1, N_len={N_len}], got {K}")
    return y


def sinusoidal_multitaper_estimate(y, N_len, K):
    """Sinusoidal multitaper field from differences of the local Fourier transform.

    ``S(t, f) = 1/(2K(N+1)) sum_j |Y(t, f + j/(2N+2)) - Y(t, f - j/(2N+2))|^2``
    where ``Y(t, .)`` is the transform of the N samples centered at ``t``
    (sample positions ``n = 1..N``), evaluated on frequencies ``l / L``.
    """
    y = _check_mt(y, N_len, K)
    L = y.size
    seg = _segments(y, N_len)
    n = np.arange(1, N_len + 1)
    f = np.arange(L) / L
    out = np.zeros((L, L))
    for j in range(1, K + 1):
        df = j / (2 * N_len + 2)
        Ep = np.exp(-2j * np.pi * np.outer(n, f + df))
        Em = np.exp(-2j * np.pi * np.outer(n, f - df))
        out += np.abs(seg @ Ep - seg @ Em) ** 2
    return out / (2 * K * (N_len + 1))


def sinusoidal_multitaper_taperform(y, N_len, K):
    """Same field as ``(1/K) sum_k |STFT with taper v^{(k)}|^2``."""
    y = _check_mt(y, N_len, K)
    L = y.size
    seg = _segments(y, N_len)
    V = sinusoidal_tapers(N_len, K).windows
    n = np.arange(1, N_len + 1)
    E = np.exp(-2j * np.pi * np.outer(n, np.arange(L)) / L)
    out = np.zeros((L, L))
    for v in V:
        out += np.abs((seg * v) @ E) ** 2
    return out / K
