import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from tfspec.core import tf_shift
from tfspec.estimator import estimate_spectrum, gwv_prototype, mvub_prototype, spectrogram
from tfspec.multiwindow import (
    embed_tapers,
    ideal_bandpass,
    interval_indices,
    matched_windows,
    multiwindow_prototype,
    optimal_rank,
    rank_distance,
    rank_proxy,
    sinusoidal_multitaper_estimate,
    sinusoidal_multitaper_taperform,
    sinusoidal_tapers,
)
from tfspec.process import SpreadSupport

from conftest import rand_psd


def _check_windowset(ws, P, L):
    G = ws.windows
    np.testing.assert_allclose(G.conj() @ G.T, np.eye(ws.N), atol=1e-10)
    outside = np.setdiff1d(np.arange(L), interval_indices(L, ws.T_support))
    assert np.abs(G[:, outside]).max(initial=0) <= 1e-14
    assert np.all(np.diff(ws.eigenvalues) <= 1e-12)
    idx = interval_indices(L, ws.T_support)
    C = P[np.ix_(idx, idx)]
    for g, lam in zip(G, ws.eigenvalues):
        assert np.linalg.norm(C @ g[idx] - lam * g[idx]) <= 1e-10


def test_interval_indices_centered():
    assert list(interval_indices(8, 4)) == [6, 7, 0, 1]
    assert list(interval_indices(8, 3)) == [7, 0, 1]


def test_identity_prototype_canonical_windows():
    L = 8
    ws = matched_windows(np.eye(L), 4, 4)
    np.testing.assert_allclose(ws.eigenvalues, 1)
    # canonical basis: unit impulses in time order across the interval
    np.testing.assert_allclose(ws.windows, np.eye(L)[interval_indices(L, 4)], atol=1e-14)


def test_rank_one_prototype(rng):
    L, T = 16, 6
    g = np.zeros(L, dtype=complex)
    idx = interval_indices(L, T)
    g[idx] = rng.standard_normal(T) + 1j * rng.standard_normal(T)
    g /= np.linalg.norm(g)
    ws = matched_windows(np.outer(g, g.conj()), T, 1)
    assert ws.eigenvalues[0] == pytest.approx(1.0)
    phase = np.vdot(ws.windows[0], g)
    assert abs(abs(phase) - 1) < 1e-12
    np.testing.assert_allclose(ws.windows[0] * phase, g, atol=1e-12)


def test_matched_window_invariants_on_psd(rng):
    L = 16
    P = rand_psd(rng, L)
    for T, N in [(16, 5), (9, 3), (4, 4)]:
        _check_windowset(matched_windows(P, T, N), P, L)


def test_matched_windows_errors():
    with pytest.raises(ValueError, match="rank N"):
        matched_windows(np.eye(8), 4, 5)
    with pytest.raises(ValueError, match="rank N"):
        matched_windows(np.eye(8), 4, 0)
    with pytest.raises(ValueError, match="T_len"):
        matched_windows(np.eye(8), 9, 1)


def test_n_independence():
    L = 32
    P = mvub_prototype(gwv_prototype(L), SpreadSupport(L, 2, 3))
    a = matched_windows(P, 20, 4)
    b = matched_windows(P, 20, 11)
    np.testing.assert_allclose(a.eigenvalues, b.eigenvalues[:4], atol=1e-12)
    gaps = np.abs(np.diff(b.eigenvalues[:5]))
    for j in range(4):
        if gaps[j] > 1e-8 and (j == 0 or gaps[j - 1] > 1e-8):
            assert abs(abs(np.vdot(a.windows[j], b.windows[j])) - 1) < 1e-8
    angle = scipy.linalg.subspace_angles(a.windows.T, b.windows[:4].T).max()
    assert angle < 1e-6


def _periodic_sinc_dpss(L, T, W, K):
    # independent oracle: dense eigenproblem of the periodic-sinc (Dirichlet) matrix
    d = np.subtract.outer(np.arange(T), np.arange(T)).astype(float)
    with np.errstate(invalid="ignore", divide="ignore"):
        A = np.sin(np.pi * (2 * W + 1) * d / L) / (L * np.sin(np.pi * d / L))
    A[d == 0] = (2 * W + 1) / L
    w, V = scipy.linalg.eigh(A)
    return w[::-1][:K], V[:, ::-1][:, :K]


@pytest.mark.parametrize("L,T,W", [(64, 24, 4), (128, 40, 6), (64, 48, 2), (96, 30, 5)])
def test_dpss_correspondence(L, T, W):
    K = int(np.floor(T * (2 * W + 1) / L))
    assert K >= 1
    ws = matched_windows(ideal_bandpass(L, W), T, K)
    w_ref, V_ref = _periodic_sinc_dpss(L, T, W, K)
    np.testing.assert_allclose(ws.eigenvalues, w_ref, atol=1e-12)
    G = ws.windows[:, interval_indices(L, T)].T
    assert scipy.linalg.subspace_angles(G, V_ref).max() < 1e-6


# multi-window prototype -------------------------------------------------------------

def test_multiwindow_prototype_properties(rng):
    L = 16
    P = mvub_prototype(gwv_prototype(L), SpreadSupport(L, 1, 2))
    for N in (1, 4, 7):
        ws = matched_windows(P, 12, N)
        Pn = multiwindow_prototype(ws)
        np.testing.assert_allclose(Pn, Pn.conj().T, atol=1e-14)
        assert np.linalg.eigvalsh(Pn).min() >= -1e-14
        assert np.trace(Pn).real == pytest.approx(1.0)
        assert np.linalg.norm(Pn) ** 2 == pytest.approx(1.0 / N)
        if N == 1:
            g = ws.windows[0]
            np.testing.assert_allclose(Pn, np.outer(g, g.conj()), atol=1e-14)


def test_multiwindow_estimate_is_mean_spectrogram(rng):
    L = 16
    ws = matched_windows(rand_psd(rng, L), 10, 4)
    y = rng.standard_normal(L) + 1j * rng.standard_normal(L)
    mean_spec = sum(spectrogram(y, g) for g in ws.windows) / ws.N
    np.testing.assert_allclose(estimate_spectrum(multiwindow_prototype(ws), y), mean_spec, atol=1e-10)


def test_rank_distance_formula_and_step_rule():
    L = 32
    P = mvub_prototype(gwv_prototype(L), SpreadSupport(L, 1, 2))
    T = 24
    full = matched_windows(P, T, T)
    lam = full.eigenvalues
    D = []
    for N in range(1, T + 1):
        d = rank_distance(P, matched_windows(P, T, N))
        # ||P - P_N||^2 = ||P||^2 - 2 S_N / N + 1 / N with S_N the top-N eigenvalue sum
        assert d == pytest.approx(np.linalg.norm(P) ** 2 - 2 * lam[:N].sum() / N + 1 / N, rel=1e-10, abs=1e-12)
        D.append(d)
    for N in range(1, T):
        step = D[N] - D[N - 1]
        rule = lam[:N].sum() - N * lam[N] - 0.5
        assert np.sign(step) == np.sign(rule) or abs(step) < 1e-12


def test_matched_windows_best_rank_n(rng):
    L, T = 16, 10
    P = mvub_prototype(gwv_prototype(L, 0.25), SpreadSupport(L, 1, 1))
    idx = interval_indices(L, T)
    for N in (1, 3, 6):
        best = rank_distance(P, matched_windows(P, T, N))
        for _ in range(50):
            Q, _ = np.linalg.qr(rng.standard_normal((T, N)) + 1j * rng.standard_normal((T, N)))
            G = np.zeros((N, L), dtype=complex)
            G[:, idx] = Q.T
            Pn = G.T @ G.conj() / N
            assert best <= np.linalg.norm(P - Pn) ** 2 + 1e-12


# rank selection ---------------------------------------------------------------------

def test_optimal_rank_examples():
    r = optimal_rank(0.1, 0.1, 1.0)
    assert r.N == 10 and r.condition_holds
    assert optimal_rank(1.0, 0.0, 1.0).N == 1
    r = optimal_rank(0.25, 10.0, 1.0, n_max=64)
    assert not r.condition_holds
    # independent scan of the proxy bound
    N = np.arange(1, 65)
    proxy = np.abs(0.25 - 1 / N) + (0.25 + 2 * 10.0) / N
    assert r.N == int(np.argmin(proxy)) + 1


def test_optimal_rank_errors():
    for bad in (0.0, -0.2):
        with pytest.raises(ValueError, match="s_x"):
            optimal_rank(bad, 0.1, 1.0)
    with pytest.raises(ValueError, match="trace_R"):
        optimal_rank(0.2, 0.1, 0.0)


@settings(max_examples=60, deadline=None)
@given(s_x=st.floats(0.02, 1.0), ratio=st.floats(0.0, 5.0))
def test_rank_rule_property(s_x, ratio):
    r = optimal_rank(s_x, ratio * 2.0, 2.0)
    if ratio < (1 - s_x) / 2:
        assert r.condition_holds and r.N == max(1, round(1 / s_x))
    else:
        assert not r.condition_holds
        assert r.proxy[r.N - 1] == r.proxy.min()


def test_rank_proxy_at_matched_rank():
    # at N = 1/s_x the bias part vanishes
    assert rank_proxy(10, 0.1, 0.0, 1.0) == pytest.approx(0.1 / 10)


# sinusoidal tapers ------------------------------------------------------------------

def test_sinusoidal_taper_values():
    v = sinusoidal_tapers(3, 1).windows[0]
    np.testing.assert_allclose(v, [0.5, 0.70711, 0.5], atol=5e-6)


def test_sinusoidal_orthonormal_and_complete():
    ws = sinusoidal_tapers(16, 8)
    np.testing.assert_allclose(ws.windows @ ws.windows.T, np.eye(8), atol=1e-12)
    np.testing.assert_allclose(ws.weights, 1 / 8)
    V = sinusoidal_tapers(12, 12).windows
    np.testing.assert_allclose(V.T @ V, np.eye(12), atol=1e-12)


def test_sinusoidal_taper_errors():
    with pytest.raises(ValueError, match="K must"):
        sinusoidal_tapers(4, 5)


def test_multitaper_zero_signal():
    assert np.array_equal(sinusoidal_multitaper_estimate(np.zeros(16), 8, 3), np.zeros((16, 16)))


@pytest.mark.parametrize("l0", [0, 3, 9])
@pytest.mark.parametrize("N_len,K", [(16, 1), (16, 3), (32, 4), (12, 4)])
def test_multitaper_exponential_two_paths(l0, N_len, K):
    L = 32
    y = np.exp(2j * np.pi * l0 * np.arange(L) / L)
    a = sinusoidal_multitaper_estimate(y, N_len, K)
    b = sinusoidal_multitaper_taperform(y, N_len, K)
    np.testing.assert_allclose(a, b, atol=1e-10 * a.max())
    np.testing.assert_allclose(a, np.broadcast_to(a[:1], a.shape), atol=1e-10 * a.max())  # stationary in t
    mirror = a[0, (l0 - np.arange(L)) % L]
    np.testing.assert_allclose(a[0, (l0 + np.arange(L)) % L], mirror, atol=1e-10 * a.max())
    peak = np.argmax(a, axis=1)
    if K % 2 or K == 4 and N_len == 32:
        assert np.all(peak == l0)
    else:
        # the averaged sine-taper window of this (N_len, K) has a shallow dip at its centre
        assert np.all(np.minimum((peak - l0) % L, (l0 - peak) % L) <= 1)


def test_multitaper_matches_prototype_form(rng):
    L = 32
    y = rng.standard_normal(L) + 1j * rng.standard_normal(L)
    for N_len, K in [(16, 4), (9, 2), (32, 5)]:
        P = multiwindow_prototype(embed_tapers(sinusoidal_tapers(N_len, K), L))
        np.testing.assert_allclose(sinusoidal_multitaper_estimate(y, N_len, K),
                                   estimate_spectrum(P, y), atol=1e-10)


def test_multitaper_white_noise_mean():
    L, N, s2 = 16, 10_000, 2.0
    r = np.random.default_rng(5)
    acc = np.zeros((L, L))
    acc2 = np.zeros((L, L))
    for _ in range(N):
        y = np.sqrt(s2 / 2) * (r.standard_normal(L) + 1j * r.standard_normal(L))
        f = sinusoidal_multitaper_estimate(y, 8, 3)
        acc += f
        acc2 += f * f
    mean = acc / N
    se = np.sqrt((acc2 / N - mean ** 2) / N)
    assert np.abs((mean - s2) / se).max() < 5


def test_multitaper_parameter_errors():
    with pytest.raises(ValueError):
        sinusoidal_multitaper_estimate(np.zeros(8), 9, 1)
    with pytest.raises(ValueError):
        sinusoidal_multitaper_estimate(np.zeros(8), 4, 5)
