"""Nonstationary circular Gaussian process models on the periodic grid."""
from dataclasses import dataclass

import numpy as np

from . import _rng
from .core import (
    AmbiguityField,
    centered,
    check_length,
    is_hermitian,
    kernel_from_spreading,
    spreading_function,
    weyl_symbol,
)

__all__ = [
    "SpreadSupport",
    "CorrelationModel",
    "LTVSystem",
    "SUPPORT_FLOOR",
    "rect_mask",
    "measured_support",
    "psd_sqrt",
    "white_model",
    "stationary_model",
    "expected_ambiguity",
    "wigner_ville_spectrum",
    "synthesize_underspread_system",
    "correlation_from_system",
    "sample_realization",
    "observe",
    "indicator_prototype",
    "sampling_bounds",
    "weyl_heisenberg_reconstruct",
    "rkhs_reproduce_check",
]

# a cell belongs to a support when |value| exceeds this fraction of the peak
SUPPORT_FLOOR = 1e-12


def rect_mask(L, tau_max, nu_max):
    """0/1 mask of the centered rectangle ``|m| <= tau_max, |k| <= nu_max``."""
    c = np.abs(centered(L))
    return ((c[:, None] <= tau_max) & (c[None, :] <= nu_max)).astype(float)


@dataclass(frozen=True)
class SpreadSupport:
    """Centered lag/Doppler rectangle with half-widths in samples and bins.

    ``s_x`` is the fraction of ambiguity-plane cells inside the rectangle,
    ``(2 tau_max + 1)(2 nu_max + 1) / L`` away from the grid edge.
    """

    L: int
    tau_max: int
    nu_max: int

    def __post_init__(self):
        check_length(self.L)
        for name in ("tau_max", "nu_max"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValueError(f"{name} must be a nonnegative integer, got {v}")
            if v > self.L // 2:
                raise ValueError(f"{name} exceeds grid (max {self.L // 2}, got {v})")

    @property
    def mask(self):
        return rect_mask(self.L, self.tau_max, self.nu_max)

    @property
    def s_x(self):
        return float(self.mask.sum() / self.L)

    @property
    def underspread(self):
        return self.s_x < 1.0

    def doubled(self):
        h = self.L // 2
        return SpreadSupport(self.L, min(2 * self.tau_max, h), min(2 * self.nu_max, h))


def psd_sqrt(R, tol=1e-8):
    """Hermitian square root of a PSD kernel.

    Eigenvalues down to ``-tol * max`` are treated as roundoff and clamped.
    """
    R = np.asarray(R)
    w, U = np.linalg.eigh(0.5 * (R + R.conj().T))
    top = max(abs(w).max(), np.finfo(float).tiny)
    if w.min() < -tol * top:
        raise ValueError(f"correlation is not positive semidefinite (min eigenvalue {w.min():.3e})")
    w = np.clip(w, 0.0, None)
    return (U * np.sqrt(w)) @ U.conj().T


@dataclass(frozen=True)
class CorrelationModel:
    R: np.ndarray
    sigma_n2: float = 0.0
    support: SpreadSupport = None

    def __post_init__(self):
        R = np.asarray(self.R, dtype=complex)
        if R.ndim != 2 or R.shape[0] != R.shape[1]:
            raise ValueError("R must be square")
        L = check_length(R.shape[0])
        if not is_hermitian(R, 1e-10):
            raise ValueError("R must be Hermitian")
        w = np.linalg.eigvalsh(0.5 * (R + R.conj().T))
        if w.min() < -1e-10 * max(abs(w).max(), np.finfo(float).tiny):
            raise ValueError(f"R must be positive semidefinite (min eigenvalue {w.min():.3e})")
        if self.sigma_n2 < 0:
            raise ValueError("sigma_n2 must be nonnegative")
        object.__setattr__(self, "R", R)
        if self.support is None:
            object.__setattr__(self, "support", SpreadSupport(L, L // 2, L // 2))
        elif self.support.L != L:
            raise ValueError("support grid does not match R")

    @property
    def L(self):
        return self.R.shape[0]

    @property
    def trace(self):
        return float(np.trace(self.R).real)


@dataclass(frozen=True)
class LTVSystem:
    H: np.ndarray
    support: SpreadSupport

    @property
    def L(self):
        return self.H.shape[0]


def measured_support(S, floor=SUPPORT_FLOOR):
    """Half-widths ``(tau, nu)`` of the smallest centered rectangle holding ``S``."""
    values = np.abs(np.asarray(getattr(S, "values", S)))
    L = values.shape[0]
    peak = values.max()
    if peak == 0:
        return 0, 0
    m, k = np.nonzero(values > floor * peak)
    c = centered(L)
    return int(np.abs(c[m]).max()), int(np.abs(c[k]).max())


def white_model(L, sigma2=1.0, sigma_n2=0.0):
    return CorrelationModel(sigma2 * np.eye(L, dtype=complex), sigma_n2, SpreadSupport(L, 0, 0))


def stationary_model(r, sigma_n2=0.0):
    """Circulant model ``R[n, n'] = r[(n - n') mod L]``; ``r`` must be a valid autocorrelation."""
    r = np.asarray(r, dtype=complex)
    L = r.size
    n = np.arange(L)
    R = r[(n[:, None] - n[None, :]) % L]
    tau = measured_support(np.abs(r)[:, None])[0]
    return CorrelationModel(R, sigma_n2, SpreadSupport(L, tau, 0))


def expected_ambiguity(model, alpha=0.5):
    return spreading_function(model.R, alpha)


def wigner_ville_spectrum(model, alpha=0.0):
    return weyl_symbol(model.R, alpha)


def synthesize_underspread_system(L, tau_max, nu_max, seed):
    """LTV system whose spreading function is i.i.d. circular Gaussian on a rectangle.

    Draws are scaled so that ``E ||H||^2 = 1``.
    """
    L = check_length(L)
    if tau_max > L // 2:
        raise ValueError("tau_max exceeds grid")
    if nu_max > L // 2:
        raise ValueError("nu_max exceeds grid")
    support = SpreadSupport(L, tau_max, nu_max)
    mask = support.mask.astype(bool)
    ncells = int(mask.sum())
    draws = _rng.circular_normals(seed, "synthesis", 0, ncells)
    S = np.zeros((L, L), dtype=complex)
    S[mask] = draws * np.sqrt(L / ncells)
    return LTVSystem(kernel_from_spreading(AmbiguityField(S, 0.5)), support)


def correlation_from_system(system, sigma_n2=0.0):
    """Output correlation ``R = H H^+`` of white noise through ``system``."""
    H = system.H
    R = H @ H.conj().T
    R = 0.5 * (R + R.conj().T)
    return CorrelationModel(R, sigma_n2, system.support.doubled())


def sample_realization(model, seed, index=0):
    """Draw ``x`` with ``E{x x^+} = R``; ``index`` selects an independent replicate."""
    root = psd_sqrt(model.R)
    L = model.L
    w = _rng.circular_normals(seed, "signal", index * L, L)
    return root @ w


def observe(x, sigma_n2, seed, index=0):
    """``y = x + n`` with circular white Gaussian ``n`` of variance ``sigma_n2``."""
    if sigma_n2 < 0:
        raise ValueError("sigma_n2 must be nonnegative")
    x = np.asarray(x, dtype=complex)
    if sigma_n2 == 0:
        return x.copy()
    L = x.size
    return x + np.sqrt(sigma_n2) * _rng.circular_normals(seed, "noise", index * L, L)


def indicator_prototype(support, alpha=0.0, scale=1.0):
    """Operator whose ``alpha`` spreading function is ``scale`` times the support mask."""
    return kernel_from_spreading(AmbiguityField(scale * support.mask.astype(complex), alpha))


def sampling_bounds(L, tau_max, nu_max):
    """Largest admissible time step T and frequency step F for a rectangle support."""
    return L // (2 * nu_max + 1), L // (2 * tau_max + 1)


def weyl_heisenberg_reconstruct(ew_samples, prototype, T, F, alpha=None):
    """Rebuild a correlation operator from Weyl-symbol samples on the grid ``(iT, jF)``.

    ``prototype`` is the indicator prototype (spreading function equal to the
    support mask, see :func:`indicator_prototype`).  The lattice density
    ``T F / L`` is applied here.  The support of the prototype sets the
    sampling limits ``T <= L // (2 nu_max + 1)`` and ``F <= L // (2 tau_max + 1)``.
    """
    P = np.asarray(prototype)
    L = P.shape[0]
    T, F = int(T), int(F)
    if T < 1 or F < 1 or L % T or L % F:
        raise ValueError(f"T and F must be positive divisors of L={L}, got T={T}, F={F}")
    samples = np.asarray(getattr(ew_samples, "values", ew_samples))
    if alpha is None:
        alpha = getattr(ew_samples, "alpha", 0.0)
    if samples.shape != (L // T, L // F):
        raise ValueError(f"expected samples of shape {(L // T, L // F)}, got {samples.shape}")
    tau, nu = measured_support(spreading_function(P, alpha))
    T_max, F_max = sampling_bounds(L, tau, nu)
    if T > T_max:
        raise ValueError(f"time step violates T <= L/(2*nu_max+1): T={T}, bound {T_max} (nu_max={nu})")
    if F > F_max:
        raise ValueError(f"frequency step violates F <= L/(2*tau_max+1): F={F}, bound {F_max} (tau_max={tau})")

    n = np.arange(L)
    lag = (n[:, None] - n[None, :]) % L
    Rhat = np.zeros((L, L), dtype=complex)
    for i in range(L // T):
        Q = np.roll(P, (i * T, i * T), axis=(0, 1))
        # sum_j samples[i, j] exp(i 2 pi jF d / L) for every lag d
        c = np.zeros(L, dtype=complex)
        c[(np.arange(L // F) * F) % L] = samples[i]
        c = np.fft.ifft(c) * L
        Rhat += Q * c[lag]
    return Rhat * (T * F / L)


def rkhs_reproduce_check(H, prototype, alpha=0.0):
    """Max-abs error of ``L_H(z) = (1/L) sum_z' L_H(z') L_P(z' - z)``.

    Zero (to roundoff) when the spreading support of ``H`` lies where the
    prototype's spreading function is one.
    """
    WH = weyl_symbol(H, alpha).values
    WP = weyl_symbol(prototype, alpha).values
    L = WH.shape[0]
    idx = (-np.arange(L)) % L
    WP_flip = WP[idx][:, idx]
    conv = np.fft.ifft2(np.fft.fft2(WH) * np.fft.fft2(WP_flip))
    return float(np.abs(WH - conv / L).max())
