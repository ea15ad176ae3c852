"""Quadratic TF-invariant spectral estimators and their bias/variance analysis.

An estimator with prototype ``P_hat`` maps an observation ``y`` to the field
``<P_hat^{(n,l)} y, y>``.  All analytic quantities assume circular complex
Gaussian signal and white noise.  Integrals over the plane use the lattice
measure ``1/L`` per cell.
"""
from dataclasses import dataclass, asdict
from functools import cached_property

import numpy as np

from .core import (
    AmbiguityField,
    TFField,
    check_length,
    is_hermitian,
    kernel_from_spreading,
    lattice_product,
    operator_tf_shift,
    spreading_function,
    symplectic_dft,
)

__all__ = [
    "PrototypeSpec",
    "ErrorReport",
    "gwv_prototype",
    "mvub_prototype",
    "shifted_trace",
    "spectrogram",
    "estimate_spectrum",
    "estimate_spectrum_direct",
    "noise_bias_correct",
    "target_spectrum",
    "expected_estimate",
    "bias_field",
    "variance_field",
    "global_error_report",
]


def _hermitize(A):
    return 0.5 * (A + A.conj().T)


@dataclass(frozen=True)
class PrototypeSpec:
    """Target prototype ``P`` and estimator prototype ``P_hat``."""

    P: np.ndarray
    P_hat: np.ndarray
    alpha: float = 0.0

    def __post_init__(self):
        P = np.asarray(self.P, dtype=complex)
        P_hat = np.asarray(self.P_hat, dtype=complex)
        if P.shape != P_hat.shape:
            raise ValueError(f"P and P_hat differ in shape: {P.shape} vs {P_hat.shape}")
        for name, A in (("P", P), ("P_hat", P_hat)):
            if not is_hermitian(A, 1e-10):
                raise ValueError(f"{name} must be Hermitian")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "P_hat", P_hat)

    @property
    def L(self):
        return self.P.shape[0]

    @property
    def bias_operator(self):
        return self.P_hat - self.P

    @cached_property
    def eigen(self):
        """Eigenvalues and eigenvectors of ``P_hat``, largest magnitude first."""
        return _eigen(self.P_hat)


def _eigen(A):
    w, U = np.linalg.eigh(_hermitize(A))
    order = np.argsort(-np.abs(w), kind="stable")
    return w[order], U[:, order]


def gwv_prototype(L, alpha=0.0):
    """Prototype of the real part of the generalized Wigner-Ville spectrum.

    Its alpha = 0 spreading function is ``cos(2 pi m k alpha / L)``.
    """
    L = check_length(L)
    if abs(alpha) > 0.5:
        raise ValueError(f"|alpha| must not exceed 1/2, got {alpha}")
    S0 = np.cos(2 * np.pi * lattice_product(L) * alpha / L).astype(complex)
    return _hermitize(kernel_from_spreading(AmbiguityField(S0, 0.0)))


def mvub_prototype(P, support, alpha=0.0):
    """Zero the spreading function of ``P`` outside ``support``.

    Among all prototypes agreeing with ``P`` on the support this one has the
    smallest HS norm, so it is the minimum-variance unbiased choice.
    """
    S = spreading_function(P, alpha)
    masked = AmbiguityField(S.values * support.mask, S.alpha)
    return _hermitize(kernel_from_spreading(masked))


def shifted_trace(P, R):
    """Field ``tr{P^{(n,l)} R}`` for all ``(n, l)`` in O(L^3)."""
    P = np.asarray(P)
    R = np.asarray(R)
    L = P.shape[0]
    a = np.arange(L)
    d = np.arange(L)
    rows = a[None, :]
    cols = (a[None, :] - d[:, None]) % L  # [d, a] -> a - d
    RT = R.T
    out = np.empty((L, L), dtype=complex)
    for n in range(L):
        Q = np.roll(P, (n, n), axis=(0, 1))
        M = Q * RT  # M[a, b] = p[a-n, b-n] r[b, a]
        g = M[rows, cols].sum(axis=1)  # g[d] = sum_a M[a, a-d]
        out[n] = np.fft.ifft(g) * L
    return out


def _shift_matrix(u):
    # G[n, n'] = conj(u[(n' - n) mod L]): rows are conj of u delayed by n
    L = u.size
    n = np.arange(L)
    return u.conj()[(n[None, :] - n[:, None]) % L]


def spectrogram(y, g):
    """``|<y, S^{(n,l)} g>|^2`` for all ``(n, l)``; ``y`` may carry leading batch axes."""
    y = np.asarray(y)
    G = _shift_matrix(np.asarray(g, dtype=complex))
    Z = np.fft.fft(y[..., None, :] * G, axis=-1)
    return np.abs(Z) ** 2


def estimate_spectrum(P_hat, y, tol=1e-13):
    """Estimate ``<P_hat^{(n,l)} y, y>`` as a weighted sum of spectrograms.

    ``P_hat`` must be Hermitian; eigenvalues below ``tol`` times the largest
    are dropped.  ``y`` may be a batch with shape ``(..., L)``; the result then
    has shape ``(..., L, L)``.
    """
    P_hat = np.asarray(P_hat)
    y = np.asarray(y)
    L = P_hat.shape[0]
    if y.shape[-1] != L:
        raise ValueError(f"signal length {y.shape[-1]} does not match prototype size {L}")
    if not is_hermitian(P_hat, 1e-10):
        raise ValueError("estimate_spectrum needs a Hermitian prototype")
    w, U = _eigen(P_hat)
    keep = np.abs(w) > tol * max(np.abs(w).max(), np.finfo(float).tiny)
    out = np.zeros(y.shape[:-1] + (L, L))
    for lam, u in zip(w[keep], U[:, keep].T):
        out += lam * spectrogram(y, u)
    return out


def estimate_spectrum_direct(P_hat, y):
    """Brute-force ``y^+ P_hat^{(n,l)} y`` over every cell, O(L^4)."""
    P_hat = np.asarray(P_hat)
    y = np.asarray(y)
    L = P_hat.shape[0]
    if y.shape != (L,):
        raise ValueError(f"signal length {y.shape} does not match prototype size {L}")
    out = np.empty((L, L), dtype=complex)
    for n in range(L):
        for l in range(L):
            out[n, l] = np.vdot(y, operator_tf_shift(P_hat, n, l) @ y)
    return out


def noise_bias_correct(field, P_hat, sigma_n2):
    """Subtract the constant noise bias ``sigma_n2 tr P_hat``."""
    values = np.asarray(getattr(field, "values", field))
    corrected = values - sigma_n2 * np.trace(P_hat).real
    if isinstance(field, TFField):
        return TFField(corrected, field.alpha)
    return corrected


def target_spectrum(P, model):
    """True time-varying spectrum ``tr{R P^{(n,l)}}``."""
    return shifted_trace(P, model.R).real


def expected_estimate(P_hat, model):
    return shifted_trace(P_hat, model.R).real + model.sigma_n2 * np.trace(P_hat).real


def bias_field(spec, model):
    """``B(n,l) = tr{P_tilde^{(n,l)} R} + sigma_n2 tr P_hat``."""
    B = shifted_trace(spec.bias_operator, model.R).real
    return B + model.sigma_n2 * np.trace(spec.P_hat).real


def _quartic_term(P, R):
    # tr{(P^{(n,l)} R)^2}, batched over l for each n
    L = P.shape[0]
    a = np.arange(L)
    phases = np.exp(2j * np.pi * np.outer(np.arange(L), a) / L)  # [l, a]
    out = np.empty((L, L))
    for n in range(L):
        Q = np.roll(P, (n, n), axis=(0, 1))
        Ql = phases[:, :, None] * Q[None] * phases.conj()[:, None, :]
        A = Ql @ R
        out[n] = np.einsum("lab,lba->l", A, A).real
    return out


def variance_field(P_hat, model):
    """Isserlis variance of the estimate at every cell.

    ``V = tr{(P^{(n,l)} R)^2} + 2 sigma_n2 tr{(P^{(n,l)})^2 R} + sigma_n2^2 ||P||^2``.
    """
    P_hat = np.asarray(P_hat)
    R = model.R
    s2 = model.sigma_n2
    V = _quartic_term(P_hat, R)
    if s2:
        V = V + 2 * s2 * shifted_trace(P_hat @ P_hat, R).real
        V = V + s2 ** 2 * np.linalg.norm(P_hat) ** 2
    return V


@dataclass
class ErrorReport:
    """Global bias/variance constants of one estimator on one model.

    ``B_tot2`` and ``V_tot`` are the closed forms; ``*_direct``,
    ``V_tot_integrated`` and ``V_tot_exact`` are the cross-checks (lattice sums
    of the pointwise fields, and the exact spreading-domain form of the
    variance integral).  ``mse_integrated`` is the plane integral of the
    squared error of the noise-corrected estimate.
    """

    B0: float
    B_tot2: float
    V0: float
    V_tot: float
    B_max_bound: float
    V_max_bound: float
    E_tot_bound: float
    B_tot2_direct: float
    V_tot_integrated: float
    V_tot_exact: float
    B_max: float
    V_max: float
    E_tot: float
    mse_integrated: float

    def to_dict(self):
        return {k: float(v) for k, v in asdict(self).items()}


def _variance_integral_exact(P_hat, model):
    # (1/L) sum_z tr{(P^z R)^2} = (1/L) sum_mu |S_P(mu)|^2 <R^{(mu)}, R>
    L = model.L
    SP2 = np.abs(spreading_function(P_hat).values) ** 2
    EA2 = np.abs(spreading_function(model.R).values) ** 2
    overlap = symplectic_dft(EA2, "inverse").values.real
    return float((SP2 * overlap).sum() / L)


def global_error_report(spec, model, mvub=None):
    """All global error constants for ``spec`` on ``model``.

    ``mvub`` is the reference prototype of the integrated-MSE bound; by
    default the target prototype masked to the model's declared support.
    """
    L = spec.L
    if model.L != L:
        raise ValueError("model and prototype grids differ")
    P_hat = spec.P_hat
    R = model.R
    s2 = model.sigma_n2
    trR = model.trace
    normR = np.linalg.norm(R)
    normP2 = np.linalg.norm(P_hat) ** 2
    trP = float(np.trace(P_hat).real)
    if mvub is None:
        mvub = mvub_prototype(spec.P, model.support, spec.alpha)

    B0 = s2 * trP
    S_tilde = spreading_function(spec.bias_operator).values
    EA = spreading_function(R).values
    B_tot2 = float((np.abs(S_tilde) ** 2 * np.abs(EA) ** 2).sum() / L)
    B = bias_field(spec, model)
    B_tot2_direct = float(((B - B0) ** 2).sum() / L)

    V0 = s2 ** 2 * normP2
    V_tot = normP2 * (np.trace(R @ R).real + 2 * s2 * trR)
    V = variance_field(P_hat, model)
    V_tot_integrated = float((V - V0).sum() / L)
    V_tot_exact = _variance_integral_exact(P_hat, model) + 2 * s2 * normP2 * trR

    norm_tilde = np.linalg.norm(spec.bias_operator)
    B_max_bound = norm_tilde * normR + s2 * abs(trP)
    V_max_bound = normP2 * (normR + s2) ** 2
    E_tot_bound = np.linalg.norm(P_hat - mvub) ** 2 * trR ** 2 + normP2 * (normR ** 2 + 2 * s2 * trR)

    return ErrorReport(
        B0=float(B0),
        B_tot2=B_tot2,
        V0=float(V0),
        V_tot=float(V_tot),
        B_max_bound=float(B_max_bound),
        V_max_bound=float(V_max_bound),
        E_tot_bound=float(E_tot_bound),
        B_tot2_direct=B_tot2_direct,
        V_tot_integrated=V_tot_integrated,
        V_tot_exact=V_tot_exact,
        B_max=float(np.abs(B).max()),
        V_max=float(V.max()),
        E_tot=B_tot2_direct + V_tot_integrated,
        mse_integrated=float((((B - B0) ** 2) + V).sum() / L),
    )
