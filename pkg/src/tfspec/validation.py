"""Monte Carlo and two-way numerical checks of the analytic error formulas."""
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _rng
from .core import operator_tf_shift, spreading_function
from .estimator import (
    _variance_integral_exact,
    estimate_spectrum,
    shifted_trace,
    target_spectrum,
    variance_field,
)
from .process import CorrelationModel, psd_sqrt

__all__ = [
    "MCReport",
    "IsserlisReport",
    "AppendixReport",
    "Z_LIMIT",
    "MAX_EXCEED_FRACTION",
    "worker_count",
    "run_mc",
    "isserlis_check",
    "appendix_identity_suite",
]

Z_LIMIT = 5.0
MAX_EXCEED_FRACTION = 1e-3
MIN_REPLICATES = 100
BATCH = 2048


def worker_count():
    """Worker cap from ``TFSPEC_THREADS`` (default: CPU count)."""
    raw = os.environ.get("TFSPEC_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = os.cpu_count() or 1
    return max(1, n)


def _zscore(num, se, scale):
    # exact agreement with zero spread counts as z = 0
    num = np.asarray(num, dtype=float)
    se = np.asarray(se, dtype=float)
    tiny = 1e-12 * max(scale, np.finfo(float).tiny)
    z = np.zeros_like(num)
    ok = se > 0
    z[ok] = num[ok] / se[ok]
    bad = ~ok & (np.abs(num) > tiny)
    z[bad] = np.inf * np.sign(num[bad])
    return z


def _pooled(resid, se, cov, n):
    ok = se > 0
    if not ok.any():
        return 0.0
    w = np.where(ok, 1.0 / np.where(ok, se, 1.0), 0.0)
    var = float(w @ cov @ w) / n
    num = float(w @ resid)
    if var <= 0:
        return 0.0 if abs(num) < 1e-12 else float(np.inf)
    return num / np.sqrt(var)


@dataclass
class MCReport:
    replicates: int
    seed: int
    empirical_mean_field: np.ndarray
    empirical_var_field: np.ndarray
    analytic_mean_field: np.ndarray
    analytic_bias_field: np.ndarray
    analytic_var_field: np.ndarray
    z_mean: np.ndarray
    z_var: np.ndarray
    pooled_z_mean: float
    pooled_z_var: float
    exceed_fraction: float
    passed: bool
    wall_time: float = field(default=0.0, compare=False)

    @property
    def z_scores(self):
        return np.stack([self.z_mean, self.z_var])

    def summary(self):
        return {
            "replicates": self.replicates,
            "seed": self.seed,
            "max_abs_z_mean": float(np.abs(self.z_mean).max()),
            "max_abs_z_var": float(np.abs(self.z_var).max()),
            "pooled_z_mean": float(self.pooled_z_mean),
            "pooled_z_var": float(self.pooled_z_var),
            "exceed_fraction": float(self.exceed_fraction),
            "max_abs_analytic_bias": float(np.abs(self.analytic_bias_field).max()),
            "passed": bool(self.passed),
        }


def _batches(replicates, batch):
    return [(s, min(s + batch, replicates)) for s in range(0, replicates, batch)]


def run_mc(model, spec, replicates, seed, *, analytic_mean=None, analytic_var=None,
           workers=None, batch=BATCH):
    """Confront the analytic mean and variance fields with simulation.

    Each replicate draws ``x ~ CN(0, R)`` and white noise from the
    replicate-indexed streams of ``seed``, forms the noise-corrected estimate
    with ``spec.P_hat`` and accumulates per-cell moments.  Cells are scored by
    z = (empirical - analytic) / standard error, the variance's standard error
    coming from empirical fourth moments.  The run passes when at most
    ``MAX_EXCEED_FRACTION`` of the cells exceed ``|z| = 5`` and both pooled
    (all-cell) z-scores stay within 5.

    ``analytic_mean`` / ``analytic_var`` override the formula fields (used to
    check the harness's sensitivity).
    """
    replicates = int(replicates)
    if replicates < MIN_REPLICATES:
        raise ValueError(f"replicates must be at least {MIN_REPLICATES}, got {replicates}")
    t0 = time.perf_counter()
    L = model.L
    P_hat = spec.P_hat
    s2 = model.sigma_n2
    B0 = s2 * float(np.trace(P_hat).real)
    target = target_spectrum(spec.P, model)
    bias = shifted_trace(spec.bias_operator, model.R).real  # B - B0
    mu = target + bias if analytic_mean is None else np.asarray(analytic_mean, float)
    V = variance_field(P_hat, model) if analytic_var is None else np.asarray(analytic_var, float)
    root = psd_sqrt(model.R)
    ncell = L * L
    mu_flat = mu.reshape(-1)

    def work(span):
        r0, r1 = span
        n = r1 - r0
        W = _rng.circular_normals(seed, "signal", r0 * L, (n, L))
        Y = W @ root.T
        if s2:
            Y = Y + np.sqrt(s2) * _rng.circular_normals(seed, "noise", r0 * L, (n, L))
        d = estimate_spectrum(P_hat, Y).reshape(n, ncell) - B0 - mu_flat
        e = d * d
        return (d.sum(0), e.sum(0), (e * d).sum(0), (e * e).sum(0), d.T @ d, e.T @ e)

    spans = _batches(replicates, batch)
    nworkers = worker_count() if workers is None else max(1, int(workers))
    if nworkers > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=nworkers) as pool:
            parts = list(pool.map(work, spans))
    else:
        parts = [work(s) for s in spans]
    acc = [p.copy() for p in parts[0]]
    for part in parts[1:]:  # fixed order keeps the sums bit-stable
        for a, p in zip(acc, part):
            a += p
    S1, S2, S3, S4, C1, C2 = acc

    N = replicates
    delta = S1 / N
    m2 = S2 / N - delta ** 2
    var = m2 * N / (N - 1)
    m4 = S4 / N - 4 * delta * S3 / N + 6 * delta ** 2 * S2 / N - 3 * delta ** 4
    se_mean = np.sqrt(np.clip(var, 0, None) / N)
    se_var = np.sqrt(np.clip(m4 - m2 ** 2, 0, None) / N)
    scale = float(np.abs(mu).max() + np.abs(V).max())
    V_flat = V.reshape(-1)
    z_mean = _zscore(delta, se_mean, scale)
    z_var = _zscore(var - V_flat, se_var, scale)

    cov_d = C1 / N - np.outer(delta, delta)
    e_mean = S2 / N
    cov_e = C2 / N - np.outer(e_mean, e_mean)
    pz_mean = _pooled(delta, se_mean, cov_d, N)
    pz_var = _pooled(e_mean - V_flat, se_var, cov_e, N)

    z_all = np.concatenate([z_mean, z_var])
    exceed = float(np.mean(np.abs(z_all) > Z_LIMIT))
    passed = (exceed <= MAX_EXCEED_FRACTION and abs(pz_mean) <= Z_LIMIT
              and abs(pz_var) <= Z_LIMIT)
    shape = (L, L)
    return MCReport(
        replicates=N,
        seed=seed,
        empirical_mean_field=(mu_flat + delta).reshape(shape),
        empirical_var_field=var.reshape(shape),
        analytic_mean_field=mu,
        analytic_bias_field=bias,
        analytic_var_field=V,
        z_mean=z_mean.reshape(shape),
        z_var=z_var.reshape(shape),
        pooled_z_mean=float(pz_mean),
        pooled_z_var=float(pz_var),
        exceed_fraction=exceed,
        passed=bool(passed),
        wall_time=time.perf_counter() - t0,
    )


@dataclass
class IsserlisReport:
    replicates: int
    seed: int
    empirical: np.ndarray  # E{x_a x_b* x_c x_d*}
    theory: np.ndarray
    z: np.ndarray
    pseudo_cov_z: np.ndarray
    exceed_fraction: float
    passed: bool

    def summary(self):
        return {
            "replicates": self.replicates,
            "seed": self.seed,
            "max_abs_z": float(np.abs(self.z).max()),
            "max_abs_pseudo_cov_z": float(np.abs(self.pseudo_cov_z).max()),
            "exceed_fraction": float(self.exceed_fraction),
            "passed": bool(self.passed),
        }


def isserlis_check(model, replicates, seed, *, batch=BATCH):
    """Empirical fourth moments against ``r_ab r_cd + r_ad r_cb``.

    ``model`` is a :class:`CorrelationModel` or a bare correlation matrix
    (any size up to 8, so tiny toy cases need not live on a valid grid).

    Real and imaginary parts of every tensor entry, and of the
    pseudo-covariance ``E{x x^T}`` (zero for circular draws), are scored
    with the same |z| > 5 rule as :func:`run_mc`.
    """
    R = np.asarray(getattr(model, "R", model), dtype=complex)
    L = R.shape[0]
    if L > 8:
        raise ValueError(f"fourth-moment tensor limited to L <= 8, got L={L}")
    replicates = int(replicates)
    if replicates < 10_000:
        raise ValueError(f"isserlis_check needs at least 10000 replicates, got {replicates}")
    root = psd_sqrt(R)
    theory = np.einsum("ab,cd->abcd", R, R) + np.einsum("ad,cb->abcd", R, R)

    shape4 = (L,) * 4
    sums = [np.zeros(shape4, complex), np.zeros(shape4), np.zeros(shape4),
            np.zeros((L, L), complex), np.zeros((L, L)), np.zeros((L, L))]
    for r0, r1 in _batches(replicates, batch):
        X = _rng.circular_normals(seed, "signal", r0 * L, (r1 - r0, L)) @ root.T
        Xc = X.conj()
        M = np.einsum("ra,rb,rc,rd->rabcd", X, Xc, X, Xc)
        Q = X[:, :, None] * X[:, None, :]
        for acc, val in zip(sums, (M.sum(0), (M.real ** 2).sum(0), (M.imag ** 2).sum(0),
                                   Q.sum(0), (Q.real ** 2).sum(0), (Q.imag ** 2).sum(0))):
            acc += val
    N = replicates

    def z_parts(s, sre2, sim2, expect):
        mean = s / N
        var_re = np.clip(sre2 / N - mean.real ** 2, 0, None) * N / (N - 1)
        var_im = np.clip(sim2 / N - mean.imag ** 2, 0, None) * N / (N - 1)
        scale = float(np.abs(expect).max()) if np.size(expect) else 0.0
        z_re = _zscore(mean.real - expect.real, np.sqrt(var_re / N), scale)
        z_im = _zscore(mean.imag - expect.imag, np.sqrt(var_im / N), scale)
        return mean, np.stack([z_re, z_im])

    empirical, z = z_parts(sums[0], sums[1], sums[2], theory)
    _, zq = z_parts(sums[3], sums[4], sums[5], np.zeros((L, L), complex))
    z_all = np.concatenate([z.ravel(), zq.ravel()])
    exceed = float(np.mean(np.abs(z_all) > Z_LIMIT))
    return IsserlisReport(N, seed, empirical, theory, z, zq, exceed,
                          bool(exceed <= MAX_EXCEED_FRACTION))


@dataclass
class AppendixReport:
    trials: int
    seed: int
    L: int
    discrepancies: dict
    vtot_closed_form_gap: float
    tolerance: float = 1e-8

    @property
    def max_discrepancy(self):
        return max(self.discrepancies.values())

    @property
    def passed(self):
        return self.max_discrepancy <= self.tolerance

    def summary(self):
        return {
            "trials": self.trials,
            "seed": self.seed,
            "L": self.L,
            "discrepancies": {k: float(v) for k, v in self.discrepancies.items()},
            "max_discrepancy": float(self.max_discrepancy),
            "vtot_closed_form_gap": float(self.vtot_closed_form_gap),
            "passed": bool(self.passed),
        }


def _rel(a, b):
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0 else float(abs(a - b) / scale)


def _random_hermitian(rng, L):
    A = rng.standard_normal((L, L)) + 1j * rng.standard_normal((L, L))
    return 0.5 * (A + A.conj().T)


def _random_psd(rng, L):
    A = rng.standard_normal((L, L)) + 1j * rng.standard_normal((L, L))
    return A @ A.conj().T / L


def appendix_identity_suite(trials, seed, L=8, bias_scale=1.0):
    """Two-way numerical checks of the plane-integral identities.

    Per trial (random Hermitian prototypes, random PSD correlation, random
    noise level):

    * ``b_tot``: lattice sum of squared TF-dependent bias vs the
      spreading-domain form ``(1/L) sum |S_Ptilde|^2 |EA|^2``;
    * ``hs_product``: ``(1/L) sum_z ||P^z R||^2`` vs ``||P||^2 ||R||^2``;
    * ``v_tot``: lattice sum of ``V - V0`` vs its exact spreading-domain form;
    * ``shift_integral``: ``(1/L) sum_z P^z`` vs ``tr(P) I``.

    The relative gap between the closed-form total variance
    ``||P||^2 (tr R^2 + 2 s2 tr R)`` and the integrated variance is reported
    separately; it is an upper bound, not an identity.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rng = _rng.generator(seed, "trial")
    worst = {"b_tot": 0.0, "hs_product": 0.0, "v_tot": 0.0, "shift_integral": 0.0}
    gap = 0.0
    I = np.eye(L)
    for _ in range(trials):
        P_tilde = bias_scale * _random_hermitian(rng, L)
        P_hat = _random_hermitian(rng, L)
        R = _random_psd(rng, L)
        s2 = float(rng.uniform(0.0, 1.0))
        model = CorrelationModel(R, s2)

        S_t = np.abs(spreading_function(P_tilde).values) ** 2
        EA = np.abs(spreading_function(R).values) ** 2
        b_gsf = float((S_t * EA).sum() / L)
        b_direct = float((shifted_trace(P_tilde, R).real ** 2).sum() / L)
        worst["b_tot"] = max(worst["b_tot"], _rel(b_gsf, b_direct))

        hs_sum = 0.0
        shift_sum = np.zeros((L, L), complex)
        for n in range(L):
            for l in range(L):
                Pz = operator_tf_shift(P_hat, n, l)
                hs_sum += np.linalg.norm(Pz @ R) ** 2
                shift_sum += Pz
        normP2 = np.linalg.norm(P_hat) ** 2
        worst["hs_product"] = max(worst["hs_product"],
                                  _rel(hs_sum / L, normP2 * np.linalg.norm(R) ** 2))
        trP = np.trace(P_hat)
        err = np.abs(shift_sum / L - trP * I).max() / max(abs(trP), np.abs(P_hat).max())
        worst["shift_integral"] = max(worst["shift_integral"], float(err))

        V = variance_field(P_hat, model)
        V0 = s2 ** 2 * normP2
        v_int = float((V - V0).sum() / L)
        v_exact = _variance_integral_exact(P_hat, model) + 2 * s2 * normP2 * model.trace
        worst["v_tot"] = max(worst["v_tot"], _rel(v_int, v_exact))
        v_closed = normP2 * (np.trace(R @ R).real + 2 * s2 * model.trace)
        gap = max(gap, _rel(v_int, v_closed))
    return AppendixReport(int(trials), seed, L, worst, gap)
