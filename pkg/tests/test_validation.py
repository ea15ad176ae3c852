import numpy as np
import pytest

from tfspec.estimator import PrototypeSpec, _variance_integral_exact, gwv_prototype, mvub_prototype, variance_field
from tfspec.process import CorrelationModel, correlation_from_system, synthesize_underspread_system
from tfspec.validation import appendix_identity_suite, isserlis_check, run_mc


def _mvub_case(L, tau, nu, seed, s2):
    m = correlation_from_system(synthesize_underspread_system(L, tau, nu, seed), s2)
    P = gwv_prototype(L)
    return m, PrototypeSpec(P, mvub_prototype(P, m.support))


@pytest.fixture(scope="module")
def l4_case():
    return _mvub_case(4, 0, 1, 3, 0.1)


def test_zero_model_trivially_passes():
    L = 4
    m = CorrelationModel(np.zeros((L, L)))
    P = gwv_prototype(L)
    r = run_mc(m, PrototypeSpec(P, P), 200, seed=1)
    assert np.array_equal(r.empirical_mean_field, np.zeros((L, L)))
    assert np.array_equal(r.empirical_var_field, np.zeros((L, L)))
    assert r.passed and r.exceed_fraction == 0


def test_l4_mvub_passes_with_zero_bias(l4_case):
    m, spec = l4_case
    r = run_mc(m, spec, 100_000, seed=11)
    assert r.passed, r.summary()
    assert np.abs(r.analytic_bias_field).max() <= 1e-10
    assert r.z_scores.shape == (2, 4, 4)


def test_variance_perturbation_fails(l4_case):
    m, spec = l4_case
    V = variance_field(spec.P_hat, m)
    r = run_mc(m, spec, 100_000, seed=11, analytic_var=2 * V)
    assert not r.passed
    assert r.exceed_fraction > 0.1


def test_mean_shift_of_three_standard_errors_fails():
    # each cell shifted by 3 of its own standard errors; the pooled statistic
    # aggregates the shift across cells and crosses the 5-sigma line
    m, spec = _mvub_case(8, 1, 1, 1, 0.1)
    base = run_mc(m, spec, 100_000, seed=1)
    assert base.passed
    se = np.sqrt(base.empirical_var_field / base.replicates)
    r = run_mc(m, spec, 100_000, seed=1, analytic_mean=base.analytic_mean_field + 3 * se)
    assert not r.passed
    assert abs(r.pooled_z_mean) > 5


def test_replicate_minimum(l4_case):
    m, spec = l4_case
    with pytest.raises(ValueError, match="at least 100"):
        run_mc(m, spec, 99, seed=1)


def test_bit_identical_across_workers(l4_case, monkeypatch):
    m, spec = l4_case
    a = run_mc(m, spec, 5000, seed=4, workers=1, batch=512)
    b = run_mc(m, spec, 5000, seed=4, workers=4, batch=512)
    monkeypatch.setenv("TFSPEC_THREADS", "3")
    c = run_mc(m, spec, 5000, seed=4, batch=512)
    for other in (b, c):
        for name in ("empirical_mean_field", "empirical_var_field", "z_mean", "z_var"):
            assert np.array_equal(getattr(a, name), getattr(other, name))
        assert a.summary() == other.summary()


def test_seed_changes_draws(l4_case):
    m, spec = l4_case
    a = run_mc(m, spec, 1000, seed=1)
    b = run_mc(m, spec, 1000, seed=2)
    assert not np.array_equal(a.empirical_mean_field, b.empirical_mean_field)


# Isserlis -----------------------------------------------------------------------

def test_isserlis_white_two_dim():
    r = isserlis_check(np.eye(2), 40_000, seed=3)
    assert r.passed
    assert r.theory[0, 0, 1, 1] == 1 and r.theory[0, 0, 0, 0] == 2
    se = 1 / np.sqrt(40_000)
    assert abs(r.empirical[0, 0, 1, 1].real - 1) < 5 * se
    assert abs(r.empirical[0, 0, 0, 0].real - 2) < 5 * np.sqrt(20) * se  # Var|x|^4 = 24 - 4


def test_isserlis_zero():
    r = isserlis_check(np.zeros((4, 4)), 10_000, seed=1)
    assert r.passed and np.array_equal(r.empirical, np.zeros((4,) * 4))


def test_isserlis_nondiagonal_model():
    m = correlation_from_system(synthesize_underspread_system(6, 1, 1, 2))
    r = isserlis_check(m, 20_000, seed=5)
    assert r.passed, r.summary()
    assert np.abs(r.pseudo_cov_z).max() < 5


def test_isserlis_preconditions():
    with pytest.raises(ValueError, match="L <= 8"):
        isserlis_check(np.eye(10), 10_000, 1)
    with pytest.raises(ValueError, match="10000"):
        isserlis_check(np.eye(4), 500, 1)


# appendix identities ----------------------------------------------------------------

def test_appendix_zero_bias_trial():
    r = appendix_identity_suite(1, seed=1, bias_scale=0.0)
    assert r.discrepancies["b_tot"] == 0.0
    assert r.passed


def test_appendix_twenty_trials():
    r = appendix_identity_suite(20, seed=2, L=8)
    assert r.passed, r.summary()
    assert r.max_discrepancy <= 1e-8
    # the closed-form total variance is only an upper bound
    assert r.vtot_closed_form_gap > 1e-3


def test_appendix_identity_anchor():
    L = 8
    m = CorrelationModel(np.eye(L, dtype=complex))
    assert _variance_integral_exact(np.eye(L), m) == pytest.approx(L ** 2)


def test_appendix_rejects_zero_trials():
    with pytest.raises(ValueError):
        appendix_identity_suite(0, seed=1)
