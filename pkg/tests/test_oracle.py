import math

import numpy as np
import pytest

from udmdi_qkd.exceptions import DomainError
from udmdi_qkd.models import FiniteSizeConfig, LinkParams
from udmdi_qkd.oracle import (
    LinkSample,
    coverage_test,
    estimate_from_samples,
    ml_estimate,
    run_trials,
    sample_link,
    simulate_link_estimate,
    validate_estimators,
)


def test_sampling_is_deterministic():
    a = sample_link(1000, 100.0, 0.9, 1.002, seed=42)
    b = sample_link(1000, 100.0, 0.9, 1.002, seed=42)
    c = sample_link(1000, 100.0, 0.9, 1.002, seed=43)
    assert np.array_equal(a.x_values, b.x_values)
    assert np.array_equal(a.y_values, b.y_values)
    assert not np.array_equal(a.x_values, c.x_values)


def test_zero_transmission_decorrelates():
    m = 100_000
    sample = sample_link(m, 100.0, 0.0, 1.0, seed=1)
    corr = np.corrcoef(sample.x_values, sample.y_values)[0, 1]
    assert abs(corr) < 5 / math.sqrt(m)


def test_noiseless_sample_is_exactly_linear():
    sample = sample_link(500, 100.0, 0.9, 0.0, seed=5)
    assert np.array_equal(sample.y_values, 0.9 * sample.x_values)


def test_received_variance():
    sample = sample_link(10**6, 100.0, 0.9, 1.002, seed=9)
    assert np.var(sample.y_values) == pytest.approx(0.81 * 100 + 1.002, rel=0.01)


def test_exact_fit():
    t_hat, sigma2_hat = ml_estimate(LinkSample(np.array([1.0, -1.0]), np.array([2.0, -2.0])))
    assert t_hat == 2.0
    assert sigma2_hat == 0.0


def test_noiseless_estimates():
    t_hat, sigma2_hat = ml_estimate(sample_link(1000, 100.0, 0.9, 0.0, seed=2))
    assert t_hat == pytest.approx(0.9, rel=1e-12)
    assert sigma2_hat == pytest.approx(0.0, abs=1e-20)


def test_large_sample_estimate_is_accurate():
    m = 10**6
    t_hat, sigma2_hat = ml_estimate(sample_link(m, 100.0, 0.9, 1.002, seed=4))
    assert abs(t_hat - 0.9) < 5 * math.sqrt(1.002 / (m * 100.0))
    assert sigma2_hat == pytest.approx(1.002, rel=0.01)


def test_all_zero_symbols_are_rejected():
    with pytest.raises(DomainError):
        ml_estimate(LinkSample(np.zeros(10), np.ones(10)))


def test_sample_shape_is_validated():
    with pytest.raises(DomainError):
        LinkSample(np.ones(3), np.ones(4))
    with pytest.raises(DomainError):
        sample_link(1, 100.0, 0.9, 1.0, seed=0)


def test_unsquared_residuals_estimate_nothing():
    _, printed = ml_estimate(sample_link(10_000, 100.0, 0.9, 1.002, seed=6), residuals="printed")
    assert abs(printed) < 0.1


def test_streaming_estimate_matches_in_memory_estimate():
    sample = sample_link(5000, 100.0, 0.9, 1.002, seed=8)
    t_mem, s_mem = ml_estimate(sample)
    t_stream, s_stream = simulate_link_estimate(5000, 100.0, 0.9, 1.002, seed=8)
    assert t_stream == pytest.approx(t_mem, rel=1e-12)
    assert s_stream == pytest.approx(s_mem, rel=1e-8)


def test_streaming_chunks_do_not_bias_the_estimate():
    t_hat, sigma2_hat = simulate_link_estimate(200_000, 100.0, 0.9, 1.002, seed=3, chunk_size=30_000)
    assert abs(t_hat - 0.9) < 5 * math.sqrt(1.002 / (200_000 * 100.0))
    assert sigma2_hat == pytest.approx(1.002, rel=0.02)


def test_estimate_from_samples_bounds_both_links():
    links = LinkParams.mirrored(0.8, 0.002, 0.9, 0.002)
    fcfg = FiniteSizeConfig.from_fraction(200_000)
    est = estimate_from_samples(links, 100.0, fcfg, seed=12)
    assert est.t_hat_a == pytest.approx(math.sqrt(0.8), abs=2e-3)
    assert est.t_hat_b == pytest.approx(math.sqrt(0.9), abs=2e-3)
    assert est.delta_t_a > 0
    assert est == estimate_from_samples(links, 100.0, fcfg, seed=12)


def test_trials_do_not_depend_on_worker_count():
    serial = run_trials(600, 50, 100.0, 0.9, 1.002, seed=21, threads=1)
    pooled = run_trials(600, 50, 100.0, 0.9, 1.002, seed=21, threads=4)
    assert np.array_equal(serial.t_hat, pooled.t_hat)
    assert np.array_equal(serial.sigma2_hat, pooled.sigma2_hat)


def test_coverage_with_degenerate_interval():
    t_cov, s_cov = coverage_test(100, 100, 100.0, 0.9, 1.002, eps_pe=1.0, seed=1)
    assert t_cov == 0.0
    assert s_cov == 0.0


def test_coverage_needs_enough_trials():
    with pytest.raises(DomainError):
        coverage_test(50, 100, 100.0, 0.9, 1.002, eps_pe=0.05, seed=1)


def test_small_validation_run_passes():
    report = validate_estimators(400, 200, 100.0, 0.9, 1.002, eps_pe=0.05, seed=11)
    assert report.passed, [check.name for check in report.failing()]
    assert {check.name for check in report.checks} == {
        "t_mean",
        "t_variance",
        "chi2_mean",
        "chi2_variance",
        "t_coverage",
        "sigma2_coverage",
    }


def test_validation_catches_a_broken_estimator():
    report = validate_estimators(400, 200, 100.0, 0.9, 1.002, eps_pe=0.05, seed=11, residuals="printed")
    assert not report.passed
    assert "chi2_mean" in {check.name for check in report.failing()}


@pytest.mark.slow
def test_estimator_distributions_at_full_scale():
    report = validate_estimators(10_000, 10_000, 100.0, 0.9, 1.002, eps_pe=0.05, seed=2019, threads=4)
    checks = {check.name: check for check in report.checks}
    assert 0.94 <= checks["t_coverage"].observed <= 0.96
    assert checks["t_variance"].observed == pytest.approx(checks["t_variance"].expected, rel=0.10)
    assert checks["chi2_mean"].observed == pytest.approx(9999, rel=0.01)
    assert checks["chi2_variance"].observed == pytest.approx(2 * 9999, rel=0.10)
    assert report.passed
