"""
Monte Carlo oracle for the parameter-estimation model.

Each link is sampled as the normal linear model y = t x + z with
x ~ N(0, V_m) and z ~ N(0, sigma^2). Trial ``i`` draws from its own
``SeedSequence(entropy=seed, spawn_key=(i,))`` stream through numpy's
PCG64 generator and ziggurat normal sampler, so results do not depend on
how trials are spread across workers.
"""
import contextvars
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal, Optional, Union

import numpy as np

from .exceptions import DomainError
from .finite_size import confidence_bounds, estimated_channel, pe_quantile
from .logging import build_log_extra, ensure_run_id, setup_logging
from .models import EstimatedChannel, FiniteSizeConfig, LinkParams, StatisticCheck, ValidationReport
from .utils import chunked, derive_seed

logger = setup_logging()

Residuals = Literal["squared", "printed"]
SeedLike = Union[int, np.random.SeedSequence]

_TRIALS_PER_TASK = 250
_STREAM_CHUNK = 1 << 20

# Allowed deviation of coverage fractions beyond the binomial noise
_T_COVERAGE_SLACK = 0.01
_SIGMA2_COVERAGE_SLACK = 0.02
_VARIANCE_REL_TOL = 0.10
_CHI2_MEAN_REL_TOL = 0.01


@dataclass(frozen=True)
class LinkSample:
    x_values: np.ndarray
    y_values: np.ndarray

    def __post_init__(self) -> None:
        x = np.asarray(self.x_values, dtype=float)
        y = np.asarray(self.y_values, dtype=float)
        if x.shape != y.shape or x.ndim != 1:
            raise DomainError("x and y samples must be 1-D sequences of equal length")
        if x.size < 2:
            raise DomainError(f"a link sample needs at least 2 values, got {x.size}")
        object.__setattr__(self, "x_values", x)
        object.__setattr__(self, "y_values", y)

    @property
    def size(self) -> int:
        return int(self.x_values.size)


@dataclass(frozen=True)
class TrialEstimates:
    t_hat: np.ndarray
    sigma2_hat: np.ndarray


def _check_model(m: int, modulation_variance: float, sigma2_true: float) -> None:
    if m < 2:
        raise DomainError(f"sample size must be >= 2, got {m!r}")
    if modulation_variance <= 0:
        raise DomainError(f"modulation variance must be > 0, got {modulation_variance!r}")
    if sigma2_true < 0:
        raise DomainError(f"noise variance must be >= 0, got {sigma2_true!r}")


def sample_link(
    m: int,
    modulation_variance: float,
    t_true: float,
    sigma2_true: float,
    seed: SeedLike,
) -> LinkSample:
    """Draw ``m`` pairs (x_i, y_i = t x_i + z_i); deterministic for a fixed seed."""
    _check_model(m, modulation_variance, sigma2_true)
    rng = np.random.default_rng(seed)
    x = rng.normal(0.0, math.sqrt(modulation_variance), m)
    z = rng.normal(0.0, math.sqrt(sigma2_true), m)
    return LinkSample(x_values=x, y_values=t_true * x + z)


def ml_estimate(sample: LinkSample, residuals: Residuals = "squared") -> tuple[float, float]:
    """
    Maximum-likelihood (t_hat, sigma2_hat) with the 1/m variance normaliser.

    ``residuals="printed"`` averages the unsquared residuals instead; it estimates
    nothing and exists as a negative control for the validation report.
    """
    x, y = sample.x_values, sample.y_values
    sxx = float(np.dot(x, x))
    if sxx <= 0:
        raise DomainError("sender symbols are all zero; transmission is not identifiable")
    t_hat = float(np.dot(x, y)) / sxx
    residual = y - t_hat * x
    if residuals == "squared":
        sigma2_hat = float(np.dot(residual, residual)) / sample.size
    elif residuals == "printed":
        sigma2_hat = float(np.sum(residual)) / sample.size
    else:
        raise ValueError(f"unknown residual mode {residuals!r}")
    return t_hat, sigma2_hat


def simulate_link_estimate(
    m: int,
    modulation_variance: float,
    t_true: float,
    sigma2_true: float,
    seed: SeedLike,
    chunk_size: int = _STREAM_CHUNK,
) -> tuple[float, float]:
    """
    ML estimates for a sample too large to hold in memory.

    Accumulates sum x^2, sum x y and sum y^2 over chunks; the residual sum of squares
    is sum y^2 - t_hat sum x y.
    """
    _check_model(m, modulation_variance, sigma2_true)
    rng = np.random.default_rng(seed)
    sx = math.sqrt(modulation_variance)
    sz = math.sqrt(sigma2_true)
    sxx = sxy = syy = 0.0
    for block in chunked(m, chunk_size):
        x = rng.normal(0.0, sx, len(block))
        y = t_true * x + rng.normal(0.0, sz, len(block))
        sxx += float(np.dot(x, x))
        sxy += float(np.dot(x, y))
        syy += float(np.dot(y, y))
    if sxx <= 0:
        raise DomainError("sender symbols are all zero; transmission is not identifiable")
    t_hat = sxy / sxx
    return t_hat, max(syy - t_hat * sxy, 0.0) / m


def estimate_from_samples(
    links: LinkParams,
    modulation_variance: float,
    fcfg: FiniteSizeConfig,
    seed: int,
) -> EstimatedChannel:
    """
    Simulate the estimation phase of a protocol run on both links and bound the channel.

    Each link sacrifices ``fcfg.estimation_length`` signals drawn from the true channel
    (t = sqrt(eta), sigma^2 = 1 + eta eps).
    """
    m = fcfg.estimation_length
    estimates = []
    for index, (eta, eps) in enumerate(((links.eta_a_x, links.eps_a_x), (links.eta_b_x, links.eps_b_x))):
        estimates.append(
            simulate_link_estimate(m, modulation_variance, math.sqrt(eta), 1 + eta * eps, derive_seed(seed, index))
        )
    (t_a, s_a), (t_b, s_b) = estimates
    logger.info(
        "estimation phase simulated",
        extra=build_log_extra(
            module_name="oracle",
            operation="estimate_from_samples",
            block_length=fcfg.block_length,
            t_hat_a=t_a,
            t_hat_b=t_b,
            sigma2_hat_a=s_a,
            sigma2_hat_b=s_b,
        ),
    )
    return estimated_channel(t_a, s_a, t_b, s_b, modulation_variance, fcfg)


def _run_block(
    indices: range,
    m: int,
    modulation_variance: float,
    t_true: float,
    sigma2_true: float,
    seed: int,
    residuals: Residuals,
) -> list[tuple[float, float]]:
    out = []
    for trial in indices:
        sample = sample_link(m, modulation_variance, t_true, sigma2_true, derive_seed(seed, trial))
        out.append(ml_estimate(sample, residuals))
    logger.debug(
        "trial block finished",
        extra=build_log_extra(module_name="oracle", operation="run_trials", trial=indices.stop - 1),
    )
    return out


def run_trials(
    trials: int,
    m: int,
    modulation_variance: float,
    t_true: float,
    sigma2_true: float,
    seed: int,
    threads: int = 1,
    residuals: Residuals = "squared",
) -> TrialEstimates:
    """Estimates for ``trials`` independent samples, in trial order."""
    if trials < 1:
        raise DomainError(f"trial count must be >= 1, got {trials!r}")
    _check_model(m, modulation_variance, sigma2_true)
    blocks = chunked(trials, _TRIALS_PER_TASK)
    args = (m, modulation_variance, t_true, sigma2_true, seed, residuals)

    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            futures = [
                executor.submit(contextvars.copy_context().run, _run_block, block, *args) for block in blocks
            ]
            results = [fut.result() for fut in futures]
    else:
        results = [_run_block(block, *args) for block in blocks]

    pairs = np.array([pair for block in results for pair in block], dtype=float)
    return TrialEstimates(t_hat=pairs[:, 0], sigma2_hat=pairs[:, 1])


def _coverage(
    estimates: TrialEstimates,
    m: int,
    modulation_variance: float,
    t_true: float,
    sigma2_true: float,
    z: float,
) -> tuple[float, float]:
    t_hits = s_hits = 0
    for t_hat, sigma2_hat in zip(estimates.t_hat, estimates.sigma2_hat):
        delta_t, delta_sigma2 = confidence_bounds(m, modulation_variance, max(float(sigma2_hat), 0.0), z=z)
        t_hits += abs(t_hat - t_true) <= delta_t
        s_hits += abs(sigma2_hat - sigma2_true) <= delta_sigma2
    n = len(estimates.t_hat)
    return t_hits / n, s_hits / n


def coverage_test(
    trials: int,
    m: int,
    modulation_variance: float,
    t_true: float,
    sigma2_true: float,
    eps_pe: float,
    seed: int,
    threads: int = 1,
) -> tuple[float, float]:
    """Empirical coverage of the t and sigma^2 confidence intervals over ``trials`` runs."""
    if trials < 100:
        raise DomainError(f"coverage needs at least 100 trials, got {trials!r}")
    estimates = run_trials(trials, m, modulation_variance, t_true, sigma2_true, seed, threads)
    return _coverage(estimates, m, modulation_variance, t_true, sigma2_true, pe_quantile(eps_pe))


def validate_estimators(
    trials: int,
    m: int,
    modulation_variance: float,
    t_true: float,
    sigma2_true: float,
    eps_pe: float,
    seed: int,
    threads: int = 1,
    tolerance_sigmas: float = 4.0,
    residuals: Residuals = "squared",
) -> ValidationReport:
    """
    Compare the sampling distributions of the estimators with their theoretical laws.

    Checks: unbiasedness and variance of t_hat (sigma^2 / (m V_m)), mean and variance
    of m sigma2_hat / sigma^2 against chi^2(m - 1), and both interval coverages
    against 1 - eps_PE. Each tolerance is the larger of a fixed allowance and
    ``tolerance_sigmas`` standard errors at this trial count.
    """
    if trials < 2:
        raise DomainError(f"validation needs at least 2 trials, got {trials!r}")
    if sigma2_true <= 0:
        raise DomainError(f"noise variance must be > 0 for validation, got {sigma2_true!r}")
    ensure_run_id()
    logger.info(
        "estimator validation started",
        extra=build_log_extra(
            module_name="oracle",
            operation="validate_estimators",
            trials=trials,
            samples=m,
            seed=seed,
            residuals=residuals,
        ),
    )
    estimates = run_trials(trials, m, modulation_variance, t_true, sigma2_true, seed, threads, residuals)
    k = tolerance_sigmas
    var_rel_se = math.sqrt(2 / (trials - 1))

    t_hat = estimates.t_hat
    t_var_theory = sigma2_true / (m * modulation_variance)
    t_se = float(np.std(t_hat, ddof=1)) / math.sqrt(trials)

    chi2 = m * estimates.sigma2_hat / sigma2_true
    dof = m - 1
    chi2_mean_se = math.sqrt(2 * dof / trials)

    nominal = 1 - eps_pe
    binomial_se = math.sqrt(nominal * (1 - nominal) / trials)
    t_cov, s_cov = _coverage(estimates, m, modulation_variance, t_true, sigma2_true, pe_quantile(eps_pe))

    checks = [
        StatisticCheck(name="t_mean", observed=float(np.mean(t_hat)), expected=t_true, tolerance=k * t_se),
        StatisticCheck(
            name="t_variance",
            observed=float(np.var(t_hat, ddof=1)),
            expected=t_var_theory,
            tolerance=max(_VARIANCE_REL_TOL, k * var_rel_se) * t_var_theory,
        ),
        StatisticCheck(
            name="chi2_mean",
            observed=float(np.mean(chi2)),
            expected=dof,
            tolerance=max(_CHI2_MEAN_REL_TOL * dof, k * chi2_mean_se),
        ),
        StatisticCheck(
            name="chi2_variance",
            observed=float(np.var(chi2, ddof=1)),
            expected=2 * dof,
            tolerance=max(_VARIANCE_REL_TOL, k * var_rel_se) * 2 * dof,
        ),
        StatisticCheck(
            name="t_coverage",
            observed=t_cov,
            expected=nominal,
            tolerance=max(_T_COVERAGE_SLACK, k * binomial_se),
        ),
        StatisticCheck(
            name="sigma2_coverage",
            observed=s_cov,
            expected=nominal,
            tolerance=max(_SIGMA2_COVERAGE_SLACK, k * binomial_se),
        ),
    ]
    report = ValidationReport(trials=trials, samples=m, seed=seed, checks=checks)
    for check in report.failing():
        logger.warning(
            "estimator check failed",
            extra=build_log_extra(
                module_name="oracle",
                operation="validate_estimators",
                statistic=check.name,
                observed=check.observed,
                expected=check.expected,
                tolerance=check.tolerance,
            ),
        )
    return report
