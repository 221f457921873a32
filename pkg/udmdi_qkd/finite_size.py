"""
Finite-size key rate: privacy-amplification correction, parameter-estimation
confidence intervals and the worst-case channel they imply.
"""
import math
from typing import Optional

from scipy.special import erfcinv

from .channel import links_for
from .exceptions import DomainError, EstimationFailure
from .keyrate import key_rate_from_links
from .logging import build_log_extra, setup_logging
from .models import EstimatedChannel, FiniteSizeConfig, KeyRateResult, LinkParams, ProtocolConfig

logger = setup_logging()


def pe_quantile(eps_pe: float) -> float:
    """Two-sided normal quantile z with P(|Z| > z) = eps_PE, i.e. sqrt(2) erfcinv(eps_PE)."""
    if not 0 < eps_pe <= 1:
        raise DomainError(f"eps_PE must lie in (0, 1], got {eps_pe!r}")
    return math.sqrt(2) * float(erfcinv(eps_pe))


def quantile_for(fcfg: FiniteSizeConfig) -> float:
    return fcfg.z_quantile if fcfg.z_quantile is not None else pe_quantile(fcfg.eps_pe)


def delta_n(n: int, eps_smooth: float = 1e-10, eps_pa: float = 1e-10) -> float:
    """Privacy-amplification correction Delta(n) in bits per key signal."""
    if n < 1:
        raise DomainError(f"key length must be >= 1, got {n!r}")
    for name, eps in (("eps_smooth", eps_smooth), ("eps_PA", eps_pa)):
        if not 0 < eps < 1:
            raise DomainError(f"{name} must lie in (0, 1), got {eps!r}")
    return 7 * math.sqrt(math.log2(2 / eps_smooth) / n) + (2 / n) * math.log2(1 / eps_pa)


def confidence_bounds(
    m: int,
    modulation_variance: float,
    sigma2_hat: float,
    eps_pe: float = 1e-10,
    z: Optional[float] = None,
) -> tuple[float, float]:
    """
    Confidence half-widths (delta_t, delta_sigma2) for one link.

    The sum of squared sender symbols is replaced by its expectation m V_m.

    Args:
        m: Number of signals sacrificed for estimation.
        modulation_variance: V_m of the sender symbols.
        sigma2_hat: Estimated noise variance.
        eps_pe: Parameter-estimation failure probability, used when ``z`` is unset.
        z: Explicit quantile.
    """
    if m < 2:
        raise DomainError(f"estimation needs at least 2 signals, got m={m!r}")
    if modulation_variance <= 0:
        raise DomainError(f"modulation variance must be > 0, got {modulation_variance!r}")
    if sigma2_hat < 0:
        raise DomainError(f"noise variance estimate must be >= 0, got {sigma2_hat!r}")
    z = pe_quantile(eps_pe) if z is None else z
    delta_t = z * math.sqrt(sigma2_hat / (m * modulation_variance))
    delta_sigma2 = z * sigma2_hat * math.sqrt(2 / m)
    return delta_t, delta_sigma2


def estimated_channel(
    t_hat_a: float,
    sigma2_hat_a: float,
    t_hat_b: float,
    sigma2_hat_b: float,
    modulation_variance: float,
    fcfg: FiniteSizeConfig,
) -> EstimatedChannel:
    """Attach confidence half-widths to point estimates of both links."""
    m = fcfg.estimation_length
    z = quantile_for(fcfg)
    dt_a, ds_a = confidence_bounds(m, modulation_variance, sigma2_hat_a, z=z)
    dt_b, ds_b = confidence_bounds(m, modulation_variance, sigma2_hat_b, z=z)
    return EstimatedChannel(
        t_hat_a=t_hat_a,
        t_hat_b=t_hat_b,
        sigma2_hat_a=sigma2_hat_a,
        sigma2_hat_b=sigma2_hat_b,
        delta_t_a=dt_a,
        delta_t_b=dt_b,
        delta_sigma2_a=ds_a,
        delta_sigma2_b=ds_b,
    )


def model_estimate(links: LinkParams, modulation_variance: float, fcfg: FiniteSizeConfig) -> EstimatedChannel:
    """
    Estimates for a simulated run: t' = sqrt(eta) and sigma'^2 = 1 + eta eps at their true
    values, with only the confidence half-widths applied.
    """
    return estimated_channel(
        math.sqrt(links.eta_a_x),
        1 + links.eta_a_x * links.eps_a_x,
        math.sqrt(links.eta_b_x),
        1 + links.eta_b_x * links.eps_b_x,
        modulation_variance,
        fcfg,
    )


def _worst_link(name: str, t_hat: float, delta_t: float, sigma2_hat: float, delta_sigma2: float) -> tuple[float, float]:
    t_low = t_hat - delta_t
    if t_low <= 0:
        raise EstimationFailure(
            f"{name} link: lower transmission bound {t_low:.6g} <= 0, estimation cannot bound the channel"
        )
    eta = t_low * t_low
    if eta > 1:
        logger.warning(
            "worst-case transmittance above 1 clamped",
            extra=build_log_extra(module_name="finite_size", operation="worst_case_channel", link=name, eta=eta),
        )
        eta = 1.0
    eps = (sigma2_hat + delta_sigma2 - 1) / eta
    if eps < 0:
        logger.warning(
            "worst-case excess noise below 0 clamped",
            extra=build_log_extra(module_name="finite_size", operation="worst_case_channel", link=name, eps=eps),
        )
        eps = 0.0
    return eta, eps


def worst_case_channel(est: EstimatedChannel) -> LinkParams:
    """
    Lower transmission and higher noise at the edge of the confidence region.

    eta_w = (t_hat - delta_t)^2 and eps_w = (sigma2_hat + delta_sigma2 - 1) / eta_w per link;
    the p quadrature mirrors x.
    """
    eta_a, eps_a = _worst_link("alice", est.t_hat_a, est.delta_t_a, est.sigma2_hat_a, est.delta_sigma2_a)
    eta_b, eps_b = _worst_link("bob", est.t_hat_b, est.delta_t_b, est.sigma2_hat_b, est.delta_sigma2_b)
    return LinkParams.mirrored(eta_a, eps_a, eta_b, eps_b)


def finite_size_key_rate(
    cfg: ProtocolConfig,
    fcfg: FiniteSizeConfig,
    est: Optional[EstimatedChannel] = None,
    strict: bool = False,
) -> KeyRateResult:
    """
    Finite-size rate K_f = (n/N) max(0, beta I - chi_E - Delta(n)).

    I and chi_E are evaluated on the worst-case channel, re-reduced with the gain
    optimal for the worst-case eta_B. Without ``est`` the estimates come from the
    configuration's own links (simulation mode).
    """
    if est is None:
        est = model_estimate(links_for(cfg), cfg.modulation_variance, fcfg)
    worst = worst_case_channel(est)
    asymptotic = key_rate_from_links(worst, cfg.modulation_variance, cfg.beta, strict)
    correction = delta_n(fcfg.key_length, fcfg.eps_smooth, fcfg.eps_pa)
    fraction = fcfg.key_fraction
    signed = asymptotic.raw_key_rate - correction
    logger.debug(
        "finite-size key rate evaluated",
        extra=build_log_extra(
            module_name="finite_size",
            operation="finite_size_key_rate",
            block_length=fcfg.block_length,
            correction=correction,
            raw_key_rate=fraction * signed,
        ),
    )
    return asymptotic.model_copy(
        update={
            "key_rate": fraction * max(0.0, signed),
            "raw_key_rate": fraction * signed,
            "correction": correction,
            "key_fraction": fraction,
        }
    )
