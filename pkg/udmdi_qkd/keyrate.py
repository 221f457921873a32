"""
Asymptotic key rates: the unidimensional (UD) protocol, the symmetric
Gaussian-modulation baseline, and the repeaterless PLOB bound.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .channel import equivalent_channel, fiber_transmittance, links_for, require_physical
from .exceptions import DomainError, NumericalDomainError
from .gaussian import (
    condition_on_homodyne_x,
    entropy_g,
    gm_shared_covariance,
    shared_covariance,
    symplectic_eigenvalues,
)
from .logging import build_log_extra, setup_logging
from .models import (
    EquivalentChannel,
    KeyRateResult,
    LinkParams,
    ModulationOptimum,
    ProtocolConfig,
    RateProtocol,
)

logger = setup_logging()

# Coarse log-spaced grid used to bracket the modulation optimum
_MODULATION_GRID_POINTS = 41
_MAX_REFINEMENTS = 4


@dataclass(frozen=True)
class HolevoTerms:
    lambda1: float
    lambda2: float
    lambda3: float
    entropy_joint: float
    entropy_conditional: float

    @property
    def holevo(self) -> float:
        return self.entropy_joint - self.entropy_conditional


def mutual_information_ud(v: float, t_x: float, eps_prime_x: float) -> float:
    """
    Alice-Bob mutual information (bits) for x-only modulation, closed form.

    I = 1/2 log2(V / (V - T V (V^2 - 1) / (T (V^2 + eps' - 1) + 1))).
    """
    if v < 1:
        raise DomainError(f"source variance must be >= 1, got {v!r}")
    if t_x < 0:
        raise DomainError(f"transmittance must be >= 0, got {t_x!r}")
    bob_x = t_x * (v * v + eps_prime_x - 1) + 1
    if bob_x <= 0:
        raise NumericalDomainError(f"Bob's x variance {bob_x!r} is not positive")
    conditional = v - t_x * v * (v * v - 1) / bob_x
    if conditional <= 0:
        raise NumericalDomainError(f"conditional variance {conditional!r} is not positive")
    return 0.5 * math.log2(v / conditional)


def mutual_information_conditional(v: float, ch: EquivalentChannel) -> float:
    """Same quantity via V_A / V_A|x_B from the shared covariance matrix."""
    cov = shared_covariance(v, ch)
    conditional = condition_on_homodyne_x(cov)[0, 0]
    if conditional <= 0:
        raise NumericalDomainError(f"conditional variance {conditional!r} is not positive")
    return 0.5 * math.log2(cov.entries[0, 0] / conditional)


def _holevo_from_cov(cov) -> HolevoTerms:
    spectrum = symplectic_eigenvalues(cov)
    lambda3 = math.sqrt(max(float(np.linalg.det(condition_on_homodyne_x(cov))), 0.0))
    return HolevoTerms(
        lambda1=spectrum.nu1,
        lambda2=spectrum.nu2,
        lambda3=lambda3,
        entropy_joint=entropy_g(spectrum.nu1) + entropy_g(spectrum.nu2),
        entropy_conditional=entropy_g(lambda3),
    )


def holevo_bound(v: float, ch: EquivalentChannel) -> HolevoTerms:
    """Eve's Holevo information on Bob's x outcome, with the entropies it is built from."""
    return _holevo_from_cov(shared_covariance(v, ch))


def key_rate_from_links(
    links: LinkParams,
    modulation_variance: float,
    beta: float,
    strict: bool = False,
) -> KeyRateResult:
    """UD key rate for explicit link parameters (optimal displacement gain)."""
    require_physical(links, strict)
    ch = equivalent_channel(links, modulation_variance)
    v = math.sqrt(modulation_variance + 1)
    mutual_info = mutual_information_ud(v, ch.t_x, ch.eps_prime_x)
    terms = holevo_bound(v, ch)
    raw = beta * mutual_info - terms.holevo
    logger.debug(
        "ud key rate evaluated",
        extra=build_log_extra(
            module_name="keyrate",
            operation="key_rate_ud",
            modulation_variance=modulation_variance,
            t_x=ch.t_x,
            eps_prime_x=ch.eps_prime_x,
            raw_key_rate=raw,
        ),
    )
    return KeyRateResult(
        key_rate=max(0.0, raw),
        raw_key_rate=raw,
        mutual_info=mutual_info,
        holevo=terms.holevo,
        entropy_joint=terms.entropy_joint,
        entropy_conditional=terms.entropy_conditional,
        lambda1=terms.lambda1,
        lambda2=terms.lambda2,
        lambda3=terms.lambda3,
        beta=beta,
        equivalent_channel=ch,
        links=links,
        protocol=RateProtocol.UD,
    )


def key_rate_ud(cfg: ProtocolConfig, strict: bool = False) -> KeyRateResult:
    """
    Asymptotic UD key rate K = max(0, beta I - chi_E) for a protocol configuration.

    Raises ``PhysicalityError`` when the p-quadrature link parameters are unphysical.
    """
    return key_rate_from_links(links_for(cfg), cfg.modulation_variance, cfg.beta, strict)


def _mutual_information_gm(v: float, t: float, eps_prime: float) -> float:
    if t == 0:
        return 0.0
    chi_line = 1 / t - 1 + eps_prime
    ratio = (v + chi_line) / (1 + chi_line)
    if ratio <= 0:
        raise NumericalDomainError(f"mutual information argument {ratio!r} is not positive")
    return 0.5 * math.log2(ratio)


def key_rate_symmetric_gm(cfg: ProtocolConfig, strict: bool = False) -> KeyRateResult:
    """
    Baseline rate of symmetric Gaussian modulation over the same equivalent channel.

    Both quadratures are modulated with variance V_m, so the EPR variance is
    V_m + 1. Homodyne detection with reverse reconciliation.
    """
    links = links_for(cfg)
    require_physical(links, strict)
    ch = equivalent_channel(links, cfg.modulation_variance)
    v = cfg.modulation_variance + 1
    mutual_info = _mutual_information_gm(v, ch.t_x, ch.eps_prime_x)
    terms = _holevo_from_cov(gm_shared_covariance(v, ch.t_x, ch.eps_prime_x))
    raw = cfg.beta * mutual_info - terms.holevo
    return KeyRateResult(
        key_rate=max(0.0, raw),
        raw_key_rate=raw,
        mutual_info=mutual_info,
        holevo=terms.holevo,
        entropy_joint=terms.entropy_joint,
        entropy_conditional=terms.entropy_conditional,
        lambda1=terms.lambda1,
        lambda2=terms.lambda2,
        lambda3=terms.lambda3,
        beta=cfg.beta,
        equivalent_channel=ch,
        links=links,
        protocol=RateProtocol.GM,
    )


def plob_bound(t_total: float) -> float:
    """Repeaterless capacity -log2(1 - T); infinite at T = 1."""
    if not 0 <= t_total <= 1:
        raise DomainError(f"transmittance must lie in [0, 1], got {t_total!r}")
    if t_total == 1:
        return math.inf
    return -math.log1p(-t_total) / math.log(2)


def plob_for(cfg: ProtocolConfig) -> float:
    """PLOB bound for the end-to-end fiber L_AC + L_BC of a configuration."""
    topology = cfg.topology
    return plob_bound(fiber_transmittance(topology.total_km, topology.alpha_db_per_km))


def optimize_modulation(
    cfg: ProtocolConfig,
    v_min: float = 1.0,
    v_max: float = 300.0,
    strict: bool = False,
    rel_tol: float = 1e-3,
) -> ModulationOptimum:
    """
    Modulation variance maximising the UD key rate on ``[v_min, v_max]``.

    A log-spaced scan brackets the best grid point and a bounded Brent search refines
    it. When every scanned rate is zero the result is ``(v_max, 0)`` flagged ``all_zero``.
    ``rel_tol`` is the relative convergence tolerance on K between refinements.
    """
    if not 0 < v_min < v_max:
        raise DomainError(f"modulation range must satisfy 0 < v_min < v_max, got [{v_min!r}, {v_max!r}]")

    def rate(vm: float) -> float:
        return key_rate_ud(cfg.model_copy(update={"modulation_variance": float(vm)}), strict).key_rate

    grid = np.geomspace(v_min, v_max, _MODULATION_GRID_POINTS)
    rates = np.array([rate(vm) for vm in grid])
    best = int(np.argmax(rates))
    if rates[best] <= 0:
        logger.warning(
            "no positive key rate on the modulation range",
            extra=build_log_extra(module_name="keyrate", operation="optimize_modulation", v_min=v_min, v_max=v_max),
        )
        return ModulationOptimum(modulation_variance=v_max, key_rate=0.0, all_zero=True)

    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, len(grid) - 1)]
    v_star, k_star = float(grid[best]), float(rates[best])
    # Tighten the V_m tolerance until successive optima agree to rel_tol in K
    xatol = rel_tol * lo
    previous = k_star
    for _ in range(_MAX_REFINEMENTS):
        result = minimize_scalar(lambda vm: -rate(vm), bounds=(lo, hi), method="bounded", options={"xatol": xatol})
        if not result.success:
            break
        k_found = float(-result.fun)
        if k_found > k_star:
            v_star, k_star = float(result.x), k_found
        if abs(k_found - previous) <= rel_tol * abs(k_star):
            break
        previous = k_found
        xatol /= 10
    logger.info(
        "modulation optimum found",
        extra=build_log_extra(
            module_name="keyrate", operation="optimize_modulation", modulation_variance=v_star, key_rate=k_star
        ),
    )
    return ModulationOptimum(modulation_variance=v_star, key_rate=k_star)
