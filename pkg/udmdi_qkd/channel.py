"""
Reduction of the two MDI links (Alice-Charlie, Bob-Charlie) to an equivalent
one-way channel seen by Alice's mode, plus the physicality constraint on the
unmodulated p quadrature.
"""
import math
from dataclasses import dataclass
from typing import Literal, Optional, Sequence, Union

import numpy as np

from .exceptions import DomainError, PhysicalityError, SingularInputError
from .models import EquivalentChannel, LinkParams, ProtocolConfig, Topology

GainSpec = Union[float, Literal["optimal"], None]


def fiber_transmittance(length_km: float, alpha_db_per_km: float = 0.2) -> float:
    """Transmittance 10^(-alpha L / 10) of a fiber of length ``length_km``."""
    if length_km < 0:
        raise DomainError(f"fiber length must be >= 0, got {length_km!r}")
    if alpha_db_per_km <= 0:
        raise DomainError(f"attenuation must be > 0, got {alpha_db_per_km!r}")
    return 10 ** (-alpha_db_per_km * length_km / 10)


def optimal_gain_sq(modulation_variance: float, eta_b_x: float) -> float:
    """Displacement gain g^2 that minimises the equivalent excess noise."""
    if modulation_variance <= 0:
        raise DomainError(f"modulation variance must be > 0, got {modulation_variance!r}")
    if eta_b_x <= 0:
        raise DomainError(f"eta_B,x must be > 0, got {eta_b_x!r}")
    return 2 * modulation_variance / (eta_b_x * (modulation_variance + 2))


def _check_eta(*etas: float) -> None:
    for eta in etas:
        if not eta > 0:
            raise DomainError(f"transmittance must be > 0, got {eta!r}")


def excess_noise_for_gain(
    eta_a: float,
    eps_a: float,
    eta_b: float,
    eps_b: float,
    modulation_variance: float,
    gain_sq: float,
) -> float:
    """Equivalent excess noise eps'_A for an arbitrary displacement gain."""
    _check_eta(eta_a, eta_b)
    if gain_sq <= 0:
        raise DomainError(f"gain g^2 must be > 0, got {gain_sq!r}")
    chi_a = (1 - eta_a) / eta_a + eps_a
    chi_b = (1 - eta_b) / eta_b + eps_b
    mismatch = math.sqrt(2 * modulation_variance) / math.sqrt(gain_sq) - math.sqrt(eta_b * (modulation_variance + 2))
    return 1 + (eta_b / eta_a) * (chi_b - 1) + chi_a + mismatch * mismatch / eta_a


def excess_noise_optimal(eta_a: float, eps_a: float, eta_b: float, eps_b: float) -> float:
    """Equivalent excess noise at the optimal gain (the mismatch term vanishes)."""
    _check_eta(eta_a, eta_b)
    return eps_a + 2 / eta_a + (eta_b / eta_a) * (eps_b - 2)


def equivalent_channel(
    links: LinkParams,
    modulation_variance: float,
    gain_sq: GainSpec = "optimal",
) -> EquivalentChannel:
    """
    Equivalent one-way channel (T, eps') for both quadratures.

    The same displacement gain acts on both quadratures. ``"optimal"`` (or ``None``)
    selects g^2 = 2 V_m / (eta_B,x (V_m + 2)).
    """
    if modulation_variance <= 0:
        raise DomainError(f"modulation variance must be > 0, got {modulation_variance!r}")
    optimal = gain_sq is None or gain_sq == "optimal"
    g2 = optimal_gain_sq(modulation_variance, links.eta_b_x) if optimal else float(gain_sq)

    if optimal:
        eps_x = excess_noise_optimal(links.eta_a_x, links.eps_a_x, links.eta_b_x, links.eps_b_x)
    else:
        eps_x = excess_noise_for_gain(
            links.eta_a_x, links.eps_a_x, links.eta_b_x, links.eps_b_x, modulation_variance, g2
        )
    if optimal and links.eta_b_p == links.eta_b_x:
        eps_p = excess_noise_optimal(links.eta_a_p, links.eps_a_p, links.eta_b_p, links.eps_b_p)
    else:
        eps_p = excess_noise_for_gain(
            links.eta_a_p, links.eps_a_p, links.eta_b_p, links.eps_b_p, modulation_variance, g2
        )
    return EquivalentChannel(
        t_x=links.eta_a_x / 2 * g2,
        t_p=links.eta_a_p / 2 * g2,
        eps_prime_x=eps_x,
        eps_prime_p=eps_p,
        gain_sq=g2,
    )


@dataclass(frozen=True)
class PhysicalityVerdict:
    physical: bool
    lhs: float
    rhs: float

    def __bool__(self) -> bool:
        return self.physical


def _physicality_terms(eta_x: float, eps_x: float, eta_p: float, strict: bool) -> tuple[float, float, float]:
    if not (0 < eta_x <= 1 and 0 < eta_p <= 1):
        raise DomainError(f"transmittances must lie in (0, 1], got eta_x={eta_x!r}, eta_p={eta_p!r}")
    if eps_x < 0:
        raise DomainError(f"excess noise must be >= 0, got {eps_x!r}")
    u = 1 + eta_x * eps_x
    lhs = (math.sqrt(eta_x / (u * u)) - math.sqrt(eta_p)) ** 2
    slope = 1 - eta_x / u
    if strict:
        if eps_x == 0:
            raise SingularInputError("literal physicality term 1/(eta_x eps_x) is singular at eps_x = 0")
        correction = 1 / (eta_x * eps_x)
    else:
        correction = 1 / u
    return lhs, slope, correction


def physicality_check(
    eta_x: float,
    eps_x: float,
    eta_p: float,
    eps_p: float,
    strict: bool = False,
) -> PhysicalityVerdict:
    """
    Heisenberg constraint on the unmodulated quadrature of one link.

    Default mode uses the correction term 1/(1 + eta_x eps_x); ``strict`` uses the
    literal 1/(eta_x eps_x).
    """
    if eps_p < 0:
        raise DomainError(f"excess noise must be >= 0, got {eps_p!r}")
    lhs, slope, correction = _physicality_terms(eta_x, eps_x, eta_p, strict)
    rhs = slope * (1 + eta_p * eps_p - correction)
    return PhysicalityVerdict(physical=bool(lhs <= rhs), lhs=lhs, rhs=rhs)


def physicality_boundary(eta_x: float, eps_x: float, eta_p: float, strict: bool = False) -> float:
    """
    Smallest eps_p for which (eta_p, eps_p) is physical, given the x-quadrature link.

    The right-hand side is linear and increasing in eps_p, so the physical region is
    everything above this value. Returns ``inf`` when no eps_p is physical.
    """
    lhs, slope, correction = _physicality_terms(eta_x, eps_x, eta_p, strict)
    if slope <= 0:
        return 0.0 if lhs <= 0 else math.inf
    return max(0.0, (lhs / slope - 1 + correction) / eta_p)


def physicality_scan(
    eta_x: float,
    eps_x: float,
    eta_p_grid: Sequence[float],
    eps_p_grid: Sequence[float],
    strict: bool = False,
) -> np.ndarray:
    """Boolean map of the physical region, rows over eta_p and columns over eps_p."""
    region = np.zeros((len(eta_p_grid), len(eps_p_grid)), dtype=bool)
    for i, eta_p in enumerate(eta_p_grid):
        for j, eps_p in enumerate(eps_p_grid):
            region[i, j] = physicality_check(eta_x, eps_x, eta_p, eps_p, strict).physical
    return region


def link_params(
    topology: Topology,
    eps_a: float,
    eps_b: float,
    eps_a_p: Optional[float] = None,
    eps_b_p: Optional[float] = None,
    eta_a_p: Optional[float] = None,
    eta_b_p: Optional[float] = None,
) -> LinkParams:
    """
    Per-link parameters from the fiber topology.

    Excess noise is input-referred and does not scale with length. Bob's short-link
    efficiency multiplies eta_B in both quadratures; unset p values mirror x.
    """
    eta_a = fiber_transmittance(topology.l_ac_km, topology.alpha_db_per_km)
    eta_b = fiber_transmittance(topology.l_bc_km, topology.alpha_db_per_km) * topology.bob_side_efficiency
    return LinkParams(
        eta_a_x=eta_a,
        eta_b_x=eta_b,
        eta_a_p=eta_a if eta_a_p is None else eta_a_p,
        eta_b_p=eta_b if eta_b_p is None else eta_b_p,
        eps_a_x=eps_a,
        eps_b_x=eps_b,
        eps_a_p=eps_a if eps_a_p is None else eps_a_p,
        eps_b_p=eps_b if eps_b_p is None else eps_b_p,
    )


def links_for(cfg: ProtocolConfig) -> LinkParams:
    if cfg.links is not None:
        return cfg.links
    return link_params(
        cfg.topology,
        cfg.excess_noise_a,
        cfg.excess_noise_b,
        eps_a_p=cfg.excess_noise_a_p,
        eps_b_p=cfg.excess_noise_b_p,
        eta_a_p=cfg.transmittance_a_p,
        eta_b_p=cfg.transmittance_b_p,
    )


def require_physical(links: LinkParams, strict: bool = False) -> None:
    """Raise ``PhysicalityError`` if either link's p quadrature is unphysical."""
    for name, eta_x, eps_x, eta_p, eps_p in (
        ("alice", links.eta_a_x, links.eps_a_x, links.eta_a_p, links.eps_a_p),
        ("bob", links.eta_b_x, links.eps_b_x, links.eta_b_p, links.eps_b_p),
    ):
        verdict = physicality_check(eta_x, eps_x, eta_p, eps_p, strict)
        if not verdict:
            raise PhysicalityError(
                f"{name} link p quadrature is unphysical (lhs={verdict.lhs:.6g} > rhs={verdict.rhs:.6g})",
                link=name,
            )
