"""
Two-mode Gaussian states in shot-noise units.

Matrices use the mode ordering (x_A, p_A, x_B, p_B); the vacuum has unit variance.
"""
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.linalg import pinv

from .exceptions import ContractError, DomainError
from .models import EquivalentChannel

SYMMETRY_RTOL = 1e-12
SPECTRUM_FLOOR = 1 - 1e-9

OMEGA = np.array(
    [
        [0.0, 1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0, 0.0],
    ]
)

# (x_A, p_A, x_B, p_B) indices that couple an x to a p quadrature
_XP_CROSS = ((0, 1), (0, 3), (1, 2), (2, 3))
_X_PROJECTOR = np.diag([1.0, 0.0])


@dataclass(frozen=True)
class CovMatrix2Mode:
    entries: np.ndarray

    def __post_init__(self) -> None:
        m = np.array(self.entries, dtype=float)
        if m.shape != (4, 4):
            raise ContractError(f"two-mode covariance matrix must be 4x4, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ContractError("covariance matrix has non-finite entries")
        scale = max(1.0, float(np.max(np.abs(m))))
        if np.max(np.abs(m - m.T)) > SYMMETRY_RTOL * scale:
            raise ContractError("covariance matrix is not symmetric")
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @property
    def block_a(self) -> np.ndarray:
        return self.entries[:2, :2]

    @property
    def block_b(self) -> np.ndarray:
        return self.entries[2:, 2:]

    @property
    def block_c(self) -> np.ndarray:
        return self.entries[:2, 2:]

    @property
    def xp_decoupled(self) -> bool:
        return all(self.entries[i, j] == 0.0 for i, j in _XP_CROSS)


@dataclass(frozen=True)
class SymplecticSpectrum:
    nu1: float
    nu2: float

    def __post_init__(self) -> None:
        if self.nu1 < self.nu2:
            raise ContractError("symplectic spectrum must be ordered nu1 >= nu2")
        if self.nu2 < SPECTRUM_FLOOR:
            raise DomainError(f"symplectic eigenvalue {self.nu2!r} < 1: state violates the uncertainty principle")


def _check_variance(v: float) -> None:
    if not math.isfinite(v) or v < 1:
        raise DomainError(f"source variance must be >= 1, got {v!r}")


def source_covariance(v: float) -> CovMatrix2Mode:
    """EPR state of variance V with the second mode squeezed by -log(sqrt(V))."""
    _check_variance(v)
    cx = math.sqrt(v * (v * v - 1))
    cp = math.sqrt((v * v - 1) / v)
    return CovMatrix2Mode(
        np.array(
            [
                [v, 0.0, cx, 0.0],
                [0.0, v, 0.0, -cp],
                [cx, 0.0, v * v, 0.0],
                [0.0, -cp, 0.0, 1.0],
            ]
        )
    )


def shared_covariance(v: float, ch: EquivalentChannel) -> CovMatrix2Mode:
    """
    State of Alice's kept mode and Bob's displaced mode after the equivalent channel.

    Assumes ideal homodyne detection, so no detector noise enters Bob's block.
    """
    _check_variance(v)
    vm = v * v - 1
    cx = math.sqrt(ch.t_x) * math.sqrt(v * vm)
    cp = math.sqrt(ch.t_p) * math.sqrt(vm / v)
    bx = ch.t_x * (vm + ch.eps_prime_x) + 1
    bp = 1 + ch.t_p * ch.eps_prime_p
    return CovMatrix2Mode(
        np.array(
            [
                [v, 0.0, cx, 0.0],
                [0.0, v, 0.0, -cp],
                [cx, 0.0, bx, 0.0],
                [0.0, -cp, 0.0, bp],
            ]
        )
    )


def gm_shared_covariance(v: float, t: float, eps_prime: float) -> CovMatrix2Mode:
    """Symmetric Gaussian-modulation EPR state (variance V) after a channel (T, eps')."""
    _check_variance(v)
    if t < 0:
        raise DomainError(f"transmittance must be >= 0, got {t!r}")
    b = t * (v - 1) + 1 + t * eps_prime
    c = math.sqrt(t * (v * v - 1))
    return CovMatrix2Mode(
        np.array(
            [
                [v, 0.0, c, 0.0],
                [0.0, v, 0.0, -c],
                [c, 0.0, b, 0.0],
                [0.0, -c, 0.0, b],
            ]
        )
    )


def symplectic_invariants(cov: CovMatrix2Mode) -> tuple[float, float]:
    """Return (Delta, det gamma) with Delta = det A + det B + 2 det C."""
    delta = np.linalg.det(cov.block_a) + np.linalg.det(cov.block_b) + 2 * np.linalg.det(cov.block_c)
    return float(delta), float(np.linalg.det(cov.entries))


def _spectrum_invariants(cov: CovMatrix2Mode) -> tuple[float, float]:
    m = cov.entries
    if cov.xp_decoupled:
        # gamma = X (+) P on the x and p subspaces; nu^2 are the eigenvalues of X P,
        # whose trace is Delta and determinant is det gamma. The discriminant is
        # formed from the entries of X P to stay exact at degenerate (pure) spectra.
        x = np.array([[m[0, 0], m[0, 2]], [m[2, 0], m[2, 2]]])
        p = np.array([[m[1, 1], m[1, 3]], [m[3, 1], m[3, 3]]])
        xp = x @ p
        half_trace = 0.5 * (xp[0, 0] + xp[1, 1])
        disc = (0.5 * (xp[0, 0] - xp[1, 1])) ** 2 + xp[0, 1] * xp[1, 0]
        det = (x[0, 0] * x[1, 1] - x[0, 1] * x[1, 0]) * (p[0, 0] * p[1, 1] - p[0, 1] * p[1, 0])
    else:
        delta, det = symplectic_invariants(cov)
        half_trace = 0.5 * delta
        disc = half_trace * half_trace - det
        if disc <= 1e-10 * half_trace * half_trace:
            # near-degenerate: the invariant discriminant is swamped by rounding
            return _spectrum_eigensolver(cov)
    nu1_sq = half_trace + math.sqrt(max(disc, 0.0))
    if nu1_sq <= 0:
        raise DomainError("covariance matrix is not positive definite")
    nu2_sq = min(det / nu1_sq, nu1_sq)
    if nu2_sq < 0:
        raise DomainError("covariance matrix is not positive definite")
    return math.sqrt(nu1_sq), math.sqrt(nu2_sq)


def _spectrum_eigensolver(cov: CovMatrix2Mode) -> tuple[float, float]:
    moduli = np.sort(np.abs(np.linalg.eigvals(1j * OMEGA @ cov.entries)))[::-1]
    # eigenvalues come in +/- pairs; average each pair of equal moduli
    return float(0.5 * (moduli[0] + moduli[1])), float(0.5 * (moduli[2] + moduli[3]))


def symplectic_eigenvalues(
    cov: CovMatrix2Mode,
    method: Literal["invariants", "eigensolver"] = "invariants",
) -> SymplecticSpectrum:
    """
    Symplectic spectrum of a two-mode covariance matrix, descending.

    ``invariants`` evaluates the closed form nu^2 = (Delta +- sqrt(Delta^2 - 4 det))/2;
    ``eigensolver`` takes the moduli of the eigenvalues of i Omega gamma.
    """
    if not isinstance(cov, CovMatrix2Mode):
        cov = CovMatrix2Mode(np.asarray(cov, dtype=float))
    if method == "invariants":
        nu1, nu2 = _spectrum_invariants(cov)
    elif method == "eigensolver":
        nu1, nu2 = _spectrum_eigensolver(cov)
    else:
        raise ValueError(f"unknown spectrum method {method!r}")
    return SymplecticSpectrum(nu1=nu1, nu2=nu2)


def entropy_g(nu: float) -> float:
    """Von Neumann entropy (bits) of a thermal mode with symplectic eigenvalue ``nu``."""
    if not nu >= SPECTRUM_FLOOR:
        raise DomainError(f"symplectic eigenvalue must be >= 1, got {nu!r}")
    if nu <= 1:
        return 0.0
    a = (nu + 1) / 2
    b = (nu - 1) / 2
    return a * math.log2(a) - b * math.log2(b)


def condition_on_homodyne_x(cov: CovMatrix2Mode) -> np.ndarray:
    """
    Covariance of mode A after an ideal x homodyne measurement on mode B.

    gamma_A - C (X gamma_B X)^MP C^T with X = diag(1, 0) and ^MP the Moore-Penrose
    pseudo-inverse; a vanishing Bob x variance leaves gamma_A unchanged.
    """
    projected = _X_PROJECTOR @ cov.block_b @ _X_PROJECTOR
    c = cov.block_c
    return cov.block_a - c @ pinv(projected) @ c.T
