import math
from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .utils import build_grid


class Scenario(str, Enum):
    SYMMETRIC = "symmetric"
    ASYMMETRIC = "asymmetric"


class SweepVariable(str, Enum):
    DISTANCE = "distance"
    MODULATION_VARIANCE = "modulation_variance"
    BLOCK_LENGTH = "block_length"


class RateProtocol(str, Enum):
    UD = "ud"
    GM = "gm"


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class LinkParams(_Frozen):
    eta_a_x: float = Field(gt=0, le=1, description="Alice-Charlie transmittance, x quadrature")
    eta_b_x: float = Field(gt=0, le=1, description="Bob-Charlie transmittance, x quadrature")
    eta_a_p: float = Field(gt=0, le=1, description="Alice-Charlie transmittance, p quadrature")
    eta_b_p: float = Field(gt=0, le=1, description="Bob-Charlie transmittance, p quadrature")
    eps_a_x: float = Field(ge=0, description="Alice-Charlie excess noise (SNU), x quadrature")
    eps_b_x: float = Field(ge=0, description="Bob-Charlie excess noise (SNU), x quadrature")
    eps_a_p: float = Field(ge=0, description="Alice-Charlie excess noise (SNU), p quadrature")
    eps_b_p: float = Field(ge=0, description="Bob-Charlie excess noise (SNU), p quadrature")

    @classmethod
    def mirrored(cls, eta_a: float, eps_a: float, eta_b: float, eps_b: float) -> "LinkParams":
        """Links whose p quadrature repeats the x quadrature."""
        return cls(
            eta_a_x=eta_a, eta_b_x=eta_b, eta_a_p=eta_a, eta_b_p=eta_b,
            eps_a_x=eps_a, eps_b_x=eps_b, eps_a_p=eps_a, eps_b_p=eps_b,
        )

    @property
    def chi_a_x(self) -> float:
        return (1 - self.eta_a_x) / self.eta_a_x + self.eps_a_x

    @property
    def chi_b_x(self) -> float:
        return (1 - self.eta_b_x) / self.eta_b_x + self.eps_b_x


class EquivalentChannel(_Frozen):
    t_x: float = Field(ge=0, description="Equivalent transmittance T_{A,x}")
    t_p: float = Field(ge=0, description="Equivalent transmittance T_{A,p}")
    eps_prime_x: float = Field(description="Equivalent excess noise eps'_{A,x} (SNU)")
    eps_prime_p: float = Field(description="Equivalent excess noise eps'_{A,p} (SNU)")
    gain_sq: float = Field(gt=0, description="Squared displacement gain g^2")


class Topology(_Frozen):
    l_ac_km: float = Field(ge=0, description="Alice-Charlie fiber length")
    l_bc_km: float = Field(ge=0, description="Bob-Charlie fiber length")
    alpha_db_per_km: float = Field(default=0.2, gt=0, description="Fiber attenuation")
    bob_side_efficiency: float = Field(default=1.0, gt=0, le=1, description="Multiplies eta_B in both quadratures")

    @property
    def total_km(self) -> float:
        return self.l_ac_km + self.l_bc_km

    @classmethod
    def for_scenario(
        cls,
        scenario: Scenario,
        distance_km: float,
        alpha_db_per_km: float = 0.2,
        bob_side_efficiency: float = 1.0,
    ) -> "Topology":
        """Symmetric splits L evenly; asymmetric puts Charlie at Bob (L_BC = 0)."""
        scenario = Scenario(scenario)
        if scenario is Scenario.SYMMETRIC:
            half = distance_km / 2
            return cls(l_ac_km=half, l_bc_km=half, alpha_db_per_km=alpha_db_per_km,
                       bob_side_efficiency=bob_side_efficiency)
        return cls(l_ac_km=distance_km, l_bc_km=0.0, alpha_db_per_km=alpha_db_per_km,
                   bob_side_efficiency=bob_side_efficiency)


class ProtocolConfig(_Frozen):
    modulation_variance: float = Field(default=100.0, gt=0, description="V_m (SNU)")
    beta: float = Field(default=0.98, gt=0, le=1, description="Reconciliation efficiency")
    topology: Topology
    excess_noise_a: float = Field(default=0.002, ge=0, description="eps_{A,x}")
    excess_noise_b: float = Field(default=0.002, ge=0, description="eps_{B,x}")
    excess_noise_a_p: float | None = Field(default=None, ge=0, description="eps_{A,p}; mirrors x when unset")
    excess_noise_b_p: float | None = Field(default=None, ge=0, description="eps_{B,p}; mirrors x when unset")
    transmittance_a_p: float | None = Field(default=None, gt=0, le=1, description="eta_{A,p}; mirrors x when unset")
    transmittance_b_p: float | None = Field(default=None, gt=0, le=1, description="eta_{B,p}; mirrors x when unset")
    links: LinkParams | None = Field(default=None, description="Explicit links; bypasses the fiber model")

    @property
    def source_variance(self) -> float:
        return math.sqrt(self.modulation_variance + 1)

    @classmethod
    def for_scenario(
        cls,
        scenario: Scenario,
        distance_km: float,
        *,
        alpha_db_per_km: float = 0.2,
        bob_side_efficiency: float = 1.0,
        **fields,
    ) -> "ProtocolConfig":
        topology = Topology.for_scenario(scenario, distance_km, alpha_db_per_km, bob_side_efficiency)
        return cls(topology=topology, **fields)

    def at_distance(self, scenario: Scenario, distance_km: float) -> "ProtocolConfig":
        topology = Topology.for_scenario(
            scenario,
            distance_km,
            self.topology.alpha_db_per_km,
            self.topology.bob_side_efficiency,
        )
        return self.model_copy(update={"topology": topology, "links": None})


class FiniteSizeConfig(_Frozen):
    block_length: int = Field(ge=2, description="N, total exchanged signals")
    key_length: int = Field(ge=1, description="n, signals used for the key")
    eps_pe: float = Field(default=1e-10, gt=0, lt=1, description="Parameter-estimation failure probability")
    eps_pa: float = Field(default=1e-10, gt=0, lt=1, description="Privacy-amplification failure probability")
    eps_smooth: float = Field(default=1e-10, gt=0, lt=1, description="Smoothing parameter")
    z_quantile: float | None = Field(default=None, gt=0, description="Explicit z_{eps_PE/2}")

    @model_validator(mode="after")
    def _split(self) -> "FiniteSizeConfig":
        if self.key_length >= self.block_length:
            raise ValueError("key_length must leave signals for parameter estimation")
        return self

    @property
    def estimation_length(self) -> int:
        return self.block_length - self.key_length

    @property
    def key_fraction(self) -> float:
        return self.key_length / self.block_length

    @classmethod
    def from_fraction(cls, block_length: int, key_fraction: float = 0.5, **fields) -> "FiniteSizeConfig":
        block_length = int(block_length)
        return cls(block_length=block_length, key_length=int(round(block_length * key_fraction)), **fields)


class EstimatedChannel(_Frozen):
    t_hat_a: float = Field(ge=0, description="Estimated amplitude transmission, Alice link")
    t_hat_b: float = Field(ge=0, description="Estimated amplitude transmission, Bob link")
    sigma2_hat_a: float = Field(ge=0, description="Estimated noise variance (SNU), Alice link")
    sigma2_hat_b: float = Field(ge=0, description="Estimated noise variance (SNU), Bob link")
    delta_t_a: float = Field(default=0.0, ge=0)
    delta_t_b: float = Field(default=0.0, ge=0)
    delta_sigma2_a: float = Field(default=0.0, ge=0)
    delta_sigma2_b: float = Field(default=0.0, ge=0)

    def point_estimate(self) -> "EstimatedChannel":
        return self.model_copy(
            update={"delta_t_a": 0.0, "delta_t_b": 0.0, "delta_sigma2_a": 0.0, "delta_sigma2_b": 0.0}
        )


class KeyRateResult(_Frozen):
    key_rate: float = Field(ge=0, description="Secret key rate (bits/pulse), clamped at zero")
    raw_key_rate: float = Field(description="Signed rate before clamping")
    mutual_info: float = Field(description="I_{A1B'1} (bits)")
    holevo: float = Field(description="chi_E (bits)")
    entropy_joint: float = Field(description="S(E) = S(A1B'1) (bits)")
    entropy_conditional: float = Field(description="S(E|X_B'1) = S(A1|X_B'1) (bits)")
    lambda1: float
    lambda2: float
    lambda3: float
    beta: float
    equivalent_channel: EquivalentChannel
    links: LinkParams
    protocol: RateProtocol = RateProtocol.UD
    correction: float = Field(default=0.0, ge=0, description="Privacy-amplification correction Delta(n)")
    key_fraction: float = Field(default=1.0, gt=0, le=1, description="n/N")


class ModulationOptimum(_Frozen):
    modulation_variance: float
    key_rate: float = Field(ge=0)
    all_zero: bool = Field(default=False, description="No positive rate anywhere on the range")


class StatisticCheck(_Frozen):
    name: str
    observed: float
    expected: float
    tolerance: float = Field(ge=0)

    @property
    def passed(self) -> bool:
        return abs(self.observed - self.expected) <= self.tolerance


class ValidationReport(_Frozen):
    trials: int
    samples: int
    seed: int
    checks: list[StatisticCheck]

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def failing(self) -> list[StatisticCheck]:
        return [check for check in self.checks if not check.passed]


class SweepSpec(_Frozen):
    variable: SweepVariable
    values: list[float] | None = None
    start: float | None = None
    stop: float | None = None
    step: float | None = None
    scenario: Scenario = Scenario.SYMMETRIC
    protocol: ProtocolConfig
    betas: list[float] = Field(default_factory=lambda: [0.98])
    distances: list[float] = Field(default_factory=list, description="Fixed distances when not sweeping distance")
    block_lengths: list[int] = Field(default_factory=list)
    finite_size: FiniteSizeConfig | None = None
    include_gm: bool = True
    strict_literal: bool = False
    output: str | None = None
    name: str | None = None

    @model_validator(mode="after")
    def _check(self) -> "SweepSpec":
        grid = self.grid
        if not grid:
            raise ValueError("sweep grid is empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("sweep grid must be strictly increasing")
        if not self.betas or any(not 0 < b <= 1 for b in self.betas):
            raise ValueError("betas must be non-empty and within (0, 1]")
        if self.variable is not SweepVariable.DISTANCE and not self.distances:
            raise ValueError("a fixed distance is required unless distance is swept")
        if self.variable is SweepVariable.BLOCK_LENGTH and self.finite_size is None:
            raise ValueError("a block-length sweep needs finite-size settings")
        if self.block_lengths and self.finite_size is None:
            raise ValueError("finite-size columns need finite-size settings")
        return self

    @property
    def grid(self) -> list[float]:
        return build_grid(self.values, self.start, self.stop, self.step)

    @property
    def series(self) -> list[float | None]:
        if self.variable is SweepVariable.DISTANCE:
            return [None]
        return list(self.distances)
