import os

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .exceptions import ConfigurationError
from .models import (
    FiniteSizeConfig,
    ProtocolConfig,
    Scenario,
    SweepSpec,
    SweepVariable,
)

# Load .env
load_dotenv()

ASYMMETRIC_BOB_EFFICIENCY = 0.98


def _bool(value: str, default: bool = False) -> bool:
    if value is None:
        return default
    return str(value).strip().lower() in {"1", "true", "yes", "on"}


@dataclass(frozen=True)
class Settings:
    # Logging
    app_env: str = os.environ.get("APP_ENV", "dev")
    service_name: str = os.environ.get("SERVICE_NAME", "udmdi_qkd")
    log_level: str = os.environ.get("LOG_LEVEL", "INFO").upper()
    log_to_file: bool = _bool(os.environ.get("LOG_TO_FILE", "false"))
    log_file: str = os.environ.get("LOG_FILE", "logs/udmdi_qkd.log")
    log_rotate_when: str = os.environ.get("LOG_ROTATE_WHEN", "midnight")
    log_rotate_interval: int = int(os.environ.get("LOG_ROTATE_INTERVAL", "1"))
    log_backup_count: int = int(os.environ.get("LOG_BACKUP_COUNT", "7"))

    # Runtime defaults, overridden by the run configuration and flags
    threads: int = int(os.environ.get("UDMDI_THREADS", "1"))
    seed: int = int(os.environ.get("UDMDI_SEED", "20190101"))


settings = Settings()


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ProtocolSection(_Section):
    modulation_variance: float = Field(default=100.0, gt=0, description="V_m in shot-noise units")
    beta: float = Field(default=0.98, gt=0, le=1, description="Reconciliation efficiency")
    excess_noise_a: float = Field(default=0.002, ge=0, description="Alice-Charlie x-quadrature excess noise (SNU)")
    excess_noise_b: float = Field(default=0.002, ge=0, description="Bob-Charlie x-quadrature excess noise (SNU)")
    excess_noise_a_p: float | None = Field(default=None, ge=0, description="p-quadrature override, Alice link")
    excess_noise_b_p: float | None = Field(default=None, ge=0, description="p-quadrature override, Bob link")
    transmittance_a_p: float | None = Field(default=None, gt=0, le=1, description="p-quadrature override, Alice link")
    transmittance_b_p: float | None = Field(default=None, gt=0, le=1, description="p-quadrature override, Bob link")
    scenario: Scenario = Field(default=Scenario.SYMMETRIC, description="Charlie placement")
    distance_km: float = Field(default=5.0, ge=0, description="Total distance L = L_AC + L_BC")
    alpha_db_per_km: float = Field(default=0.2, gt=0, description="Fiber attenuation")
    bob_side_efficiency: float | None = Field(
        default=None,
        gt=0,
        le=1,
        description="Efficiency of Bob's short link; defaults to 1 (symmetric) or 0.98 (asymmetric)",
    )
    strict_literal: bool = Field(default=False, description="Use the literal printed physicality correction term")

    def efficiency(self, scenario: Scenario | None = None) -> float:
        if self.bob_side_efficiency is not None:
            return self.bob_side_efficiency
        scenario = scenario or self.scenario
        return ASYMMETRIC_BOB_EFFICIENCY if scenario is Scenario.ASYMMETRIC else 1.0

    def to_protocol(self, distance_km: float | None = None, scenario: Scenario | None = None) -> ProtocolConfig:
        scenario = scenario or self.scenario
        return ProtocolConfig.for_scenario(
            scenario,
            self.distance_km if distance_km is None else distance_km,
            modulation_variance=self.modulation_variance,
            beta=self.beta,
            excess_noise_a=self.excess_noise_a,
            excess_noise_b=self.excess_noise_b,
            excess_noise_a_p=self.excess_noise_a_p,
            excess_noise_b_p=self.excess_noise_b_p,
            transmittance_a_p=self.transmittance_a_p,
            transmittance_b_p=self.transmittance_b_p,
            alpha_db_per_km=self.alpha_db_per_km,
            bob_side_efficiency=self.efficiency(scenario),
        )


class FiniteSizeSection(_Section):
    block_length: int = Field(default=10**9, ge=2, description="N, total exchanged signals")
    key_fraction: float = Field(default=0.5, gt=0, lt=1, description="n/N")
    eps_pe: float = Field(default=1e-10, gt=0, lt=1)
    eps_pa: float = Field(default=1e-10, gt=0, lt=1)
    eps_smooth: float = Field(default=1e-10, gt=0, lt=1)
    z_quantile: float | None = Field(default=None, gt=0, description="Overrides the quantile derived from eps_pe")

    def to_config(self, block_length: int | None = None) -> FiniteSizeConfig:
        return FiniteSizeConfig.from_fraction(
            block_length or self.block_length,
            self.key_fraction,
            eps_pe=self.eps_pe,
            eps_pa=self.eps_pa,
            eps_smooth=self.eps_smooth,
            z_quantile=self.z_quantile,
        )


class SweepSection(_Section):
    variable: SweepVariable = SweepVariable.DISTANCE
    values: list[float] | None = None
    start: float | None = None
    stop: float | None = None
    step: float | None = None
    betas: list[float] | None = None
    distances: list[float] | None = None
    block_lengths: list[int] = Field(default_factory=list)
    include_gm: bool = True

    @model_validator(mode="after")
    def _grid_given(self) -> "SweepSection":
        ranged = (self.start, self.stop, self.step)
        if self.values is None and any(v is None for v in ranged):
            raise ValueError("sweep needs either 'values' or all of 'start', 'stop', 'step'")
        return self


class OracleSection(_Section):
    trials: int = Field(default=10_000, ge=100)
    samples: int = Field(default=10_000, ge=2, description="m, estimation signals per trial")
    modulation_variance: float = Field(default=100.0, gt=0)
    transmission: float = Field(default=0.9, ge=0, description="t' = sqrt(eta)")
    noise_variance: float = Field(default=1.002, gt=0, description="sigma'^2")
    eps_pe: float = Field(default=0.05, gt=0, lt=1)
    tolerance_sigmas: float = Field(default=4.0, gt=0)


class RunConfig(_Section):
    protocol: ProtocolSection = Field(default_factory=ProtocolSection)
    finite_size: FiniteSizeSection = Field(default_factory=FiniteSizeSection)
    sweep: SweepSection | None = None
    oracle: OracleSection = Field(default_factory=OracleSection)
    threads: int = Field(default=settings.threads, ge=1)
    seed: int = Field(default=settings.seed, ge=0)

    def sweep_spec(self, output: str | None = None) -> SweepSpec:
        if self.sweep is None:
            raise ConfigurationError("The configuration has no [sweep] section")
        section = self.sweep
        return SweepSpec(
            variable=section.variable,
            values=section.values,
            start=section.start,
            stop=section.stop,
            step=section.step,
            scenario=self.protocol.scenario,
            protocol=self.protocol.to_protocol(),
            betas=section.betas or [self.protocol.beta],
            distances=section.distances or [self.protocol.distance_km],
            block_lengths=section.block_lengths,
            finite_size=self.finite_size.to_config(),
            include_gm=section.include_gm,
            strict_literal=self.protocol.strict_literal,
            output=output,
        )


def load_run_config(path: str | Path | None = None, overrides: dict[str, Any] | None = None) -> RunConfig:
    """
    Read a TOML run configuration and apply flag overrides on top.

    Args:
        path: Optional path to a TOML file with [protocol], [finite_size],
            [sweep] and [oracle] sections.
        overrides: Dotted keys (``"protocol.scenario"``) mapped to values that
            take precedence over the file. ``None`` values are ignored.

    Returns:
        The validated run configuration.
    """
    data: dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except FileNotFoundError as exc:
            raise ConfigurationError(f"Configuration file not found: {path}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigurationError(f"Configuration file {path} is not valid TOML: {exc}") from exc

    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        target = data
        *parents, leaf = dotted.split(".")
        for key in parents:
            target = target.setdefault(key, {})
        target[leaf] = value

    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigurationError(f"Invalid configuration: {exc}") from exc
