"""
Figure-reproduction presets.

Each preset pins the parameters of its plot:
V_m = 100 unless swept, beta = 0.98, eps_A = eps_B = 0.002, 0.2 dB/km, and in
the asymmetric case Charlie sits at Bob with a 0.98 efficiency.
"""
from dataclasses import dataclass, field
from typing import Callable, Union

from .config import ASYMMETRIC_BOB_EFFICIENCY
from .exceptions import ConfigurationError
from .models import FiniteSizeConfig, ProtocolConfig, Scenario, SweepSpec, SweepVariable
from .utils import build_grid

BETA = 0.98
EXCESS_NOISE = 0.002
ALPHA_DB_PER_KM = 0.2
MODULATION_VARIANCE = 100.0
BLOCK_LENGTHS = [10**6, 10**7, 10**8, 10**9]


@dataclass(frozen=True)
class PhysicalityPreset:
    name: str
    eta_x_values: list[float] = field(default_factory=lambda: [0.2, 0.4, 0.6, 0.8])
    eps_x_values: list[float] = field(default_factory=lambda: [0.01, 0.05])
    eta_p_grid: list[float] = field(default_factory=lambda: build_grid(start=0.01, stop=1.0, step=0.01))
    strict: bool = False


Preset = Union[SweepSpec, PhysicalityPreset]


def _protocol(scenario: Scenario) -> ProtocolConfig:
    efficiency = ASYMMETRIC_BOB_EFFICIENCY if scenario is Scenario.ASYMMETRIC else 1.0
    return ProtocolConfig.for_scenario(
        scenario,
        0.0,
        alpha_db_per_km=ALPHA_DB_PER_KM,
        bob_side_efficiency=efficiency,
        modulation_variance=MODULATION_VARIANCE,
        beta=BETA,
        excess_noise_a=EXCESS_NOISE,
        excess_noise_b=EXCESS_NOISE,
    )


def _modulation_sweep(name: str, scenario: Scenario, distances: list[float]) -> SweepSpec:
    return SweepSpec(
        name=name,
        variable=SweepVariable.MODULATION_VARIANCE,
        start=1.0,
        stop=300.0,
        step=1.0,
        scenario=scenario,
        protocol=_protocol(scenario),
        betas=[BETA],
        distances=distances,
        include_gm=False,
    )


def _distance_sweep(name: str, scenario: Scenario, stop_km: float, step_km: float) -> SweepSpec:
    return SweepSpec(
        name=name,
        variable=SweepVariable.DISTANCE,
        start=0.0,
        stop=stop_km,
        step=step_km,
        scenario=scenario,
        protocol=_protocol(scenario),
        betas=[0.96, BETA],
        include_gm=True,
    )


def _finite_sweep(name: str, scenario: Scenario, stop_km: float, step_km: float) -> SweepSpec:
    return SweepSpec(
        name=name,
        variable=SweepVariable.DISTANCE,
        start=0.0,
        stop=stop_km,
        step=step_km,
        scenario=scenario,
        protocol=_protocol(scenario),
        betas=[BETA],
        block_lengths=list(BLOCK_LENGTHS),
        finite_size=FiniteSizeConfig.from_fraction(BLOCK_LENGTHS[-1], 0.5),
        include_gm=False,
    )


PRESETS: dict[str, Callable[[], Preset]] = {
    "fig3": lambda: PhysicalityPreset(name="fig3"),
    "fig4": lambda: _modulation_sweep("fig4", Scenario.SYMMETRIC, [2.0, 3.0, 4.0, 5.0]),
    "fig5": lambda: _modulation_sweep("fig5", Scenario.ASYMMETRIC, [10.0, 13.0, 16.0, 20.0, 22.0]),
    "fig6": lambda: _distance_sweep("fig6", Scenario.SYMMETRIC, 8.0, 0.05),
    "fig7": lambda: _distance_sweep("fig7", Scenario.ASYMMETRIC, 30.0, 0.1),
    "fig8": lambda: _finite_sweep("fig8", Scenario.SYMMETRIC, 8.0, 0.05),
    "fig9": lambda: _finite_sweep("fig9", Scenario.ASYMMETRIC, 30.0, 0.1),
}


def get_preset(name: str) -> Preset:
    try:
        factory = PRESETS[name]
    except KeyError as exc:
        raise ConfigurationError(f"Unknown preset {name!r}; choose one of {', '.join(PRESETS)}") from exc
    return factory()
