import pytest

from udmdi_qkd.config import ASYMMETRIC_BOB_EFFICIENCY
from udmdi_qkd.models import ProtocolConfig, Scenario


@pytest.fixture
def symmetric():
    """Factory for the symmetric configuration (Charlie midway) at a total distance."""

    def make(distance_km: float, **fields) -> ProtocolConfig:
        return ProtocolConfig.for_scenario(Scenario.SYMMETRIC, distance_km, **fields)

    return make


@pytest.fixture
def asymmetric():
    """Factory for the asymmetric configuration (Charlie at Bob, 0.98 short-link efficiency)."""

    def make(distance_km: float, **fields) -> ProtocolConfig:
        return ProtocolConfig.for_scenario(
            Scenario.ASYMMETRIC,
            distance_km,
            bob_side_efficiency=ASYMMETRIC_BOB_EFFICIENCY,
            **fields,
        )

    return make
