import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from udmdi_qkd.channel import (
    equivalent_channel,
    excess_noise_for_gain,
    excess_noise_optimal,
    fiber_transmittance,
    link_params,
    links_for,
    optimal_gain_sq,
    physicality_boundary,
    physicality_check,
    physicality_scan,
    require_physical,
)
from udmdi_qkd.exceptions import DomainError, PhysicalityError, SingularInputError
from udmdi_qkd.models import LinkParams, Scenario, Topology
from udmdi_qkd.presets import PhysicalityPreset


def test_fiber_transmittance_values():
    assert fiber_transmittance(0.0) == 1.0
    assert fiber_transmittance(50.0) == pytest.approx(0.1, rel=1e-12)
    assert fiber_transmittance(22.0) == pytest.approx(0.3631, abs=1e-4)


def test_fiber_transmittance_is_multiplicative():
    assert fiber_transmittance(7.0) * fiber_transmittance(13.0) == pytest.approx(fiber_transmittance(20.0), rel=1e-12)


def test_fiber_rejects_negative_length():
    with pytest.raises(DomainError):
        fiber_transmittance(-1.0)


def test_optimal_gain_values():
    assert optimal_gain_sq(100.0, 1.0) == pytest.approx(200.0 / 102.0)
    assert optimal_gain_sq(2.0, 0.5) == pytest.approx(2.0)
    assert optimal_gain_sq(1e9, 1.0) == pytest.approx(2.0, rel=1e-8)
    with pytest.raises(DomainError):
        optimal_gain_sq(100.0, 0.0)


def test_equivalent_channel_lossless_links():
    links = LinkParams.mirrored(1.0, 0.002, 1.0, 0.002)
    ch = equivalent_channel(links, 100.0)
    assert ch.eps_prime_x == pytest.approx(0.004, abs=1e-12)
    assert ch.t_x == pytest.approx(100.0 / 102.0)
    assert ch.eps_prime_p == pytest.approx(ch.eps_prime_x)


def test_equivalent_channel_ideal_links_are_noiseless():
    ch = equivalent_channel(LinkParams.mirrored(1.0, 0.0, 1.0, 0.0), 100.0)
    assert ch.eps_prime_x == 0.0


def test_explicit_optimal_gain_matches_closed_form():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        eta_a, eta_b = rng.uniform(0.05, 1.0, 2)
        eps_a, eps_b = rng.uniform(0.0, 0.1, 2)
        vm = rng.uniform(1.0, 300.0)
        g2 = optimal_gain_sq(vm, eta_b)
        general = excess_noise_for_gain(eta_a, eps_a, eta_b, eps_b, vm, g2)
        closed = excess_noise_optimal(eta_a, eps_a, eta_b, eps_b)
        assert general == pytest.approx(closed, abs=1e-12)

        links = LinkParams.mirrored(eta_a, eps_a, eta_b, eps_b)
        explicit = equivalent_channel(links, vm, gain_sq=g2)
        default = equivalent_channel(links, vm)
        assert explicit.eps_prime_x == pytest.approx(default.eps_prime_x, abs=1e-12)


@pytest.mark.parametrize("eta_a, eta_b, vm", [(0.3, 0.9, 100.0), (0.8, 0.98, 20.0), (1.0, 0.5, 300.0)])
def test_optimal_gain_minimises_excess_noise(eta_a, eta_b, vm):
    g_star = optimal_gain_sq(vm, eta_b)
    result = minimize_scalar(
        lambda g2: excess_noise_for_gain(eta_a, 0.002, eta_b, 0.002, vm, g2),
        bounds=(0.5 * g_star, 2.0 * g_star),
        method="bounded",
        options={"xatol": 1e-12},
    )
    assert result.x == pytest.approx(g_star, rel=1e-6)


def test_gain_mismatch_adds_noise():
    g_star = optimal_gain_sq(100.0, 0.9)
    at_optimum = excess_noise_for_gain(0.5, 0.002, 0.9, 0.002, 100.0, g_star)
    assert excess_noise_for_gain(0.5, 0.002, 0.9, 0.002, 100.0, 1.2 * g_star) > at_optimum
    assert excess_noise_for_gain(0.5, 0.002, 0.9, 0.002, 100.0, 0.8 * g_star) > at_optimum


def test_physicality_examples():
    assert physicality_check(0.5, 0.002, 0.5, 0.002).physical
    ideal = physicality_check(1.0, 0.0, 1.0, 0.0)
    assert ideal.physical
    assert ideal.lhs == 0.0
    assert ideal.rhs == 0.0


def test_mirrored_links_are_physical_by_default():
    for eta in np.linspace(0.01, 1.0, 25):
        for eps in np.linspace(0.001, 0.1, 25):
            assert physicality_check(eta, eps, eta, eps), (eta, eps)


def test_literal_correction_term_rejects_mirrored_links():
    for eta in np.linspace(0.01, 1.0, 25):
        for eps in np.linspace(0.001, 0.1, 25):
            assert not physicality_check(eta, eps, eta, eps, strict=True), (eta, eps)


def test_literal_correction_term_is_singular_without_noise():
    with pytest.raises(SingularInputError):
        physicality_check(0.5, 0.0, 0.5, 0.0, strict=True)


def test_boundary_separates_the_physical_region():
    eps_min = physicality_boundary(0.5, 0.01, 0.3)
    assert eps_min == pytest.approx(0.1446, abs=1e-3)
    assert physicality_check(0.5, 0.01, 0.3, eps_min + 1e-9)
    assert not physicality_check(0.5, 0.01, 0.3, eps_min - 1e-6)


def test_scan_rows_are_monotone_in_eps_p():
    preset = PhysicalityPreset(name="scan")
    eps_grid = np.linspace(0.0, 2.0, 81)
    eta_grid = preset.eta_p_grid[::9]
    for eta_x in preset.eta_x_values:
        for eps_x in preset.eps_x_values:
            region = physicality_scan(eta_x, eps_x, eta_grid, eps_grid)
            for row, eta_p in zip(region, eta_grid):
                first = int(np.argmax(row)) if row.any() else len(row)
                assert row[first:].all()
                assert not row[:first].any()
                boundary = physicality_boundary(eta_x, eps_x, eta_p)
                expected = eps_grid >= boundary
                # grid points within rounding of the boundary may go either way
                close = np.abs(eps_grid - boundary) < 1e-9
                assert np.array_equal(row[~close], expected[~close])


def test_link_params_symmetric_split():
    links = link_params(Topology.for_scenario(Scenario.SYMMETRIC, 5.0), 0.002, 0.002)
    assert links.eta_a_x == pytest.approx(fiber_transmittance(2.5))
    assert links.eta_b_x == pytest.approx(fiber_transmittance(2.5))
    assert links.eps_a_p == links.eps_a_x


def test_link_params_asymmetric_placement():
    topology = Topology.for_scenario(Scenario.ASYMMETRIC, 22.0, bob_side_efficiency=0.98)
    links = link_params(topology, 0.002, 0.002, eta_a_p=0.2)
    assert links.eta_a_x == pytest.approx(fiber_transmittance(22.0))
    assert links.eta_b_x == pytest.approx(0.98)
    assert links.eta_b_p == pytest.approx(0.98)
    assert links.eta_a_p == 0.2


def test_links_for_prefers_explicit_links(symmetric):
    explicit = LinkParams.mirrored(0.4, 0.01, 0.7, 0.02)
    assert links_for(symmetric(5.0, links=explicit)) == explicit
    assert links_for(symmetric(0.0)).eta_a_x == 1.0


def test_require_physical_names_the_failing_link():
    links = LinkParams.mirrored(0.5, 0.01, 0.5, 0.01)
    require_physical(links)
    with pytest.raises(PhysicalityError) as info:
        require_physical(links, strict=True)
    assert info.value.link == "alice"

    bad_bob = links.model_copy(update={"eta_b_p": 0.05, "eps_b_p": 0.0})
    with pytest.raises(PhysicalityError) as info:
        require_physical(bad_bob)
    assert info.value.link == "bob"


def test_gain_applies_to_both_quadratures():
    links = LinkParams(
        eta_a_x=0.8, eta_b_x=0.9, eta_a_p=0.6, eta_b_p=0.9,
        eps_a_x=0.002, eps_b_x=0.002, eps_a_p=0.01, eps_b_p=0.002,
    )
    ch = equivalent_channel(links, 100.0)
    assert ch.t_p / ch.t_x == pytest.approx(0.6 / 0.8)
    assert math.isclose(ch.gain_sq, optimal_gain_sq(100.0, 0.9))
