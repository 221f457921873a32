import math

import pytest

from udmdi_qkd import sweep as sweep_module
from udmdi_qkd.exceptions import AcceptanceError, DomainError, NoRangeError
from udmdi_qkd.models import FiniteSizeConfig, RateProtocol, Scenario, SweepSpec, SweepVariable
from udmdi_qkd.presets import get_preset
from udmdi_qkd.sweep import (
    DISTANCE_COLUMN,
    max_distance,
    physicality_table,
    raw_key_rate_at,
    run_sweep,
    write_gnuplot_script,
)


def _distance_spec(protocol, **fields):
    kwargs = dict(
        variable=SweepVariable.DISTANCE,
        start=0.0,
        stop=6.0,
        step=1.0,
        protocol=protocol,
    )
    kwargs.update(fields)
    return SweepSpec(**kwargs)


def test_distance_sweep_rows_and_columns(symmetric):
    table = run_sweep(_distance_spec(symmetric(0.0), betas=[0.96, 0.98]))
    assert table.columns[0] == DISTANCE_COLUMN
    assert "key_rate_ud[beta=0.98] (bits/pulse)" in table.columns
    assert "key_rate_gm[beta=0.96] (bits/pulse)" in table.columns
    assert table.columns[-4:] == ["plob (bits/pulse)", "mutual_info (bits)", "holevo (bits)", "physical"]
    assert table.column(DISTANCE_COLUMN) == [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
    assert all(table.column("physical"))
    low = table.column("key_rate_ud[beta=0.96] (bits/pulse)")
    high = table.column("key_rate_ud[beta=0.98] (bits/pulse)")
    assert all(a <= b for a, b in zip(low, high))


def test_sweep_is_independent_of_worker_count(symmetric, tmp_path):
    spec = _distance_spec(symmetric(0.0))
    serial = run_sweep(spec, threads=1)
    pooled = run_sweep(spec, threads=3)
    assert serial.rows == pooled.rows
    serial.to_csv(tmp_path / "serial.csv")
    pooled.to_csv(tmp_path / "pooled.csv")
    assert (tmp_path / "serial.csv").read_bytes() == (tmp_path / "pooled.csv").read_bytes()


def test_csv_formatting(symmetric, tmp_path):
    table = run_sweep(_distance_spec(symmetric(0.0), values=[5.0], start=None, stop=None, step=None))
    path = tmp_path / "rates.csv"
    table.to_csv(path)
    header, row = path.read_text(encoding="utf-8").splitlines()
    assert header.startswith("distance (km),key_rate_ud[beta=0.98] (bits/pulse)")
    fields = row.split(",")
    assert fields[0] == "5"
    assert fields[-1] == "true"
    assert float(fields[1]) == pytest.approx(table.rows[0][1], rel=1e-9)


def test_modulation_sweep_carries_fixed_distances(symmetric):
    spec = SweepSpec(
        variable=SweepVariable.MODULATION_VARIANCE,
        values=[10.0, 100.0],
        distances=[2.0, 4.0],
        protocol=symmetric(0.0),
        include_gm=False,
    )
    table = run_sweep(spec)
    assert table.columns[:2] == ["modulation_variance (SNU)", DISTANCE_COLUMN]
    assert [row[:2] for row in table.rows] == [[10.0, 2.0], [100.0, 2.0], [10.0, 4.0], [100.0, 4.0]]


def test_block_length_sweep(symmetric):
    spec = SweepSpec(
        variable=SweepVariable.BLOCK_LENGTH,
        values=[1e6, 1e9],
        distances=[2.0],
        protocol=symmetric(0.0),
        finite_size=FiniteSizeConfig.from_fraction(10**9),
        include_gm=False,
    )
    table = run_sweep(spec)
    finite = table.column("key_rate_finite[beta=0.98] (bits/pulse)")
    assert table.column("block_length (signals)") == [10**6, 10**9]
    assert 0 < finite[0] < finite[1]


def test_nonphysical_points_are_flagged(symmetric):
    protocol = symmetric(0.0, transmittance_a_p=0.1, excess_noise_a_p=0.0)
    table = run_sweep(_distance_spec(protocol))
    assert not any(table.column("physical"))
    assert all(rate is None for rate in table.column("key_rate_ud[beta=0.98] (bits/pulse)"))


def test_plob_violation_is_reported(symmetric, monkeypatch):
    monkeypatch.setattr(sweep_module, "plob_for", lambda cfg: 0.0)
    with pytest.raises(AcceptanceError) as info:
        run_sweep(_distance_spec(symmetric(0.0)))
    assert info.value.statistic == "plob_dominance"


def test_max_distance_reaches_figure_ranges(symmetric, asymmetric):
    assert max_distance(symmetric(0.0), Scenario.SYMMETRIC) >= 5.0
    assert max_distance(asymmetric(0.0), Scenario.ASYMMETRIC) >= 22.0


def test_max_distance_has_positive_rate_at_the_edge(symmetric):
    edge = max_distance(symmetric(0.0), Scenario.SYMMETRIC, resolution_km=0.001)
    assert raw_key_rate_at(symmetric(0.0), edge, Scenario.SYMMETRIC) > 0
    assert raw_key_rate_at(symmetric(0.0), edge + 0.001, Scenario.SYMMETRIC) <= 0


@pytest.mark.parametrize("scenario", [Scenario.SYMMETRIC, Scenario.ASYMMETRIC])
def test_max_distance_ordering(scenario, symmetric, asymmetric):
    make = symmetric if scenario is Scenario.SYMMETRIC else asymmetric
    low = max_distance(make(0.0, beta=0.96), scenario, resolution_km=1e-4)
    high = max_distance(make(0.0, beta=0.98), scenario, resolution_km=1e-4)
    gm = max_distance(make(0.0, beta=0.98), scenario, resolution_km=1e-4, protocol=RateProtocol.GM)
    assert low < high < gm


def test_symmetric_gm_edge_is_just_beyond_ud(symmetric):
    ud = max_distance(symmetric(0.0), Scenario.SYMMETRIC, resolution_km=1e-4)
    gm = max_distance(symmetric(0.0), Scenario.SYMMETRIC, resolution_km=1e-4, protocol=RateProtocol.GM)
    assert ud == pytest.approx(6.9423, abs=1e-3)
    assert 0.001 < gm - ud < 0.003


def test_finite_size_max_distance_is_close_to_asymptotic(symmetric):
    cfg = symmetric(0.0)
    asymptotic = max_distance(cfg, Scenario.SYMMETRIC)
    finite = max_distance(cfg, Scenario.SYMMETRIC, fcfg=FiniteSizeConfig.from_fraction(10**9))
    assert 0.8 * asymptotic <= finite <= asymptotic


def test_max_distance_without_positive_rate(symmetric):
    noisy = symmetric(0.0, beta=0.5, excess_noise_a=1.0, excess_noise_b=1.0)
    with pytest.raises(NoRangeError):
        max_distance(noisy, Scenario.SYMMETRIC)


def test_finite_size_rates_are_ud_only(symmetric):
    with pytest.raises(DomainError):
        raw_key_rate_at(symmetric(0.0), 1.0, Scenario.SYMMETRIC, RateProtocol.GM, FiniteSizeConfig.from_fraction(10**6))


def test_physicality_table_layout():
    table = physicality_table([0.2, 0.8], [0.01, 0.05], [0.1, 0.5, 1.0])
    assert table.columns[0] == "eta_p"
    assert table.columns[1] == "eps_p_min[eta_x=0.2,eps_x=0.01] (SNU)"
    assert len(table.columns) == 5
    assert len(table.rows) == 3
    assert all(value >= 0 for row in table.rows for value in row[1:])


def test_gnuplot_script_references_the_csv(symmetric, tmp_path):
    table = run_sweep(_distance_spec(symmetric(0.0)))
    csv_path = tmp_path / "fig.csv"
    script = tmp_path / "fig.gp"
    table.to_csv(csv_path)
    write_gnuplot_script(table, csv_path, script, title="distance sweep")
    text = script.read_text(encoding="utf-8")
    assert "set datafile separator ','" in text
    assert "set logscale y" in text
    assert f"'{csv_path}' using 1:2" in text
    assert "plob" in text


def test_gnuplot_series_per_distance(tmp_path):
    spec = get_preset("fig4").model_copy(update={"values": [50.0, 100.0], "start": None, "stop": None, "step": None})
    table = run_sweep(spec)
    script = tmp_path / "fig4.gp"
    write_gnuplot_script(table, tmp_path / "fig4.csv", script, series=spec.distances)
    text = script.read_text(encoding="utf-8")
    assert "($2 == 5)" in text
    assert "set logscale" not in text


def test_figure_sweeps_match_their_shapes():
    fig6 = run_sweep(get_preset("fig6"))
    ud = fig6.column("key_rate_ud[beta=0.98] (bits/pulse)")
    gm = fig6.column("key_rate_gm[beta=0.98] (bits/pulse)")
    plob = fig6.column("plob (bits/pulse)")
    assert ud[0] > 0
    assert ud[-1] == 0.0
    assert all(u <= p for u, p in zip(ud, plob))
    assert all(g <= p for g, p in zip(gm, plob))

    fig8 = run_sweep(get_preset("fig8").model_copy(update={"stop": 4.0}))
    for row in fig8.as_dicts():
        finite = [row[f"key_rate_finite[beta=0.98,N={n:.0e}] (bits/pulse)"] for n in (1e6, 1e7, 1e8, 1e9)]
        assert all(b >= a for a, b in zip(finite, finite[1:]))
        assert finite[-1] <= 0.5 * row["key_rate_ud[beta=0.98] (bits/pulse)"] + 1e-15
    assert math.isinf(fig8.column("plob (bits/pulse)")[0])
