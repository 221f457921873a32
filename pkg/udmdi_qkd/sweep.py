"""
Parameter sweeps, maximum-distance search and CSV / gnuplot emission.
"""
import contextvars
import csv
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

from .channel import physicality_boundary
from .exceptions import AcceptanceError, DomainError, EstimationFailure, NoRangeError, PhysicalityError
from .finite_size import finite_size_key_rate
from .keyrate import key_rate_symmetric_gm, key_rate_ud, plob_for
from .logging import build_log_extra, ensure_run_id, setup_logging
from .models import FiniteSizeConfig, ProtocolConfig, RateProtocol, Scenario, SweepSpec, SweepVariable
from .utils import format_float

logger = setup_logging()

# Rates may exceed PLOB by rounding only
PLOB_SLACK = 1e-12
_MAX_BRACKET_KM = 10_000.0

_SWEPT_COLUMN = {
    SweepVariable.DISTANCE: "distance (km)",
    SweepVariable.MODULATION_VARIANCE: "modulation_variance (SNU)",
    SweepVariable.BLOCK_LENGTH: "block_length (signals)",
}
DISTANCE_COLUMN = _SWEPT_COLUMN[SweepVariable.DISTANCE]
RATE_UNIT = "(bits/pulse)"


def _beta_label(beta: float) -> str:
    return f"{beta:g}"


def _block_label(n: int) -> str:
    return f"{n:.0e}"


@dataclass
class SweepTable:
    columns: list[str]
    rows: list[list[Any]] = field(default_factory=list)
    variable: Optional[SweepVariable] = SweepVariable.DISTANCE
    rate_columns: list[str] = field(default_factory=list)

    def column(self, name: str) -> list[Any]:
        index = self.columns.index(name)
        return [row[index] for row in self.rows]

    def as_dicts(self) -> list[dict[str, Any]]:
        return [dict(zip(self.columns, row)) for row in self.rows]

    def _format(self, value: Any) -> str:
        if isinstance(value, bool):
            return "true" if value else "false"
        if isinstance(value, int):
            return str(value)
        if isinstance(value, float) or value is None:
            return format_float(value)
        return str(value)

    def to_csv(self, path: Optional[str | Path] = None) -> None:
        """Write the table to ``path``, or to stdout when no path is given."""
        if path is None:
            self._write(sys.stdout)
            return
        with open(path, "w", newline="", encoding="utf-8") as fh:
            self._write(fh)

    def _write(self, fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([self._format(value) for value in row])


def raw_key_rate_at(
    cfg: ProtocolConfig,
    distance_km: float,
    scenario: Scenario,
    protocol: RateProtocol = RateProtocol.UD,
    fcfg: Optional[FiniteSizeConfig] = None,
    strict: bool = False,
) -> float:
    """Signed (unclamped) rate at ``distance_km``; finite-size when ``fcfg`` is given."""
    point = cfg.at_distance(scenario, distance_km)
    if fcfg is not None:
        if RateProtocol(protocol) is not RateProtocol.UD:
            raise DomainError("finite-size rates are defined for the UD protocol only")
        return finite_size_key_rate(point, fcfg, strict=strict).raw_key_rate
    if RateProtocol(protocol) is RateProtocol.GM:
        return key_rate_symmetric_gm(point, strict).raw_key_rate
    return key_rate_ud(point, strict).raw_key_rate


def max_distance(
    cfg: ProtocolConfig,
    scenario: Scenario,
    resolution_km: float = 0.01,
    protocol: RateProtocol = RateProtocol.UD,
    fcfg: Optional[FiniteSizeConfig] = None,
    strict: bool = False,
) -> float:
    """
    Largest distance with a positive key rate, by bisection on the signed rate.

    The returned distance has a positive rate and lies within ``resolution_km`` of the
    zero crossing. Raises ``NoRangeError`` when the rate is not positive at L = 0.
    """
    if resolution_km <= 0:
        raise DomainError(f"resolution must be > 0, got {resolution_km!r}")

    def signed(length: float) -> float:
        try:
            return raw_key_rate_at(cfg, length, scenario, protocol, fcfg, strict)
        except EstimationFailure:
            return -math.inf

    if signed(0.0) <= 0:
        raise NoRangeError("key rate is not positive at zero distance")
    lo, hi = 0.0, 1.0
    while signed(hi) > 0:
        lo, hi = hi, hi * 2
        if hi > _MAX_BRACKET_KM:
            raise NoRangeError(f"key rate is still positive at {lo:g} km; no cutoff found")
    while hi - lo > resolution_km:
        mid = 0.5 * (lo + hi)
        if signed(mid) > 0:
            lo = mid
        else:
            hi = mid
    logger.info(
        "maximum distance found",
        extra=build_log_extra(
            module_name="sweep",
            operation="max_distance",
            scenario=Scenario(scenario).value,
            distance_km=lo,
            protocol=RateProtocol(protocol).value,
            block_length=fcfg.block_length if fcfg else None,
        ),
    )
    return lo


def _columns(spec: SweepSpec) -> tuple[list[str], list[str]]:
    columns = [_SWEPT_COLUMN[spec.variable]]
    if spec.variable is not SweepVariable.DISTANCE:
        columns.append(DISTANCE_COLUMN)
    rates: list[str] = []
    for beta in spec.betas:
        b = _beta_label(beta)
        rates.append(f"key_rate_ud[beta={b}] {RATE_UNIT}")
        if spec.include_gm:
            rates.append(f"key_rate_gm[beta={b}] {RATE_UNIT}")
        if spec.variable is SweepVariable.BLOCK_LENGTH:
            rates.append(f"key_rate_finite[beta={b}] {RATE_UNIT}")
        for n in spec.block_lengths:
            rates.append(f"key_rate_finite[beta={b},N={_block_label(n)}] {RATE_UNIT}")
    columns += rates
    columns += [f"plob {RATE_UNIT}", "mutual_info (bits)", "holevo (bits)", "physical"]
    return columns, rates


def _finite_rate(cfg: ProtocolConfig, spec: SweepSpec, block_length: int) -> float:
    fcfg = spec.finite_size.model_copy(
        update={
            "block_length": int(block_length),
            "key_length": int(round(block_length * spec.finite_size.key_fraction)),
        }
    )
    try:
        return finite_size_key_rate(cfg, fcfg, strict=spec.strict_literal).key_rate
    except EstimationFailure:
        return 0.0


def _evaluate_point(spec: SweepSpec, x: float, distance: Optional[float]) -> list[Any]:
    variable = spec.variable
    distance_km = x if variable is SweepVariable.DISTANCE else distance
    cfg = spec.protocol.at_distance(spec.scenario, distance_km)
    if variable is SweepVariable.MODULATION_VARIANCE:
        cfg = cfg.model_copy(update={"modulation_variance": x})

    row: list[Any] = [int(x) if variable is SweepVariable.BLOCK_LENGTH else x]
    if variable is not SweepVariable.DISTANCE:
        row.append(distance_km)
    mutual_info = holevo = None
    physical = True
    rates: list[Optional[float]] = []
    try:
        for beta in spec.betas:
            at_beta = cfg.model_copy(update={"beta": beta})
            ud = key_rate_ud(at_beta, spec.strict_literal)
            mutual_info, holevo = ud.mutual_info, ud.holevo
            rates.append(ud.key_rate)
            if spec.include_gm:
                rates.append(key_rate_symmetric_gm(at_beta, spec.strict_literal).key_rate)
            if variable is SweepVariable.BLOCK_LENGTH:
                rates.append(_finite_rate(at_beta, spec, int(x)))
            for n in spec.block_lengths:
                rates.append(_finite_rate(at_beta, spec, n))
    except PhysicalityError as exc:
        physical = False
        rates = [None] * len(_columns(spec)[1])
        logger.warning(
            "nonphysical grid point",
            extra=build_log_extra(
                module_name="sweep",
                operation="run_sweep",
                scenario=spec.scenario.value,
                distance_km=distance_km,
                modulation_variance=cfg.modulation_variance,
                link=exc.link,
            ),
        )

    plob = plob_for(cfg)
    for rate in rates:
        if rate is not None and rate > plob + PLOB_SLACK:
            raise AcceptanceError(
                f"key rate {rate:.10g} exceeds the PLOB bound {plob:.10g} at {distance_km} km",
                statistic="plob_dominance",
            )
    return row + rates + [plob, mutual_info, holevo, physical]


def run_sweep(spec: SweepSpec, threads: int = 1) -> SweepTable:
    """
    Evaluate every grid point of ``spec``; one row per (series distance, grid value).

    Nonphysical points are kept as rows flagged ``physical=false``. Rows come out in
    grid order whatever the worker count.
    """
    ensure_run_id()
    columns, rate_columns = _columns(spec)
    points = [(x, d) for d in spec.series for x in spec.grid]
    logger.info(
        "sweep started",
        extra=build_log_extra(
            module_name="sweep",
            operation="run_sweep",
            scenario=spec.scenario.value,
            preset=spec.name,
            variable=spec.variable.value,
            points=len(points),
            threads=threads,
        ),
    )

    def evaluate(point: tuple[float, Optional[float]]) -> list[Any]:
        return _evaluate_point(spec, *point)

    if threads > 1 and len(points) > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            futures = [executor.submit(contextvars.copy_context().run, evaluate, point) for point in points]
            rows = [fut.result() for fut in futures]
    else:
        rows = [evaluate(point) for point in points]

    table = SweepTable(columns=columns, rows=rows, variable=spec.variable, rate_columns=rate_columns)
    if rows and not any(table.column("physical")):
        logger.warning(
            "no grid point is physical",
            extra=build_log_extra(module_name="sweep", operation="run_sweep", preset=spec.name),
        )
    return table


def physicality_table(
    eta_x_values: Sequence[float],
    eps_x_values: Sequence[float],
    eta_p_grid: Sequence[float],
    strict: bool = False,
) -> SweepTable:
    """Minimum physical eps_p along ``eta_p_grid``, one column per (eta_x, eps_x) pair."""
    families = [(eta_x, eps_x) for eps_x in eps_x_values for eta_x in eta_x_values]
    boundary_columns = [f"eps_p_min[eta_x={eta_x:g},eps_x={eps_x:g}] (SNU)" for eta_x, eps_x in families]
    rows = [
        [eta_p] + [physicality_boundary(eta_x, eps_x, eta_p, strict) for eta_x, eps_x in families]
        for eta_p in eta_p_grid
    ]
    return SweepTable(columns=["eta_p"] + boundary_columns, rows=rows, variable=None, rate_columns=boundary_columns)


def write_gnuplot_script(
    table: SweepTable,
    csv_path: str | Path,
    script_path: str | Path,
    title: Optional[str] = None,
    series: Sequence[float] = (),
    y_label: str = f"key rate {RATE_UNIT}",
) -> None:
    """
    Emit a gnuplot script that plots every rate column of ``csv_path`` against the
    swept variable, one curve per fixed distance when ``series`` is given.
    """
    x_label = table.columns[0]
    lines = [
        "set datafile separator ','",
        f"set title '{title or Path(csv_path).stem}'",
        f"set xlabel '{x_label}'",
        f"set ylabel '{y_label}'",
        "set key outside right",
    ]
    if table.variable in (SweepVariable.DISTANCE, SweepVariable.BLOCK_LENGTH):
        lines.append("set logscale y")
    if table.variable is SweepVariable.BLOCK_LENGTH:
        lines.append("set logscale x")

    curves = []
    plotted = table.rate_columns + [name for name in table.columns if name.startswith("plob ")]
    for name in plotted:
        col = table.columns.index(name) + 1
        label = name.replace(f" {RATE_UNIT}", "")
        if series:
            for d in series:
                curves.append(
                    f"'{csv_path}' using 1:(($2 == {d:g}) ? column({col}) : 1/0) "
                    f"with lines title '{label} @ {d:g} km'"
                )
        else:
            curves.append(f"'{csv_path}' using 1:{col} with lines title '{label}'")
    lines.append("plot " + ", \\\n     ".join(curves))
    with open(script_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
