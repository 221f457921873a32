import argparse
from typing import Any, Optional, Sequence

from pydantic import ValidationError

from .channel import links_for, physicality_check
from .config import RunConfig, load_run_config
from .exceptions import (
    AcceptanceError,
    ConfigurationError,
    ContractError,
    DomainError,
    EstimationFailure,
    NoRangeError,
    NumericalDomainError,
    PhysicalityError,
)
from .finite_size import finite_size_key_rate, model_estimate
from .keyrate import key_rate_symmetric_gm, key_rate_ud, optimize_modulation, plob_for
from .logging import build_log_extra, set_new_run_id, setup_logging
from .models import KeyRateResult, RateProtocol, Scenario, SweepVariable
from .oracle import estimate_from_samples, validate_estimators
from .presets import PRESETS, PhysicalityPreset, get_preset
from .sweep import SweepTable, max_distance, physicality_table, run_sweep, write_gnuplot_script

logger = setup_logging()

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_IO = 3


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run configuration")
    common.add_argument("--output", help="CSV output path (default: stdout)")
    common.add_argument("--seed", type=int, help="Master seed for Monte Carlo streams")
    common.add_argument("--scenario", choices=[s.value for s in Scenario], help="Charlie placement")
    common.add_argument(
        "--strict-eq7",
        "--strict-literal",
        dest="strict_literal",
        action="store_true",
        default=None,
        help="Use the literal 1/(eta_x eps_x) physicality correction term",
    )
    common.add_argument("--threads", type=int, help="Worker-pool width")
    common.add_argument("--gnuplot", help="Also write a gnuplot script plotting the CSV")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(
        prog="udmdi-qkd",
        description="Key rates, physicality checks and estimator validation for UD CV-MDI QKD.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keyrate", parents=[common], help="Key rate at a single operating point")
    p.add_argument("--distance", type=float, help="Total distance L in km")
    p.add_argument("--modulation-variance", type=float, help="V_m in shot-noise units")
    p.add_argument("--beta", type=float, help="Reconciliation efficiency")
    p.add_argument("--protocol", choices=[r.value for r in RateProtocol], default=RateProtocol.UD.value)
    p.add_argument("--optimize", action="store_true", help="Search the V_m maximising the UD rate")
    p.add_argument("--vm-min", type=float, default=1.0)
    p.add_argument("--vm-max", type=float, default=300.0)

    p = sub.add_parser("sweep", parents=[common], help="Sweep distance, V_m or block length")
    p.add_argument("--variable", choices=[v.value for v in SweepVariable])
    p.add_argument("--values", type=float, nargs="+")
    p.add_argument("--start", type=float)
    p.add_argument("--stop", type=float)
    p.add_argument("--step", type=float)
    p.add_argument("--betas", type=float, nargs="+")
    p.add_argument("--distances", type=float, nargs="+")
    p.add_argument("--block-lengths", type=int, nargs="+")

    p = sub.add_parser("max-distance", parents=[common], help="Largest distance with a positive rate")
    p.add_argument("--protocol", choices=[r.value for r in RateProtocol], default=RateProtocol.UD.value)
    p.add_argument("--beta", type=float)
    p.add_argument("--modulation-variance", type=float)
    p.add_argument("--block-length", type=int, help="Use the finite-size rate for this N")
    p.add_argument("--resolution", type=float, default=0.01, help="Bisection resolution in km")

    p = sub.add_parser("physicality", parents=[common], help="Check the unmodulated-quadrature constraint")
    p.add_argument("--eta-x", type=float, required=True)
    p.add_argument("--eps-x", type=float, required=True)
    p.add_argument("--eta-p", type=float, help="Omit to print the boundary curve over eta_p")
    p.add_argument("--eps-p", type=float)

    p = sub.add_parser("finite-size", parents=[common], help="Finite-size key rate")
    p.add_argument("--distance", type=float)
    p.add_argument("--block-length", type=int)
    p.add_argument("--key-fraction", type=float)
    p.add_argument(
        "--simulate-estimation",
        action="store_true",
        help="Estimate the channel from sampled data instead of the model values",
    )

    p = sub.add_parser("mc-validate", parents=[common], help="Monte Carlo check of the estimator statistics")
    p.add_argument("--trials", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--eps-pe", type=float)
    p.add_argument("--corrupt-estimator", action="store_true", help=argparse.SUPPRESS)

    p = sub.add_parser("reproduce", parents=[common], help="Run a figure preset")
    p.add_argument("preset", choices=sorted(PRESETS))
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    def get(name: str) -> Any:
        return getattr(args, name, None)

    overrides = {
        "protocol.scenario": get("scenario"),
        "protocol.strict_literal": get("strict_literal"),
        "protocol.distance_km": get("distance"),
        "protocol.modulation_variance": get("modulation_variance"),
        "protocol.beta": get("beta"),
        "finite_size.block_length": get("block_length"),
        "finite_size.key_fraction": get("key_fraction"),
        "oracle.trials": get("trials"),
        "oracle.samples": get("samples"),
        "oracle.eps_pe": get("eps_pe"),
        "threads": get("threads"),
        "seed": get("seed"),
    }
    if args.command == "sweep":
        for key in ("variable", "values", "start", "stop", "step", "betas", "distances", "block_lengths"):
            overrides[f"sweep.{key}"] = get(key)
    return overrides


def _emit(table: SweepTable, args: argparse.Namespace, title: Optional[str] = None, **gnuplot: Any) -> None:
    if args.gnuplot and not args.output:
        raise ConfigurationError("--gnuplot needs --output so the script can reference the CSV")
    table.to_csv(args.output)
    if args.gnuplot:
        write_gnuplot_script(table, args.output, args.gnuplot, title=title, **gnuplot)


def _result_table(result: KeyRateResult, distance_km: float, modulation_variance: float, plob: float) -> SweepTable:
    ch = result.equivalent_channel
    columns = [
        "distance (km)",
        "modulation_variance (SNU)",
        "protocol",
        "beta",
        "key_rate (bits/pulse)",
        "raw_key_rate (bits/pulse)",
        "mutual_info (bits)",
        "holevo (bits)",
        "entropy_joint (bits)",
        "entropy_conditional (bits)",
        "lambda1",
        "lambda2",
        "lambda3",
        "t_x",
        "eps_prime_x (SNU)",
        "t_p",
        "eps_prime_p (SNU)",
        "gain_sq",
        "correction (bits)",
        "key_fraction",
        "plob (bits/pulse)",
    ]
    row = [
        distance_km,
        modulation_variance,
        result.protocol.value,
        result.beta,
        result.key_rate,
        result.raw_key_rate,
        result.mutual_info,
        result.holevo,
        result.entropy_joint,
        result.entropy_conditional,
        result.lambda1,
        result.lambda2,
        result.lambda3,
        ch.t_x,
        ch.eps_prime_x,
        ch.t_p,
        ch.eps_prime_p,
        ch.gain_sq,
        result.correction,
        result.key_fraction,
        plob,
    ]
    return SweepTable(columns=columns, rows=[row], variable=None)


def _cmd_keyrate(run: RunConfig, args: argparse.Namespace) -> int:
    section = run.protocol
    cfg = section.to_protocol()
    strict = section.strict_literal
    if args.optimize:
        optimum = optimize_modulation(cfg, args.vm_min, args.vm_max, strict)
        table = SweepTable(
            columns=["distance (km)", "modulation_variance (SNU)", "key_rate (bits/pulse)", "all_zero"],
            rows=[[section.distance_km, optimum.modulation_variance, optimum.key_rate, optimum.all_zero]],
            variable=None,
        )
        _emit(table, args)
        return EXIT_OK
    if RateProtocol(args.protocol) is RateProtocol.GM:
        result = key_rate_symmetric_gm(cfg, strict)
    else:
        result = key_rate_ud(cfg, strict)
    _emit(_result_table(result, section.distance_km, cfg.modulation_variance, plob_for(cfg)), args)
    return EXIT_OK


def _cmd_sweep(run: RunConfig, args: argparse.Namespace) -> int:
    spec = run.sweep_spec(output=args.output)
    table = run_sweep(spec, threads=run.threads)
    series = spec.distances if spec.variable is not SweepVariable.DISTANCE else ()
    _emit(table, args, series=series)
    return EXIT_OK


def _cmd_max_distance(run: RunConfig, args: argparse.Namespace) -> int:
    section = run.protocol
    cfg = section.to_protocol()
    fcfg = run.finite_size.to_config() if args.block_length else None
    protocol = RateProtocol(args.protocol)
    distance = max_distance(cfg, section.scenario, args.resolution, protocol, fcfg, section.strict_literal)
    table = SweepTable(
        columns=["scenario", "protocol", "beta", "block_length (signals)", "max_distance (km)"],
        rows=[[section.scenario.value, protocol.value, cfg.beta, fcfg.block_length if fcfg else None, distance]],
        variable=None,
    )
    _emit(table, args)
    return EXIT_OK


def _cmd_physicality(run: RunConfig, args: argparse.Namespace) -> int:
    strict = run.protocol.strict_literal
    if args.eta_p is None or args.eps_p is None:
        grid = [args.eta_p] if args.eta_p is not None else PhysicalityPreset(name="cli").eta_p_grid
        _emit(physicality_table([args.eta_x], [args.eps_x], grid, strict), args, y_label="eps_p (SNU)")
        return EXIT_OK
    verdict = physicality_check(args.eta_x, args.eps_x, args.eta_p, args.eps_p, strict)
    table = SweepTable(
        columns=["eta_x", "eps_x (SNU)", "eta_p", "eps_p (SNU)", "lhs", "rhs", "physical"],
        rows=[[args.eta_x, args.eps_x, args.eta_p, args.eps_p, verdict.lhs, verdict.rhs, verdict.physical]],
        variable=None,
    )
    _emit(table, args)
    return EXIT_OK


def _cmd_finite_size(run: RunConfig, args: argparse.Namespace) -> int:
    section = run.protocol
    cfg = section.to_protocol()
    fcfg = run.finite_size.to_config()
    links = links_for(cfg)
    if args.simulate_estimation:
        est = estimate_from_samples(links, cfg.modulation_variance, fcfg, run.seed)
    else:
        est = model_estimate(links, cfg.modulation_variance, fcfg)
    result = finite_size_key_rate(cfg, fcfg, est, section.strict_literal)
    table = _result_table(result, section.distance_km, cfg.modulation_variance, plob_for(cfg))
    table.columns = ["block_length (signals)", "key_length (signals)"] + table.columns + [
        "t_hat_a",
        "t_hat_b",
        "sigma2_hat_a (SNU)",
        "sigma2_hat_b (SNU)",
        "delta_t_a",
        "delta_t_b",
        "delta_sigma2_a (SNU)",
        "delta_sigma2_b (SNU)",
    ]
    table.rows[0] = [fcfg.block_length, fcfg.key_length] + table.rows[0] + [
        est.t_hat_a,
        est.t_hat_b,
        est.sigma2_hat_a,
        est.sigma2_hat_b,
        est.delta_t_a,
        est.delta_t_b,
        est.delta_sigma2_a,
        est.delta_sigma2_b,
    ]
    _emit(table, args)
    return EXIT_OK


def _cmd_mc_validate(run: RunConfig, args: argparse.Namespace) -> int:
    oracle = run.oracle
    report = validate_estimators(
        trials=oracle.trials,
        m=oracle.samples,
        modulation_variance=oracle.modulation_variance,
        t_true=oracle.transmission,
        sigma2_true=oracle.noise_variance,
        eps_pe=oracle.eps_pe,
        seed=run.seed,
        threads=run.threads,
        tolerance_sigmas=oracle.tolerance_sigmas,
        residuals="printed" if args.corrupt_estimator else "squared",
    )
    table = SweepTable(
        columns=["statistic", "observed", "expected", "tolerance", "passed"],
        rows=[[c.name, c.observed, c.expected, c.tolerance, c.passed] for c in report.checks],
        variable=None,
    )
    _emit(table, args)
    failing = report.failing()
    if failing:
        names = ", ".join(check.name for check in failing)
        raise AcceptanceError(f"estimator checks failed: {names}", statistic=failing[0].name)
    return EXIT_OK


def _cmd_reproduce(run: RunConfig, args: argparse.Namespace) -> int:
    preset = get_preset(args.preset)
    if isinstance(preset, PhysicalityPreset):
        strict = preset.strict or run.protocol.strict_literal
        table = physicality_table(preset.eta_x_values, preset.eps_x_values, preset.eta_p_grid, strict)
        _emit(table, args, title=preset.name, y_label="eps_p (SNU)")
        return EXIT_OK
    if run.protocol.strict_literal:
        preset = preset.model_copy(update={"strict_literal": True})
    table = run_sweep(preset, threads=run.threads)
    series = preset.distances if preset.variable is not SweepVariable.DISTANCE else ()
    _emit(table, args, title=preset.name, series=series)
    return EXIT_OK


_COMMANDS = {
    "keyrate": _cmd_keyrate,
    "sweep": _cmd_sweep,
    "max-distance": _cmd_max_distance,
    "physicality": _cmd_physicality,
    "finite-size": _cmd_finite_size,
    "mc-validate": _cmd_mc_validate,
    "reproduce": _cmd_reproduce,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one CLI command and return its exit code.

    0 on success, 1 for statistical, physical or acceptance failures, 2 for
    configuration and input-domain errors, 3 for I/O errors.
    """
    args = build_parser().parse_args(argv)
    set_new_run_id()
    extra = build_log_extra(module_name="cli", operation=args.command)
    try:
        run = load_run_config(args.config, _overrides(args))
        logger.info("command started", extra=extra)
        code = _COMMANDS[args.command](run, args)
        logger.info("command finished", extra=extra)
        return code
    except (ConfigurationError, ValidationError, DomainError, ContractError) as exc:
        logger.error("Configuration error: %s", exc, extra=extra)
        return EXIT_CONFIG
    except AcceptanceError as exc:
        logger.error("Acceptance check failed: %s", exc, extra={**extra, "statistic": exc.statistic})
        return EXIT_FAILED
    except (PhysicalityError, NumericalDomainError, EstimationFailure, NoRangeError) as exc:
        logger.error("Computation failed: %s", exc, extra=extra)
        return EXIT_FAILED
    except OSError as exc:
        logger.error("I/O error: %s", exc, extra=extra)
        return EXIT_IO


if __name__ == "__main__":
    raise SystemExit(main())
