"""
Command-line front end for the entangled-pair measurement simulator.

Subcommands:
  correlate  analytic singlet correlation for axes z and n(alpha, beta)
  bell       three-axis Bell quantity, optionally with Monte Carlo estimates
  simulate   seeded trials -> trial CSV + count table JSON
  estimate   coincidence / replica estimators from a count table JSON
  fringe     double-slit fringe pattern CSV + visibility report JSON
  sweep      analytic and Monte Carlo correlation over an alpha grid (CSV)
  torque     signal-photon angular momentum after an L/R idler detection

Usage:
    python cli.py bell 0 45 90 --trials 1000000 --seed 7
    python cli.py simulate --alpha-b 60 --trials 100000 --out run.csv
    python cli.py estimate run.counts.json

Exit codes: 0 success, 1 I/O or internal failure, 2 invalid input.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from backend.config import (
    ALGEBRA_TOL,
    DEFAULT_FRINGE_POINTS,
    DEFAULT_SCREEN_SCALE,
    DEFAULT_SEED,
    DEFAULT_SLIT_SEPARATION,
    DEFAULT_TRIALS,
    DEFAULT_WAVELENGTH,
    MAX_SEED,
    TOOL_VERSION,
)
from backend.entangled_pair import (
    OUTCOMES,
    BellAxes,
    TwoQubitState,
    bell_quantity,
    joint_expectation,
    joint_probabilities,
    singlet,
)
from backend.measurement_sim import (
    CountTable,
    MeasurementModel,
    RunConfig,
    UndefinedEstimateError,
    balanced_marginals,
    coincidence_estimate,
    compare_tables,
    count_trials,
    derive_seed,
    empirical_correlation,
    replica_agreement,
    run_trials,
    trials_frame,
)
from backend.photon_optics import (
    SlitGeometry,
    far_field_pattern,
    polarization_slit_amplitudes,
    polarization_state,
    predicted_signal_angular_momentum,
    signal_amplitudes_after_idler,
    tem01_state,
    visibility,
    visibility_bound,
)
from backend.spin_algebra import Z_AXIS, Axis, theta_axis
from models import (
    CliConfig,
    ResultEnvelope,
    ensure_writable,
    read_json,
    sibling_path,
    write_envelope,
    write_frame,
)

logger = logging.getLogger(__name__)

MODEL_CHOICES = [m.value for m in MeasurementModel]


# ---------------------------------------------------------------------------
# Argument types
# ---------------------------------------------------------------------------
def _u64(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer {text!r}") from None
    if not 0 <= value <= MAX_SEED:
        raise argparse.ArgumentTypeError(f"must be an unsigned 64-bit integer, got {text}")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def _finite(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid number {text!r}") from None
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"must be finite, got {text}")
    return value


def _positive(text: str) -> float:
    value = _finite(text)
    if value <= 0.0:
        raise argparse.ArgumentTypeError(f"must be strictly positive, got {text}")
    return value


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------
def _config(args: argparse.Namespace, default_format: str = "json", **angles: float) -> CliConfig:
    return CliConfig(
        seed=args.seed,
        n_trials=args.trials if args.trials is not None else DEFAULT_TRIALS,
        model=args.model,
        output_format=args.format or default_format,
        output_path=args.out,
        angles_deg=angles,
    )


def _verdict(value: float, tol: float) -> str:
    if value > 1.0 + tol:
        return "violated"
    if value >= 1.0 - tol:
        return "boundary"
    return "not violated"


def _emit_table(command: str, frame: pd.DataFrame, parameters: Dict[str, Any], config: CliConfig) -> None:
    """Tables go out as CSV, or wrapped in an envelope when JSON is requested."""
    if config.output_format == "csv":
        write_frame(frame, config.output_path)
    else:
        envelope = ResultEnvelope(command, parameters, {"rows": frame.to_dict(orient="records")})
        write_envelope(envelope, config.output_path, "json")


def _pair_state(name: str, gamma_deg: float) -> TwoQubitState:
    if name == "singlet":
        return singlet()
    if name == "tem01":
        return tem01_state(math.radians(gamma_deg)).state
    if name == "polarization":
        return polarization_state()
    raise ValueError(f"Unknown state {name!r}")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------
def cmd_correlate(args: argparse.Namespace) -> ResultEnvelope:
    """Singlet correlation E(z, n) = -cos(alpha) and the four joint probabilities."""
    config = _config(args)
    axis_n = Axis.from_degrees(args.alpha, args.beta)
    state = singlet()
    value = joint_expectation(state, Z_AXIS, axis_n)
    envelope = ResultEnvelope(
        "correlate",
        {"alpha_deg": args.alpha, "beta_deg": args.beta, "state": "singlet"},
        {"value": value, "probabilities": joint_probabilities(state, Z_AXIS, axis_n).as_dict()},
    )
    write_envelope(envelope, config.output_path, config.output_format)
    logger.info(f"correlate alpha={args.alpha} beta={args.beta}: E={value:.12f}")
    return envelope


def cmd_bell(args: argparse.Namespace) -> ResultEnvelope:
    """Bell quantity |E12 - E13| - E23 for three yz-plane axes."""
    config = _config(args)
    axes = BellAxes(*(theta_axis(math.radians(a)) for a in args.angles))
    state = singlet()
    analytic = bell_quantity(state, axes)
    values: Dict[str, Any] = {
        "analytic": analytic,
        "analytic_verdict": _verdict(analytic, ALGEBRA_TOL),
        "pairwise_angles_deg": {k: math.degrees(v) for k, v in axes.pairwise_angles().items()},
    }
    parameters: Dict[str, Any] = {"angles_deg": list(args.angles), "state": "singlet"}

    if args.trials is not None:
        pairs = {"12": (axes.first, axes.second), "13": (axes.first, axes.third), "23": (axes.second, axes.third)}
        estimates = {}
        for k, (label, (x, y)) in enumerate(pairs.items()):
            run = RunConfig(derive_seed(config.seed, k), config.n_trials, config.model, (x, y))
            estimates[label] = empirical_correlation(count_trials(run, state, args.workers))
        value = abs(estimates["12"].value - estimates["13"].value) - estimates["23"].value
        std_error = math.sqrt(sum(e.std_error ** 2 for e in estimates.values()))
        values["monte_carlo"] = {
            "correlations": {k: e.as_dict() for k, e in estimates.items()},
            "value": value,
            "std_error": std_error,
            "verdict": "violated" if value > 1.0 else "not violated",
        }
        parameters.update({"seed": config.seed, "n_trials": config.n_trials, "model": config.model.value})

    envelope = ResultEnvelope("bell", parameters, values)
    write_envelope(envelope, config.output_path, config.output_format)
    logger.info(f"bell {list(args.angles)}: analytic={analytic:.9f} ({values['analytic_verdict']})")
    return envelope


def cmd_simulate(args: argparse.Namespace) -> ResultEnvelope:
    """Seeded trials: trial table to --out, count table envelope to --counts."""
    config = _config(
        args,
        default_format="csv",
        alpha_a_deg=args.alpha_a,
        beta_a_deg=args.beta_a,
        alpha_b_deg=args.alpha_b,
        beta_b_deg=args.beta_b,
    )
    run = config.run_config()
    state = _pair_state(args.state, args.gamma)
    if args.state != "singlet":
        logger.info(f"State '{args.state}': coincidence estimates are calibrated for the singlet only")

    records, table = run_trials(run, state, args.workers)
    parameters = {**run.to_dict(), "state": args.state, "gamma_deg": args.gamma}

    values: Dict[str, Any] = dict(table.to_dict())
    if args.compare:
        other = (
            MeasurementModel.NONLOCAL_COLLAPSE
            if run.model is MeasurementModel.LOCAL_INDEPENDENT
            else MeasurementModel.LOCAL_INDEPENDENT
        )
        other_seed = derive_seed(run.seed, 1)
        other_table = count_trials(RunConfig(other_seed, run.n_trials, other, run.axes), state, args.workers)
        values["comparison"] = {
            "model": other.value,
            "seed": other_seed,
            "counts": other_table.to_dict(),
            **compare_tables(table, other_table),
        }

    envelope = ResultEnvelope("simulate", parameters, values)
    counts_path = args.counts or sibling_path(config.output_path, ".counts.json", "counts.json")
    ensure_writable(config.output_path, counts_path)
    _emit_table("simulate", trials_frame(records, run.seed), parameters, config)
    write_envelope(envelope, counts_path, "json")
    logger.info(f"simulate: {run.n_trials} trials written, counts in {counts_path}")
    return envelope


def cmd_estimate(args: argparse.Namespace) -> ResultEnvelope:
    """Channel estimates, replica estimate and direct mean from a count table file."""
    config = _config(args)
    payload = read_json(args.counts)
    if isinstance(payload, dict) and isinstance(payload.get("values"), dict):
        payload = payload["values"]
    table = CountTable.from_dict(payload)

    channels: Dict[str, Any] = {}
    undefined: List[str] = []
    for outcome in OUTCOMES:
        try:
            channels[outcome.label] = coincidence_estimate(table, outcome.s_a, outcome.s_b).as_dict()
        except UndefinedEstimateError as e:
            logger.warning(f"estimate: {e}; channel reported as null")
            channels[outcome.label] = None
            undefined.append(outcome.label)
    # still raises when no channel leaves the replica defined
    agreement = replica_agreement(table)
    envelope = ResultEnvelope(
        "estimate",
        {"counts_path": args.counts, "counts": table.to_dict()},
        {
            "channels": channels,
            "undefined_channels": undefined,
            "replica": agreement["replica"],
            "direct": agreement["direct"],
            "difference": agreement["difference"],
            "combined_std_error": agreement["combined_std_error"],
            "agrees": agreement["agrees"],
            "balanced_marginals": balanced_marginals(table),
        },
    )
    write_envelope(envelope, config.output_path, config.output_format)
    logger.info(f"estimate: replica={agreement['replica']['value']:.6f} agrees={agreement['agrees']}")
    return envelope


def cmd_fringe(args: argparse.Namespace) -> ResultEnvelope:
    """Signal fringe pattern after an idler detection, plus the visibility report."""
    config = _config(args, default_format="csv")
    geom = SlitGeometry(args.slit_separation, args.wavelength, args.screen_scale)
    if args.experiment == "tem01":
        idler = args.idler or "l"
        amps = signal_amplitudes_after_idler(tem01_state(math.radians(args.gamma)), idler, config.model)
    else:
        idler = args.idler or "V"
        amps = polarization_slit_amplitudes(idler, config.model)
    pattern = far_field_pattern(amps, geom, args.points, args.span)

    parameters = {
        "experiment": args.experiment,
        "model": config.model.value,
        "idler_outcome": idler,
        "gamma_deg": args.gamma,
        "points": args.points,
        "span_m": float(pattern.positions[-1] - pattern.positions[0]),
        **geom.as_dict(),
    }
    report_path = args.report or sibling_path(config.output_path, ".visibility.json", "visibility.json")
    ensure_writable(config.output_path, report_path)
    _emit_table("fringe", pattern.to_frame(), parameters, config)

    values: Dict[str, Any] = {
        "model": config.model.value,
        "idler_outcome": idler,
        "visibility": visibility(amps),
        "gamma": math.radians(args.gamma),
        "extracted_visibility": pattern.extracted_visibility(),
        "fringe_period_m": geom.fringe_period,
        "amplitudes": amps.as_dict(),
    }
    if args.which_path is not None:
        values["which_path"] = args.which_path
        values["visibility_bound"] = visibility_bound(args.which_path, args.bound_form)
        values["bound_form"] = args.bound_form

    envelope = ResultEnvelope("fringe", parameters, values)
    write_envelope(envelope, report_path, "json")
    logger.info(f"fringe {args.experiment} model={config.model.value} idler={idler}: V={values['visibility']:.9f}")
    return envelope


def cmd_sweep(args: argparse.Namespace) -> ResultEnvelope:
    """Analytic and Monte Carlo singlet correlation over an alpha grid."""
    config = _config(args, default_format="csv")
    if args.steps < 2:
        raise ValueError(f"--steps must be at least 2, got {args.steps}")
    if args.alpha_min == args.alpha_max:
        raise ValueError("--alpha-min and --alpha-max must differ when --steps > 1")

    state = singlet()
    rows: List[Dict[str, float]] = []
    for i, alpha in enumerate(np.linspace(args.alpha_min, args.alpha_max, args.steps)):
        axis_n = Axis.from_degrees(float(alpha), args.beta)
        run = RunConfig(derive_seed(config.seed, i), config.n_trials, config.model, (Z_AXIS, axis_n))
        mc = empirical_correlation(count_trials(run, state, args.workers))
        rows.append({
            "alpha_deg": float(alpha),
            "analytic_E": joint_expectation(state, Z_AXIS, axis_n),
            "mc_E": mc.value,
            "mc_stderr": mc.std_error,
        })
    frame = pd.DataFrame(rows, columns=["alpha_deg", "analytic_E", "mc_E", "mc_stderr"])
    parameters = {
        "alpha_min_deg": args.alpha_min,
        "alpha_max_deg": args.alpha_max,
        "beta_deg": args.beta,
        "steps": args.steps,
        "seed": config.seed,
        "n_trials": config.n_trials,
        "model": config.model.value,
    }
    envelope = ResultEnvelope("sweep", parameters, {"rows": rows})
    if config.output_format == "csv":
        # the bare CSV carries no settings; they go to a companion envelope
        report_path = args.report or sibling_path(config.output_path, ".sweep.json", "sweep.json")
        ensure_writable(config.output_path, report_path)
        write_frame(frame, config.output_path)
        write_envelope(envelope, report_path, "json")
    else:
        write_envelope(envelope, config.output_path, "json")
    logger.info(f"sweep: {args.steps} rows, {config.n_trials} trials each")
    return envelope


def cmd_torque(args: argparse.Namespace) -> ResultEnvelope:
    """Signal angular momentum (units of hbar) after the idler was found L or R."""
    config = _config(args)
    prediction = predicted_signal_angular_momentum(args.idler, config.model)
    other = [m for m in MeasurementModel if m is not config.model][0]
    other_mean = predicted_signal_angular_momentum(args.idler, other).mean
    envelope = ResultEnvelope(
        "torque",
        {"idler_outcome": args.idler, "model": config.model.value},
        {
            **prediction.as_dict(),
            "other_model": other.value,
            "other_model_mean_hbar": other_mean,
            "discrimination_gap_hbar": abs(prediction.mean - other_mean),
        },
    )
    write_envelope(envelope, config.output_path, config.output_format)
    logger.info(f"torque idler={args.idler} model={config.model.value}: mean={prediction.mean:+.6f} hbar")
    return envelope


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_u64, default=DEFAULT_SEED, help="unsigned 64-bit RNG seed")
    common.add_argument("--trials", type=_positive_int, default=None, help=f"Monte Carlo trials (default {DEFAULT_TRIALS})")
    common.add_argument("--model", choices=MODEL_CHOICES, default=MeasurementModel.LOCAL_INDEPENDENT.value)
    common.add_argument("--out", default="-", help="output path, '-' for stdout")
    common.add_argument("--format", choices=["csv", "json"], default=None)
    common.add_argument("--workers", type=_positive_int, default=1, help="threads for block-parallel sampling")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", action="store_true")
    verbosity.add_argument("--quiet", action="store_true")

    parser = argparse.ArgumentParser(prog="cli.py", description="Entangled-pair measurement semantics simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {TOOL_VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("correlate", parents=[common], help="analytic singlet correlation")
    p.add_argument("--alpha", type=_finite, required=True, help="polar angle of n, degrees")
    p.add_argument("--beta", type=_finite, default=0.0, help="azimuth of n, degrees")
    p.set_defaults(handler=cmd_correlate)

    p = sub.add_parser("bell", parents=[common], help="three-axis Bell quantity")
    p.add_argument("angles", type=_finite, nargs=3, help="three yz-plane axis angles, degrees")
    p.set_defaults(handler=cmd_bell)

    p = sub.add_parser("simulate", parents=[common], help="seeded Monte Carlo run")
    p.add_argument("--state", choices=["singlet", "tem01", "polarization"], default="singlet")
    p.add_argument("--gamma", type=_finite, default=0.0, help="source phase of the tem01 pair, degrees")
    p.add_argument("--alpha-a", type=_finite, default=0.0)
    p.add_argument("--beta-a", type=_finite, default=0.0)
    p.add_argument("--alpha-b", type=_finite, default=0.0)
    p.add_argument("--beta-b", type=_finite, default=0.0)
    p.add_argument("--counts", default=None, help="count table JSON path (default <out stem>.counts.json)")
    p.add_argument("--compare", action="store_true", help="also run the other model and compare tables")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("estimate", parents=[common], help="estimators from a count table")
    p.add_argument("counts", help="count table JSON (envelope or bare table)")
    p.set_defaults(handler=cmd_estimate)

    p = sub.add_parser("fringe", parents=[common], help="double-slit fringe prediction")
    p.add_argument("--experiment", choices=["tem01", "polarization"], default="tem01")
    p.add_argument("--idler", choices=["u", "l", "H", "V"], default=None)
    p.add_argument("--gamma", type=_finite, default=0.0, help="source phase, degrees")
    p.add_argument("--which-path", type=_finite, default=None, help="which-path information D in [0, 1]")
    p.add_argument("--bound-form", choices=["linear", "quadratic"], default="linear")
    p.add_argument("--report", default=None, help="visibility report path (default <out stem>.visibility.json)")
    p.add_argument("--points", type=_positive_int, default=DEFAULT_FRINGE_POINTS)
    p.add_argument("--span", type=_positive, default=None, help="screen span in meters (default 4 periods)")
    p.add_argument("--slit-separation", type=_positive, default=DEFAULT_SLIT_SEPARATION)
    p.add_argument("--wavelength", type=_positive, default=DEFAULT_WAVELENGTH)
    p.add_argument("--screen-scale", type=_positive, default=DEFAULT_SCREEN_SCALE)
    p.set_defaults(handler=cmd_fringe)

    p = sub.add_parser("sweep", parents=[common], help="correlation over an alpha grid")
    p.add_argument("--alpha-min", type=_finite, default=0.0)
    p.add_argument("--alpha-max", type=_finite, default=180.0)
    p.add_argument("--beta", type=_finite, default=0.0)
    p.add_argument("--steps", type=int, default=7)
    p.add_argument("--report", default=None, help="sweep settings envelope path (default <out stem>.sweep.json)")
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("torque", parents=[common], help="signal angular momentum after an L/R idler")
    p.add_argument("--idler", choices=["L", "R"], required=True)
    p.set_defaults(handler=cmd_torque)

    return parser


def configure_logging(args: argparse.Namespace) -> None:
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    logging.getLogger().setLevel(level)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else 2
    configure_logging(args)

    try:
        args.handler(args)
        return 0
    except ValueError as ve:
        logger.warning(f"Validation error in {args.command}: {ve}")
        print(f"error: {ve}", file=sys.stderr)
        return 2
    except OSError as e:
        logger.error(f"I/O error in {args.command}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {args.command} failed: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
