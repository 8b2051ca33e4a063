"""Command-line workflows for the virtual bench.

One subcommand per workflow: ``scan`` sweeps the analyzers and writes a count
table plus plot data, ``bell`` runs (or analyzes) a 16-setting CHSH
measurement, ``diagnose`` characterizes the source from four counts, ``fit``
recovers count-model parameters from a scan, ``tune`` runs the automated
alignment controller, and ``serve`` starts the wire API for the browser UI.

Every command with an explicit ``--seed`` is bit-reproducible.  Exit codes:
0 success, 2 validation error, 3 runtime/convergence failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import sys

from bellbench.apparatus import (ApparatusConfig, LiveSession,
                                 SessionBusyError, SourceState,
                                 mean_coincidences, run_protocol)
from bellbench.estimation import (ChshRun, FitConvergenceError, chsh_settings,
                                  compute_S, diagnose_state, fit_nmodel, tune)
from bellbench.qm import CANONICAL_ANGLES, ChshAngles
from bellbench.session_io import (SCHEMA_VERSION, content_digest, dumps,
                                  load_config, load_counts, save_counts,
                                  save_result, result_to_payload,
                                  simulation_digest)

__all__ = ["main", "main_entry"]

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3
EXIT_IO = 4


class ConvergenceFailure(RuntimeError):
    """A controller or solver ran out of budget before converging."""


# --------------------------------------------------------------------------
# shared argument plumbing


def _add_bench_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="FILE",
                        help="bench-config JSON (defaults: ideal-ish bench)")
    parser.add_argument("--seed", type=int, metavar="N",
                        help="override the apparatus RNG seed")


def _load_bench(args) -> tuple[ApparatusConfig, SourceState, ChshAngles]:
    if args.config:
        apparatus, source, angles = load_config(args.config)
    else:
        apparatus, source, angles = (ApparatusConfig(), SourceState(),
                                     CANONICAL_ANGLES)
    if args.seed is not None:
        apparatus = dataclasses.replace(apparatus, rng_seed=args.seed)
    if getattr(args, "angles", None):
        angles = _parse_angles(args.angles)
    return apparatus, source, angles


def _parse_angles(text: str) -> ChshAngles:
    parts = text.split(",")
    if len(parts) != 4:
        raise ValueError(
            f"--angles needs four comma-separated degrees a,a',b,b', got {text!r}")
    try:
        a, a_prime, b, b_prime = (float(p) for p in parts)
    except ValueError:
        raise ValueError(f"--angles: not a number in {text!r}") from None
    return ChshAngles(a=a, a_prime=a_prime, b=b, b_prime=b_prime)


def _parse_float_list(text: str, flag: str) -> list[float]:
    try:
        values = [float(p) for p in text.split(",") if p.strip() != ""]
    except ValueError:
        raise ValueError(f"{flag}: not a number in {text!r}") from None
    if not values:
        raise ValueError(f"{flag}: empty list")
    return values


def _positive_duration(value: float) -> float:
    if value <= 0:
        raise ValueError(f"duration must be > 0 seconds, got {value:g}")
    return value


# --------------------------------------------------------------------------
# scan


def cmd_scan(args) -> int:
    apparatus, source, _ = _load_bench(args)
    alphas = _parse_float_list(args.alphas, "--alphas")
    if args.beta_step <= 0:
        raise ValueError(f"--beta-step must be > 0, got {args.beta_step:g}")
    if args.beta_stop < args.beta_start:
        raise ValueError("--beta-stop must be >= --beta-start")
    duration = _positive_duration(args.duration)
    n_steps = int(math.floor(
        (args.beta_stop - args.beta_start) / args.beta_step + 1e-9)) + 1
    betas = [args.beta_start + i * args.beta_step for i in range(n_steps)]

    settings = [(alpha, beta) for alpha in alphas for beta in betas]
    records = run_protocol(apparatus, source, settings, duration)
    save_counts(records, args.out)
    print(f"wrote {len(records)} records "
          f"({len(alphas)} alpha values x {len(betas)} beta steps) "
          f"to {args.out}")

    if args.plot_data:
        by_alpha = {}
        for record in records:
            by_alpha.setdefault(record.alpha, []).append(record)
        series = []
        for alpha in alphas:
            points = [{
                "beta": r.beta,
                "n_coinc": r.n_coinc,
                "error": math.sqrt(r.n_coinc),
                "model": mean_coincidences(apparatus, source, r.alpha,
                                           r.beta, duration),
            } for r in by_alpha[alpha]]
            series.append({"alpha": alpha, "points": points})
        payload = {"schema_version": SCHEMA_VERSION, "kind": "scan_plot",
                   "duration_s": duration, "series": series}
        try:
            with open(args.plot_data, "w", encoding="utf-8",
                      newline="") as handle:
                handle.write(dumps(payload))
        except OSError as err:
            raise OSError(
                f"cannot write plot data {args.plot_data}: {err}") from None
        print(f"wrote plot data to {args.plot_data}")
    return EXIT_OK


# --------------------------------------------------------------------------
# bell


def _angle_label(value: float) -> str:
    return f"{value:g}°"


def cmd_bell(args) -> int:
    apparatus, source, angles = _load_bench(args)
    if args.counts:
        try:
            with open(args.counts, "rb") as handle:
                raw = handle.read()
        except OSError as err:
            raise OSError(f"cannot read counts file {args.counts}: {err}"
                          ) from None
        digest = content_digest(raw)
        records = load_counts(args.counts)
        run = ChshRun.from_records(records, angles)
    else:
        duration = _positive_duration(args.duration)
        records = run_protocol(apparatus, source, chsh_settings(angles),
                               duration)
        digest = simulation_digest(apparatus, source, angles, duration)
        run = ChshRun(tuple(records), angles)
        if args.counts_out:
            save_counts(records, args.counts_out)
            print(f"wrote counts to {args.counts_out}")

    result = compute_S(run, add_one_smoothing=args.add_one_smoothing)
    print(f"settings: a = {_angle_label(angles.a)}, "
          f"a' = {_angle_label(angles.a_prime)}, "
          f"b = {_angle_label(angles.b)}, "
          f"b' = {_angle_label(angles.b_prime)}")
    print(f"E(a , b ) = {result.e_ab:+.6f}")
    print(f"E(a , b') = {result.e_abp:+.6f}")
    print(f"E(a', b ) = {result.e_apb:+.6f}")
    print(f"E(a', b') = {result.e_apbp:+.6f}")
    print(f"S = {result.s_value:.6f} ± {result.sigma_s:.6f}")
    if abs(result.s_value) > 2:
        print(f"verdict: |S| > 2 — violates the CHSH bound "
              f"by {result.significance:.2f} standard deviations")
    else:
        print("verdict: |S| <= 2 — consistent with local hidden variables")
    if args.out:
        save_result(result, args.out, inputs_digest=digest)
        print(f"wrote result to {args.out}")
    return EXIT_OK


# --------------------------------------------------------------------------
# diagnose


def cmd_diagnose(args) -> int:
    diag = diagnose_state(args.n00, args.n9090, args.n090, args.n4545)
    print(f"C (offset)     = {diag.c_offset:g}")
    print(f"A (amplitude)  = {diag.a_pairs:g}")
    print(f"theta_l = {diag.theta_l:.2f}°")
    print(f"phi_m   = {diag.phi_m:.2f}°  (cos phi_m = {diag.cos_phi_m:.4f})")
    if diag.clamped:
        print("warning: interference count out of range; "
              "cos phi_m clamped to [-1, 1]", file=sys.stderr)
    if args.out:
        save_result(diag, args.out)
        print(f"wrote diagnostics to {args.out}")
    return EXIT_OK


# --------------------------------------------------------------------------
# fit


def cmd_fit(args) -> int:
    try:
        with open(args.counts, "rb") as handle:
            raw = handle.read()
    except OSError as err:
        raise OSError(f"cannot read counts file {args.counts}: {err}"
                      ) from None
    records = load_counts(args.counts)
    result = fit_nmodel(records, fit_beta_shift=args.beta_shift)
    payload = result_to_payload(result, inputs_digest=content_digest(raw))
    sys.stdout.write(dumps(payload))
    if args.out:
        save_result(result, args.out, inputs_digest=content_digest(raw))
    return EXIT_OK


# --------------------------------------------------------------------------
# tune


def cmd_tune(args) -> int:
    apparatus, source, _ = _load_bench(args)
    if args.budget < 0:
        raise ValueError(f"--budget must be >= 0, got {args.budget}")
    if args.duration is not None:
        _positive_duration(args.duration)
    session = LiveSession(apparatus, source)
    result = tune(session, args.budget, duration_s=args.duration)
    print(f"acquisitions used: {result.acquisitions_used} / {args.budget}")
    print(f"theta_l dial = {result.theta_l_setting:.3f}°")
    print(f"phi_l dial   = {result.phi_l_setting:.3f}°")
    if result.diagnostics is not None:
        diag = result.diagnostics
        print(f"diagnostics: C = {diag.c_offset:.1f}, "
              f"A = {diag.a_pairs:.1f}, "
              f"theta_l = {diag.theta_l:.2f}°, "
              f"phi_m = {diag.phi_m:.2f}°")
    if args.out:
        if result.diagnostics is None:
            raise ConvergenceFailure(
                "no diagnostics to write: tuning did not converge")
        save_result(result.diagnostics, args.out)
        print(f"wrote diagnostics to {args.out}")
    if not result.converged:
        raise ConvergenceFailure(
            f"tuning did not converge within {args.budget} acquisitions")
    print("converged")
    return EXIT_OK


# --------------------------------------------------------------------------
# serve


def cmd_serve(args) -> int:
    import uvicorn

    from bellbench.server import create_app
    uvicorn.run(create_app(), host=args.host, port=args.port,
                log_level="warning")
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bellbench",
        description="Virtual entangled-photon bench: simulate, analyze, "
                    "and serve CHSH Bell-test measurements.")
    sub = parser.add_subparsers(dest="command", required=True)

    scan = sub.add_parser(
        "scan", help="sweep analyzer B for several analyzer-A settings")
    _add_bench_args(scan)
    scan.add_argument("--alphas", default="0,45,90,135", metavar="LIST",
                      help="comma-separated analyzer-A angles (degrees)")
    scan.add_argument("--beta-start", type=float, default=0.0, metavar="DEG")
    scan.add_argument("--beta-stop", type=float, default=350.0, metavar="DEG",
                      help="inclusive sweep end")
    scan.add_argument("--beta-step", type=float, default=10.0, metavar="DEG")
    scan.add_argument("--duration", type=float, default=15.0, metavar="S",
                      help="counting interval per setting (seconds)")
    scan.add_argument("--out", default="scan.csv", metavar="FILE",
                      help="count-table CSV output path")
    scan.add_argument("--plot-data", metavar="FILE",
                      help="also write plot-ready JSON (series with sqrt-N "
                           "error bars and model means)")
    scan.set_defaults(func=cmd_scan)

    bell = sub.add_parser(
        "bell", help="run or analyze a 16-setting CHSH measurement")
    _add_bench_args(bell)
    bell.add_argument("--counts", metavar="FILE",
                      help="analyze an existing count table instead of "
                           "simulating")
    bell.add_argument("--angles", metavar="A,A',B,B'",
                      help="CHSH quadruple in degrees "
                           "(default -45,0,-22.5,22.5)")
    bell.add_argument("--duration", type=float, default=15.0, metavar="S",
                      help="counting interval per setting for simulated runs")
    bell.add_argument("--add-one-smoothing", action="store_true",
                      help="use N+1 in the variance of empty cells")
    bell.add_argument("--counts-out", metavar="FILE",
                      help="also write the simulated count table")
    bell.add_argument("--out", metavar="FILE",
                      help="write the result JSON here")
    bell.set_defaults(func=cmd_bell)

    diagnose = sub.add_parser(
        "diagnose",
        help="source characterization from the four diagnostic counts")
    diagnose.add_argument("n00", type=int,
                          help="coincidences at alpha=0, beta=0")
    diagnose.add_argument("n9090", type=int,
                          help="coincidences at alpha=90, beta=90")
    diagnose.add_argument("n090", type=int,
                          help="coincidences at alpha=0, beta=90")
    diagnose.add_argument("n4545", type=int,
                          help="coincidences at alpha=45, beta=45")
    diagnose.add_argument("--out", metavar="FILE",
                          help="write the diagnostics JSON here")
    diagnose.set_defaults(func=cmd_diagnose)

    fit = sub.add_parser(
        "fit", help="weighted least-squares count-model fit of a scan table")
    fit.add_argument("counts", metavar="FILE", help="count-table CSV")
    fit.add_argument("--beta-shift", action="store_true",
                     help="also fit a hidden analyzer-B offset")
    fit.add_argument("--out", metavar="FILE",
                     help="write the fit-result JSON here")
    fit.set_defaults(func=cmd_fit)

    tune_p = sub.add_parser(
        "tune", help="automated source alignment within a step budget")
    _add_bench_args(tune_p)
    tune_p.add_argument("--budget", type=int, default=200, metavar="N",
                        help="maximum number of acquisitions")
    tune_p.add_argument("--duration", type=float, default=None, metavar="S",
                        help="counting interval per acquisition "
                             "(default: targets ~300 pairs)")
    tune_p.add_argument("--out", metavar="FILE",
                        help="write the closing diagnostics JSON here")
    tune_p.set_defaults(func=cmd_tune)

    serve = sub.add_parser(
        "serve", help="start the wire API server for the browser bench")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8765)
    serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FitConvergenceError, ConvergenceFailure, SessionBusyError) as err:
        print(f"bellbench: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as err:
        print(f"bellbench: {err}", file=sys.stderr)
        return EXIT_IO
    except ValueError as err:
        print(f"bellbench: {err}", file=sys.stderr)
        return EXIT_VALIDATION


def main_entry() -> None:
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    main_entry()
