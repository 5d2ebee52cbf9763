"""Command-line entry point covering the full pipeline: trace validation and
synthesis, decider training, policy evaluation, threshold optimization,
frontier extraction, strategy comparison, and the TCP offload emulator.

Exit codes: 0 success, 1 domain error (bad input data, infeasible QoS with
--strict), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import reporting
from .costs import DeviceProfile, evaluate
from .gate import Mode, Policy
from .lr import (DegenerateTrainingError, LRModel, LRTrainConfig,
                 constant_accept_f1, score, train)
from .optimize import (GridSpec, Objective, OptimizeResult, ParetoAxes, QoSRule,
                       QoSSpec, compare_strategies, optimize, pareto,
                       qos_from_context)
from .trace import SynthConfig, Trace, TraceError, generate_synthetic, load_trace, save_trace
from .wire import (ConstantPredictor, DelayModel, LookupPredictor, OffloadError,
                   Predictor, TracePredictor, bench, offload, parse_address, serve)

DEFAULT_SEED_ENV = "HIEDGE_SEED"


class CliError(Exception):
    """Domain error surfaced to the user with exit code 1."""


def _threads(args) -> int:
    if args.threads is not None:
        if args.threads < 1:
            raise CliError("--threads must be >= 1")
        return args.threads
    return os.cpu_count() or 1


def _seed_from(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(DEFAULT_SEED_ENV)
    return int(env) if env else 0


def _emit(text: str, out: str | None) -> None:
    if out:
        reporting.write_text(text, out)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _load_trace(path: str) -> Trace:
    try:
        return load_trace(path)
    except TraceError as exc:
        raise CliError(f"invalid trace {path}: {exc}") from exc


def _load_profile(path: str) -> DeviceProfile:
    try:
        return DeviceProfile.load(path)
    except (OSError, ValueError, KeyError) as exc:
        raise CliError(f"invalid profile {path}: {exc}") from exc


def _load_model(args, trace: Trace | None = None) -> LRModel | None:
    if getattr(args, "model", None):
        try:
            return LRModel.load(args.model)
        except (OSError, ValueError, KeyError) as exc:
            raise CliError(f"invalid model {args.model}: {exc}") from exc
    if getattr(args, "train", False):
        if trace is None:
            raise CliError("--train requires a trace")
        return train(trace)
    return None


def _parse_thresholds(text: str | None) -> tuple[float, ...]:
    if not text:
        return ()
    try:
        return tuple(float(t) for t in text.split(","))
    except ValueError as exc:
        raise CliError(f"bad thresholds '{text}': {exc}") from exc


def _qos_from_args(args, profile: DeviceProfile | None) -> QoSSpec:
    if args.sota is not None:
        if profile is None:
            raise CliError("--sota needs a profile to derive offload caps from")
        rule = QoSRule.RELATIVE_90PCT if args.qos_rule == "relative-90pct" \
            else QoSRule.ABSOLUTE_10PTS
        return qos_from_context(args.sota, profile.offload_latency_ms,
                                profile.offload_energy_mj, rule)
    try:
        return QoSSpec(accuracy_floor=args.acc_floor,
                       latency_cap_ms=args.latency_cap,
                       energy_cap_mj=args.energy_cap)
    except ValueError as exc:
        raise CliError(str(exc)) from exc


def _add_qos_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--acc-floor", type=float, default=None,
                        help="minimum acceptable accuracy")
    parser.add_argument("--latency-cap", type=float, default=None,
                        help="maximum average latency in ms")
    parser.add_argument("--energy-cap", type=float, default=None,
                        help="maximum average energy in mJ")
    parser.add_argument("--sota", type=float, default=None,
                        help="derive QoS from this state-of-the-art accuracy "
                             "plus half the profile's offload costs")
    parser.add_argument("--qos-rule", choices=["absolute-10pts", "relative-90pct"],
                        default="absolute-10pts",
                        help="accuracy floor rule used with --sota")


def cmd_validate(args) -> int:
    failures = 0
    for path in args.trace:
        try:
            trace = load_trace(path)
        except TraceError as exc:
            print(f"{path}: INVALID: {exc}", file=sys.stderr)
            failures += 1
            continue
        print(f"{path}: ok ({len(trace)} records, {trace.num_classes} classes, "
              f"{trace.num_exits} exits)")
    return 1 if failures else 0


def cmd_gen(args) -> int:
    accs = tuple(float(a) for a in args.exit_acc.split(","))
    cfg = SynthConfig(
        num_samples=args.samples,
        num_classes=args.classes,
        num_exits=len(accs),
        exit_accuracies=accs,
        server_accuracy=args.server_acc,
        separation=args.separation,
        seed=_seed_from(args),
    )
    try:
        trace = generate_synthetic(cfg)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    save_trace(trace, args.out)
    print(f"wrote {len(trace)} records to {args.out}")
    return 0


def cmd_train_lr(args) -> int:
    trace = _load_trace(args.trace)
    cfg = LRTrainConfig(learning_rate=args.lr, max_epochs=args.epochs,
                        tol=args.tol, l2=args.l2,
                        class_weighting=args.class_weights, seed=_seed_from(args))
    if not 0.0 <= args.holdout < 1.0:
        raise CliError("--holdout must lie in [0, 1)")
    train_trace, hold_trace = trace, None
    if args.holdout > 0:
        rng = np.random.default_rng(_seed_from(args))
        order = rng.permutation(len(trace))
        cut = int(len(trace) * (1.0 - args.holdout))
        if cut < 2 or len(trace) - cut < 1:
            raise CliError("holdout split leaves too few samples")
        train_trace = trace.subset(np.sort(order[:cut]))
        hold_trace = trace.subset(np.sort(order[cut:]))
    try:
        model = train(train_trace, cfg)
    except (DegenerateTrainingError, ValueError) as exc:
        raise CliError(f"training failed: {exc}") from exc
    if args.out:
        model.save(args.out)
    metrics = {
        "weights": [reporting.round6(w) for w in model.weights],
        "bias": reporting.round6(model.bias),
        "epochs_run": model.training_meta.epochs_run,
        "final_loss": reporting.round6(model.training_meta.final_loss),
        "train_f1": reporting.round6(score(model, train_trace).f1),
        "train_baseline_f1": reporting.round6(constant_accept_f1(train_trace)),
    }
    if hold_trace is not None:
        metrics["holdout_f1"] = reporting.round6(score(model, hold_trace).f1)
        metrics["holdout_baseline_f1"] = reporting.round6(constant_accept_f1(hold_trace))
    print(json.dumps(metrics, indent=2))
    return 0


def cmd_eval(args) -> int:
    trace = _load_trace(args.trace)
    profile = _load_profile(args.profile)
    mode = Mode.parse(args.mode)
    policy = Policy(mode=mode, thresholds=_parse_thresholds(args.thresholds))
    model = _load_model(args, trace)
    try:
        report = evaluate(trace, policy, model, profile)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    text = reporting.eval_report_csv(report) if args.format == "csv" \
        else reporting.eval_report_json(report)
    _emit(text, args.out)
    return 0


def cmd_optimize(args) -> int:
    trace = _load_trace(args.trace)
    profile = _load_profile(args.profile)
    model = _load_model(args, trace)
    if model is None:
        raise CliError("optimize needs --model or --train")
    qos = _qos_from_args(args, profile)
    grid = _parse_grid(args.grid)
    objective = Objective.MIN_ENERGY if args.objective == "min-energy" \
        else Objective.MIN_LATENCY
    try:
        result: OptimizeResult = optimize(trace, model, profile, qos, grid,
                                          objective, threads=_threads(args))
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    text = reporting.optimize_result_csv(result) if args.format == "csv" \
        else reporting.optimize_result_json(result)
    _emit(text, args.out)
    if not result.feasible:
        print("no grid point satisfies the QoS constraints "
              "(closest point reported)", file=sys.stderr)
        if args.strict:
            return 1
    return 0


def cmd_pareto(args) -> int:
    trace = _load_trace(args.trace)
    profile = _load_profile(args.profile)
    model = _load_model(args, trace)
    if model is None:
        raise CliError("pareto needs --model or --train")
    grid = _parse_grid(args.grid)
    axes = ParetoAxes.ACC_VS_ENERGY if args.axes == "acc-energy" \
        else ParetoAxes.ACC_VS_LATENCY
    try:
        frontier = pareto(trace, model, profile, grid, axes, threads=_threads(args))
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    text = reporting.frontier_csv(frontier) if args.format == "csv" \
        else reporting.frontier_json(frontier)
    _emit(text, args.out)
    return 0


def cmd_compare(args) -> int:
    trace = _load_trace(args.trace)
    profile = _load_profile(args.profile)
    model = _load_model(args, trace)
    if model is None:
        raise CliError("compare needs --model or --train")
    qos = _qos_from_args(args, profile)
    grid = _parse_grid(args.grid)
    try:
        table = compare_strategies(trace, model, profile, qos, grid,
                                   threads=_threads(args))
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    text = reporting.compare_table_csv(table) if args.format == "csv" \
        else reporting.compare_table_json(table)
    _emit(text, args.out)
    return 0


def _parse_grid(text: str) -> GridSpec:
    try:
        return GridSpec.parse(text)
    except ValueError as exc:
        raise CliError(str(exc)) from exc


def _build_predictor(spec: str) -> Predictor:
    kind, sep, arg = spec.partition(":")
    if kind == "const" and sep:
        return ConstantPredictor(int(arg))
    if kind == "lookup" and sep:
        return LookupPredictor.from_file(arg)
    if kind == "trace" and sep:
        return TracePredictor.from_file(arg)
    raise CliError(f"bad predictor spec '{spec}' "
                   "(expected const:N, lookup:FILE, or trace:FILE)")


def cmd_serve(args) -> int:
    predictor = _build_predictor(args.predictor)
    delay = DelayModel(fixed_ms=args.delay_ms, jitter_ms=args.jitter_ms,
                       seed=_seed_from(args))
    try:
        server = serve(args.bind, predictor, delay)
    except OffloadError as exc:
        raise CliError(str(exc)) from exc
    host, port = server.address
    print(f"serving on {host}:{port}", flush=True)
    try:
        while True:
            import time
            time.sleep(0.5)
    except KeyboardInterrupt:
        server.stop()
        print("stopped")
    return 0


def cmd_offload(args) -> int:
    rng = np.random.default_rng(_seed_from(args))
    payload = rng.integers(0, 256, size=args.payload_bytes, dtype=np.uint8).tobytes()
    try:
        class_index, rtt_ms = offload(parse_address(args.connect), payload)
    except (OffloadError, ValueError) as exc:
        raise CliError(str(exc)) from exc
    print(json.dumps({"class": class_index, "rtt_ms": reporting.round6(rtt_ms)}))
    return 0


def cmd_bench(args) -> int:
    try:
        stats = bench(parse_address(args.connect), args.payload_bytes, args.reps,
                      seed=_seed_from(args))
    except (OffloadError, ValueError) as exc:
        raise CliError(str(exc)) from exc
    if args.out:
        reporting.write_text(reporting.bench_rtts_csv(stats), args.out)
    print(reporting.bench_stats_json(stats))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hiedge",
        description="Hierarchical-inference offload policy engine and emulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check trace files against the schema")
    p.add_argument("trace", nargs="+")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("gen", help="generate a synthetic trace")
    p.add_argument("--out", required=True)
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--exit-acc", default="0.85",
                   help="comma-separated per-exit accuracy targets, shallow to deep")
    p.add_argument("--server-acc", type=float, default=0.98)
    p.add_argument("--separation", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train-lr", help="train the binary offload decider")
    p.add_argument("--trace", required=True)
    p.add_argument("--out", help="write the model JSON here")
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--epochs", type=int, default=1000)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--l2", type=float, default=0.0)
    p.add_argument("--class-weights", action="store_true")
    p.add_argument("--holdout", type=float, default=0.0,
                   help="fraction held out for evaluation (seeded shuffle split)")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_train_lr)

    p = sub.add_parser("eval", help="evaluate one policy on a trace")
    p.add_argument("--mode", required=True,
                   help="on-device, remote, ee, hi, or ee-hi")
    p.add_argument("--trace", required=True)
    p.add_argument("--profile", required=True)
    p.add_argument("--model", help="LR model JSON (hi / ee-hi)")
    p.add_argument("--train", action="store_true",
                   help="train the decider on the trace instead of loading one")
    p.add_argument("--thresholds", help="comma-separated branch thresholds")
    p.add_argument("--out")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("optimize", help="brute-force threshold search under QoS")
    p.add_argument("--trace", required=True)
    p.add_argument("--profile", required=True)
    p.add_argument("--model")
    p.add_argument("--train", action="store_true")
    p.add_argument("--grid", default="0.5:1.0:0.01", help="lower:upper:step")
    p.add_argument("--objective", choices=["min-latency", "min-energy"],
                   default="min-latency")
    _add_qos_flags(p)
    p.add_argument("--strict", action="store_true",
                   help="exit 1 when no grid point is feasible")
    p.add_argument("--threads", type=int, default=None,
                   help="sweep parallelism (default: all cores)")
    p.add_argument("--out")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("pareto", help="accuracy/cost frontier over the grid")
    p.add_argument("--trace", required=True)
    p.add_argument("--profile", required=True)
    p.add_argument("--model")
    p.add_argument("--train", action="store_true")
    p.add_argument("--grid", default="0.5:1.0:0.01")
    p.add_argument("--axes", choices=["acc-latency", "acc-energy"],
                   default="acc-latency")
    p.add_argument("--threads", type=int, default=None,
                   help="sweep parallelism (default: all cores)")
    p.add_argument("--out")
    p.add_argument("--format", choices=["json", "csv"], default="csv")
    p.set_defaults(func=cmd_pareto)

    p = sub.add_parser("compare", help="preferred strategy per fixed QoS dimension")
    p.add_argument("--trace", required=True)
    p.add_argument("--profile", required=True)
    p.add_argument("--model")
    p.add_argument("--train", action="store_true")
    p.add_argument("--grid", default="0.5:1.0:0.05")
    _add_qos_flags(p)
    p.add_argument("--threads", type=int, default=None,
                   help="sweep parallelism (default: all cores)")
    p.add_argument("--out")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("serve", help="run the offload classification server")
    p.add_argument("--bind", default="127.0.0.1:0", help="host:port (port 0 = ephemeral)")
    p.add_argument("--delay-ms", type=float, default=0.0)
    p.add_argument("--jitter-ms", type=float, default=0.0)
    p.add_argument("--predictor", default="const:0",
                   help="const:N, lookup:FILE, or trace:FILE")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("offload", help="send one payload and print class + rtt")
    p.add_argument("--connect", required=True, help="host:port")
    p.add_argument("--payload-bytes", type=int, default=3072)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_offload)

    p = sub.add_parser("bench", help="measure offload round-trip statistics")
    p.add_argument("--connect", required=True, help="host:port")
    p.add_argument("--payload-bytes", type=int, default=3072)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", help="write per-repetition rtts as CSV")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except BrokenPipeError:
        return 1


if __name__ == "__main__":
    sys.exit(main())
