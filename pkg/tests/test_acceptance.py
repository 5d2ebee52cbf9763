"""End-to-end acceptance suite. Each test prints one PASS line with the
measured numbers once its assertions hold; run with `pytest -v -s` to see
them. Budgeted runtimes are enforced where stated.
"""

import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from hiedge import (ConstantPredictor, DelayModel, DeviceProfile, GridSpec,
                    LRModel, LRTrainConfig, Mode, Policy, QoSRule, QoSSpec,
                    RoutingBatch, SynthConfig, accuracy_decomposed,
                    accuracy_direct, bench, compare_strategies, evaluate,
                    generate_synthetic, loss_and_grad, optimize, pareto,
                    qos_from_context, route_trace, save_trace, serve, train)
from hiedge.cli import main
from hiedge.optimize import Objective, ParetoAxes

from conftest import make_record, make_trace, profile_for, random_trace
from test_optimize import oracle_optimize, oracle_pareto

PROFILES = Path(__file__).resolve().parent.parent / "profiles"
TOP1_GATE = LRModel(weights=(200.0, 0.0), bias=-100.0)


def test_cost_model_table_reproduction(tmp_path, capsys):
    """eval --mode hi on the Raspberry Pi profile with an offload fraction of
    0.2157 must report 3.82 ms / 12.55 mJ within 1%."""
    start = time.perf_counter()
    n, offloads = 10000, 2157
    records = []
    for i in range(n):
        if i < offloads:
            vec = [0.4, 0.3, 0.3]   # top1 0.4 -> decider offloads
        else:
            vec = [0.9, 0.05, 0.05]  # top1 0.9 -> decider accepts
        records.append({"id": i, "label": 0, "exits": [vec], "server_label": 0})
    trace_path = tmp_path / "hi.jsonl"
    with open(trace_path, "w") as fh:
        fh.write(json.dumps({"classes": 3, "exits": 1, "meta": {}}) + "\n")
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
    model_path = tmp_path / "gate.json"
    TOP1_GATE.save(model_path)

    rc = main(["eval", "--mode", "hi",
               "--trace", str(trace_path),
               "--profile", str(PROFILES / "raspberry_pi_cifar10.json"),
               "--model", str(model_path)])
    out = capsys.readouterr().out
    elapsed = time.perf_counter() - start
    assert rc == 0
    report = json.loads(out)
    assert report["eta_off"] == 0.2157
    assert abs(report["avg_latency_ms"] - 3.82) / 3.82 < 0.01
    assert abs(report["avg_energy_mj"] - 12.55) / 12.55 < 0.01
    assert elapsed < 1.0
    print(f"\n[ACCEPTANCE PASS] cost-model table reproduction: "
          f"time={report['avg_latency_ms']} ms energy={report['avg_energy_mj']} mJ "
          f"({elapsed:.2f}s)")


def test_accuracy_identity_over_1000_random_cases():
    """Direct and decomposed accuracy agree to 1e-12 on 1000 random traces
    with random offload decisions."""
    start = time.perf_counter()
    rng = np.random.default_rng(20240901)
    worst = 0.0
    for i in range(1000):
        n = int(rng.integers(2, 80))
        trace = random_trace(rng, n=n, num_classes=int(rng.integers(2, 8)),
                             num_exits=1, server_accuracy=float(rng.uniform(0.3, 1.0)))
        if i % 2 == 0:
            offloaded = rng.random(n) < rng.uniform(0, 1)
            batch = RoutingBatch(
                exit_taken=np.zeros(n, dtype=np.int64),
                offloaded=offloaded,
                final_label=np.where(offloaded, trace.server_labels,
                                     trace.predictions[:, -1]),
                lr_invoked=np.ones(n, dtype=bool),
            )
        else:
            model = LRModel(weights=(float(rng.uniform(-60, 60)),
                                     float(rng.uniform(-5, 5))),
                            bias=float(rng.uniform(-5, 5)))
            batch = route_trace(trace, Policy(mode=Mode.HI), model)
        gap = abs(accuracy_direct(trace, batch) - accuracy_decomposed(trace, batch))
        worst = max(worst, gap)
        assert gap < 1e-12
    elapsed = time.perf_counter() - start
    assert elapsed < 30.0
    print(f"\n[ACCEPTANCE PASS] accuracy identity: worst gap {worst:.2e} "
          f"over 1000 cases ({elapsed:.1f}s)")


def test_optimizer_oracle_equivalence_50_configs():
    """optimize() and pareto() match an independently coded exhaustive sweep,
    tie-breaks included, over 50 random configurations."""
    start = time.perf_counter()
    rng = np.random.default_rng(77)
    grid = GridSpec(0.5, 1.0, 0.05)  # 11 points per dimension
    for case in range(50):
        if case < 2:
            num_exits = 4            # full 11^3 grid
        else:
            num_exits = int(rng.integers(1, 4))
        trace = random_trace(rng, n=int(rng.integers(40, 150)),
                             num_classes=int(rng.integers(3, 7)),
                             num_exits=num_exits)
        profile = profile_for(trace,
                              base_latency=float(rng.uniform(0.5, 3.0)),
                              off_latency=float(rng.uniform(5.0, 20.0)),
                              off_energy=float(rng.uniform(10.0, 50.0)))
        model = LRModel(weights=(float(rng.uniform(10, 200)), 0.0),
                        bias=float(rng.uniform(-100, -5)))
        qos = QoSSpec(accuracy_floor=float(rng.uniform(0.2, 1.0)),
                      latency_cap_ms=float(rng.uniform(1.0, 15.0)))
        objective = Objective.MIN_ENERGY if rng.random() < 0.5 else Objective.MIN_LATENCY

        got = optimize(trace, model, profile, qos, grid, objective)
        want_p, want_r, want_feasible = oracle_optimize(
            trace, model, profile, qos, grid, objective)
        assert got.policy == want_p, f"case {case}"
        assert got.report == want_r, f"case {case}"
        assert got.feasible == want_feasible, f"case {case}"

        axes = ParetoAxes.ACC_VS_ENERGY if rng.random() < 0.5 else ParetoAxes.ACC_VS_LATENCY
        got_front = pareto(trace, model, profile, grid, axes)
        want_front = oracle_pareto(trace, model, profile, grid, axes)
        assert got_front == want_front, f"case {case}"
    elapsed = time.perf_counter() - start
    assert elapsed < 120.0
    print(f"\n[ACCEPTANCE PASS] optimizer oracle equivalence: 50 configs "
          f"({elapsed:.1f}s)")


def test_lr_gradient_finite_difference_check():
    """Analytic gradient vs central differences, 100 random draws."""
    start = time.perf_counter()
    rng = np.random.default_rng(4242)
    h = 1e-6
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 50))
        X = rng.uniform(0.0, 1.0, size=(n, 2))
        y = rng.integers(0, 2, size=n).astype(float)
        w = rng.normal(scale=3.0, size=3)
        l2 = float(rng.uniform(0.0, 1.0))
        _, grad = loss_and_grad(w, X, y, l2)
        for j in range(3):
            e = np.zeros(3)
            e[j] = h
            lp, _ = loss_and_grad(w + e, X, y, l2)
            lm, _ = loss_and_grad(w - e, X, y, l2)
            fd = (lp - lm) / (2 * h)
            rel = abs(grad[j] - fd) / max(abs(fd), 1e-8)
            worst = max(worst, rel)
            assert rel < 1e-5
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0
    print(f"\n[ACCEPTANCE PASS] LR gradient check: worst rel err {worst:.2e} "
          f"({elapsed:.1f}s)")


def test_gating_reduction_laws():
    """Disabled branches collapse EE to ON_DEVICE and EE-HI to HI, and
    raising any single threshold never lowers average latency."""
    rng = np.random.default_rng(555)
    for case in range(20):
        trace = random_trace(rng, n=int(rng.integers(30, 120)),
                             num_exits=int(rng.integers(2, 4)))
        profile = profile_for(trace)
        disabled = tuple([1.5] * (trace.num_exits - 1))
        ee = evaluate(trace, Policy(mode=Mode.EE, thresholds=disabled), None, profile)
        od = evaluate(trace, Policy(mode=Mode.ON_DEVICE), None, profile)
        assert (ee.accuracy, ee.avg_latency_ms, ee.avg_energy_mj, ee.eta_off,
                ee.eta_exit, ee.eta_fn, ee.lr_confusion, ee.num_samples) == \
               (od.accuracy, od.avg_latency_ms, od.avg_energy_mj, od.eta_off,
                od.eta_exit, od.eta_fn, od.lr_confusion, od.num_samples), f"case {case}"
        eehi = evaluate(trace, Policy(mode=Mode.EE_HI, thresholds=disabled),
                        TOP1_GATE, profile)
        hi = evaluate(trace, Policy(mode=Mode.HI), TOP1_GATE, profile)
        assert (eehi.accuracy, eehi.avg_latency_ms, eehi.avg_energy_mj, eehi.eta_off,
                eehi.eta_exit, eehi.eta_fn, eehi.lr_confusion, eehi.num_samples) == \
               (hi.accuracy, hi.avg_latency_ms, hi.avg_energy_mj, hi.eta_off,
                hi.eta_exit, hi.eta_fn, hi.lr_confusion, hi.num_samples), f"case {case}"

    # Latency monotone in each threshold, grid-checked on a 3-exit trace.
    trace = random_trace(np.random.default_rng(556), n=200, num_exits=3)
    profile = profile_for(trace)
    grid = [0.5 + 0.05 * i for i in range(11)]
    for dim in range(2):
        for other in (0.6, 0.9):
            prev = None
            for theta in grid:
                thresholds = [other, other]
                thresholds[dim] = theta
                report = evaluate(trace, Policy(mode=Mode.EE_HI,
                                                thresholds=tuple(thresholds)),
                                  TOP1_GATE, profile)
                if prev is not None:
                    assert report.avg_latency_ms >= prev - 1e-12
                prev = report.avg_latency_ms
    print("\n[ACCEPTANCE PASS] gating reduction laws: 20 traces + grid monotonicity")


def test_wire_protocol_loopback():
    """1000 clean round trips; injected delays respected within 2 ms."""
    start = time.perf_counter()
    with serve(("127.0.0.1", 0), ConstantPredictor(9)) as server:
        stats = bench(server.address, payload_size_bytes=3072, repetitions=1000,
                      seed=1)
        assert stats.count == 1000
        assert stats.min_ms > 0.0
        assert stats.mean_rtt_ms <= 2.0
    results = {0: stats}
    for delay_ms, reps in ((10, 50), (50, 20)):
        with serve(("127.0.0.1", 0), ConstantPredictor(9),
                   DelayModel(fixed_ms=float(delay_ms))) as server:
            s = bench(server.address, payload_size_bytes=3072, repetitions=reps,
                      seed=2)
            assert s.min_ms >= delay_ms
            assert s.mean_rtt_ms <= delay_ms + 2.0
            results[delay_ms] = s
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0
    means = {d: round(s.mean_rtt_ms, 3) for d, s in results.items()}
    print(f"\n[ACCEPTANCE PASS] wire protocol: means by delay {means} ({elapsed:.1f}s)")


def test_qos_derivation_rules():
    """Floor and caps from context match the published derivation."""
    qos = qos_from_context(0.995, 9.68, 27.67, QoSRule.ABSOLUTE_10PTS)
    assert math.isclose(qos.accuracy_floor, 0.895, abs_tol=1e-12)
    assert qos.latency_cap_ms == 9.68 / 2
    assert qos.latency_cap_ms == 4.84
    assert qos.energy_cap_mj == 27.67 / 2
    assert qos.energy_cap_mj == 13.835
    rel = qos_from_context(0.9877, 9.68, 27.67, QoSRule.RELATIVE_90PCT)
    assert round(rel.accuracy_floor, 4) == 0.8889
    print("\n[ACCEPTANCE PASS] QoS derivation: floor 0.895, caps 4.84 ms / 13.835 mJ")


def test_calibrated_regression_prefers_hi():
    """Seeded trace in the published operating regime: device accuracy ~0.87,
    server ~0.988, trained decider offloading ~21%. Under the accuracy floor
    the comparison must pick HI, with on-device infeasible."""
    cfg = SynthConfig.load(PROFILES / "calibrated_synth_cifar10.json")
    trace = generate_synthetic(cfg)
    profile = DeviceProfile.load(PROFILES / "raspberry_pi_cifar10.json")
    model = train(trace, LRTrainConfig(learning_rate=2.5, max_epochs=25000,
                                       tol=1e-12, class_weighting=True))
    hi_report = evaluate(trace, Policy(mode=Mode.HI), model, profile)
    acc_od = float(np.mean(trace.predictions[:, -1] == trace.labels))
    assert abs(acc_od - 0.87) < 0.01
    assert 0.15 <= hi_report.eta_off <= 0.30
    assert hi_report.accuracy > 0.94

    qos = qos_from_context(0.995, profile.offload_latency_ms,
                           profile.offload_energy_mj, QoSRule.ABSOLUTE_10PTS)
    table = compare_strategies(trace, model, profile, qos, GridSpec(0.5, 1.0, 0.05))
    row = {c.fixed: c for c in table}["accuracy"]
    assert acc_od < qos.accuracy_floor  # on-device alone fails the floor
    assert row.mode == Mode.HI
    print(f"\n[ACCEPTANCE PASS] calibrated regression: acc_od={acc_od:.4f} "
          f"eta_off={hi_report.eta_off:.4f} acc_hi={hi_report.accuracy:.4f} "
          f"time={hi_report.avg_latency_ms:.3f} ms -> HI preferred")
