#!/usr/bin/env python3
"""End-to-end demo sweep on a synthetic two-exit trace.

Generates a trace, trains the offload decider, then writes the accuracy vs
latency frontier and the QoS-optimal policy to CSV files.
"""

import argparse
from pathlib import Path

from hiedge import (DeviceProfile, GridSpec, LRTrainConfig, QoSRule, SynthConfig,
                    generate_synthetic, optimize, pareto, qos_from_context, train)
from hiedge.optimize import Objective
from hiedge.reporting import frontier_csv, optimize_result_csv, write_text

PROFILE = Path(__file__).resolve().parent.parent / "profiles" / "raspberry_pi_cifar10_ee_demo.json"


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--samples", type=int, default=20000)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--grid", default="0.5:1.0:0.01")
    parser.add_argument("--out-dir", type=Path, default=Path("sweep_out"))
    args = parser.parse_args()

    cfg = SynthConfig(
        num_samples=args.samples,
        num_classes=10,
        num_exits=2,
        exit_accuracies=(0.80, 0.87),
        server_accuracy=0.988,
        separation=3.0,
        seed=args.seed,
    )
    trace = generate_synthetic(cfg)
    model = train(trace, LRTrainConfig(learning_rate=2.5, max_epochs=25000,
                                       tol=1e-12, class_weighting=True))
    profile = DeviceProfile.load(PROFILE)
    grid = GridSpec.parse(args.grid)

    args.out_dir.mkdir(parents=True, exist_ok=True)
    front = pareto(trace, model, profile, grid)
    write_text(frontier_csv(front), args.out_dir / "frontier.csv")
    print(f"frontier: {len(front)} points -> {args.out_dir / 'frontier.csv'}")

    qos = qos_from_context(0.995, profile.offload_latency_ms,
                           profile.offload_energy_mj, QoSRule.ABSOLUTE_10PTS)
    result = optimize(trace, model, profile, qos, grid, Objective.MIN_LATENCY)
    write_text(optimize_result_csv(result), args.out_dir / "optimal.csv")
    status = "feasible" if result.feasible else "infeasible (closest shown)"
    print(f"optimal policy {result.policy.thresholds} [{status}]: "
          f"acc={result.report.accuracy:.4f} "
          f"time={result.report.avg_latency_ms:.3f} ms "
          f"energy={result.report.avg_energy_mj:.3f} mJ")


if __name__ == "__main__":
    main()
