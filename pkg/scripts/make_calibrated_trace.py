#!/usr/bin/env python3
"""Regenerate the calibrated synthetic trace and its trained decider.

The trace is fully determined by profiles/calibrated_synth_cifar10.json, so
this writes the same bytes on every run.
"""

import argparse
from pathlib import Path

from hiedge import LRTrainConfig, SynthConfig, generate_synthetic, save_trace, train

ROOT = Path(__file__).resolve().parent.parent


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", type=Path,
                        default=ROOT / "profiles" / "calibrated_synth_cifar10.json")
    parser.add_argument("--out", type=Path, default=Path("calibrated_trace.jsonl"))
    parser.add_argument("--model-out", type=Path, default=Path("calibrated_lr.json"))
    args = parser.parse_args()

    cfg = SynthConfig.load(args.config)
    trace = generate_synthetic(cfg)
    save_trace(trace, args.out)
    print(f"wrote {len(trace)} records to {args.out}")

    model = train(trace, LRTrainConfig(learning_rate=2.5, max_epochs=25000,
                                       tol=1e-12, class_weighting=True))
    model.save(args.model_out)
    meta = model.training_meta
    print(f"trained decider ({meta.epochs_run} epochs, loss {meta.final_loss:.5f}) "
          f"-> {args.model_out}")


if __name__ == "__main__":
    main()
