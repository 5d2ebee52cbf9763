#!/usr/bin/env python3
"""Rebuild the single-exit HI cost table from the shipped device profiles.

For each profile the average cost per inference is computed from the analytic
model at a given offload fraction (default 0.2157, the measured value for the
CIFAR-10 workload these profiles describe).
"""

import argparse
from pathlib import Path

from hiedge import DeviceProfile, expected_energy, expected_latency

PROFILE_DIR = Path(__file__).resolve().parent.parent / "profiles"
SINGLE_EXIT_PROFILES = (
    "raspberry_pi_cifar10.json",
    "jetson_7w_cifar10.json",
    "jetson_15w_cifar10.json",
    "coral_micro_cifar10.json",
)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--eta-off", type=float, default=0.2157,
                        help="offload fraction to evaluate at")
    args = parser.parse_args()

    print(f"{'profile':34s} {'t_dev':>7s} {'t_off':>7s} {'Time_HI':>8s} "
          f"{'e_dev':>7s} {'e_off':>7s} {'Energy_HI':>10s}")
    for name in SINGLE_EXIT_PROFILES:
        profile = DeviceProfile.load(PROFILE_DIR / name)
        t = expected_latency((1.0,), args.eta_off, 1.0, profile)
        e = expected_energy((1.0,), args.eta_off, 1.0, profile)
        print(f"{profile.name:34s} {profile.exit_latency_ms[0]:7.2f} "
              f"{profile.offload_latency_ms:7.2f} {t:8.2f} "
              f"{profile.exit_energy_mj[0]:7.2f} {profile.offload_energy_mj:7.2f} "
              f"{e:10.2f}")


if __name__ == "__main__":
    main()
