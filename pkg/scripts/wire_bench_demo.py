#!/usr/bin/env python3
"""Loopback offload benchmark: serve, hammer with image-sized payloads, report."""

import argparse

from hiedge import ConstantPredictor, DelayModel, bench, serve
from hiedge.reporting import bench_stats_json


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--payload-bytes", type=int, default=3072,
                        help="bytes per request (3072 = one 32x32 RGB image)")
    parser.add_argument("--reps", type=int, default=1000)
    parser.add_argument("--delay-ms", type=float, default=0.0)
    parser.add_argument("--jitter-ms", type=float, default=0.0)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    delay = DelayModel(fixed_ms=args.delay_ms, jitter_ms=args.jitter_ms,
                       seed=args.seed)
    with serve(("127.0.0.1", 0), ConstantPredictor(0), delay) as server:
        host, port = server.address
        print(f"server on {host}:{port}, payload {args.payload_bytes} B, "
              f"{args.reps} repetitions")
        stats = bench(server.address, args.payload_bytes, args.reps, seed=args.seed)
    print(bench_stats_json(stats))


if __name__ == "__main__":
    main()
