"""Analytic accuracy/latency/energy model over routed traces.

Average cost per inference decomposes by where samples stop: each exit's
cumulative cost weighted by the fraction stopping there, plus the decider's
cost for the fraction that reaches the final layer under HI-style modes, plus
the offload round-trip for the offloaded fraction:

    time   = sum_k eta_exit[k] * exit_latency[k] + lr_fraction * t_lr + eta_off * t_off
    energy = sum_k eta_exit[k] * exit_energy[k]  + lr_fraction * e_lr + eta_off * e_off

With a single exit and the decider always consulted this reduces to
t_dev + t_lr + eta_off * t_off, the plain hierarchical-inference cost.
Accuracy counts a sample as correct when the accepted exit's argmax (or the
server, if offloaded) matches the ground truth.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .gate import Mode, Policy, RoutingBatch, gate_stats, route_trace
from .lr import LRModel
from .trace import Trace

FRACTION_TOL = 1e-9
IDENTITY_TOL = 1e-12


@dataclass(frozen=True)
class DeviceProfile:
    """Measured device costs: cumulative latency/energy to produce each
    exit's output (strictly increasing with depth), the decider's cost, and
    the offload round trip (transmission + server compute + reply)."""

    name: str
    exit_latency_ms: tuple[float, ...]
    exit_energy_mj: tuple[float, ...]
    lr_latency_ms: float
    lr_energy_mj: float
    offload_latency_ms: float
    offload_energy_mj: float
    description: str = ""

    def __post_init__(self) -> None:
        if len(self.exit_latency_ms) != len(self.exit_energy_mj):
            raise ValueError("exit latency and energy vectors must have equal length")
        if not self.exit_latency_ms:
            raise ValueError("profile needs at least one exit")
        for vec, label in ((self.exit_latency_ms, "latency"), (self.exit_energy_mj, "energy")):
            if any(v < 0 for v in vec):
                raise ValueError(f"exit {label} values must be >= 0")
            if any(b <= a for a, b in zip(vec, vec[1:])):
                raise ValueError(f"exit {label} values must be strictly increasing")
        for v, label in ((self.lr_latency_ms, "lr_latency_ms"),
                         (self.lr_energy_mj, "lr_energy_mj"),
                         (self.offload_latency_ms, "offload_latency_ms"),
                         (self.offload_energy_mj, "offload_energy_mj")):
            if v < 0:
                raise ValueError(f"{label} must be >= 0")

    @property
    def num_exits(self) -> int:
        return len(self.exit_latency_ms)

    def to_json(self) -> str:
        obj = {
            "name": self.name,
            "exit_latency_ms": list(self.exit_latency_ms),
            "exit_energy_mj": list(self.exit_energy_mj),
            "lr_latency_ms": self.lr_latency_ms,
            "lr_energy_mj": self.lr_energy_mj,
            "offload_latency_ms": self.offload_latency_ms,
            "offload_energy_mj": self.offload_energy_mj,
        }
        if self.description:
            obj["description"] = self.description
        return json.dumps(obj, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "DeviceProfile":
        obj = json.loads(text)
        return cls(
            name=obj["name"],
            exit_latency_ms=tuple(float(v) for v in obj["exit_latency_ms"]),
            exit_energy_mj=tuple(float(v) for v in obj["exit_energy_mj"]),
            lr_latency_ms=float(obj["lr_latency_ms"]),
            lr_energy_mj=float(obj["lr_energy_mj"]),
            offload_latency_ms=float(obj["offload_latency_ms"]),
            offload_energy_mj=float(obj["offload_energy_mj"]),
            description=obj.get("description", ""),
        )

    @classmethod
    def load(cls, path: str | Path) -> "DeviceProfile":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")


@dataclass(frozen=True)
class LRConfusion:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class EvalReport:
    mode: Mode
    thresholds: tuple[float, ...]
    accuracy: float
    avg_latency_ms: float
    avg_energy_mj: float
    eta_off: float
    eta_exit: tuple[float, ...]
    eta_fn: float
    lr_confusion: LRConfusion
    num_samples: int


def _check_alignment(trace: Trace, routings: RoutingBatch) -> None:
    if len(routings) != len(trace):
        raise ValueError(
            f"routing length {len(routings)} does not match trace length {len(trace)}")


def _as_batch(routings) -> RoutingBatch:
    if isinstance(routings, RoutingBatch):
        return routings
    return RoutingBatch.from_routings(list(routings))


def accuracy_direct(trace: Trace, routings) -> float:
    """Fraction of samples answered correctly: accepted samples by the exit
    that produced the answer, offloaded samples by the server."""
    routings = _as_batch(routings)
    _check_alignment(trace, routings)
    n = len(trace)
    device_label = trace.predictions[np.arange(n), routings.exit_taken]
    dev_hit = ~routings.offloaded & (device_label == trace.labels)
    srv_hit = routings.offloaded & (trace.server_labels == trace.labels)
    return (int(dev_hit.sum()) + int(srv_hit.sum())) / n


def accuracy_decomposed(trace: Trace, routings) -> float:
    """Same accuracy written as on-device accuracy, minus the wasted-offload
    fraction (correct but offloaded), plus offloads the server got right.
    Only defined when every sample reached the final exit (plain HI)."""
    routings = _as_batch(routings)
    _check_alignment(trace, routings)
    last = trace.num_exits - 1
    if np.any(routings.exit_taken != last):
        raise ValueError("decomposition requires every sample at the final exit (HI routing)")
    n = len(trace)
    final_correct = trace.predictions[:, -1] == trace.labels
    acc_od = int(final_correct.sum()) / n
    eta_fn = int((routings.offloaded & final_correct).sum()) / n
    srv = int((routings.offloaded & (trace.server_labels == trace.labels)).sum()) / n
    return acc_od - eta_fn + srv


def _check_fractions(eta_exit: Sequence[float], eta_off: float, lr_fraction: float,
                     profile: DeviceProfile) -> None:
    if len(eta_exit) != profile.num_exits:
        raise ValueError(
            f"eta_exit has {len(eta_exit)} entries, profile has {profile.num_exits} exits")
    if any(not 0.0 <= f <= 1.0 for f in eta_exit):
        raise ValueError("eta_exit entries must lie in [0, 1]")
    if abs(sum(eta_exit) - 1.0) > FRACTION_TOL:
        raise ValueError(f"eta_exit must sum to 1, got {sum(eta_exit)}")
    if not 0.0 <= eta_off <= 1.0 or not 0.0 <= lr_fraction <= 1.0:
        raise ValueError("eta_off and lr_fraction must lie in [0, 1]")
    if eta_off > eta_exit[-1] + FRACTION_TOL:
        raise ValueError("offloaded fraction cannot exceed the final-exit fraction")


def expected_latency(eta_exit: Sequence[float], eta_off: float, lr_fraction: float,
                     profile: DeviceProfile) -> float:
    _check_fractions(eta_exit, eta_off, lr_fraction, profile)
    dev = float(np.dot(eta_exit, profile.exit_latency_ms))
    return dev + lr_fraction * profile.lr_latency_ms + eta_off * profile.offload_latency_ms


def expected_energy(eta_exit: Sequence[float], eta_off: float, lr_fraction: float,
                    profile: DeviceProfile) -> float:
    _check_fractions(eta_exit, eta_off, lr_fraction, profile)
    dev = float(np.dot(eta_exit, profile.exit_energy_mj))
    return dev + lr_fraction * profile.lr_energy_mj + eta_off * profile.offload_energy_mj


def evaluate(trace: Trace, policy: Policy, model: LRModel | None,
             profile: DeviceProfile) -> EvalReport:
    """Route the whole trace under the policy and report accuracy, average
    costs, and cascade occupancy.

    Remote inference charges only the offload round trip (no on-device
    compute), and its accuracy is the server's top-1 over the trace.
    """
    if profile.num_exits != trace.num_exits:
        raise ValueError(
            f"profile has {profile.num_exits} exits, trace has {trace.num_exits}")
    routed = route_trace(trace, policy, model)
    stats = gate_stats(routed, trace.num_exits)
    accuracy = accuracy_direct(trace, routed)

    n = len(trace)
    lr_fraction = stats.lr_count / n
    if policy.mode == Mode.REMOTE:
        latency = profile.offload_latency_ms
        energy = profile.offload_energy_mj
    else:
        latency = expected_latency(stats.eta_exit, stats.eta_off, lr_fraction, profile)
        energy = expected_energy(stats.eta_exit, stats.eta_off, lr_fraction, profile)

    eta_fn, confusion = _lr_outcomes(trace, routed, n)
    return EvalReport(
        mode=policy.mode,
        thresholds=policy.thresholds,
        accuracy=accuracy,
        avg_latency_ms=latency,
        avg_energy_mj=energy,
        eta_off=stats.eta_off,
        eta_exit=stats.eta_exit,
        eta_fn=eta_fn,
        lr_confusion=confusion,
        num_samples=n,
    )


def _lr_outcomes(trace: Trace, routed: RoutingBatch, n: int) -> tuple[float, LRConfusion]:
    """Wasted-offload fraction and the decider's confusion over the samples
    it actually judged (accept = positive, device-correct = true)."""
    invoked = routed.lr_invoked
    if not invoked.any():
        return 0.0, LRConfusion()
    final_correct = trace.predictions[:, -1] == trace.labels
    accepted = invoked & ~routed.offloaded
    offloaded = invoked & routed.offloaded
    tp = int((accepted & final_correct).sum())
    fp = int((accepted & ~final_correct).sum())
    fn = int((offloaded & final_correct).sum())
    tn = int((offloaded & ~final_correct).sum())
    return fn / n, LRConfusion(tp, fp, fn, tn)
