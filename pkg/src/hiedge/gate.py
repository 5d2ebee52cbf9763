"""Routing of samples through the exit cascade under a policy.

Early branches accept a sample when its max softmax reaches that branch's
threshold; anything that reaches the final layer is resolved by the strategy's
terminal rule (keep it, always offload, or ask the binary decider).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .lr import Decision, LRModel, decide_trace, predict
from .trace import SampleRecord, Trace


class Mode(str, Enum):
    ON_DEVICE = "on-device"
    REMOTE = "remote"
    EE = "ee"
    HI = "hi"
    EE_HI = "ee-hi"

    @classmethod
    def parse(cls, text: str) -> "Mode":
        normalized = text.strip().lower().replace("_", "-")
        for mode in cls:
            if mode.value == normalized:
                return mode
        raise ValueError(f"unknown mode '{text}' (expected one of "
                         f"{', '.join(m.value for m in cls)})")


# Modes whose early-exit thresholds are consulted.
GATED_MODES = (Mode.EE, Mode.EE_HI)
# Modes that need the binary decider at the final layer.
LR_MODES = (Mode.HI, Mode.EE_HI)


@dataclass(frozen=True)
class Policy:
    """Strategy mode plus one confidence threshold per early branch.

    Thresholds only apply in EE/EE-HI modes and must then have length
    num_exits - 1; a threshold above 1 disables its branch (confidences never
    exceed 1). Comparison is >=, so a sample exactly at the threshold exits.
    """

    mode: Mode
    thresholds: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        for t in self.thresholds:
            if t < 0.0:
                raise ValueError(f"threshold {t} must be >= 0")

    def check_exits(self, num_exits: int) -> None:
        if self.mode in GATED_MODES and len(self.thresholds) != num_exits - 1:
            raise ValueError(
                f"mode {self.mode.value} needs {num_exits - 1} thresholds, "
                f"got {len(self.thresholds)}")

    def to_json(self) -> str:
        return json.dumps({"mode": self.mode.value, "thresholds": list(self.thresholds)},
                          separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "Policy":
        obj = json.loads(text)
        return cls(mode=Mode.parse(obj["mode"]),
                   thresholds=tuple(float(t) for t in obj.get("thresholds", [])))


@dataclass(frozen=True)
class Routing:
    """Where one sample ended up: the exit that produced the on-device answer,
    whether it was offloaded (only possible from the final exit), and the
    label the system reports."""

    exit_taken: int
    offloaded: bool
    final_label: int
    lr_invoked: bool


class RoutingBatch:
    """Array view of per-sample routings for a whole trace."""

    def __init__(self, exit_taken: np.ndarray, offloaded: np.ndarray,
                 final_label: np.ndarray, lr_invoked: np.ndarray):
        self.exit_taken = exit_taken
        self.offloaded = offloaded
        self.final_label = final_label
        self.lr_invoked = lr_invoked

    def __len__(self) -> int:
        return len(self.exit_taken)

    def __getitem__(self, i: int) -> Routing:
        return Routing(int(self.exit_taken[i]), bool(self.offloaded[i]),
                       int(self.final_label[i]), bool(self.lr_invoked[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @classmethod
    def from_routings(cls, routings: list[Routing]) -> "RoutingBatch":
        return cls(
            np.array([r.exit_taken for r in routings], dtype=np.int64),
            np.array([r.offloaded for r in routings], dtype=bool),
            np.array([r.final_label for r in routings], dtype=np.int64),
            np.array([r.lr_invoked for r in routings], dtype=bool),
        )


def _require_model(policy: Policy, model: LRModel | None) -> None:
    if policy.mode in LR_MODES and model is None:
        raise ValueError(f"mode {policy.mode.value} requires an LR model")


def route(record: SampleRecord, policy: Policy, model: LRModel | None = None) -> Routing:
    """Route a single sample. Early branches are tested shallow to deep; only
    samples reaching the final exit can consult the decider or be offloaded."""
    _require_model(policy, model)
    num_exits = len(record.exit_softmax)
    policy.check_exits(num_exits)

    if policy.mode in GATED_MODES:
        for k in range(num_exits - 1):
            vec = record.exit_softmax[k]
            conf = max(vec)
            if conf >= policy.thresholds[k]:
                return Routing(exit_taken=k, offloaded=False,
                               final_label=int(np.argmax(vec)), lr_invoked=False)

    final_vec = record.exit_softmax[-1]
    final_pred = int(np.argmax(final_vec))
    last = num_exits - 1

    if policy.mode == Mode.REMOTE:
        return Routing(last, True, record.server_label, False)
    if policy.mode in (Mode.ON_DEVICE, Mode.EE):
        return Routing(last, False, final_pred, False)

    decision, _ = predict(model, final_vec)  # HI / EE-HI
    if decision == Decision.ACCEPT:
        return Routing(last, False, final_pred, True)
    return Routing(last, True, record.server_label, True)


def route_trace(trace: Trace, policy: Policy, model: LRModel | None = None) -> RoutingBatch:
    """Vectorized route() over every record; identical per-sample results."""
    _require_model(policy, model)
    policy.check_exits(trace.num_exits)
    n, E = len(trace), trace.num_exits
    last = E - 1

    exit_taken = np.full(n, last, dtype=np.int64)
    if policy.mode in GATED_MODES and E > 1:
        accept = trace.confidences[:, :last] >= np.asarray(policy.thresholds)
        any_early = accept.any(axis=1)
        first_early = np.argmax(accept, axis=1)
        exit_taken = np.where(any_early, first_early, last)

    at_final = exit_taken == last
    if policy.mode == Mode.REMOTE:
        offloaded = np.ones(n, dtype=bool)
        lr_invoked = np.zeros(n, dtype=bool)
    elif policy.mode in LR_MODES:
        decisions = decide_trace(model, trace)
        offloaded = at_final & (decisions == Decision.OFFLOAD)
        lr_invoked = at_final.copy()
    else:
        offloaded = np.zeros(n, dtype=bool)
        lr_invoked = np.zeros(n, dtype=bool)

    device_label = trace.predictions[np.arange(n), exit_taken]
    final_label = np.where(offloaded, trace.server_labels, device_label)
    return RoutingBatch(exit_taken, offloaded, final_label, lr_invoked)


@dataclass(frozen=True)
class GateStats:
    """Occupancy of the cascade: per-exit acceptance fractions plus the
    offloaded fraction. Counts are kept so sums can be checked exactly."""

    eta_exit: tuple[float, ...]
    eta_off: float
    exit_counts: tuple[int, ...]
    offload_count: int
    lr_count: int
    num_samples: int


def exit_fractions(trace: Trace, policy: Policy, model: LRModel | None = None) -> GateStats:
    routed = route_trace(trace, policy, model)
    return gate_stats(routed, trace.num_exits)


def gate_stats(routed: RoutingBatch, num_exits: int) -> GateStats:
    n = len(routed)
    if n == 0:
        raise ValueError("cannot compute fractions of an empty routing")
    counts = np.bincount(routed.exit_taken, minlength=num_exits)
    off = int(routed.offloaded.sum())
    lr = int(routed.lr_invoked.sum())
    return GateStats(
        eta_exit=tuple(float(c) / n for c in counts),
        eta_off=off / n,
        exit_counts=tuple(int(c) for c in counts),
        offload_count=off,
        lr_count=lr,
        num_samples=n,
    )
