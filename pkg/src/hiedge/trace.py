"""Inference traces: per-sample softmax outputs at every exit of an on-device
model, plus the ground truth and the remote server's prediction.

A trace is the semantic record of what the models *would* answer for each
sample; all timing and energy figures live in device profiles. Traces are
stored as JSON Lines (one header line, then one record per line) and are
immutable once constructed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator

import numpy as np

SIMPLEX_TOL = 1e-6


class TraceError(Exception):
    """Base class for trace loading/validation failures."""


class TraceValidationError(TraceError):
    """A record violated the trace schema or a numeric invariant."""

    def __init__(self, message: str, sample_id: int | None = None, fieldname: str | None = None):
        self.sample_id = sample_id
        self.fieldname = fieldname
        prefix = ""
        if sample_id is not None:
            prefix += f"sample {sample_id}: "
        if fieldname is not None:
            prefix += f"field '{fieldname}': "
        super().__init__(prefix + message)


@dataclass(frozen=True)
class SampleRecord:
    """One sample: softmax vector per exit (shallow to deep, final layer last),
    its true class, and the class the remote server predicts for it."""

    sample_id: int
    true_label: int
    exit_softmax: tuple[tuple[float, ...], ...]
    server_label: int

    def validate(self, num_classes: int, num_exits: int) -> None:
        sid = self.sample_id
        if sid < 0:
            raise TraceValidationError("id must be non-negative", sid, "id")
        if not 0 <= self.true_label < num_classes:
            raise TraceValidationError(
                f"label {self.true_label} outside [0, {num_classes})", sid, "label")
        if not 0 <= self.server_label < num_classes:
            raise TraceValidationError(
                f"server_label {self.server_label} outside [0, {num_classes})", sid, "server_label")
        if len(self.exit_softmax) != num_exits:
            raise TraceValidationError(
                f"expected {num_exits} exit vectors, got {len(self.exit_softmax)}", sid, "exits")
        for k, vec in enumerate(self.exit_softmax):
            if len(vec) != num_classes:
                raise TraceValidationError(
                    f"exit {k} has {len(vec)} entries, expected {num_classes}", sid, "exits")
            for p in vec:
                if not (0.0 <= p <= 1.0):
                    raise TraceValidationError(
                        f"exit {k} entry {p} outside [0, 1]", sid, "exits")
            s = float(sum(vec))
            if abs(s - 1.0) > SIMPLEX_TOL:
                raise TraceValidationError(
                    f"exit {k} softmax sums to {s:.9f}, off by more than {SIMPLEX_TOL}",
                    sid, "exits")


def device_prediction(record: SampleRecord, exit_index: int) -> tuple[int, float]:
    """Class chosen at one exit: the argmax of its softmax, with ties broken
    by the lowest class index. Returns (label, max softmax value)."""
    if not 0 <= exit_index < len(record.exit_softmax):
        raise IndexError(f"exit_index {exit_index} outside [0, {len(record.exit_softmax)})")
    vec = record.exit_softmax[exit_index]
    label = int(np.argmax(vec))
    return label, float(vec[label])


class Trace:
    """Immutable collection of sample records with shared (num_classes,
    num_exits) shape. Internally array-backed for fast whole-trace routing."""

    def __init__(
        self,
        num_classes: int,
        num_exits: int,
        ids: np.ndarray,
        labels: np.ndarray,
        softmax: np.ndarray,
        server_labels: np.ndarray,
        metadata: dict[str, Any] | None = None,
    ):
        if num_classes < 1:
            raise TraceValidationError("num_classes must be >= 1")
        if num_exits < 1:
            raise TraceValidationError("num_exits must be >= 1")
        self.num_classes = int(num_classes)
        self.num_exits = int(num_exits)
        self.ids = np.asarray(ids, dtype=np.int64)
        self.labels = np.asarray(labels, dtype=np.int64)
        self.softmax = np.asarray(softmax, dtype=np.float64)
        self.server_labels = np.asarray(server_labels, dtype=np.int64)
        self.metadata: dict[str, Any] = dict(metadata or {})
        self._validate_arrays()
        for arr in (self.ids, self.labels, self.softmax, self.server_labels):
            arr.setflags(write=False)
        # Cached per-exit argmax and max-confidence, shape (n, E). Routing and
        # LR feature extraction read these instead of rescanning softmax.
        self.predictions = np.argmax(self.softmax, axis=2)
        self.confidences = np.max(self.softmax, axis=2)
        self.predictions.setflags(write=False)
        self.confidences.setflags(write=False)

    def _validate_arrays(self) -> None:
        n = len(self.ids)
        if n < 1:
            raise TraceValidationError("trace must contain at least one record")
        if self.softmax.shape != (n, self.num_exits, self.num_classes):
            raise TraceValidationError(
                f"softmax array shape {self.softmax.shape} does not match "
                f"(n={n}, exits={self.num_exits}, classes={self.num_classes})")
        if len(self.labels) != n or len(self.server_labels) != n:
            raise TraceValidationError("label arrays must match record count")
        uniq, counts = np.unique(self.ids, return_counts=True)
        if np.any(counts > 1):
            dup = int(uniq[np.argmax(counts > 1)])
            raise TraceValidationError("duplicate sample id", dup, "id")
        for rec in self.records():
            rec.validate(self.num_classes, self.num_exits)

    @classmethod
    def from_records(
        cls,
        num_classes: int,
        num_exits: int,
        records: list[SampleRecord],
        metadata: dict[str, Any] | None = None,
    ) -> "Trace":
        if not records:
            raise TraceValidationError("trace must contain at least one record")
        for rec in records:
            rec.validate(num_classes, num_exits)
        ids = np.array([r.sample_id for r in records], dtype=np.int64)
        labels = np.array([r.true_label for r in records], dtype=np.int64)
        softmax = np.array([r.exit_softmax for r in records], dtype=np.float64)
        server = np.array([r.server_label for r in records], dtype=np.int64)
        return cls(num_classes, num_exits, ids, labels, softmax, server, metadata)

    def __len__(self) -> int:
        return len(self.ids)

    def record(self, index: int) -> SampleRecord:
        return SampleRecord(
            sample_id=int(self.ids[index]),
            true_label=int(self.labels[index]),
            exit_softmax=tuple(tuple(float(p) for p in vec) for vec in self.softmax[index]),
            server_label=int(self.server_labels[index]),
        )

    def records(self) -> Iterator[SampleRecord]:
        for i in range(len(self)):
            yield self.record(i)

    def subset(self, indices: np.ndarray) -> "Trace":
        """New trace holding the selected rows (parse order of `indices`)."""
        return Trace(
            self.num_classes,
            self.num_exits,
            self.ids[indices],
            self.labels[indices],
            self.softmax[indices],
            self.server_labels[indices],
            dict(self.metadata),
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Trace):
            return NotImplemented
        return (
            self.num_classes == other.num_classes
            and self.num_exits == other.num_exits
            and np.array_equal(self.ids, other.ids)
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.softmax, other.softmax)
            and np.array_equal(self.server_labels, other.server_labels)
            and self.metadata == other.metadata
        )


@dataclass(frozen=True)
class SynthConfig:
    """Deterministic synthetic-trace generator settings.

    `exit_accuracies` are per-exit top-1 targets, non-decreasing with depth.
    `separation` controls how much more concentrated the softmax mass is on
    the predicted class for correct samples than for incorrect ones; at 0 the
    two distributions coincide and confidence carries no signal.
    """

    num_samples: int
    num_classes: int
    num_exits: int
    exit_accuracies: tuple[float, ...]
    server_accuracy: float
    separation: float = 1.0
    seed: int = 0
    metadata: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def load(cls, path: str | Path) -> "SynthConfig":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            num_samples=int(obj["num_samples"]),
            num_classes=int(obj["num_classes"]),
            num_exits=int(obj["num_exits"]),
            exit_accuracies=tuple(float(a) for a in obj["exit_accuracies"]),
            server_accuracy=float(obj["server_accuracy"]),
            separation=float(obj.get("separation", 1.0)),
            seed=int(obj.get("seed", 0)),
            metadata=dict(obj.get("metadata", {})),
        )

    def validate(self) -> None:
        if self.num_samples < 1:
            raise ValueError("num_samples must be >= 1")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if self.num_exits < 1:
            raise ValueError("num_exits must be >= 1")
        if len(self.exit_accuracies) != self.num_exits:
            raise ValueError(
                f"need {self.num_exits} exit accuracies, got {len(self.exit_accuracies)}")
        for a in self.exit_accuracies:
            if not 0.0 <= a <= 1.0:
                raise ValueError(f"exit accuracy {a} outside [0, 1]")
        if list(self.exit_accuracies) != sorted(self.exit_accuracies):
            raise ValueError("exit accuracies must be non-decreasing with depth")
        if not 0.0 <= self.server_accuracy <= 1.0:
            raise ValueError(f"server accuracy {self.server_accuracy} outside [0, 1]")
        if self.separation < 0.0:
            raise ValueError("separation must be >= 0")


# Dirichlet concentration placed on the predicted class. Incorrect samples
# use the base alone; correct samples scale it by (1 + separation).
_BASE_CONCENTRATION = 3.0


def generate_synthetic(cfg: SynthConfig) -> Trace:
    """Draw a trace matching the configured per-exit accuracies.

    Each sample gets a latent difficulty u ~ U[0,1); exit k classifies it
    correctly iff u < exit_accuracies[k], so easy samples are correct at every
    depth that a harder sample is (accuracies are non-decreasing). Softmax
    vectors come from a Dirichlet peaked on the predicted class, then the
    largest component is swapped into the predicted slot so the realized
    argmax always equals the intended prediction. Wrong predictions (device
    and server) are uniform over the other classes.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    n, C, E = cfg.num_samples, cfg.num_classes, cfg.num_exits

    difficulty = rng.random(n)
    labels = rng.integers(0, C, size=n)
    softmax = np.empty((n, E, C), dtype=np.float64)

    conc_correct = 1.0 + _BASE_CONCENTRATION * (1.0 + cfg.separation)
    conc_incorrect = 1.0 + _BASE_CONCENTRATION

    for e in range(E):
        correct = difficulty < cfg.exit_accuracies[e]
        wrong_offset = rng.integers(1, C, size=n)
        pred = np.where(correct, labels, (labels + wrong_offset) % C)

        alpha = np.ones((n, C))
        alpha[np.arange(n), pred] = np.where(correct, conc_correct, conc_incorrect)
        gamma = rng.standard_gamma(alpha)
        vecs = gamma / gamma.sum(axis=1, keepdims=True)

        # Force argmax onto the predicted class by swapping in the largest draw.
        rows = np.arange(n)
        top = np.argmax(vecs, axis=1)
        top_val = vecs[rows, top]
        vecs[rows, top] = vecs[rows, pred]
        vecs[rows, pred] = top_val
        softmax[:, e, :] = vecs

    server_wrong = rng.random(n) >= cfg.server_accuracy
    server_offset = rng.integers(1, C, size=n)
    server_labels = np.where(server_wrong, (labels + server_offset) % C, labels)

    meta = {"generator": "synthetic", "seed": cfg.seed, **cfg.metadata}
    return Trace(C, E, np.arange(n), labels, softmax, server_labels, meta)


def _parse_header(line: str) -> tuple[int, int, dict[str, Any]]:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise TraceValidationError(f"header is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict) or "classes" not in obj or "exits" not in obj:
        raise TraceValidationError("header must be an object with 'classes' and 'exits'")
    classes, exits = obj["classes"], obj["exits"]
    if not isinstance(classes, int) or not isinstance(exits, int):
        raise TraceValidationError("header 'classes' and 'exits' must be integers")
    meta = obj.get("meta", {})
    if not isinstance(meta, dict):
        raise TraceValidationError("header 'meta' must be an object")
    return classes, exits, meta


def _parse_record(line: str, lineno: int) -> SampleRecord:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise TraceValidationError(f"line {lineno} is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise TraceValidationError(f"line {lineno} is not a JSON object")
    for key in ("id", "label", "exits", "server_label"):
        if key not in obj:
            raise TraceValidationError(f"line {lineno} missing field", None, key)
    sid = obj["id"]
    if not isinstance(sid, int) or isinstance(sid, bool):
        raise TraceValidationError(f"line {lineno}: id must be an integer", None, "id")
    if not isinstance(obj["label"], int) or not isinstance(obj["server_label"], int):
        raise TraceValidationError("label fields must be integers", sid, "label")
    exits = obj["exits"]
    if not isinstance(exits, list) or not all(isinstance(v, list) for v in exits):
        raise TraceValidationError("exits must be a list of vectors", sid, "exits")
    for vec in exits:
        for p in vec:
            if not isinstance(p, (int, float)) or isinstance(p, bool):
                raise TraceValidationError("softmax entries must be numbers", sid, "exits")
    return SampleRecord(
        sample_id=sid,
        true_label=obj["label"],
        exit_softmax=tuple(tuple(float(p) for p in vec) for vec in exits),
        server_label=obj["server_label"],
    )


def load_trace(path: str | Path) -> Trace:
    """Parse a JSON Lines trace file, preserving record order. Any schema or
    invariant violation raises TraceValidationError naming the sample."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise TraceError(f"cannot read trace file {path}: {exc}") from exc
    lines = [ln for ln in text.split("\n") if ln.strip()]
    if not lines:
        raise TraceValidationError(f"{path} is empty")
    classes, exits, meta = _parse_header(lines[0])
    records = [_parse_record(line, i + 2) for i, line in enumerate(lines[1:])]
    return Trace.from_records(classes, exits, records, meta)


def save_trace(trace: Trace, path: str | Path) -> None:
    """Write the canonical JSONL form: header line, then one record per line,
    LF endings. Saving a loaded file reproduces it byte for byte."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        header = {"classes": trace.num_classes, "exits": trace.num_exits,
                  "meta": trace.metadata}
        fh.write(json.dumps(header, separators=(",", ":")) + "\n")
        for i in range(len(trace)):
            rec = {
                "id": int(trace.ids[i]),
                "label": int(trace.labels[i]),
                "exits": [[float(p) for p in vec] for vec in trace.softmax[i]],
                "server_label": int(trace.server_labels[i]),
            }
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")
