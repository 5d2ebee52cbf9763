"""Binary offload decider: logistic regression on the two largest softmax
values of the final exit. Output 1 accepts the on-device inference, output 0
offloads the sample to the server.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np

from .trace import Trace


class Decision(IntEnum):
    OFFLOAD = 0
    ACCEPT = 1


class DegenerateTrainingError(ValueError):
    """Training labels contain a single class; the decider would be constant."""


@dataclass(frozen=True)
class LRTrainConfig:
    learning_rate: float = 0.1
    max_epochs: int = 1000
    tol: float = 1e-8
    l2: float = 0.0
    class_weighting: bool = False
    seed: int = 0  # reserved for random restarts; zero init ignores it

    def validate(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.l2 < 0:
            raise ValueError("l2 must be >= 0")


@dataclass(frozen=True)
class TrainingMeta:
    learning_rate: float
    epochs_run: int
    final_loss: float


@dataclass(frozen=True)
class LRModel:
    """Trained decider: probability = sigmoid(w1*top1 + w2*top2 + b), accept
    when the probability reaches decision_threshold."""

    weights: tuple[float, float]
    bias: float
    decision_threshold: float = 0.5
    training_meta: TrainingMeta | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if not all(np.isfinite(w) for w in (*self.weights, self.bias)):
            raise ValueError("weights and bias must be finite")
        if not 0.0 < self.decision_threshold < 1.0:
            raise ValueError("decision_threshold must lie in (0, 1)")

    def to_json(self) -> str:
        return json.dumps({
            "w": [self.weights[0], self.weights[1]],
            "b": self.bias,
            "threshold": self.decision_threshold,
        }, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "LRModel":
        obj = json.loads(text)
        w = obj["w"]
        return cls(weights=(float(w[0]), float(w[1])), bias=float(obj["b"]),
                   decision_threshold=float(obj.get("threshold", 0.5)))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "LRModel":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def sigmoid(z: np.ndarray | float) -> np.ndarray | float:
    return 1.0 / (1.0 + np.exp(-z))


def extract_features(softmax) -> tuple[float, float]:
    """The two largest entries of a softmax vector, ordered (top1, top2)."""
    vec = np.asarray(softmax, dtype=np.float64)
    if vec.size < 2:
        raise ValueError("softmax vector must have at least 2 entries")
    two = np.partition(vec, -2)[-2:]
    return float(two[1]), float(two[0])


def _final_exit_features(trace: Trace) -> np.ndarray:
    """(top1, top2) of the final exit for every sample, shape (n, 2)."""
    final = trace.softmax[:, -1, :]
    two = np.partition(final, -2, axis=1)[:, -2:]
    return two[:, ::-1].copy()


def lr_labels(trace: Trace) -> np.ndarray:
    """Training targets: 1 where the final exit's argmax equals the true
    label (on-device inference correct), 0 otherwise."""
    return (trace.predictions[:, -1] == trace.labels).astype(np.float64)


def loss_and_grad(
    weights: np.ndarray,
    features: np.ndarray,
    labels: np.ndarray,
    l2: float = 0.0,
    sample_weights: np.ndarray | None = None,
) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy plus (l2/2)*||w||^2 (bias excluded), with its
    analytic gradient. `weights` is (w1, w2, b).

    With `sample_weights` the mean becomes a weighted mean (weights are
    normalized to sum to n so the magnitude matches the unweighted loss).
    """
    weights = np.asarray(weights, dtype=np.float64)
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if len(X) == 0:
        raise ValueError("cannot compute loss on an empty dataset")
    if len(X) != len(y):
        raise ValueError("features and labels must have the same length")
    n = len(X)
    if sample_weights is None:
        sw = np.ones(n)
    else:
        sw = np.asarray(sample_weights, dtype=np.float64)
        sw = sw * (n / sw.sum())

    z = X @ weights[:2] + weights[2]
    p = sigmoid(z)
    # Clamp to keep log() finite; the gradient uses the exact (p - y) form.
    eps = 1e-15
    pc = np.clip(p, eps, 1.0 - eps)
    bce = -np.mean(sw * (y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc)))
    loss = bce + 0.5 * l2 * float(weights[:2] @ weights[:2])

    resid = sw * (p - y)
    grad = np.empty(3)
    grad[:2] = X.T @ resid / n + l2 * weights[:2]
    grad[2] = resid.sum() / n
    return float(loss), grad


def train(trace: Trace, cfg: LRTrainConfig = LRTrainConfig()) -> LRModel:
    """Full-batch gradient descent from zero weights on final-exit features.

    Deterministic; stops when the loss delta falls below cfg.tol or after
    cfg.max_epochs. Raises DegenerateTrainingError when all labels agree.
    """
    cfg.validate()
    X = _final_exit_features(trace)
    y = lr_labels(trace)
    return train_on_features(X, y, cfg)


def train_on_features(X: np.ndarray, y: np.ndarray, cfg: LRTrainConfig = LRTrainConfig()) -> LRModel:
    cfg.validate()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(X) < 2:
        raise ValueError("need at least 2 samples to train")
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == len(y):
        raise DegenerateTrainingError(
            f"all {len(y)} training labels are {int(y[0])}; decider would be constant")

    sw = None
    if cfg.class_weighting:
        n = len(y)
        w_pos = n / (2.0 * n_pos)
        w_neg = n / (2.0 * (n - n_pos))
        sw = np.where(y > 0.5, w_pos, w_neg)

    w = np.zeros(3)
    best_w = w.copy()
    best_loss, _ = loss_and_grad(w, X, y, cfg.l2, sw)
    prev_loss = best_loss
    epochs = 0
    for epochs in range(1, cfg.max_epochs + 1):
        loss, grad = loss_and_grad(w, X, y, cfg.l2, sw)
        if loss < best_loss:
            best_loss = loss
            best_w = w.copy()
        w = w - cfg.learning_rate * grad
        if epochs > 1 and abs(prev_loss - loss) < cfg.tol:
            break
        prev_loss = loss

    final_loss, _ = loss_and_grad(w, X, y, cfg.l2, sw)
    if final_loss < best_loss:
        best_loss, best_w = final_loss, w
    meta = TrainingMeta(cfg.learning_rate, epochs, best_loss)
    return LRModel(weights=(float(best_w[0]), float(best_w[1])), bias=float(best_w[2]),
                   training_meta=meta)


def predict(model: LRModel, softmax) -> tuple[Decision, float]:
    """Decision for one softmax vector: ACCEPT iff the accept probability is
    at least the model's threshold (ties accept)."""
    top1, top2 = extract_features(softmax)
    z = model.weights[0] * top1 + model.weights[1] * top2 + model.bias
    prob = float(sigmoid(z))
    decision = Decision.ACCEPT if prob >= model.decision_threshold else Decision.OFFLOAD
    return decision, prob


def decide_trace(model: LRModel, trace: Trace) -> np.ndarray:
    """Vector of Decision values (1 accept / 0 offload) over a whole trace,
    evaluated on the final exit. Matches predict() sample for sample."""
    X = _final_exit_features(trace)
    probs = sigmoid(X @ np.array(model.weights) + model.bias)
    return (probs >= model.decision_threshold).astype(np.int64)


@dataclass(frozen=True)
class ScoreReport:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def score(model: LRModel, trace: Trace) -> ScoreReport:
    """Confusion of the decider against device correctness. Positive class is
    ACCEPT; a false negative is a correctly classified sample the model
    offloads anyway (a wasted offload)."""
    decisions = decide_trace(model, trace)
    correct = trace.predictions[:, -1] == trace.labels
    accept = decisions == Decision.ACCEPT
    tp = int(np.sum(accept & correct))
    fp = int(np.sum(accept & ~correct))
    fn = int(np.sum(~accept & correct))
    tn = int(np.sum(~accept & ~correct))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return ScoreReport(precision, recall, f1, tp, fp, fn, tn)


def constant_accept_f1(trace: Trace) -> float:
    """F1 of the baseline that accepts every sample (recall 1, precision =
    device accuracy). The decider is only useful if it beats this."""
    acc = float(np.mean(trace.predictions[:, -1] == trace.labels))
    return 2 * acc / (1 + acc) if acc > 0 else 0.0
