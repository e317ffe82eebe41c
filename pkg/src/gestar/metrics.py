"""Evaluation metrics: macro F1, adaptation latency, task success, usability.

Four numbers summarize every comparison row: gesture-classification macro
F1, mean interface-adjustment latency in milliseconds, the percentage of
tasks completed inside the 30-second budget, and a usability questionnaire
score rescaled to [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, ValidationError

TASK_TIME_LIMIT_S = 30.0
SUS_ITEMS = 10


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # [C, C]; rows = true class, columns = predicted

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 2 or self.counts.shape[0] != self.counts.shape[1]:
            raise ValidationError(f"confusion matrix must be square, got {self.counts.shape}")
        if (self.counts < 0).any():
            raise ValidationError("confusion matrix counts must be non-negative")

    @classmethod
    def from_labels(cls, y_true, y_pred, n_classes: int) -> "ConfusionMatrix":
        y_true = np.asarray(y_true, dtype=np.int64)
        y_pred = np.asarray(y_pred, dtype=np.int64)
        counts = np.zeros((n_classes, n_classes), dtype=np.int64)
        np.add.at(counts, (y_true, y_pred), 1)
        return cls(counts)

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.counts + other.counts)


def per_class_f1(cm: ConfusionMatrix) -> np.ndarray:
    """Per-class harmonic mean of precision and recall; 0 where undefined."""
    counts = cm.counts
    tp = np.diag(counts).astype(np.float64)
    fp = counts.sum(axis=0) - tp
    fn = counts.sum(axis=1) - tp
    denom = 2.0 * tp + fp + fn
    out = np.zeros(cm.n_classes)
    nz = denom > 0
    out[nz] = 2.0 * tp[nz] / denom[nz]
    return out


def f1_macro(cm: ConfusionMatrix) -> float:
    """Unweighted mean of per-class F1 over all classes."""
    return float(per_class_f1(cm).mean())


def f1_micro(cm: ConfusionMatrix) -> float:
    total = cm.total
    return float(np.diag(cm.counts).sum() / total) if total else 0.0


def macro_f1_from_labels(y_true, y_pred, n_classes: int) -> float:
    return f1_macro(ConfusionMatrix.from_labels(y_true, y_pred, n_classes))


# ---------------------------------------------------------------------------
# adaptation metrics over transition records


def _latencies_ms(records) -> np.ndarray:
    vals = [float(getattr(r, "latency_ms", r)) for r in records]
    return np.asarray(vals, dtype=np.float64)


@dataclass
class LatencySummary:
    mean_ms: float
    p95_ms: float


def adjustment_latency(records) -> LatencySummary:
    """Mean and 95th-percentile per-step adaptation latency in milliseconds."""
    lat = _latencies_ms(list(records))
    if lat.size == 0:
        raise ParameterError("adjustment_latency needs at least one record")
    return LatencySummary(mean_ms=float(lat.mean()), p95_ms=float(np.percentile(lat, 95)))


def task_success_rate(records) -> float:
    """Percent of tasks that succeeded within the 30 s limit (closed boundary)."""
    records = list(records)
    if not records:
        raise ParameterError("task_success_rate needs at least one record")
    wins = 0
    for r in records:
        success = bool(r.success) if hasattr(r, "success") else bool(r[1])
        time_s = float(r.time_s) if hasattr(r, "time_s") else float(r[0])
        wins += success and time_s <= TASK_TIME_LIMIT_S
    return 100.0 * wins / len(records)


# ---------------------------------------------------------------------------
# usability questionnaire


def sus_score(responses) -> float:
    """Standard 10-item usability scoring rescaled to [0, 1].

    ``responses`` is ``[n_users, 10]`` with Likert values 1..5. Odd items
    (1-indexed) contribute ``value - 1``, even items ``5 - value``; the sum
    scales by 2.5 to 0..100, then divides by 100.
    """
    arr = np.asarray(responses, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.shape[1] != SUS_ITEMS:
        raise ValidationError(f"expected {SUS_ITEMS} questionnaire items, got {arr.shape[1]}")
    if (arr < 1).any() or (arr > 5).any():
        raise ValidationError("questionnaire items must be Likert values in 1..5")
    odd = arr[:, 0::2] - 1.0
    even = 5.0 - arr[:, 1::2]
    per_user = (odd.sum(axis=1) + even.sum(axis=1)) * 2.5
    return float(per_user.mean() / 100.0)


def simulate_sus_responses(satisfactions, rng: np.random.Generator) -> np.ndarray:
    """Likert responses for users with the given satisfaction levels in [0, 1].

    Odd items lean positive with satisfaction, even items negative, with
    one point of seeded noise before rounding.
    """
    sats = np.clip(np.asarray(satisfactions, dtype=np.float64), 0.0, 1.0)
    out = np.zeros((sats.size, SUS_ITEMS))
    for i, s in enumerate(sats):
        noise = rng.normal(0.0, 0.35, size=SUS_ITEMS)
        odd_vals = 1.0 + 4.0 * s + noise[0::2]
        even_vals = 5.0 - 4.0 * s + noise[1::2]
        out[i, 0::2] = odd_vals
        out[i, 1::2] = even_vals
    return np.clip(np.rint(out), 1, 5).astype(np.int64)


# ---------------------------------------------------------------------------
# report carrier


@dataclass
class MetricsReport:
    name: str
    f1: float | None
    per_class: list[float] = field(default_factory=list)
    latency_mean_ms: float = 0.0
    latency_p95_ms: float = 0.0
    success_rate_pct: float = 0.0
    accessibility: float = 0.0
    impaired: dict = field(default_factory=dict)
    unimpaired: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "f1": self.f1,
            "per_class_f1": list(self.per_class),
            "latency_mean_ms": self.latency_mean_ms,
            "latency_p95_ms": self.latency_p95_ms,
            "task_success_rate_pct": self.success_rate_pct,
            "accessibility_score": self.accessibility,
            "impaired": self.impaired,
            "unimpaired": self.unimpaired,
        }
