"""PRAUC and RCE per engagement type, and the per-model metric report."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .records import EngagementType

CLIP_EPS = 1e-15

# column order of the comparison tables
TABLE_ORDER = (EngagementType.RETWEET, EngagementType.REPLY, EngagementType.LIKE, EngagementType.QUOTE)
TABLE_NAMES = {
    EngagementType.RETWEET: "Retweet",
    EngagementType.REPLY: "Reply",
    EngagementType.LIKE: "Like",
    EngagementType.QUOTE: "Quote",
}


def _check_binary(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0/1")
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == len(y):
        raise ValueError("need at least one positive and one negative label")
    return s, y.astype(np.int64)


def pr_curve(scores, labels) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(thresholds, precision, recall), one point per distinct score, descending."""
    s, y = _check_binary(scores, labels)
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    # last index of every run of tied scores
    ends = np.r_[np.flatnonzero(np.diff(s)), len(s) - 1]
    tp = np.cumsum(y)[ends]
    k = ends + 1
    return s[ends], tp / k, tp / y.sum()


def prauc(scores, labels, interpolation: str = "step") -> float:
    """Area under the precision-recall curve.

    ``step`` is average precision, the sum over distinct thresholds of
    recall gain times precision there. ``trapezoid`` joins the points
    linearly, starting from (recall 0, precision of the first threshold).
    """
    _, precision, recall = pr_curve(scores, labels)
    if interpolation == "step":
        gains = np.diff(np.r_[0.0, recall])
        return float(np.sum(gains * precision))
    if interpolation == "trapezoid":
        r = np.r_[0.0, recall]
        p = np.r_[precision[0], precision]
        return float(np.sum(np.diff(r) * (p[1:] + p[:-1]) / 2.0))
    raise ValueError(f"unknown interpolation {interpolation!r}")


def cross_entropy(scores, labels) -> float:
    s = np.clip(np.asarray(scores, dtype=np.float64), CLIP_EPS, 1.0 - CLIP_EPS)
    y = np.asarray(labels, dtype=np.float64)
    return float(-np.mean(y * np.log(s) + (1.0 - y) * np.log(1.0 - s)))


def rce(scores, labels, baseline_rate: float) -> float:
    """Relative cross-entropy against a constant ``baseline_rate`` predictor, in percent."""
    if not 0.0 < baseline_rate < 1.0:
        raise ValueError(f"baseline_rate must lie in (0, 1), got {baseline_rate}")
    s, y = _check_binary(scores, labels)
    ce_model = cross_entropy(s, y)
    ce_base = cross_entropy(np.full(len(y), baseline_rate), y)
    return 100.0 * (1.0 - ce_model / ce_base)


@dataclass
class EngagementMetrics:
    prauc: float
    rce: float
    n: int
    positive_rate: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.prauc <= 1.0 or self.rce > 100.0:
            raise ValueError("metric outside its range")


@dataclass
class MetricReport:
    per_type: dict[EngagementType, EngagementMetrics] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            e.label: {"prauc": m.prauc, "rce": m.rce, "n": m.n, "positive_rate": m.positive_rate}
            for e, m in sorted(self.per_type.items())
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> MetricReport:
        return cls({EngagementType.parse(k): EngagementMetrics(v["prauc"], v["rce"], int(v["n"]),
                                                               v["positive_rate"])
                    for k, v in data.items()})

    def row(self) -> list[float]:
        """Values in table order: PRAUC and RCE for Retweet, Reply, Like, Quote."""
        out = []
        for e in TABLE_ORDER:
            m = self.per_type.get(e)
            out += [math.nan, math.nan] if m is None else [m.prauc, m.rce]
        return out

    def render(self, name: str = "model") -> str:
        from .reportfmt import compare_table
        return compare_table({name: self})

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")


def evaluate_type(scores, labels, baseline_rate: float, interpolation: str = "step") -> EngagementMetrics:
    s, y = _check_binary(scores, labels)
    return EngagementMetrics(prauc(s, y, interpolation), rce(s, y, baseline_rate), len(y), float(y.mean()))


def report(predictions: Mapping[EngagementType, Sequence[float]],
           labels: Mapping[EngagementType, Sequence[int]],
           baseline_rates: Mapping[EngagementType, float],
           interpolation: str = "step") -> MetricReport:
    """Metrics for every engagement type that has predictions."""
    missing = [e for e in predictions if e not in labels or e not in baseline_rates]
    if missing:
        raise ValueError(f"labels or baseline rates missing for {[e.label for e in missing]}")
    return MetricReport({
        e: evaluate_type(predictions[e], labels[e], baseline_rates[e], interpolation)
        for e in sorted(predictions)
    })


def write_pr_points(scores, labels, path: str | Path) -> None:
    thresholds, precision, recall = pr_curve(scores, labels)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("threshold,precision,recall\n")
        for t, p, r in zip(thresholds, precision, recall):
            fh.write(f"{float(t)!r},{float(p)!r},{float(r)!r}\n")
