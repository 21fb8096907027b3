"""Evaluation metrics over the three uncertainty classes."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..annotation import Participant
from .data import CLASS_VALUES


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class ClassStats:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class EvalReport:
    weighted_f1: float
    mae: float
    r2: float  # 1 - SS_res/SS_tot over label values; nan when SS_tot == 0
    per_class: dict[float, ClassStats]
    n: int

    def to_json(self) -> dict:
        return {
            "weighted_f1": self.weighted_f1,
            "mae": self.mae,
            "r2": None if math.isnan(self.r2) else self.r2,
            "n": self.n,
            "per_class": {
                format(value, "g"): {
                    "precision": s.precision,
                    "recall": s.recall,
                    "f1": s.f1,
                    "support": s.support,
                }
                for value, s in self.per_class.items()
            },
        }


def evaluate(scores, true_labels) -> EvalReport:
    """Score argmax predictions against true label values in {0, 0.5, 1}."""
    scores = np.asarray(scores, dtype=np.float64)
    true_values = np.asarray(true_labels, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[1] != len(CLASS_VALUES):
        raise MetricError(f"scores must be [n, 3], got {scores.shape}")
    if scores.shape[0] != len(true_values) or len(true_values) == 0:
        raise MetricError("scores and labels must have equal non-zero length")

    values = np.asarray(CLASS_VALUES)
    pred_values = values[scores.argmax(axis=1)]

    per_class: dict[float, ClassStats] = {}
    weighted_f1 = 0.0
    n = len(true_values)
    for value in CLASS_VALUES:
        tp = int(((pred_values == value) & (true_values == value)).sum())
        fp = int(((pred_values == value) & (true_values != value)).sum())
        fn = int(((pred_values != value) & (true_values == value)).sum())
        support = tp + fn
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / support if support else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class[value] = ClassStats(precision, recall, f1, support)
        weighted_f1 += (support / n) * f1

    mae = float(np.abs(pred_values - true_values).mean())
    ss_tot = float(((true_values - true_values.mean()) ** 2).sum())
    ss_res = float(((true_values - pred_values) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else math.nan
    return EvalReport(
        weighted_f1=float(weighted_f1), mae=mae, r2=r2, per_class=per_class, n=n
    )


def mean_report(reports: list[EvalReport]) -> dict:
    """Seed-averaged headline metrics."""
    if not reports:
        raise MetricError("no reports to average")
    return {
        "weighted_f1": float(np.mean([r.weighted_f1 for r in reports])),
        "mae": float(np.mean([r.mae for r in reports])),
        "r2": float(np.mean([r.r2 for r in reports])),
        "n_seeds": len(reports),
    }


def eval_by_age_group(
    scores,
    true_labels,
    participant_ids: list[str | None],
    participants: list[Participant],
) -> dict[str, EvalReport]:
    """Split one evaluation by the participant age groups."""
    by_id = {p.participant_id: p for p in participants}
    scores = np.asarray(scores, dtype=np.float64)
    true_labels = np.asarray(true_labels, dtype=np.float64)
    groups: dict[str, list[int]] = {}
    for i, pid in enumerate(participant_ids):
        if pid is None or pid not in by_id:
            raise MetricError(f"missing participant metadata for sample {i}")
        groups.setdefault(by_id[pid].age_group, []).append(i)
    return {
        group: evaluate(scores[idx], true_labels[idx])
        for group, idx in sorted(groups.items())
    }
