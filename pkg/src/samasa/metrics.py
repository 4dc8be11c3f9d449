"""Classification metrics: micro accuracy, macro P/R/F1, confusion matrix.

Zero-division convention: precision/recall/F1 of a class with an empty
denominator is 0, matching common evaluation toolkits. Macro scores are
unweighted means over the full label inventory, in vocabulary order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class MetricsReport:
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    per_class: dict[str, dict[str, float]]
    total: int

    def to_json(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "per_class": self.per_class,
            "total": self.total,
        }


@dataclass
class ConfusionMatrix:
    labels: list[str]
    counts: np.ndarray  # rows = gold, columns = predicted

    def to_json(self) -> dict:
        return {"labels": self.labels, "counts": self.counts.tolist()}


def compute_metrics(gold, predicted, labels) -> tuple[MetricsReport, ConfusionMatrix]:
    gold = list(gold)
    predicted = list(predicted)
    if not gold:
        raise ValueError("cannot evaluate an empty dataset")
    if len(gold) != len(predicted):
        raise ValueError(f"{len(gold)} gold labels vs {len(predicted)} predictions")
    labels = list(labels)
    index = {name: i for i, name in enumerate(labels)}
    k = len(labels)

    counts = np.zeros((k, k), dtype=np.int64)
    for g, p in zip(gold, predicted):
        counts[index[g], index[p]] += 1

    per_class = {}
    precisions, recalls, f1s = [], [], []
    for i, name in enumerate(labels):
        tp = int(counts[i, i])
        pred_total = int(counts[:, i].sum())
        gold_total = int(counts[i, :].sum())
        precision = tp / pred_total if pred_total else 0.0
        recall = tp / gold_total if gold_total else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class[name] = {"precision": precision, "recall": recall, "f1": f1,
                           "support": gold_total}
        precisions.append(precision)
        recalls.append(recall)
        f1s.append(f1)

    report = MetricsReport(
        accuracy=float(np.trace(counts)) / len(gold),
        macro_precision=sum(precisions) / k,
        macro_recall=sum(recalls) / k,
        macro_f1=sum(f1s) / k,
        per_class=per_class,
        total=len(gold),
    )
    return report, ConfusionMatrix(labels=labels, counts=counts)
