"""Annotation records, maximum-voting aggregation, inter-annotator agreement."""

from __future__ import annotations

from collections import Counter
from dataclasses import asdict, dataclass

NOT_SURE = "NOT_SURE"


@dataclass
class AnnotationRecord:
    instance_id: str
    annotator_id: str
    choice: str
    comment: str = ""
    timestamp: float = 0.0
    record_id: int | None = None

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "AnnotationRecord":
        return cls(**obj)


def aggregate_annotations(records, min_agree: int = 2):
    """Resolve instance labels by plurality vote, ignoring NOT_SURE.

    Instances whose top vote count is below ``min_agree`` are dropped and
    reported. A plurality tie at or above the threshold is resolved to the
    lexicographically smallest label, so aggregation is deterministic.

    Returns ``(labels, dropped)``: a mapping instance_id -> winning label and
    the sorted list of dropped instance ids.
    """
    by_instance: dict[str, Counter] = {}
    for rec in records:
        tally = by_instance.setdefault(rec.instance_id, Counter())
        if rec.choice != NOT_SURE:
            tally[rec.choice] += 1

    labels: dict[str, str] = {}
    dropped: list[str] = []
    for instance_id, tally in by_instance.items():
        if not tally:
            dropped.append(instance_id)
            continue
        top = max(tally.values())
        if top < min_agree:
            dropped.append(instance_id)
            continue
        labels[instance_id] = min(name for name, c in tally.items() if c == top)
    return labels, sorted(dropped)


def cohen_kappa(a, b) -> float:
    """Chance-corrected agreement kappa = (p_o - p_e) / (1 - p_e).

    When expected agreement is 1 (both raters constant on the same label),
    returns 1 for identical sequences.
    """
    a = list(a)
    b = list(b)
    if not a:
        raise ValueError("cohen_kappa needs at least one item")
    if len(a) != len(b):
        raise ValueError(f"sequences differ in length: {len(a)} vs {len(b)}")
    n = len(a)
    p_o = sum(x == y for x, y in zip(a, b)) / n
    counts_a = Counter(a)
    counts_b = Counter(b)
    p_e = sum(counts_a[k] * counts_b.get(k, 0) for k in counts_a) / (n * n)
    if p_e == 1.0:
        return 1.0 if p_o == 1.0 else 0.0
    return (p_o - p_e) / (1.0 - p_e)


def pairwise_kappa(records) -> dict[str, float]:
    """Kappa for every annotator pair over their shared instances.

    Uses each annotator's recorded choice per instance (NOT_SURE counts as a
    category of its own). Pairs with no shared instances are omitted. Keys
    are "A-B" with annotator ids sorted.
    """
    by_annotator: dict[str, dict[str, str]] = {}
    for rec in records:
        by_annotator.setdefault(rec.annotator_id, {})[rec.instance_id] = rec.choice

    out: dict[str, float] = {}
    annotators = sorted(by_annotator)
    for i, first in enumerate(annotators):
        for second in annotators[i + 1:]:
            shared = sorted(set(by_annotator[first]) & set(by_annotator[second]))
            if not shared:
                continue
            seq_a = [by_annotator[first][k] for k in shared]
            seq_b = [by_annotator[second][k] for k in shared]
            out[f"{first}-{second}"] = cohen_kappa(seq_a, seq_b)
    return out
