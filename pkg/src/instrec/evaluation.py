"""Dataset loading, the recommendation metric suite, and the threshold sweep.

Precision, recall, and F1 treat the top-1 prediction as single-label
classification over instruction classes and macro-average over the classes
present in the gold labels; list quality is captured separately by hit rate
at each requested cutoff. Zero-division terms contribute 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

from .exceptions import IOFailure, LengthMismatch, UnknownInstructionId
from .pipeline import RecommendationPipeline
from .templates import RetrievalConfig
from .types import Trigger


@dataclass(frozen=True)
class EvalSample:
    trigger: Trigger
    gold: str

    def to_dict(self) -> dict[str, Any]:
        return {"trigger": self.trigger.to_dict(), "gold": self.gold}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> EvalSample:
        return cls(trigger=Trigger.from_dict(d["trigger"]), gold=d["gold"])


@dataclass(frozen=True)
class MetricReport:
    recall: float
    precision: float
    macro_f1: float
    hit_rate: dict[int, float]

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "recall": self.recall,
            "precision": self.precision,
            "macro_f1": self.macro_f1,
        }
        for k in sorted(self.hit_rate):
            d[f"hr@{k}"] = self.hit_rate[k]
        return d


def compute_metrics(
    predictions: Sequence[Sequence[str]],
    golds: Sequence[str],
    k_values: Sequence[int] = (1, 3),
    library: Iterable[str] | None = None,
) -> MetricReport:
    """Metrics over parallel (ranked prediction list, gold id) pairs.

    With ``library`` given, every id is validated against it first.
    """
    if len(predictions) != len(golds):
        raise LengthMismatch(
            f"{len(predictions)} prediction lists vs {len(golds)} golds"
        )
    if not golds:
        raise LengthMismatch("cannot compute metrics over zero samples")
    if any(not p for p in predictions):
        raise ValueError("every prediction list must rank at least one id")
    if library is not None:
        known = set(library)
        for instr_id in set(golds) | {i for p in predictions for i in p}:
            if instr_id not in known:
                raise UnknownInstructionId(instr_id)

    top1 = [p[0] for p in predictions]
    classes = sorted(set(golds))
    precisions, recalls, f1s = [], [], []
    for cls in classes:
        tp = sum(1 for pred, gold in zip(top1, golds) if pred == cls and gold == cls)
        predicted = sum(1 for pred in top1 if pred == cls)
        actual = sum(1 for gold in golds if gold == cls)
        precision = tp / predicted if predicted else 0.0
        recall = tp / actual if actual else 0.0
        f1 = (
            2 * precision * recall / (precision + recall)
            if precision + recall
            else 0.0
        )
        precisions.append(precision)
        recalls.append(recall)
        f1s.append(f1)

    hit_rate = {}
    for k in k_values:
        if k < 1:
            raise ValueError(f"k values must be positive, got {k}")
        hits = sum(1 for pred, gold in zip(predictions, golds) if gold in pred[:k])
        hit_rate[k] = hits / len(golds)

    n = len(classes)
    return MetricReport(
        recall=sum(recalls) / n,
        precision=sum(precisions) / n,
        macro_f1=sum(f1s) / n,
        hit_rate=hit_rate,
    )


@dataclass
class SweepRow:
    """One threshold setting's aggregate metrics plus any per-sample errors."""

    delta: float
    metrics: MetricReport | None
    errors: list[tuple[str, str]] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return not self.errors


def delta_sweep(
    pipeline: RecommendationPipeline,
    testset: Sequence[EvalSample],
    deltas: Sequence[float],
    k: int = 3,
    novelty_delta: float = 0.5,
) -> list[SweepRow]:
    """Run inference over the test set once per threshold and aggregate.

    Per-sample failures are recorded with their trigger id and excluded from
    that row's metrics; a row with errors is flagged incomplete.
    """
    library_ids = set(pipeline.instructions)
    rows = []
    for delta in deltas:
        cfg = RetrievalConfig(delta=delta, novelty_delta=novelty_delta)
        predictions, golds, errors = [], [], []
        for sample in testset:
            try:
                result = pipeline.infer(sample.trigger, cfg, k=k)
            except Exception as exc:
                errors.append((sample.trigger.id, str(exc)))
                continue
            predictions.append(list(result.instructions))
            golds.append(sample.gold)
        metrics = (
            compute_metrics(predictions, golds, k_values=(1, 3), library=library_ids)
            if golds
            else None
        )
        rows.append(SweepRow(delta=delta, metrics=metrics, errors=errors))
    return rows


def sweep_to_csv(rows: Sequence[SweepRow]) -> str:
    """Render sweep rows as CSV with the fixed header
    ``delta,recall,precision,macro_f1,hr1,hr3``."""
    lines = ["delta,recall,precision,macro_f1,hr1,hr3"]
    for row in rows:
        m = row.metrics
        if m is None:
            lines.append(f"{row.delta},,,,,")
            continue
        lines.append(
            f"{row.delta},{m.recall},{m.precision},{m.macro_f1},"
            f"{m.hit_rate[1]},{m.hit_rate[3]}"
        )
    return "\n".join(lines) + "\n"


def load_eval_samples(path: str) -> list[EvalSample]:
    """Read an eval set: JSONL of ``{"trigger": {...}, "gold": id}``."""
    samples = []
    try:
        with open(path, encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if line:
                    samples.append(EvalSample.from_dict(json.loads(line)))
    except OSError as exc:
        raise IOFailure(f"cannot read eval set: {exc}") from exc
    return samples
