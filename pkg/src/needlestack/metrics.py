"""Retrieval metrics over run files and row-level classification reports.

Binary relevance throughout. nDCG uses gain 1 and the log2(i + 1) rank
discount; recall is micro-averaged over relevant items, with a per-query
hit rate reported alongside. Queries present in the judgments but absent
from a run simply contribute zero, so partial runs evaluate cleanly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .corpus import Qrels
from .errors import LengthMismatchError, UnknownQueryError
from .runfile import Run


def _check_queries(run: Run, qrels: Qrels) -> None:
    for qid in run:
        if qid not in qrels:
            raise UnknownQueryError(f"run query {qid} has no judgments")


def recall_eval(run: Run, qrels: Qrels, cutoff: int | None = None) -> float:
    """Relevant items found in the positive set / total relevant items.

    With a cutoff, entries beyond that rank are discarded first.
    """
    _check_queries(run, qrels)
    found = 0
    total = 0
    for qid, rel in qrels.items():
        total += len(rel)
        for e in run.get(qid, ()):
            if cutoff is not None and e.rank > cutoff:
                continue
            if e.positive and e.passage_id in rel:
                found += 1
    return found / total if total else 0.0


def hit_rate(run: Run, qrels: Qrels, cutoff: int | None = None) -> float:
    """Fraction of queries with at least one relevant item in the positive set."""
    _check_queries(run, qrels)
    hits = 0
    for qid, rel in qrels.items():
        for e in run.get(qid, ()):
            if cutoff is not None and e.rank > cutoff:
                continue
            if e.positive and e.passage_id in rel:
                hits += 1
                break
    return hits / len(qrels) if qrels else 0.0


def mrr_at(run: Run, qrels: Qrels, cutoff: int = 10) -> float:
    """Mean reciprocal rank of the first relevant entry within the cutoff."""
    _check_queries(run, qrels)
    total = 0.0
    for qid, rel in qrels.items():
        for e in run.get(qid, ()):
            if e.rank > cutoff:
                break
            if e.passage_id in rel:
                total += 1.0 / e.rank
                break
    return total / len(qrels) if qrels else 0.0


def ndcg_at(run: Run, qrels: Qrels, cutoff: int = 20) -> float:
    """Binary-gain nDCG with log2(rank + 1) discount."""
    _check_queries(run, qrels)
    scores = []
    for qid, rel in qrels.items():
        if not rel:
            continue
        dcg = 0.0
        for e in run.get(qid, ()):
            if e.rank > cutoff:
                break
            if e.passage_id in rel:
                dcg += 1.0 / math.log2(e.rank + 1)
        ideal = sum(1.0 / math.log2(r + 1) for r in range(1, min(len(rel), cutoff) + 1))
        scores.append(dcg / ideal)
    return sum(scores) / len(scores) if scores else 0.0


@dataclass(frozen=True)
class EvalResult:
    recall: float
    recall_at: dict[int, float]
    mrr_at_10: float
    ndcg_at_20: float
    hit_rate: float
    mode: str
    n_queries: int

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "n_queries": self.n_queries,
            "recall": self.recall,
            "recall_at": {str(k): v for k, v in self.recall_at.items()},
            "mrr_at_10": self.mrr_at_10,
            "ndcg_at_20": self.ndcg_at_20,
            "hit_rate": self.hit_rate,
        }


def evaluate_run(
    run: Run,
    qrels: Qrels,
    cutoffs: tuple[int, ...] = (100, 1000),
    mode: str = "passage",
) -> EvalResult:
    return EvalResult(
        recall=recall_eval(run, qrels),
        recall_at={c: recall_eval(run, qrels, cutoff=c) for c in cutoffs},
        mrr_at_10=mrr_at(run, qrels, 10),
        ndcg_at_20=ndcg_at(run, qrels, 20),
        hit_rate=hit_rate(run, qrels),
        mode=mode,
        n_queries=len(qrels),
    )


@dataclass(frozen=True)
class ClassStats:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class ClassificationReport:
    per_class: dict[int, ClassStats]
    accuracy: float
    macro_avg: ClassStats
    weighted_avg: ClassStats
    n_samples: int

    def to_dict(self) -> dict:
        def unpack(s: ClassStats) -> dict:
            return {"precision": s.precision, "recall": s.recall,
                    "f1": s.f1, "support": s.support}

        return {
            "classes": {str(c): unpack(s) for c, s in self.per_class.items()},
            "accuracy": self.accuracy,
            "macro_avg": unpack(self.macro_avg),
            "weighted_avg": unpack(self.weighted_avg),
            "n_samples": self.n_samples,
        }


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def classification_report(
    scores: np.ndarray,
    labels: np.ndarray,
    threshold: float = 0.5,
) -> ClassificationReport:
    """Per-class precision/recall/F1 for predictions score >= threshold."""
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if scores.shape[0] != labels.shape[0]:
        raise LengthMismatchError(
            f"{scores.shape[0]} scores for {labels.shape[0]} labels"
        )
    labels = labels.astype(np.int64)
    preds = (scores >= threshold).astype(np.int64)
    n = labels.shape[0]

    per_class: dict[int, ClassStats] = {}
    for cls in (0, 1):
        tp = int(np.count_nonzero((preds == cls) & (labels == cls)))
        fp = int(np.count_nonzero((preds == cls) & (labels != cls)))
        fn = int(np.count_nonzero((preds != cls) & (labels == cls)))
        support = int(np.count_nonzero(labels == cls))
        p, r, f1 = _prf(tp, fp, fn)
        per_class[cls] = ClassStats(p, r, f1, support)

    accuracy = float(np.count_nonzero(preds == labels)) / n if n else 0.0
    macro = ClassStats(
        precision=sum(s.precision for s in per_class.values()) / 2,
        recall=sum(s.recall for s in per_class.values()) / 2,
        f1=sum(s.f1 for s in per_class.values()) / 2,
        support=n,
    )
    weighted = ClassStats(
        precision=sum(s.precision * s.support for s in per_class.values()) / n if n else 0.0,
        recall=sum(s.recall * s.support for s in per_class.values()) / n if n else 0.0,
        f1=sum(s.f1 * s.support for s in per_class.values()) / n if n else 0.0,
        support=n,
    )
    return ClassificationReport(
        per_class=per_class,
        accuracy=accuracy,
        macro_avg=macro,
        weighted_avg=weighted,
        n_samples=n,
    )
