"""Exact nearest-neighbor search over embedding rows.

Brute-force by design: no index structure, so results are exact and a
trivially auditable oracle for everything built on top. Distances are
computed in float64 (squared Euclidean internally, square root only at
the output) and ties are broken by ascending row index, which makes the
ordering deterministic regardless of subset order or chunking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import CorpusIndex, EmbeddingMatrix, Qrels, QuerySet
from .errors import DimMismatchError, EmptySubsetError, InvalidParamsError, UnknownIdError

METRICS = ("euclidean", "cosine")


@dataclass(frozen=True)
class Neighbor:
    row_index: int
    distance: float


def _pair_distances(rows: np.ndarray, q: np.ndarray, metric: str) -> np.ndarray:
    """Distance from q to each row, float64. Cosine distance is 1 - sim."""
    rows64 = rows.astype(np.float64, copy=False)
    q64 = q.astype(np.float64, copy=False)
    if metric == "euclidean":
        diff = rows64 - q64
        return np.einsum("ij,ij->i", diff, diff)  # squared; sqrt at output
    if metric == "cosine":
        qn = np.linalg.norm(q64)
        rn = np.linalg.norm(rows64, axis=1)
        denom = rn * qn
        sims = np.where(denom > 0.0, rows64 @ q64 / np.where(denom > 0.0, denom, 1.0), 0.0)
        return 1.0 - sims
    raise InvalidParamsError(f"unknown metric {metric!r}")


def top_k(
    m: EmbeddingMatrix,
    subset,
    q: np.ndarray,
    k: int,
    metric: str = "euclidean",
) -> list[Neighbor]:
    """min(k, |subset|) nearest rows, distance ascending, row index tiebreak."""
    if k < 1:
        raise InvalidParamsError(f"k must be >= 1, got {k}")
    subset = np.asarray(subset, dtype=np.int64)
    if subset.size == 0:
        raise EmptySubsetError("top_k over empty subset")
    q = np.asarray(q, dtype=np.float32).reshape(-1)
    if q.shape[0] != m.dim:
        raise DimMismatchError(f"query dim {q.shape[0]} != matrix dim {m.dim}")
    dists = _pair_distances(m.data[subset], q, metric)
    order = np.lexsort((subset, dists))[: min(k, subset.size)]
    if metric == "euclidean":
        out_d = np.sqrt(dists[order])
    else:
        out_d = dists[order]
    return [Neighbor(int(subset[i]), float(np.float32(d))) for i, d in zip(order, out_d)]


@dataclass(frozen=True)
class QueryDistance:
    query_id: str
    min_distance: float
    rank: int  # rank of the nearest relevant passage among all passages


@dataclass
class DistanceReport:
    metric: str
    rows: list[QueryDistance]

    def distances(self) -> np.ndarray:
        return np.array([r.min_distance for r in self.rows], dtype=np.float64)

    def ranks(self) -> np.ndarray:
        return np.array([r.rank for r in self.rows], dtype=np.int64)

    def summary(self) -> dict:
        d = self.distances()
        r = self.ranks()
        return {
            "n_queries": len(self.rows),
            "mean_distance": float(d.mean()),
            "median_distance": float(np.median(d)),
            "p90_distance": float(np.percentile(d, 90)),
            "median_rank": float(np.median(r)),
            "p90_rank": float(np.percentile(r, 90)),
        }

    def to_tsv(self) -> str:
        lines = ["query_id\tmin_distance\trank"]
        for row in self.rows:
            lines.append(f"{row.query_id}\t{row.min_distance:.6f}\t{row.rank}")
        s = self.summary()
        lines.append("")
        for key in ("n_queries", "mean_distance", "median_distance",
                    "p90_distance", "median_rank", "p90_rank"):
            lines.append(f"# {key}\t{s[key]}")
        return "\n".join(lines) + "\n"


def distance_stats(
    queries: QuerySet,
    qrels: Qrels,
    m: EmbeddingMatrix,
    index: CorpusIndex,
    metric: str = "euclidean",
) -> DistanceReport:
    """Per-query distance to the closest relevant passage and its global rank.

    Rank counts passages strictly closer than the best relevant one, plus
    equal-distance passages with a smaller row index, plus one.
    """
    qpos = {qid: i for i, qid in enumerate(queries.query_ids)}
    rows: list[QueryDistance] = []
    for qid in sorted(qrels):
        if qid not in qpos:
            raise UnknownIdError(f"qrels query {qid} missing from query set")
        q = queries.embeddings.row(qpos[qid])
        rel_rows = np.array(sorted(index.row_of(p) for p in qrels[qid]), dtype=np.int64)
        dists = _pair_distances(m.data, q, metric)
        rel_dists = dists[rel_rows]
        best_pos = int(np.lexsort((rel_rows, rel_dists))[0])
        best_row = int(rel_rows[best_pos])
        best_d = float(rel_dists[best_pos])
        rank = int(np.count_nonzero(dists < best_d)
                   + np.count_nonzero((dists == best_d)[:best_row]) + 1)
        if metric == "euclidean":
            best_d = float(np.sqrt(best_d))
        rows.append(QueryDistance(qid, best_d, rank))
    return DistanceReport(metric=metric, rows=rows)
