"""Synthetic needle-in-a-haystack datasets with known ground truth.

Passages are drawn from a seeded mixture of isotropic Gaussians around
unit-norm centers, so the space has cluster structure. Each query is a
uniformly chosen passage plus Gaussian displacement noise, and its qrel
is exactly that passage. The planting quality is measured, not assumed:
generation ends with an exhaustive scan that records the rank of every
needle, and the report carries the empirical rank distribution.

Streams come from numpy's PCG64 seeded with SeedSequence(seed); byte
determinism is guaranteed for a fixed numpy version.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import CorpusIndex, EmbeddingMatrix, Qrels, QuerySet
from .errors import InvalidParamsError


@dataclass(frozen=True)
class SynthConfig:
    n_passages: int = 5000
    n_queries: int = 500
    dim: int = 32
    n_clusters: int = 10
    noise_sigma: float = 0.005
    cluster_sigma: float = 0.1
    seed: int = 0

    def validate(self) -> None:
        if self.n_passages < 1 or self.n_queries < 1:
            raise InvalidParamsError("need at least one passage and one query")
        if self.n_queries > self.n_passages:
            raise InvalidParamsError(
                f"n_queries={self.n_queries} exceeds n_passages={self.n_passages}"
            )
        if self.dim < 2:
            raise InvalidParamsError(f"dim must be >= 2, got {self.dim}")
        if not 1 <= self.n_clusters <= self.n_passages:
            raise InvalidParamsError(f"bad n_clusters={self.n_clusters}")
        if self.noise_sigma < 0 or self.cluster_sigma < 0:
            raise InvalidParamsError("sigmas must be non-negative")


@dataclass
class SynthReport:
    needle_ranks: np.ndarray   # int64 [n_queries], 1-based

    def frac_rank_le(self, k: int) -> float:
        return float(np.mean(self.needle_ranks <= k))

    def to_dict(self) -> dict:
        r = self.needle_ranks
        return {
            "n_queries": int(r.shape[0]),
            "median_rank": float(np.median(r)),
            "p99_rank": float(np.percentile(r, 99)),
            "max_rank": int(r.max()),
            "frac_rank_le_20": self.frac_rank_le(20),
        }


@dataclass
class SynthDataset:
    matrix: EmbeddingMatrix
    index: CorpusIndex
    queries: QuerySet
    qrels: Qrels
    report: SynthReport


def generate(cfg: SynthConfig) -> SynthDataset:
    cfg.validate()
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))

    centers = rng.standard_normal((cfg.n_clusters, cfg.dim))
    norms = np.linalg.norm(centers, axis=1, keepdims=True)
    centers = centers / np.maximum(norms, 1e-12)

    assignment = rng.integers(0, cfg.n_clusters, size=cfg.n_passages)
    passages = centers[assignment] + cfg.cluster_sigma * rng.standard_normal(
        (cfg.n_passages, cfg.dim)
    )
    passages = passages.astype(np.float32)

    needle_rows = rng.choice(cfg.n_passages, size=cfg.n_queries, replace=False)
    queries = passages[needle_rows] + (
        cfg.noise_sigma * rng.standard_normal((cfg.n_queries, cfg.dim))
    ).astype(np.float32)

    passage_ids = [f"p{i}" for i in range(cfg.n_passages)]
    query_ids = [f"q{i}" for i in range(cfg.n_queries)]
    qrels: Qrels = {
        qid: {passage_ids[int(row)]} for qid, row in zip(query_ids, needle_rows)
    }

    p64 = passages.astype(np.float64)
    ranks = np.empty(cfg.n_queries, dtype=np.int64)
    for qi in range(cfg.n_queries):
        diff = p64 - queries[qi].astype(np.float64)
        d2 = np.einsum("ij,ij->i", diff, diff)
        needle = int(needle_rows[qi])
        nd = d2[needle]
        ranks[qi] = np.count_nonzero(d2 < nd) + np.count_nonzero(d2[:needle] == nd) + 1

    return SynthDataset(
        matrix=EmbeddingMatrix.from_array(passages),
        index=CorpusIndex(passage_ids),
        queries=QuerySet(query_ids, EmbeddingMatrix.from_array(queries)),
        qrels=qrels,
        report=SynthReport(needle_ranks=ranks),
    )
