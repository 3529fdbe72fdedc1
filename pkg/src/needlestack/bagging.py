"""Deterministic overlapping subsets of the passage index space.

Construction, fully pinned so plans reproduce across processes (see rng
module for the generator contract):

  1. Shuffle indices 0..n-1 with a SplitMix64-driven Fisher-Yates.
  2. Cut the shuffled sequence into s contiguous base shards of size
     ceil(n / s); the last shard takes the remainder.
  3. For each shard, extend it with floor(overlap * shard_size) indices
     sampled without replacement (same stream, continuing) from the
     shard's complement, taken in ascending index order.

Subsets are stored sorted ascending. The union of subsets is always the
full index space; overlap = 0 yields an exact partition.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .corpus import CorpusIndex, Qrels
from .errors import InvalidParamsError, UnknownIdError
from .rng import SplitMix64


@dataclass
class BaggingPlan:
    s: int
    overlap: float
    seed: int
    n_passages: int
    base_shard_size: int
    subsets: list[np.ndarray]   # int64, sorted ascending, no duplicates

    def to_json(self) -> str:
        return json.dumps(
            {
                "s": self.s,
                "overlap": self.overlap,
                "seed": self.seed,
                "n_passages": self.n_passages,
                "base_shard_size": self.base_shard_size,
                "subsets": [s.tolist() for s in self.subsets],
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "BaggingPlan":
        d = json.loads(text)
        return cls(
            s=d["s"],
            overlap=d["overlap"],
            seed=d["seed"],
            n_passages=d["n_passages"],
            base_shard_size=d["base_shard_size"],
            subsets=[np.asarray(s, dtype=np.int64) for s in d["subsets"]],
        )


def make_plan(n_passages: int, s: int, overlap: float, seed: int) -> BaggingPlan:
    if not 1 <= s <= n_passages:
        raise InvalidParamsError(f"need 1 <= s <= n_passages, got s={s}, n={n_passages}")
    if not 0.0 <= overlap < 1.0:
        raise InvalidParamsError(f"overlap must be in [0, 1), got {overlap}")
    base = -(-n_passages // s)   # ceil
    if (s - 1) * base >= n_passages:
        # slicing would leave at least one shard empty
        raise InvalidParamsError(
            f"s={s} with n={n_passages} leaves an empty base shard; lower s"
        )
    stream = SplitMix64(seed)
    perm = list(range(n_passages))
    stream.shuffle(perm)
    perm = np.asarray(perm, dtype=np.int64)

    subsets: list[np.ndarray] = []
    in_shard = np.zeros(n_passages, dtype=bool)
    for b in range(s):
        shard = perm[b * base:(b + 1) * base]
        in_shard[:] = False
        in_shard[shard] = True
        complement = np.flatnonzero(~in_shard)
        # s = 1 leaves no complement to draw overlap from
        extra = min(int(overlap * shard.size), complement.size)
        sampled = stream.sample(complement, extra)
        subset = np.concatenate([shard, np.asarray(sampled, dtype=np.int64)])
        subset.sort()
        subsets.append(subset)
    return BaggingPlan(
        s=s,
        overlap=overlap,
        seed=seed,
        n_passages=n_passages,
        base_shard_size=base,
        subsets=subsets,
    )


def assign_queries(plan: BaggingPlan, qrels: Qrels, index: CorpusIndex) -> dict[str, list[int]]:
    """query_id -> sorted subset indices holding >= 1 of its relevant passages."""
    membership: dict[int, list[int]] = {}
    for b, subset in enumerate(plan.subsets):
        for row in subset.tolist():
            membership.setdefault(row, []).append(b)
    out: dict[str, list[int]] = {}
    for qid in sorted(qrels):
        hit: set[int] = set()
        for pid in qrels[qid]:
            row = index.row_of(pid)
            if row >= plan.n_passages:
                raise UnknownIdError(f"passage {pid} outside plan of size {plan.n_passages}")
            hit.update(membership.get(row, ()))
        out[qid] = sorted(hit)
    return out
