"""Ranked retrieval output and its TREC-style text serialization.

A run maps query_id to entries sorted by descending score (ties broken
by ascending passage id), ranks 1..m contiguous. The text form is the
usual six-column run line ``query_id Q0 passage_id rank score tag``.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import MalformedLineError


@dataclass(frozen=True)
class RunEntry:
    passage_id: str
    score: float
    rank: int
    positive: bool


Run = dict[str, list[RunEntry]]


def rank_entries(scored: list[tuple[str, float, bool]]) -> list[RunEntry]:
    """Order (id, score, positive) triples and assign 1-based ranks."""
    ordered = sorted(scored, key=lambda t: (-t[1], t[0]))
    return [RunEntry(pid, score, rank, pos)
            for rank, (pid, score, pos) in enumerate(ordered, start=1)]


def write_run(run: Run, path, tag: str = "needlestack") -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for qid in sorted(run):
            for e in run[qid]:
                fh.write(f"{qid} Q0 {e.passage_id} {e.rank} {e.score:.6f} {tag}\n")


def read_run(path, threshold: float | None = None) -> Run:
    """Parse a run file; positive flags are recomputed as score >= threshold.

    Without a threshold every entry is read as non-positive (flags are
    not stored in the text format).
    """
    run: Run = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(" ")
            if len(parts) != 6:
                raise MalformedLineError(f"{path}:{lineno}: expected 6 columns, got {len(parts)}")
            qid, _, pid, rank, score, _ = parts
            positive = threshold is not None and float(score) >= threshold
            run.setdefault(qid, []).append(RunEntry(pid, float(score), int(rank), positive))
    for entries in run.values():
        entries.sort(key=lambda e: e.rank)
    return run
