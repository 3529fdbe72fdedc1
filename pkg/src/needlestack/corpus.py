"""Embedding storage, identifier maps and relevance judgments.

On-disk formats:
  * EMB1: little-endian binary. Bytes 0-3 magic ``EMB1``, bytes 4-7
    uint32 row count, bytes 8-11 uint32 dimension, then rows * dim
    float32 values row-major.
  * ids sidecar: one identifier per line, UTF-8, LF, row order.
  * qrels: TSV ``query_id<TAB>passage_id``, UTF-8, LF.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadMagicError,
    DimMismatchError,
    EmptyJudgmentsError,
    IoFailureError,
    MalformedLineError,
    NonFiniteValueError,
    UnknownIdError,
)
from .runfile import Run, RunEntry, rank_entries

EMB1_MAGIC = b"EMB1"
_HEADER = struct.Struct("<4sII")


@dataclass(frozen=True)
class EmbeddingMatrix:
    """N x d row-major float32 matrix of passage or query embeddings."""

    data: np.ndarray

    @property
    def n_rows(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "EmbeddingMatrix":
        arr = np.ascontiguousarray(arr, dtype=np.float32)
        if arr.ndim != 2:
            raise DimMismatchError(f"expected 2-D array, got {arr.ndim}-D")
        if not np.isfinite(arr).all():
            raise NonFiniteValueError("embedding matrix contains NaN or Inf")
        return cls(arr)

    def row(self, i: int) -> np.ndarray:
        return self.data[i]


def save_embeddings(m: EmbeddingMatrix, path) -> None:
    payload = np.ascontiguousarray(m.data, dtype="<f4").tobytes(order="C")
    header = _HEADER.pack(EMB1_MAGIC, m.n_rows, m.dim)
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload)
    except OSError as exc:
        raise IoFailureError(f"cannot write embeddings to {path}: {exc}") from exc


def load_embeddings(path) -> EmbeddingMatrix:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise IoFailureError(f"cannot read embeddings from {path}: {exc}") from exc
    if len(blob) < _HEADER.size or blob[:4] != EMB1_MAGIC:
        raise BadMagicError(f"{path}: not an EMB1 file")
    _, n_rows, dim = _HEADER.unpack_from(blob)
    expected = n_rows * dim * 4
    payload = blob[_HEADER.size:]
    if len(payload) != expected:
        raise DimMismatchError(
            f"{path}: payload is {len(payload)} bytes, header promises {expected}"
        )
    data = np.frombuffer(payload, dtype="<f4").reshape(n_rows, dim)
    data = np.ascontiguousarray(data, dtype=np.float32)
    if not np.isfinite(data).all():
        raise NonFiniteValueError(f"{path}: payload contains NaN or Inf")
    return EmbeddingMatrix(data)


def save_ids(ids: list[str], path) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for i in ids:
                fh.write(i + "\n")
    except OSError as exc:
        raise IoFailureError(f"cannot write ids to {path}: {exc}") from exc


def load_ids(path) -> list[str]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return [line.rstrip("\n") for line in fh if line.rstrip("\n")]
    except OSError as exc:
        raise IoFailureError(f"cannot read ids from {path}: {exc}") from exc


@dataclass
class CorpusIndex:
    """Row <-> passage id mapping plus passage -> document ownership."""

    passage_ids: list[str]
    passage_to_doc: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self._row_of = {pid: i for i, pid in enumerate(self.passage_ids)}
        if len(self._row_of) != len(self.passage_ids):
            raise MalformedLineError("duplicate passage ids in index")

    def __len__(self) -> int:
        return len(self.passage_ids)

    def row_of(self, passage_id: str) -> int:
        try:
            return self._row_of[passage_id]
        except KeyError:
            raise UnknownIdError(f"unknown passage id: {passage_id}") from None

    def doc_of(self, passage_id: str) -> str:
        if passage_id not in self._row_of:
            raise UnknownIdError(f"unknown passage id: {passage_id}")
        # identity map unless an explicit document mapping was provided
        return self.passage_to_doc.get(passage_id, passage_id)


@dataclass(frozen=True)
class QuerySet:
    query_ids: list[str]
    embeddings: EmbeddingMatrix

    def __post_init__(self):
        if len(self.query_ids) != self.embeddings.n_rows:
            raise DimMismatchError(
                f"{len(self.query_ids)} query ids for {self.embeddings.n_rows} rows"
            )


# RelevanceJudgments: plain mapping query_id -> set of relevant passage ids.
Qrels = dict[str, set[str]]


def load_qrels(path) -> Qrels:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().split("\n")
    except OSError as exc:
        raise IoFailureError(f"cannot read qrels from {path}: {exc}") from exc
    qrels: Qrels = {}
    for lineno, line in enumerate(lines, start=1):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise MalformedLineError(
                f"{path}:{lineno}: expected 2 tab-separated columns, got {len(parts)}"
            )
        qid, pid = parts
        qrels.setdefault(qid, set()).add(pid)
    if not qrels:
        raise EmptyJudgmentsError(f"{path}: no judgments")
    return qrels


def save_qrels(qrels: Qrels, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for qid in sorted(qrels):
            for pid in sorted(qrels[qid]):
                fh.write(f"{qid}\t{pid}\n")


def validate_qrels(qrels: Qrels, index: CorpusIndex) -> None:
    for qid, pids in qrels.items():
        for pid in pids:
            if pid not in index._row_of:
                raise UnknownIdError(f"qrels for {qid} reference unknown passage {pid}")


def to_document_run(run: Run, index: CorpusIndex) -> Run:
    """Collapse a passage run to document granularity.

    Per query, only the highest-scoring passage of each document is kept
    and ranks are recomputed. Entry count never grows.
    """
    out: Run = {}
    for qid, entries in run.items():
        best: dict[str, RunEntry] = {}
        for e in sorted(entries, key=lambda e: e.rank):
            doc = index.doc_of(e.passage_id)
            if doc not in best:
                best[doc] = RunEntry(doc, e.score, 0, e.positive)
        out[qid] = rank_entries([(e.passage_id, e.score, e.positive) for e in best.values()])
    return out
