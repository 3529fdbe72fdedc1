"""Bagged SVR retrieval pipeline: build per-subset training sets, train
scaler+SVR members, persist the ensemble, answer queries by voting union.

Per query and subset member, the features are the query embedding
concatenated with each of its k nearest passages inside that subset
(width 2d), labeled 1 for relevant passages and 0 otherwise. A member
votes positive on a candidate when its regression score reaches the
threshold; retrieval outputs the union of positive votes, deduplicated
per passage keeping the maximum score. The full scored candidate list
is kept so rank-cutoff metrics remain computable.

Model container (little-endian, length-prefixed): magic ``SVEN``,
uint32 version, config JSON, plan, then per member the scaler arrays
and the SVR (float32 support vectors, float64 beta, float64 bias,
params JSON).
"""

from __future__ import annotations

import json
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import scaler as scaler_mod
from .bagging import BaggingPlan, assign_queries, make_plan
from .corpus import CorpusIndex, EmbeddingMatrix, Qrels, QuerySet
from .errors import (
    BadMagicError,
    DimMismatchError,
    InvalidParamsError,
    IoFailureError,
    TruncatedFileError,
    VersionMismatchError,
)
from .knn import METRICS, top_k
from .metrics import ClassificationReport, classification_report
from .rng import SplitMix64, derive_seed
from .runfile import Run, rank_entries
from .scaler import FeatureScaler
from .svr import SvrModel, SvrParams, predict, train_svr

MODEL_MAGIC = b"SVEN"
MODEL_VERSION = 1

_SPLIT_STREAM = 1   # derive_seed tag for per-subset row splits


@dataclass(frozen=True)
class TrainConfig:
    k: int = 50
    s: int = 35
    overlap: float = 0.6
    svr: SvrParams = field(default_factory=SvrParams)
    threshold: float = 0.5
    split: float = 0.1
    seed: int = 0
    metric: str = "euclidean"
    scaler_fit: str = "all"          # fit before splitting, matching the pipeline order
    missing_positive: str = "skip"
    infer_k: int | None = None

    def validate(self) -> None:
        if self.k < 2:
            raise InvalidParamsError(f"k must be >= 2, got {self.k}")
        if not 0.0 < self.split < 1.0:
            raise InvalidParamsError(f"split must be in (0, 1), got {self.split}")
        if self.s < 1:
            raise InvalidParamsError(f"s must be >= 1, got {self.s}")
        if not 0.0 <= self.overlap < 1.0:
            raise InvalidParamsError(f"overlap must be in [0, 1), got {self.overlap}")
        if self.metric not in METRICS:
            raise InvalidParamsError(f"metric must be one of {METRICS}")
        if self.scaler_fit not in ("all", "train"):
            raise InvalidParamsError("scaler_fit must be 'all' or 'train'")
        if self.missing_positive not in ("skip", "inject"):
            raise InvalidParamsError("missing_positive must be 'skip' or 'inject'")
        if self.infer_k is not None and self.infer_k < 1:
            raise InvalidParamsError(f"infer_k must be >= 1, got {self.infer_k}")
        self.svr.validate()

    def to_dict(self) -> dict:
        return {
            "k": self.k, "s": self.s, "overlap": self.overlap,
            "threshold": self.threshold, "split": self.split, "seed": self.seed,
            "metric": self.metric, "scaler_fit": self.scaler_fit,
            "missing_positive": self.missing_positive, "infer_k": self.infer_k,
            "svr": {
                "C": self.svr.C, "epsilon": self.svr.epsilon, "gamma": self.svr.gamma,
                "tol": self.svr.tol, "max_passes": self.svr.max_passes,
                "kernel": self.svr.kernel,
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        svr_d = d.get("svr", {})
        return cls(
            k=d.get("k", 50), s=d.get("s", 35), overlap=d.get("overlap", 0.6),
            svr=SvrParams(
                C=svr_d.get("C", 1.0), epsilon=svr_d.get("epsilon", 0.1),
                gamma=svr_d.get("gamma", "scale"), tol=svr_d.get("tol", 1e-3),
                max_passes=svr_d.get("max_passes"), kernel=svr_d.get("kernel", "rbf"),
            ),
            threshold=d.get("threshold", 0.5), split=d.get("split", 0.1),
            seed=d.get("seed", 0), metric=d.get("metric", "euclidean"),
            scaler_fit=d.get("scaler_fit", "all"),
            missing_positive=d.get("missing_positive", "skip"),
            infer_k=d.get("infer_k"),
        )


@dataclass
class FeatureSet:
    """Rows of concat(query_emb, passage_emb) with {0,1} labels."""

    features: np.ndarray                     # float32 [R, 2d]
    labels: np.ndarray                       # float32 [R]
    provenance: list[tuple[str, int]]        # (query_id, passage row) per row
    skipped_queries: list[str]


def build_training_set(
    subset: np.ndarray,
    assigned_queries: list[str],
    m: EmbeddingMatrix,
    queries: QuerySet,
    qrels: Qrels,
    index: CorpusIndex,
    cfg: TrainConfig,
) -> FeatureSet:
    """k-NN rows for every assigned query, restricted to one subset.

    Queries whose relevant passages miss the top-k are dropped under
    missing_positive='skip', or patched under 'inject' by replacing the
    k-th neighbor with the nearest in-subset relevant passage.
    """
    if queries.embeddings.dim != m.dim:
        raise DimMismatchError(
            f"query dim {queries.embeddings.dim} != collection dim {m.dim}"
        )
    qpos = {qid: i for i, qid in enumerate(queries.query_ids)}
    subset = np.asarray(subset, dtype=np.int64)
    subset_set = set(subset.tolist())

    feats: list[np.ndarray] = []
    labels: list[float] = []
    provenance: list[tuple[str, int]] = []
    skipped: list[str] = []
    for qid in assigned_queries:
        q = queries.embeddings.row(qpos[qid])
        rel_rows = {index.row_of(pid) for pid in qrels[qid]}
        neighbors = top_k(m, subset, q, cfg.k, cfg.metric)
        hit_rows = [nb.row_index for nb in neighbors]
        if not any(r in rel_rows for r in hit_rows):
            if cfg.missing_positive == "skip":
                skipped.append(qid)
                continue
            in_subset = sorted(rel_rows & subset_set)
            if not in_subset:
                skipped.append(qid)
                continue
            hit_rows[-1] = top_k(m, in_subset, q, 1, cfg.metric)[0].row_index
        for row in hit_rows:
            feats.append(np.concatenate([q, m.row(row)]))
            labels.append(1.0 if row in rel_rows else 0.0)
            provenance.append((qid, row))
    width = 2 * m.dim
    features = (
        np.vstack(feats).astype(np.float32)
        if feats else np.empty((0, width), dtype=np.float32)
    )
    return FeatureSet(
        features=features,
        labels=np.asarray(labels, dtype=np.float32),
        provenance=provenance,
        skipped_queries=skipped,
    )


def split_rows(n_rows: int, split: float, seed: int, subset_index: int):
    """Deterministic per-subset train/test row split (sorted index arrays)."""
    order = list(range(n_rows))
    SplitMix64(derive_seed(seed, _SPLIT_STREAM, subset_index)).shuffle(order)
    n_test = int(n_rows * split)
    test = np.asarray(sorted(order[:n_test]), dtype=np.int64)
    train = np.asarray(sorted(order[n_test:]), dtype=np.int64)
    return train, test


@dataclass
class MemberStats:
    subset_index: int
    n_rows: int
    n_train: int
    n_test: int
    n_skipped_queries: int
    converged: bool
    kkt_residual: float
    iterations: int
    n_support: int
    report: ClassificationReport | None

    def to_dict(self) -> dict:
        return {
            "subset_index": self.subset_index,
            "n_rows": self.n_rows,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "n_skipped_queries": self.n_skipped_queries,
            "converged": self.converged,
            "kkt_residual": self.kkt_residual,
            "iterations": self.iterations,
            "n_support": self.n_support,
            "report": self.report.to_dict() if self.report else None,
        }


@dataclass
class TrainReport:
    members: list[MemberStats]
    pooled: ClassificationReport | None
    total_skipped: int
    feature_dim: int
    config: TrainConfig

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "feature_dim": self.feature_dim,
            "total_skipped": self.total_skipped,
            "pooled": self.pooled.to_dict() if self.pooled else None,
            "members": [m.to_dict() for m in self.members],
        }


@dataclass
class EnsembleMember:
    scaler: FeatureScaler
    model: SvrModel


@dataclass
class EnsembleModel:
    plan: BaggingPlan
    members: list[EnsembleMember]
    config: TrainConfig
    format_version: int = MODEL_VERSION


def _train_member(
    b: int,
    plan: BaggingPlan,
    assignment: dict[str, list[int]],
    m: EmbeddingMatrix,
    queries: QuerySet,
    qrels: Qrels,
    index: CorpusIndex,
    cfg: TrainConfig,
):
    assigned = [qid for qid in sorted(assignment) if b in assignment[qid]]
    fs = build_training_set(plan.subsets[b], assigned, m, queries, qrels, index, cfg)
    n_rows = fs.features.shape[0]
    if n_rows == 0:
        raise InvalidParamsError(
            f"subset {b} produced no training rows (all {len(assigned)} queries skipped)"
        )
    train_idx, test_idx = split_rows(n_rows, cfg.split, cfg.seed, b)
    fit_rows = fs.features if cfg.scaler_fit == "all" else fs.features[train_idx]
    sc = scaler_mod.fit(fit_rows)
    x_train = scaler_mod.transform(sc, fs.features[train_idx])
    model = train_svr(x_train, fs.labels[train_idx], cfg.svr)

    report = None
    test_scores = np.empty(0)
    test_labels = np.empty(0)
    if test_idx.size:
        x_test = scaler_mod.transform(sc, fs.features[test_idx])
        test_scores = np.asarray(predict(model, x_test), dtype=np.float64)
        test_labels = fs.labels[test_idx]
        report = classification_report(test_scores, test_labels, cfg.threshold)
    stats = MemberStats(
        subset_index=b,
        n_rows=n_rows,
        n_train=int(train_idx.size),
        n_test=int(test_idx.size),
        n_skipped_queries=len(fs.skipped_queries),
        converged=model.summary.converged,
        kkt_residual=model.summary.kkt_residual,
        iterations=model.summary.iterations,
        n_support=model.summary.n_support,
        report=report,
    )
    return EnsembleMember(scaler=sc, model=model), stats, test_scores, test_labels


def train_ensemble(
    m: EmbeddingMatrix,
    index: CorpusIndex,
    queries: QuerySet,
    qrels: Qrels,
    cfg: TrainConfig,
    threads: int = 1,
) -> tuple[EnsembleModel, TrainReport]:
    cfg.validate()
    if len(index) != m.n_rows:
        raise DimMismatchError(f"index has {len(index)} ids for {m.n_rows} rows")
    plan = make_plan(m.n_rows, cfg.s, cfg.overlap, cfg.seed)
    assignment = assign_queries(plan, qrels, index)

    def job(b: int):
        return _train_member(b, plan, assignment, m, queries, qrels, index, cfg)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(job, range(cfg.s)))
    else:
        results = [job(b) for b in range(cfg.s)]

    members = [r[0] for r in results]
    stats = [r[1] for r in results]
    pooled_scores = np.concatenate([r[2] for r in results]) if results else np.empty(0)
    pooled_labels = np.concatenate([r[3] for r in results]) if results else np.empty(0)
    pooled = (
        classification_report(pooled_scores, pooled_labels, cfg.threshold)
        if pooled_scores.size else None
    )
    report = TrainReport(
        members=stats,
        pooled=pooled,
        total_skipped=sum(s.n_skipped_queries for s in stats),
        feature_dim=2 * m.dim,
        config=cfg,
    )
    return EnsembleModel(plan=plan, members=members, config=cfg), report


def retrieve(
    e: EnsembleModel,
    m: EmbeddingMatrix,
    index: CorpusIndex,
    q: np.ndarray,
    threshold: float | None = None,
    infer_k: int | None = None,
):
    """Score one query against every member; return ranked entries.

    A passage seen by several members keeps its maximum score; it is
    positive when at least one member scored it at or above threshold.
    """
    q = np.asarray(q, dtype=np.float32).reshape(-1)
    if q.shape[0] != m.dim:
        raise DimMismatchError(f"query dim {q.shape[0]} != collection dim {m.dim}")
    theta = e.config.threshold if threshold is None else threshold
    k = infer_k or e.config.infer_k or e.config.k
    best: dict[int, float] = {}
    for b, member in enumerate(e.members):
        neighbors = top_k(m, e.plan.subsets[b], q, k, e.config.metric)
        rows = [nb.row_index for nb in neighbors]
        feats = np.hstack([
            np.broadcast_to(q, (len(rows), m.dim)),
            m.data[rows],
        ])
        scaled = scaler_mod.transform(member.scaler, feats)
        scores = np.asarray(predict(member.model, scaled), dtype=np.float64)
        for row, score in zip(rows, scores.tolist()):
            if row not in best or score > best[row]:
                best[row] = score
    return rank_entries([
        (index.passage_ids[row], score, score >= theta)
        for row, score in best.items()
    ])


def retrieve_run(
    e: EnsembleModel,
    m: EmbeddingMatrix,
    index: CorpusIndex,
    queries: QuerySet,
    threads: int = 1,
    threshold: float | None = None,
    infer_k: int | None = None,
) -> Run:
    def job(i: int):
        return retrieve(e, m, index, queries.embeddings.row(i),
                        threshold=threshold, infer_k=infer_k)

    n = len(queries.query_ids)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            entries = list(pool.map(job, range(n)))
    else:
        entries = [job(i) for i in range(n)]
    return {qid: ent for qid, ent in zip(queries.query_ids, entries)}


# ---------------------------------------------------------------------------
# model file


def _pack_bytes(chunks: list[bytes], payload: bytes) -> None:
    chunks.append(struct.pack("<I", len(payload)))
    chunks.append(payload)


def _pack_array(chunks: list[bytes], arr: np.ndarray, dtype: str) -> None:
    payload = np.ascontiguousarray(arr, dtype=dtype).tobytes(order="C")
    _pack_bytes(chunks, payload)


class _Reader:
    def __init__(self, blob: bytes, path):
        self.blob = blob
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise TruncatedFileError(f"{self.path}: truncated model file")
        out = self.blob[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self.take(8))[0]

    def block(self) -> bytes:
        return self.take(self.u32())

    def array(self, dtype: str) -> np.ndarray:
        return np.frombuffer(self.block(), dtype=dtype)


def save_model(e: EnsembleModel, path) -> None:
    chunks: list[bytes] = [MODEL_MAGIC, struct.pack("<I", e.format_version)]
    _pack_bytes(chunks, json.dumps(e.config.to_dict(), sort_keys=True).encode())

    plan = e.plan
    chunks.append(struct.pack("<IIQdI", plan.s, plan.n_passages, plan.seed & (2**64 - 1),
                              plan.overlap, plan.base_shard_size))
    for subset in plan.subsets:
        _pack_array(chunks, subset, "<u4")

    chunks.append(struct.pack("<I", len(e.members)))
    for member in e.members:
        sc = member.scaler
        _pack_array(chunks, sc.means, "<f8")
        _pack_array(chunks, sc.stds, "<f8")
        chunks.append(struct.pack("<Q", sc.fitted_on))
        mod = member.model
        params = mod.params
        chunks.append(struct.pack("<II", mod.support_vectors.shape[0],
                                  mod.support_vectors.shape[1]))
        _pack_array(chunks, mod.support_vectors, "<f4")
        _pack_array(chunks, mod.beta, "<f8")
        chunks.append(struct.pack("<dd", mod.bias, mod.gamma))
        _pack_bytes(chunks, json.dumps({
            "C": params.C, "epsilon": params.epsilon, "gamma": params.gamma,
            "tol": params.tol, "max_passes": params.max_passes, "kernel": params.kernel,
        }, sort_keys=True).encode())
    try:
        with open(path, "wb") as fh:
            fh.write(b"".join(chunks))
    except OSError as exc:
        raise IoFailureError(f"cannot write model to {path}: {exc}") from exc


def load_model(path) -> EnsembleModel:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise IoFailureError(f"cannot read model from {path}: {exc}") from exc
    r = _Reader(blob, path)
    if r.take(4) != MODEL_MAGIC:
        raise BadMagicError(f"{path}: not an ensemble model file")
    version = r.u32()
    if version != MODEL_VERSION:
        raise VersionMismatchError(f"{path}: unsupported model version {version}")
    config = TrainConfig.from_dict(json.loads(r.block().decode()))

    s, n_passages, seed, overlap, base = struct.unpack("<IIQdI", r.take(28))
    subsets = [r.array("<u4").astype(np.int64) for _ in range(s)]
    plan = BaggingPlan(s=s, overlap=overlap, seed=seed, n_passages=n_passages,
                       base_shard_size=base, subsets=subsets)

    n_members = r.u32()
    members: list[EnsembleMember] = []
    for _ in range(n_members):
        means = r.array("<f8").astype(np.float64)
        stds = r.array("<f8").astype(np.float64)
        fitted_on = struct.unpack("<Q", r.take(8))[0]
        sc = FeatureScaler(means=means, stds=stds, fitted_on=fitted_on)
        n_sv, n_feat = struct.unpack("<II", r.take(8))
        sv = r.array("<f4").astype(np.float32).reshape(n_sv, n_feat)
        beta = r.array("<f8").astype(np.float64)
        bias, gamma = struct.unpack("<dd", r.take(16))
        pd = json.loads(r.block().decode())
        params = SvrParams(C=pd["C"], epsilon=pd["epsilon"], gamma=pd["gamma"],
                           tol=pd["tol"], max_passes=pd["max_passes"], kernel=pd["kernel"])
        members.append(EnsembleMember(
            scaler=sc,
            model=SvrModel(support_vectors=sv, beta=beta, bias=bias,
                           gamma=gamma, params=params),
        ))
    if r.pos != len(blob):
        raise TruncatedFileError(f"{path}: {len(blob) - r.pos} trailing bytes")
    if len(members) != plan.s:
        raise VersionMismatchError(f"{path}: {len(members)} members for plan of {plan.s}")
    return EnsembleModel(plan=plan, members=members, config=config, format_version=version)
