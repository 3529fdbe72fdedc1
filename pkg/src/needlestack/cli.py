"""Batch command-line surface: synth, train, retrieve, evaluate, distances.

Configuration is a flat ``key = value`` file; command-line flags override
file values, unknown keys are rejected, and the fully resolved
configuration (seed included) is echoed into every artifact this tool
writes. Exit codes: 0 success, 1 invalid input, 2 missing resource,
3 internal error. Failures print a single line ``error: <what>: <why>``
to stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from . import corpus, ensemble, knn, metrics, runfile, synth
from .errors import NeedlestackError
from .svr import SvrParams

_CONFIG_DEFAULTS: dict[str, object] = {
    # dataset generation
    "n_passages": 5000, "n_queries": 500, "dim": 32, "n_clusters": 10,
    "noise_sigma": 0.005, "cluster_sigma": 0.1,
    # pipeline
    "seed": 0, "k": 50, "subsets": 35, "overlap": 0.6, "threshold": 0.5,
    "split": 0.1, "metric": "euclidean", "scaler_fit": "all",
    "missing_positive": "skip", "infer_k": None,
    "svr_c": 1.0, "svr_epsilon": 0.1, "svr_gamma": "scale",
    "svr_tol": 1e-3, "svr_max_passes": None,
    # evaluation
    "mode": "passage", "recall_cutoffs": "100,1000",
}

_INT_KEYS = {"n_passages", "n_queries", "dim", "n_clusters", "seed", "k",
             "subsets", "infer_k", "svr_max_passes"}
_FLOAT_KEYS = {"noise_sigma", "cluster_sigma", "overlap", "threshold", "split",
               "svr_c", "svr_epsilon", "svr_tol"}


class CliError(Exception):
    def __init__(self, what: str, why: str, code: int):
        super().__init__(f"{what}: {why}")
        self.what = what
        self.why = why
        self.code = code


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    if raw.lower() in ("none", ""):
        return None
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key == "svr_gamma":
            return raw if raw == "scale" else float(raw)
    except ValueError:
        raise CliError("config", f"bad value for {key}: {raw!r}", 1) from None
    return raw


def _load_config_file(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise CliError("config", "not found", 2)
    out: dict[str, object] = {}
    for lineno, line in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CliError("config", f"line {lineno}: expected key = value", 1)
        key, _, raw = line.partition("=")
        key = key.strip()
        if key not in _CONFIG_DEFAULTS:
            raise CliError("config", f"line {lineno}: unknown key {key!r}", 1)
        out[key] = _parse_value(key, raw)
    return out


def _resolve_config(args: argparse.Namespace) -> dict:
    cfg = dict(_CONFIG_DEFAULTS)
    if getattr(args, "config", None):
        cfg.update(_load_config_file(args.config))
    for flag, key in (
        ("seed", "seed"), ("k", "k"), ("subsets", "subsets"), ("overlap", "overlap"),
        ("threshold", "threshold"), ("metric", "metric"), ("mode", "mode"),
        ("infer_k", "infer_k"),
    ):
        val = getattr(args, flag, None)
        if val is not None:
            cfg[key] = val
    return cfg


def _train_config(cfg: dict) -> ensemble.TrainConfig:
    return ensemble.TrainConfig(
        k=cfg["k"], s=cfg["subsets"], overlap=cfg["overlap"],
        svr=SvrParams(C=cfg["svr_c"], epsilon=cfg["svr_epsilon"],
                      gamma=cfg["svr_gamma"], tol=cfg["svr_tol"],
                      max_passes=cfg["svr_max_passes"]),
        threshold=cfg["threshold"], split=cfg["split"], seed=cfg["seed"],
        metric=cfg["metric"], scaler_fit=cfg["scaler_fit"],
        missing_positive=cfg["missing_positive"], infer_k=cfg["infer_k"],
    )


def _require(path: str, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise CliError(what, "not found", 2)
    return p


def _ids_path(emb_path: Path) -> Path:
    return emb_path.with_suffix(".ids")


def _load_collection(path: str):
    p = _require(path, "passages")
    m = corpus.load_embeddings(p)
    ids = corpus.load_ids(_require(_ids_path(p), "passage ids"))
    if len(ids) != m.n_rows:
        raise CliError("passage ids", f"{len(ids)} ids for {m.n_rows} rows", 1)
    return m, corpus.CorpusIndex(ids)


def _load_queries(path: str) -> corpus.QuerySet:
    p = _require(path, "queries")
    m = corpus.load_embeddings(p)
    ids = corpus.load_ids(_require(_ids_path(p), "query ids"))
    return corpus.QuerySet(ids, m)


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def cmd_synth(args) -> int:
    cfg = _resolve_config(args)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    scfg = synth.SynthConfig(
        n_passages=cfg["n_passages"], n_queries=cfg["n_queries"], dim=cfg["dim"],
        n_clusters=cfg["n_clusters"], noise_sigma=cfg["noise_sigma"],
        cluster_sigma=cfg["cluster_sigma"], seed=cfg["seed"],
    )
    ds = synth.generate(scfg)
    corpus.save_embeddings(ds.matrix, out / "passages.emb1")
    corpus.save_ids(ds.index.passage_ids, out / "passages.ids")
    corpus.save_embeddings(ds.queries.embeddings, out / "queries.emb1")
    corpus.save_ids(ds.queries.query_ids, out / "queries.ids")
    corpus.save_qrels(ds.qrels, out / "qrels.tsv")
    _write_json(out / "manifest.json", {
        "config": cfg,
        "needle_ranks": ds.report.to_dict(),
    })
    print(f"synth: wrote {scfg.n_passages} passages, {scfg.n_queries} queries to {out}")
    return 0


def cmd_train(args) -> int:
    cfg = _resolve_config(args)
    m, index = _load_collection(args.passages)
    queries = _load_queries(args.queries)
    qrels = corpus.load_qrels(_require(args.qrels, "qrels"))
    corpus.validate_qrels(qrels, index)
    tcfg = _train_config(cfg)
    model, report = ensemble.train_ensemble(
        m, index, queries, qrels, tcfg, threads=args.threads,
    )
    ensemble.save_model(model, args.model)
    payload = report.to_dict()
    payload["resolved_config"] = cfg
    _write_json(Path(args.report), payload)
    pooled = report.pooled
    line = f"train: {len(model.members)} members"
    if pooled is not None:
        line += (f", pooled test recall(1)={pooled.per_class[1].recall:.4f}"
                 f" over {pooled.n_samples} rows")
    print(line)
    return 0


def cmd_retrieve(args) -> int:
    cfg = _resolve_config(args)
    model_path = _require(args.model, "model")
    model = ensemble.load_model(model_path)
    m, index = _load_collection(args.passages)
    queries = _load_queries(args.queries)
    run = ensemble.retrieve_run(
        model, m, index, queries, threads=args.threads,
        threshold=args.threshold, infer_k=args.infer_k,
    )
    digest = hashlib.sha256(model_path.read_bytes()).hexdigest()[:12]
    out = Path(args.output)
    runfile.write_run(run, out, tag=digest)
    _write_json(out.parent / (out.name + ".meta.json"), {
        "config": cfg,
        "model_sha256_prefix": digest,
        "model_config": model.config.to_dict(),
    })
    n_pos = sum(sum(e.positive for e in entries) for entries in run.values())
    print(f"retrieve: {len(run)} queries, {n_pos} positive entries -> {out}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _resolve_config(args)
    run = runfile.read_run(_require(args.run, "run"), threshold=cfg["threshold"])
    qrels = corpus.load_qrels(_require(args.qrels, "qrels"))
    mode = cfg["mode"]
    if mode not in ("passage", "document"):
        raise CliError("mode", f"expected passage or document, got {mode}", 1)
    if mode == "document":
        doc_map: dict[str, str] = {}
        if args.doc_map:
            for line in _require(args.doc_map, "doc map").read_text().splitlines():
                if line:
                    pid, _, doc = line.partition("\t")
                    doc_map[pid] = doc
        pids = sorted({p for rel in qrels.values() for p in rel}
                      | {e.passage_id for ent in run.values() for e in ent})
        index = corpus.CorpusIndex(pids, doc_map)
        run = corpus.to_document_run(run, index)
        qrels = {q: {index.doc_of(p) for p in rel} for q, rel in qrels.items()}
    cutoffs = tuple(int(c) for c in str(cfg["recall_cutoffs"]).split(",") if c)
    result = metrics.evaluate_run(run, qrels, cutoffs=cutoffs, mode=mode)
    lines = [f"# config\t{json.dumps(cfg, sort_keys=True)}"]
    lines.append(f"mode\t{result.mode}")
    lines.append(f"n_queries\t{result.n_queries}")
    lines.append(f"recall\t{result.recall:.6f}")
    for c in cutoffs:
        lines.append(f"recall@{c}\t{result.recall_at[c]:.6f}")
    lines.append(f"mrr@10\t{result.mrr_at_10:.6f}")
    lines.append(f"ndcg@20\t{result.ndcg_at_20:.6f}")
    lines.append(f"hit_rate\t{result.hit_rate:.6f}")
    text = "\n".join(lines)
    print(text)
    if args.json:
        payload = result.to_dict()
        payload["resolved_config"] = cfg
        _write_json(Path(args.json), payload)
    return 0


def cmd_distances(args) -> int:
    cfg = _resolve_config(args)
    m, index = _load_collection(args.passages)
    queries = _load_queries(args.queries)
    qrels = corpus.load_qrels(_require(args.qrels, "qrels"))
    corpus.validate_qrels(qrels, index)
    report = knn.distance_stats(queries, qrels, m, index, metric=cfg["metric"])
    text = f"# config\t{json.dumps(cfg, sort_keys=True)}\n" + report.to_tsv()
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
        print(f"distances: wrote report for {len(report.rows)} queries to {args.output}")
    else:
        print(text, end="")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="needlestack",
        description="Needle-in-a-haystack retrieval with bagged SVR ensembles.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--k", type=int, default=None)
        p.add_argument("--subsets", type=int, default=None)
        p.add_argument("--overlap", type=float, default=None)
        p.add_argument("--threshold", type=float, default=None)
        p.add_argument("--metric", choices=knn.METRICS, default=None)
        p.add_argument("--infer-k", dest="infer_k", type=int, default=None)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    common(p)
    p.add_argument("--output", "-o", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train an ensemble model")
    common(p)
    p.add_argument("--passages", required=True, help="collection .emb1 file")
    p.add_argument("--queries", required=True, help="query .emb1 file")
    p.add_argument("--qrels", required=True)
    p.add_argument("--model", required=True, help="output model file")
    p.add_argument("--report", required=True, help="output train report JSON")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("retrieve", help="run retrieval, write a run file")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--passages", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--output", "-o", required=True, help="output run file")
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("evaluate", help="score a run file against qrels")
    common(p)
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--mode", choices=("passage", "document"), default=None)
    p.add_argument("--doc-map", dest="doc_map", help="passage->document TSV")
    p.add_argument("--json", help="also write metrics JSON here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("distances", help="query-to-relevant distance diagnostics")
    common(p)
    p.add_argument("--passages", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--output", "-o", help="output TSV (stdout when omitted)")
    p.set_defaults(func=cmd_distances)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc.what}: {exc.why}", file=sys.stderr)
        return exc.code
    except FileNotFoundError as exc:
        print(f"error: {exc.filename}: not found", file=sys.stderr)
        return 2
    except NeedlestackError as exc:
        print(f"error: invalid input: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"error: internal: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
