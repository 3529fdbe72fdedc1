"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest -s tests/test_acceptance.py`` to see the lines live.
The synthetic end-to-end pipeline is exercised through the command-line
interface exactly as a user would drive it.
"""

import hashlib
import json
import resource
import subprocess
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from instances import oracle_instances
from needlestack import bagging, ensemble, metrics, runfile, scaler, svr, synth
from needlestack import svr_reference as ref
from needlestack.cli import main
from needlestack.corpus import EmbeddingMatrix, load_qrels
from needlestack.knn import top_k
from needlestack.runfile import rank_entries
from needlestack.svr import SvrParams


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"[ACCEPTANCE] {name}: FAIL")
        raise
    print(f"[ACCEPTANCE] {name}: PASS")


E2E_CONFIG = """
n_passages = 5000
n_queries = 500
dim = 32
n_clusters = 10
noise_sigma = {noise}
cluster_sigma = 0.1
seed = 2024
k = 20
subsets = 5
overlap = 0.6
threshold = 0.5
svr_c = 300.0
svr_epsilon = 0.1
svr_gamma = 0.0078125
svr_max_passes = 200000
"""


@pytest.fixture(scope="module")
def e2e(tmp_path_factory):
    """synth -> train -> retrieve via the CLI, single thread, timed."""
    root = tmp_path_factory.mktemp("e2e")
    cfg = root / "e2e.cfg"
    cfg.write_text(E2E_CONFIG.format(noise=0.005))
    data = root / "data"
    model = root / "model.sven"
    run = root / "run.trec"
    t0 = time.time()
    assert main(["synth", "--config", str(cfg), "-o", str(data)]) == 0
    assert main([
        "train", "--config", str(cfg), "--threads", "1",
        "--passages", str(data / "passages.emb1"),
        "--queries", str(data / "queries.emb1"),
        "--qrels", str(data / "qrels.tsv"),
        "--model", str(model), "--report", str(root / "report.json"),
    ]) == 0
    assert main([
        "retrieve", "--config", str(cfg), "--threads", "1",
        "--model", str(model),
        "--passages", str(data / "passages.emb1"),
        "--queries", str(data / "queries.emb1"),
        "-o", str(run),
    ]) == 0
    elapsed = time.time() - t0
    return root, cfg, data, model, run, elapsed


class TestSvrOracleEquivalence:
    def test_smo_matches_dense_qp_oracle(self):
        with criterion("svr-oracle-equivalence"):
            t0 = time.time()
            for X, y, probes, params in oracle_instances(seed=1234, count=20):
                model = svr.train_svr(X, y, params)
                K = svr.kernel_matrix(X, X, params.kernel, model.gamma)
                sol = ref.solve_dual(K, y, params.C, params.epsilon)
                p_ref = ref.predict(
                    X, sol,
                    lambda A, B: svr.kernel_matrix(A, B, params.kernel, model.gamma),
                    probes,
                )
                p_smo = np.asarray(svr.predict(model, probes))
                assert np.abs(p_smo - p_ref).max() <= 1e-4
                assert model.summary.objective <= sol.objective + 1e-6
            assert time.time() - t0 < 10.0


class TestSvrFeasibility:
    def test_box_equality_and_kkt(self):
        with criterion("svr-feasibility-invariants"):
            for X, y, _, params in oracle_instances(seed=1234, count=20):
                model = svr.train_svr(X, y, params)
                S = model.beta.size
                if S:
                    assert np.abs(model.beta).max() <= params.C + 1e-12
                    assert abs(model.beta.sum()) <= params.tol * S
                if model.summary.converged:
                    assert svr.kkt_violation(model, X, y) <= params.tol


class TestConstantTargetLaw:
    def test_constant_targets_exact(self):
        with criterion("svr-constant-target-law"):
            rng = np.random.default_rng(0)
            for c in (-3.5, 0.0, 0.25, 7.0):
                X = rng.normal(size=(rng.integers(1, 15), 4)).astype(np.float32)
                model = svr.train_svr(X, np.full(X.shape[0], c), SvrParams())
                assert model.beta.size == 0
                assert abs(model.bias - c) <= 1e-9
                preds = np.asarray(svr.predict(model, X))
                assert np.abs(preds - c).max() <= 1e-9


class TestKnnExactness:
    def test_matches_full_sort_oracle(self):
        with criterion("knn-exactness"):
            rng = np.random.default_rng(99)
            for _ in range(100):
                n = int(rng.integers(3, 120))
                d = int(rng.integers(2, 12))
                k = int(rng.integers(1, 15))
                m = EmbeddingMatrix.from_array(rng.normal(size=(n, d)).astype(np.float32))
                q = rng.normal(size=d).astype(np.float32)
                got = top_k(m, np.arange(n), q, k)
                # independent oracle: python-loop distances, full sort
                scored = sorted(
                    (sum((float(a) - float(b)) ** 2
                         for a, b in zip(m.data[row], q)) ** 0.5, row)
                    for row in range(n)
                )
                want = scored[: min(k, n)]
                assert [nb.row_index for nb in got] == [row for _, row in want]
                for nb, (dist, _) in zip(got, want):
                    assert abs(nb.distance - dist) <= 1e-6


class TestScalerNormalization:
    def test_zscore_on_random_block(self):
        with criterion("scaler-normalization"):
            rng = np.random.default_rng(7)
            rows = rng.normal(loc=-2.0, scale=5.0, size=(1000, 16)).astype(np.float32)
            s = scaler.fit(rows)
            out = scaler.transform(s, rows).astype(np.float64)
            assert np.abs(out.mean(axis=0)).max() < 1e-6
            assert np.abs(out.std(axis=0) - 1.0).max() < 1e-6


def _plan_digest(n, s, overlap, seed) -> str:
    plan = bagging.make_plan(n, s, overlap, seed)
    h = hashlib.sha256()
    for subset in plan.subsets:
        h.update(subset.tobytes())
    return h.hexdigest()


def _bagging_tuples():
    rng = np.random.default_rng(4242)
    out = []
    while len(out) < 50:
        n = int(rng.integers(10, 3000))
        s = int(rng.integers(1, 12))
        overlap = round(float(rng.uniform(0.0, 0.99)), 6)
        seed = int(rng.integers(0, 2**62))
        if s > n or (s - 1) * (-(-n // s)) >= n:
            continue
        out.append((n, s, overlap, seed))
    return out


class TestBaggingPlans:
    def test_coverage_sizes_reproducibility(self):
        with criterion("bagging-plans"):
            tuples = _bagging_tuples()
            digests = []
            for n, s, overlap, seed in tuples:
                plan = bagging.make_plan(n, s, overlap, seed)
                covered = np.zeros(n, dtype=bool)
                for b, subset in enumerate(plan.subsets):
                    covered[subset] = True
                    assert np.unique(subset).size == subset.size
                    shard = plan.base_shard_size if b < s - 1 \
                        else n - (s - 1) * plan.base_shard_size
                    extra = min(int(overlap * shard), n - shard)
                    assert subset.size == shard + extra
                assert covered.all()
                digests.append(_plan_digest(n, s, overlap, seed))
            # identical plans from a fresh interpreter
            here = str(Path(__file__).resolve().parent)
            script = (
                "import sys, json\n"
                f"sys.path.insert(0, {here!r})\n"
                "from test_acceptance import _plan_digest, _bagging_tuples\n"
                "print(json.dumps([_plan_digest(*t) for t in _bagging_tuples()]))\n"
            )
            proc = subprocess.run(
                [sys.executable, "-c", script],
                capture_output=True, text=True, check=True,
            )
            assert json.loads(proc.stdout) == digests


class TestMetricFixtures:
    def test_hand_computed_values(self):
        with criterion("metric-fixtures"):
            from test_metrics import five_query_fixture, LOG2_3_INV, TWO_REL_NDCG
            run, qrels = five_query_fixture()
            assert metrics.mrr_at(run, qrels, 10) == pytest.approx(0.5, abs=1e-12)
            expected_ndcg = (1.0 + LOG2_3_INV + TWO_REL_NDCG
                             + 0.27894294565112987 + 0.0) / 5
            assert metrics.ndcg_at(run, qrels, 20) == pytest.approx(expected_ndcg,
                                                                    abs=1e-12)
            assert metrics.recall_eval(run, qrels) == pytest.approx(4 / 6, abs=1e-12)
            assert metrics.recall_eval(run, qrels, cutoff=2) == pytest.approx(
                3 / 6, abs=1e-12)
            # single relevant at rank 2
            single = {"q": rank_entries([("x", 1.0, True), ("p", 0.9, True)])}
            assert metrics.ndcg_at(single, {"q": {"p"}}) == pytest.approx(
                LOG2_3_INV, abs=1e-12)
            rep = metrics.classification_report(
                np.array([0.9, 0.2, 0.1, 0.3]), np.array([1, 1, 0, 0]), 0.5)
            assert rep.per_class[1].precision == 1.0
            assert rep.per_class[1].recall == 0.5
            assert rep.per_class[1].f1 == pytest.approx(2 / 3, abs=1e-12)
            assert rep.accuracy == 0.75
            rng = np.random.default_rng(12)
            scores = rng.uniform(size=400)
            labels = rng.integers(0, 2, size=400)
            r2 = metrics.classification_report(scores, labels, 0.5)
            assert r2.weighted_avg.recall == pytest.approx(r2.accuracy, abs=1e-12)


class TestEndToEndRetrieval:
    def test_recall_and_noise_monotonicity(self, e2e, tmp_path):
        with criterion("end-to-end-synthetic-retrieval"):
            root, cfg, data, model, run_path, elapsed = e2e
            run = runfile.read_run(run_path, threshold=0.5)
            qrels = load_qrels(data / "qrels.tsv")
            recall = metrics.recall_eval(run, qrels)
            assert recall >= 0.95, f"recall {recall}"

            noisy_cfg = tmp_path / "noisy.cfg"
            noisy_cfg.write_text(E2E_CONFIG.format(noise=0.05))
            noisy_data = tmp_path / "data"
            noisy_model = tmp_path / "model.sven"
            noisy_run = tmp_path / "run.trec"
            t0 = time.time()
            assert main(["synth", "--config", str(noisy_cfg), "-o", str(noisy_data)]) == 0
            assert main([
                "train", "--config", str(noisy_cfg), "--threads", "1",
                "--passages", str(noisy_data / "passages.emb1"),
                "--queries", str(noisy_data / "queries.emb1"),
                "--qrels", str(noisy_data / "qrels.tsv"),
                "--model", str(noisy_model),
                "--report", str(tmp_path / "report.json"),
            ]) == 0
            assert main([
                "retrieve", "--config", str(noisy_cfg), "--threads", "1",
                "--model", str(noisy_model),
                "--passages", str(noisy_data / "passages.emb1"),
                "--queries", str(noisy_data / "queries.emb1"),
                "-o", str(noisy_run),
            ]) == 0
            noisy_elapsed = time.time() - t0
            noisy_recall = metrics.recall_eval(
                runfile.read_run(noisy_run, threshold=0.5),
                load_qrels(noisy_data / "qrels.tsv"),
            )
            assert noisy_recall < recall, (noisy_recall, recall)

            assert elapsed < 300.0, f"clean pipeline took {elapsed:.0f}s"
            assert noisy_elapsed < 300.0
            peak_kb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
            assert peak_kb < 2 * 1024 * 1024, f"peak rss {peak_kb} kB"
            print(f"  recall={recall:.4f} noisy={noisy_recall:.4f} "
                  f"time={elapsed:.0f}s+{noisy_elapsed:.0f}s peak={peak_kb / 1024:.0f} MB")


class TestDeterminism:
    def test_threads_and_round_trip(self, e2e, tmp_path):
        with criterion("retrieval-determinism"):
            root, cfg, data, model, run_path, _ = e2e
            run8 = tmp_path / "run8.trec"
            assert main([
                "retrieve", "--config", str(cfg), "--threads", "8",
                "--model", str(model),
                "--passages", str(data / "passages.emb1"),
                "--queries", str(data / "queries.emb1"),
                "-o", str(run8),
            ]) == 0
            assert run8.read_bytes() == run_path.read_bytes()

            resaved = tmp_path / "resaved.sven"
            ensemble.save_model(ensemble.load_model(model), resaved)
            assert resaved.read_bytes() == model.read_bytes()
            run_rt = tmp_path / "run_rt.trec"
            assert main([
                "retrieve", "--config", str(cfg), "--threads", "1",
                "--model", str(resaved),
                "--passages", str(data / "passages.emb1"),
                "--queries", str(data / "queries.emb1"),
                "-o", str(run_rt),
            ]) == 0
            assert run_rt.read_bytes() == run_path.read_bytes()


class TestDegenerateEnsemble:
    def test_single_member_identical_to_direct_pipeline(self):
        with criterion("degenerate-ensemble-equivalence"):
            data_cfg = synth.SynthConfig(n_passages=400, n_queries=60, dim=16,
                                         n_clusters=5, noise_sigma=0.005,
                                         cluster_sigma=0.1, seed=77)
            ds = synth.generate(data_cfg)
            cfg = ensemble.TrainConfig(
                k=10, s=1, overlap=0.0, seed=77,
                svr=SvrParams(C=100.0, epsilon=0.1, gamma=1 / 64, max_passes=150_000),
            )
            model, _ = ensemble.train_ensemble(
                ds.matrix, ds.index, ds.queries, ds.qrels, cfg,
            )
            run_ens = ensemble.retrieve_run(model, ds.matrix, ds.index, ds.queries)

            subset = np.arange(400)
            fs = ensemble.build_training_set(
                subset, sorted(ds.qrels), ds.matrix, ds.queries, ds.qrels,
                ds.index, cfg,
            )
            train_idx, _ = ensemble.split_rows(fs.features.shape[0], cfg.split,
                                               cfg.seed, 0)
            sc = scaler.fit(fs.features)
            single = svr.train_svr(
                scaler.transform(sc, fs.features[train_idx]),
                fs.labels[train_idx], cfg.svr,
            )
            run_direct = {}
            for qi, qid in enumerate(ds.queries.query_ids):
                q = ds.queries.embeddings.row(qi)
                neighbors = top_k(ds.matrix, subset, q, cfg.k, cfg.metric)
                rows = [nb.row_index for nb in neighbors]
                feats = np.hstack([
                    np.broadcast_to(q, (len(rows), ds.matrix.dim)),
                    ds.matrix.data[rows],
                ])
                scores = np.asarray(svr.predict(single, scaler.transform(sc, feats)))
                run_direct[qid] = rank_entries([
                    (ds.index.passage_ids[row], float(s), float(s) >= cfg.threshold)
                    for row, s in zip(rows, scores.tolist())
                ])
            assert run_ens == run_direct
