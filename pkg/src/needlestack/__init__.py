"""Needle-in-a-haystack passage retrieval with bagged SVR ensembles."""

from .bagging import BaggingPlan, assign_queries, make_plan
from .corpus import (
    CorpusIndex,
    EmbeddingMatrix,
    QuerySet,
    load_embeddings,
    load_qrels,
    save_embeddings,
    to_document_run,
)
from .ensemble import (
    EnsembleModel,
    TrainConfig,
    TrainReport,
    build_training_set,
    load_model,
    retrieve,
    retrieve_run,
    save_model,
    train_ensemble,
)
from .knn import distance_stats, top_k
from .metrics import classification_report, evaluate_run, mrr_at, ndcg_at, recall_eval
from .svr import SvrModel, SvrParams, dual_objective, kkt_violation, predict, rbf_kernel, train_svr
from .synth import SynthConfig, generate

__version__ = "0.1.0"
