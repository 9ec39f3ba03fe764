"""Collaborative filtering on sparse learned user graphs."""

from .errors import *  # noqa: F401,F403
from .evalbench import EvalReport, EvalRow, emit_report, mae, parse_report, rmse, run_knn_sweep, run_learned
from .graph import (
    ObjectiveParams,
    WeightedGraph,
    edge_count,
    effective_resistance,
    laplacian,
    load_graph,
    objective,
    precision,
    save_graph,
    smoothness,
)
from .ingest import DatasetMeta, InteractionMatrix, RatingRecord, RatingsDataset, parse_movielens, split_train_test, to_matrix
from .learn import (
    CandidateEdge,
    LearnConfig,
    SpectralEmbedding,
    knn_graph,
    learn_user_graph,
    refine_graph,
    score_candidates,
    spectral_embedding,
)
from .predict import Prediction, PredictionQuery, predict_item_based, predict_user_based, weighted_sum

__version__ = "0.1.0"
