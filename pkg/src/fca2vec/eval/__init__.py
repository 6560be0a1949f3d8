"""Experiment pipelines: link prediction, attribute clustering, lattice and implication distances."""

from .clustering import (Clustering, clustering_experiment, intra_cluster_ratio, kmeans,
                         naive_clustering, random_clustering_baseline)
from .common import DegenerateInputWarning, DistanceStats, mean_std, round_seeds
from .distances import covering_distance_experiment, implication_distance_experiment, non_cover_pairs
from .linkpred import (BinaryClassifierReport, LogisticRegression, TemporalSplit, build_link_data,
                       coauthor_graph, edge_features, link_prediction_experiment,
                       logistic_regression_train, negative_sample_edges)
from .scatter import intent_labeler, scatter_export

__all__ = [
    "BinaryClassifierReport", "Clustering", "DegenerateInputWarning", "DistanceStats",
    "LogisticRegression", "TemporalSplit", "build_link_data", "clustering_experiment",
    "coauthor_graph", "covering_distance_experiment", "edge_features",
    "implication_distance_experiment", "intent_labeler", "intra_cluster_ratio", "kmeans",
    "link_prediction_experiment", "logistic_regression_train", "mean_std", "naive_clustering",
    "negative_sample_edges", "non_cover_pairs", "random_clustering_baseline", "round_seeds",
    "scatter_export",
]
