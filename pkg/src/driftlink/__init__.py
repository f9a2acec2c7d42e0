"""Weighted similarity link prediction with spatial-temporal position drift."""

from .drift import DriftConfig, drift_iterate, drift_step
from .evaluation import (EvaluationError, MetricsReport, auc_exact, auc_sampled, delete_links,
                         precision_at_L, random_split, rank_non_observed, run_experiment,
                         sweep_iterations, temporal_split)
from .graph import (DisconnectedGraphError, EdgeListError, EdgeListFormat, GraphError,
                    TemporalEdge, WeightedGraph, build_graph, giant_component,
                    mean_shortest_distance, parse_edge_list, read_edge_list)
from .similarity import INDEX_NAMES, IndexKind, ScoredPairList, SimilarityEngine, score_pair, score_pairs
from .stats import NetworkStats, network_stats
from .synthetic import generate_synthetic

__version__ = "0.1.0"
