"""Cluster numeric node attributes on a network.

Distances between attribute vectors are measured through the graph via the
Laplacian pseudoinverse (the effective-resistance metric), optionally
reduced to 2-D with tSNE, and clustered with DBSCAN. Includes a synthetic
planted-community benchmark, an AMI scorer, and a runtime-scaling harness.
"""

__version__ = "0.1.0"

from ._kernels import ACTIVE_BACKEND
from .dbscan import DbscanConfig, dbscan, expand_noise, knee_eps
from .distance import (AttributeMatrix, DistanceMatrix, PseudoinverseCache,
                       SolverHandle, build_pinv_cache, euclidean_distances,
                       ge_distance_dense, ge_distance_solver, pairwise_distances)
from .graph import (Graph, LaplacianView, MultilayerGraph, build_laplacian,
                    build_supra_laplacian, load_edge_list, save_edge_list,
                    validate_graph)
from .pipeline import IN_SCOPE_METHODS, PipelineSpec, run_pipeline
from .scoring import ContingencyTable, ami, entropy, mutual_information
from .synth import SbmConfig, generate_dataset, generate_observations, generate_sbm_graph, sweep
from .tsne import Embedding, TsneConfig, perplexity_calibration, tsne_embed

__all__ = [
    "ACTIVE_BACKEND", "AttributeMatrix", "ContingencyTable", "DbscanConfig",
    "DistanceMatrix", "Embedding", "Graph", "IN_SCOPE_METHODS", "LaplacianView",
    "MultilayerGraph", "PipelineSpec", "PseudoinverseCache", "SbmConfig",
    "SolverHandle", "TsneConfig", "ami", "build_laplacian", "build_pinv_cache",
    "build_supra_laplacian", "dbscan", "entropy", "euclidean_distances",
    "expand_noise", "ge_distance_dense", "ge_distance_solver", "generate_dataset",
    "generate_observations", "generate_sbm_graph", "knee_eps", "load_edge_list",
    "mutual_information", "pairwise_distances", "perplexity_calibration",
    "run_pipeline", "save_edge_list", "sweep", "tsne_embed", "validate_graph",
]
