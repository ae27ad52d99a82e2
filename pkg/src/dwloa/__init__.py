"""Weisfeiler-Lehman optimal assignment kernels with hierarchy weights learned by MKL."""
from .graphs import Graph, GraphDataset, dataset_stats, load_tudataset, write_tudataset
from .refinement import ColorHierarchy, refine_colors, vertex_similarity
from .kernels import (
    KernelMatrix,
    bruteforce_assignment,
    combine,
    group_kernel_matrices,
    normalize_unit_diagonal,
    wl_subtree_matrix,
    wloa_matrix,
)
from .grouping import ClusterAssignment, kmeans, node_feature_vectors
from .mkl import MKLWeights, compute_alpha, learn_weights, project_bisimplex, solve_gamma
from .svm import SVMModel, predict, train_svm
from .bench import CVReport, MethodConfig, pipeline_dwloa, run_experiment, summarize

__version__ = "0.1.0"
