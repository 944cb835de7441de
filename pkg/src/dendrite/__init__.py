"""Random ordered trees, random walks and Brownian motion on finite metric trees."""
from dendrite.bm import mesh_graph, run_bm, sample_hitting
from dendrite.diagnostics import ball_volume_profile, convergence_experiment, covering_number, exponent_fit
from dendrite.embedding import embed, pi_k
from dendrite.exceptions import ConfigError, DomainError, RetryExhaustedError
from dendrite.excursions import Excursion, search_depth, tree_from_excursion
from dendrite.gw import OffspringDistribution, sample_conditioned_tree, scaling_sequence
from dendrite.streams import replica_rng
from dendrite.trees import MetricTree, OrderedTree, TreeMeasure, TreePoint, spanning_subtree
from dendrite.walks import observe_on_subtree, run_srw

__all__ = [
    "ConfigError", "DomainError", "Excursion", "MetricTree", "OffspringDistribution", "OrderedTree",
    "RetryExhaustedError", "TreeMeasure", "TreePoint", "ball_volume_profile", "convergence_experiment",
    "covering_number", "embed", "exponent_fit", "mesh_graph", "observe_on_subtree", "pi_k", "replica_rng",
    "run_bm", "run_srw", "sample_conditioned_tree", "sample_hitting", "scaling_sequence", "search_depth",
    "spanning_subtree", "tree_from_excursion",
]
