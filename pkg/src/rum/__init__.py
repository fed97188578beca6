"""Random-walk graph learning with unifying memory.

A convolution-free graph learner: node representations are averages of GRU
embeddings of random walks terminating at each node, where each walk
contributes both its feature trajectory and its anonymous index trajectory.
Includes exact-enumeration oracles, a color-refinement expressiveness lab,
a dense GCN baseline, and the experiment harness.
"""

from .graphs import (Graph, GraphError, LabeledDataset, add_random_edges,
                     csl_corpus, dirichlet_energy, from_edges, gen_csl,
                     gen_cycle, gen_tree_match, load_edge_list,
                     load_features_labels_masks)
from .model import TrainConfig, init_params, node_representation, graph_representation
from .tensor import Tensor, backward, grad_check
from .walks import (anon_distribution, anonymous_experiment, batch_walks,
                    enumerate_walks, sample_terminating_walks, sample_walk,
                    walk_probability)

__all__ = [
    "Graph", "GraphError", "LabeledDataset", "TrainConfig", "Tensor",
    "add_random_edges", "anon_distribution", "anonymous_experiment",
    "backward", "batch_walks", "csl_corpus", "dirichlet_energy",
    "enumerate_walks", "from_edges", "gen_csl", "gen_cycle", "gen_tree_match",
    "grad_check", "graph_representation", "init_params", "load_edge_list",
    "load_features_labels_masks", "node_representation",
    "sample_terminating_walks", "sample_walk", "walk_probability",
]

__version__ = "0.1.0"
