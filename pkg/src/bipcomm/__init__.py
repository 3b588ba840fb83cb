"""Bipartite community detection from the top of the normalized Laplacian spectrum."""
__version__ = "0.1.0"

from bipcomm._backend import BACKEND
from bipcomm.graph import (
    BipartitePair,
    GraphError,
    VertexSet,
    WeightedGraph,
    bipartite_conductance,
    conductance,
    load_edge_list,
)
from bipcomm.heuristic import HeuristicConfig, detect, detect_bipartite, detect_classical
from bipcomm.hypercube import HypercubeSpec
from bipcomm.spectral import SpectralEmbedding, extreme_eigenpairs
from bipcomm.theory import TheoryConfig, theory_detect

__all__ = [
    "BACKEND",
    "BipartitePair",
    "GraphError",
    "HeuristicConfig",
    "HypercubeSpec",
    "SpectralEmbedding",
    "TheoryConfig",
    "VertexSet",
    "WeightedGraph",
    "bipartite_conductance",
    "conductance",
    "detect",
    "detect_bipartite",
    "detect_classical",
    "extreme_eigenpairs",
    "load_edge_list",
    "theory_detect",
]
