"""Multi-graph node embeddings.

Neighborhood-permutation SkipGram embeddings per graph, fusion of the
per-graph vectors, embedding mimic for nodes unseen in training, and
downstream classifiers with their evaluation.
"""
from .errors import (ColdNodeError, DataError, FileFormatError, GraphValidationError,
                     MGEmbedError, NumericalError, TrainingDivergedError)
from .graph import BIPARTITE, HOMOGENEOUS, Graph, load_edge_list
from .kernels import BACKEND
from .skipgram import EmbeddingSet, TrainConfig

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BIPARTITE", "HOMOGENEOUS", "ColdNodeError", "DataError", "EmbeddingSet",
    "FileFormatError", "Graph", "GraphValidationError", "MGEmbedError", "NumericalError",
    "TrainConfig", "TrainingDivergedError", "load_edge_list",
]
