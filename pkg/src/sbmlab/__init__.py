"""Community detection and recovery thresholds for stochastic block models."""

from .graph import Graph, read_edgelist, write_edgelist
from .metrics import agreement, align, overlap_star, separation
from .model import SbmParams, graph_split, sample_sbm

__version__ = "0.1.0"

__all__ = [
    "Graph", "SbmParams", "agreement", "align", "graph_split", "overlap_star",
    "read_edgelist", "sample_sbm", "separation", "write_edgelist",
]
