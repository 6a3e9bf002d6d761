"""Active learning of tree-realized flat clusterings by pairwise queries."""

__version__ = "0.1.0"
