"""flowtree: approximate max-flow and min-cut on undirected graphs via tree
congestion approximators, with a parallel flow-decomposition engine and
cut/clustering applications on top."""

from .graph import (
    Graph,
    GraphError,
    attach_source_sink,
    build_graph,
    contract,
    subdivide,
)
from .hierarchy import HierarchyTree

__version__ = "0.1.0"

__all__ = [
    "Graph",
    "GraphError",
    "HierarchyTree",
    "attach_source_sink",
    "build_graph",
    "contract",
    "subdivide",
    "__version__",
]
