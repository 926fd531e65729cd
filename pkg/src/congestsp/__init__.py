"""CONGEST-model simulation with shortcut-based approximate shortest paths,
distance labels and transshipment."""

from .graph import SCALE, GraphSpec, WeightedGraph, dijkstra, generate, load, store
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "SCALE",
    "GraphSpec",
    "WeightedGraph",
    "dijkstra",
    "generate",
    "load",
    "store",
]
