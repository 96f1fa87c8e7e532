"""Connectivity-constrained Ward agglomerative clustering.

The greedy merge loop runs in a compiled kernel when the ``_ward`` extension
is built, otherwise in pure Python.  Set ``DMDCLUST_PURE_PYTHON=1`` to force
the fallback.  ``BACKEND`` names the active implementation.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import _ward_py
from .errors import ValidationError
from .features import FeatureSet

if os.environ.get("DMDCLUST_PURE_PYTHON"):
    _kernel = _ward_py
    BACKEND = "python"
else:
    try:
        from . import _ward as _kernel
        BACKEND = "compiled"
    except ImportError:
        _kernel = _ward_py
        BACKEND = "python"

KERNELS = {"python": _ward_py.ward_merge}
if BACKEND == "compiled":
    KERNELS["compiled"] = _kernel.ward_merge


@dataclass(frozen=True, eq=False)
class ConnectivityGraph:
    node_count: int
    edges: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= self.node_count):
            raise ValidationError("edge index out of range")
        if np.any(edges[:, 0] == edges[:, 1]):
            raise ValidationError("self-loops are not allowed")
        object.__setattr__(self, "edges", edges)

    def component_count(self) -> int:
        return _components(self.node_count, self.edges)[0]


def complete_graph(n: int) -> ConnectivityGraph:
    i, j = np.triu_indices(n, k=1)
    return ConnectivityGraph(n, np.stack([i, j], axis=1))


@dataclass(frozen=True, eq=False)
class Dendrogram:
    """Merge history; merge ``s`` joins ``children[s]`` into cluster ``leaf_count + s``."""

    children: np.ndarray
    costs: np.ndarray
    sizes: np.ndarray
    leaf_count: int

    @property
    def merges(self) -> list:
        """(cluster_a, cluster_b, merge_cost, new_size) per step."""
        return [(int(a), int(b), float(c), int(s))
                for (a, b), c, s in zip(self.children, self.costs, self.sizes)]

    @property
    def component_count(self) -> int:
        return self.leaf_count - len(self.costs)


@dataclass(frozen=True)
class ClusterStats:
    """Size, centroid and summed squared norm of a cluster's points."""

    size: int
    mean: np.ndarray
    sq_norm: float

    @classmethod
    def from_points(cls, points) -> "ClusterStats":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return cls(pts.shape[0], pts.mean(axis=0), float(np.sum(pts**2)))

    def merge(self, other: "ClusterStats") -> "ClusterStats":
        size = self.size + other.size
        mean = (self.size * self.mean + other.size * other.mean) / size
        return ClusterStats(size, mean, self.sq_norm + other.sq_norm)

    @property
    def sse(self) -> float:
        """Within-cluster sum of squared distances to the centroid."""
        return max(self.sq_norm - self.size * float(self.mean @ self.mean), 0.0)


def ward_cost(a: ClusterStats, b: ClusterStats) -> float:
    """Increase in within-cluster SSE caused by merging ``a`` and ``b``."""
    diff = np.asarray(a.mean) - np.asarray(b.mean)
    return (a.size * b.size / (a.size + b.size)) * float(diff @ diff)


def _as_points(features) -> np.ndarray:
    if isinstance(features, FeatureSet):
        return features.flattened()
    pts = np.asarray(features, dtype=float)
    if pts.ndim == 0 or pts.shape[0] == 0:
        raise ValidationError("no features to cluster")
    return pts.reshape(pts.shape[0], -1)


def ward_constrained(features, graph: ConnectivityGraph,
                     backend: Optional[str] = None) -> Dendrogram:
    """Greedily merge the adjacent cluster pair with the smallest Ward cost.

    ``features`` is a :class:`FeatureSet` (blocks flattened row-major) or an
    (N, D) array.  Ties go to the pair with the lexicographically smallest
    (smaller first member, larger first member), where a cluster's first
    member is its lowest leaf index.
    """
    points = np.ascontiguousarray(_as_points(features), dtype=np.float64)
    if points.shape[0] == 0:
        raise ValidationError("no features to cluster")
    if points.shape[0] != graph.node_count:
        raise ValidationError("feature count does not match the graph")
    if not np.all(np.isfinite(points)):
        raise ValidationError("features must be finite")
    kernel = KERNELS[backend or BACKEND]
    children, costs, sizes = kernel(points, graph.edges)
    return Dendrogram(children, costs, sizes, points.shape[0])


def _components(n: int, edges: np.ndarray) -> tuple:
    adj = coo_matrix((np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(n, n))
    return connected_components(adj, directed=False)


def cut(dendrogram: Dendrogram, k: int) -> np.ndarray:
    """Flat labels 1..k after replaying the first N - k merges.

    Labels are numbered in order of each cluster's smallest member.
    """
    n = dendrogram.leaf_count
    if not dendrogram.component_count <= k <= n:
        raise ValidationError(
            f"k must lie in [{dendrogram.component_count}, {n}], got {k}")
    # any leaf of a cluster stands in for it; merges become leaf-leaf edges
    rep = np.arange(2 * n - 1)
    replay = dendrogram.children[: n - k]
    for step, (a, _) in enumerate(replay):
        rep[n + step] = rep[a]
    edges = rep[replay].reshape(-1, 2)
    _, comp = _components(n, edges)
    _, first_idx, inverse = np.unique(comp, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first_idx))
    return order[inverse] + 1
