"""KNN cell graph over nucleus centroids."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .nuclei import Nucleus


@dataclass(frozen=True)
class NucleiGraph:
    """Undirected graph; node ids index ``nodes``, edges are ``(i, j, dist)`` with ``i < j``."""

    nodes: tuple[Nucleus, ...]
    edges: tuple[tuple[int, int, float], ...] = field(default=())

    def edge_set(self) -> set[tuple[int, int]]:
        return {(i, j) for i, j, _ in self.edges}

    def degrees(self) -> list[int]:
        deg = [0] * len(self.nodes)
        for i, j, _ in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def to_dict(self) -> dict:
        return {
            "nodes": [
                {"x": n.centroid_x, "y": n.centroid_y, "area": n.area} for n in self.nodes
            ],
            "edges": [[i, j, d] for i, j, d in self.edges],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def build_nuclei_graph(nuclei, k: int = 5, max_distance: float = 50.0) -> NucleiGraph:
    """Connect each nucleus to its ``k`` nearest neighbours within ``max_distance`` pixels.

    The directed KNN relation is symmetrized (an edge exists if either end
    selects the other), and distance ties go to the smaller node id.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if max_distance <= 0:
        raise ValueError("max_distance must be positive")
    nodes = tuple(nuclei)
    if len(nodes) < 2:
        return NucleiGraph(nodes, ())
    xs = np.fromiter((n.centroid_x for n in nodes), dtype=np.float64, count=len(nodes))
    ys = np.fromiter((n.centroid_y for n in nodes), dtype=np.float64, count=len(nodes))
    ii, jj, dd = kernels.knn_edges(xs, ys, int(k), float(max_distance))
    edges = tuple((int(i), int(j), float(d)) for i, j, d in zip(ii, jj, dd))
    return NucleiGraph(nodes, edges)


@dataclass(frozen=True)
class GraphStats:
    nodes: int
    edges: int
    mean_degree: float
    max_degree: int
    components: int

    def to_dict(self) -> dict:
        return {
            "nodes": self.nodes,
            "edges": self.edges,
            "mean_degree": self.mean_degree,
            "max_degree": self.max_degree,
            "components": self.components,
        }


def graph_stats(graph: NucleiGraph) -> GraphStats:
    n = len(graph.nodes)
    if n == 0:
        return GraphStats(0, 0, 0.0, 0, 0)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j, _ in graph.edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    deg = graph.degrees()
    return GraphStats(
        nodes=n,
        edges=len(graph.edges),
        mean_degree=2.0 * len(graph.edges) / n,
        max_degree=max(deg),
        components=len({find(a) for a in range(n)}),
    )
