"""Structural and attributed quality measures used as comparison baselines.

Pair sums follow the same convention as normality: ordered pairs, diagonal
included, A_ii = 0.
"""

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from amen.entities import SimilarityKind
from amen.errors import GraphError, NullModelError, UndefinedScoreError
from amen.graph.core import AttributedGraph, Neighborhood

ZERO_VOLUME_TOLERANCE = 1e-12


@dataclass(frozen=True)
class Partition:
    assignment: np.ndarray


@dataclass(frozen=True)
class NodeCategory:
    categories: np.ndarray


@dataclass(frozen=True)
class ScalarAttribute:
    values: np.ndarray

    def edge_end_mean(self, graph: AttributedGraph) -> float:
        """Mean over edge ends, (1/2m) sum_i k_i x_i."""
        _require_edges(graph)
        return float(graph.degrees @ _per_node(graph, self.values) / graph.two_m)


def _require_edges(graph: AttributedGraph) -> None:
    if graph.edge_count == 0:
        raise NullModelError("graph has no edges")


def _per_node(graph: AttributedGraph, values: np.ndarray) -> np.ndarray:
    values = np.asarray(values)
    if values.shape != (graph.node_count,):
        raise GraphError(
            f"expected one value per node ({graph.node_count}), got {values.shape}"
        )
    return values


def _same_type_mixing(graph: AttributedGraph, labels: np.ndarray) -> float:
    _require_edges(graph)
    _, types = np.unique(_per_node(graph, labels), return_inverse=True)
    edges = graph.edge_array()
    same = 2 * int(np.count_nonzero(types[edges[:, 0]] == types[edges[:, 1]]))
    volumes = np.bincount(types, weights=graph.degrees.astype(np.float64))
    expected = float((volumes**2).sum()) / graph.two_m
    return (same - expected) / graph.two_m


def modularity(graph: AttributedGraph, partition: Partition) -> float:
    return _same_type_mixing(graph, partition.assignment)


def assortativity_nominal(graph: AttributedGraph, cats: NodeCategory) -> float:
    return _same_type_mixing(graph, cats.categories)


def assortativity_scalar(graph: AttributedGraph, attr: ScalarAttribute) -> float:
    _require_edges(graph)
    x = _per_node(graph, attr.values).astype(np.float64)
    edges = graph.edge_array()
    observed = 2.0 * float(x[edges[:, 0]] @ x[edges[:, 1]])
    expected = float(graph.degrees @ x) ** 2 / graph.two_m
    return (observed - expected) / graph.two_m


def partition_modularity(graph: AttributedGraph, nbhd: Neighborhood) -> float:
    """Modularity of the two-block partition {C, V - C}."""
    assignment = np.zeros(graph.node_count, dtype=np.int64)
    assignment[nbhd.members] = 1
    return modularity(graph, Partition(assignment))


def average_degree(nbhd: Neighborhood) -> float:
    return 2.0 * len(nbhd.internal_edges) / nbhd.size


def cut_ratio(graph: AttributedGraph, nbhd: Neighborhood) -> float:
    outside = graph.node_count - nbhd.size
    if outside == 0:
        raise UndefinedScoreError("cut ratio is undefined when C is the whole graph")
    return len(nbhd.cross_edges) / (nbhd.size * outside)


def conductance(graph: AttributedGraph, nbhd: Neighborhood) -> float:
    volume = int(graph.degrees[nbhd.members].sum())
    smaller = min(volume, graph.two_m - volume)
    if smaller == 0:
        raise UndefinedScoreError("conductance is undefined for a zero-volume side")
    return len(nbhd.cross_edges) / smaller


def flake_odf(graph: AttributedGraph, nbhd: Neighborhood) -> float:
    """Fraction of members with fewer than half of their edges inside C."""
    inside = np.bincount(
        nbhd.local(nbhd.internal_edges.ravel()), minlength=nbhd.size
    )
    degrees = graph.degrees[nbhd.members]
    return float(np.count_nonzero(2 * inside < degrees)) / nbhd.size


def edge_similarity(
    graph: AttributedGraph, pairs: np.ndarray, kind: SimilarityKind
) -> np.ndarray:
    """Similarity of each node pair under uniform weights 1/d over all attributes."""
    d = graph.attribute_count
    if d == 0 or len(pairs) == 0:
        return np.zeros(len(pairs))
    left = graph.attributes[pairs[:, 0]]
    right = graph.attributes[pairs[:, 1]]
    if kind is SimilarityKind.dot:
        return np.asarray(left.multiply(right).sum(axis=1)).ravel() / d

    differ = sparse.csr_matrix(left - right)
    differ.eliminate_zeros()
    return (d - np.diff(differ.indptr)) / d


def _total_edge_similarity(graph: AttributedGraph, kind: SimilarityKind) -> float:
    key = ("total_edge_similarity", kind)
    if key not in graph._cache:
        graph._cache[key] = float(
            edge_similarity(graph, graph.edge_array(), kind).sum()
        )
    return graph._cache[key]


def aw_ncut_uniform(
    graph: AttributedGraph, nbhd: Neighborhood, sim: SimilarityKind
) -> float:
    """Symmetric normalized cut with edges weighted by uniform-weight similarity.

    Under binary-mixed similarity the cut edges take the external (delta)
    similarity and every other edge the internal (dot) one.
    """
    _require_edges(graph)
    internal_kind, external_kind = sim.internal, sim.external
    inside = edge_similarity(graph, nbhd.internal_edges, internal_kind).sum()
    cut_internal = edge_similarity(graph, nbhd.cross_edges, internal_kind).sum()
    cut = (
        cut_internal
        if external_kind is internal_kind
        else edge_similarity(graph, nbhd.cross_edges, external_kind).sum()
    )

    total = _total_edge_similarity(graph, internal_kind)
    volume = 2.0 * inside + cut
    volume_rest = 2.0 * total - 2.0 * inside - 2.0 * cut_internal + cut
    tolerance = ZERO_VOLUME_TOLERANCE * max(1.0, total)
    if volume <= tolerance or volume_rest <= tolerance:
        raise UndefinedScoreError(
            "attribute-weighted normalized cut is undefined for a zero weighted volume"
        )
    return float(cut / volume + cut / volume_rest)
