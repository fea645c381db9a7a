"""Normality of attributed neighborhoods and its per-attribute decomposition.

Internal consistency sums over all ordered pairs (i, j) in C x C, the diagonal
included (A_ii = 0), which makes I_max = |C|^2 exact. ``INCLUDE_DIAGONAL``
switches the diagonal off for every quantity at once.
"""

import logging
from dataclasses import dataclass
from enum import auto

import numpy as np
from pydantic import BaseModel
from scipy import sparse

from amen._compat import StrEnum
from amen.entities import SimilarityKind
from amen.errors import NullModelError, SimilarityError, WeightError
from amen.graph.core import AttributedGraph, Neighborhood, isin_sorted

log = logging.getLogger(__name__)

INCLUDE_DIAGONAL = True

# upper bound on pair x attribute cells materialized at once for delta similarity
DELTA_CHUNK_CELLS = 4_000_000


@dataclass(frozen=True, eq=False)
class RelevanceVector:
    """Relevance vector of one neighborhood, stored on its supported columns.

    ``columns`` lists the attributes exhibited by at least one member; every
    per-attribute array is aligned with it. Unsupported attributes have
    x_I = x_E = x_tilde_I = 0 and are not focus candidates.
    """

    attribute_count: int
    columns: np.ndarray
    x_i: np.ndarray
    x_e: np.ndarray
    x_tilde_i: np.ndarray
    i_min: float
    i_max: float

    @property
    def x_hat_i(self) -> np.ndarray:
        return (self.x_i - self.i_min) / (self.i_max - self.i_min)

    @property
    def x_hat_e(self) -> np.ndarray:
        volume = self.x_tilde_i - self.x_e
        x_hat_e = np.zeros_like(self.x_e)
        np.divide(self.x_e, volume, out=x_hat_e, where=volume > 0)
        return x_hat_e

    @property
    def x(self) -> np.ndarray:
        return self.x_hat_i + self.x_hat_e

    @property
    def unsupported_x_hat_i(self) -> float:
        return -self.i_min / (self.i_max - self.i_min)

    @property
    def support_mask(self) -> np.ndarray:
        mask = np.zeros(self.attribute_count, dtype=bool)
        mask[self.columns] = True
        return mask

    def dense(self, name: str) -> np.ndarray:
        """Full-length view of one per-attribute field, e.g. ``dense("x")``."""
        fill = 0.0
        if name in ("x_hat_i", "x"):
            fill = self.unsupported_x_hat_i
        values = np.full(self.attribute_count, fill)
        values[self.columns] = getattr(self, name)
        return values


def _dense_rows(
    attributes: sparse.csr_matrix, nodes: np.ndarray, columns: np.ndarray
) -> np.ndarray:
    """Rows of ``nodes`` restricted to ``columns`` as a dense array."""
    rows = attributes[nodes]
    entry_row = np.repeat(np.arange(nodes.size), np.diff(rows.indptr))
    keep = isin_sorted(rows.indices, columns)
    dense = np.zeros((nodes.size, columns.size))
    dense[entry_row[keep], np.searchsorted(columns, rows.indices[keep])] = rows.data[
        keep
    ]
    return dense


def _support_columns(graph: AttributedGraph, nbhd: Neighborhood) -> np.ndarray:
    rows = graph.attributes[nbhd.members]
    return np.unique(rows.indices[rows.data != 0])


def _check_graph(graph: AttributedGraph, sim: SimilarityKind) -> None:
    if graph.edge_count == 0:
        raise NullModelError("graph has no edges, the null model is undefined")
    if sim is SimilarityKind.binary_mixed and not graph.is_binary:
        raise SimilarityError("binary-mixed similarity needs 0/1 attribute values")


def _structure(
    graph: AttributedGraph, nbhd: Neighborhood
) -> tuple[np.ndarray, np.ndarray]:
    """Modularity matrix A - kk/2m and edge surprise matrix on C x C."""
    degrees = graph.degrees[nbhd.members].astype(np.float64)
    expected = np.outer(degrees, degrees) / graph.two_m

    adjacency = np.zeros((nbhd.size, nbhd.size))
    i = nbhd.local(nbhd.internal_edges[:, 0])
    j = nbhd.local(nbhd.internal_edges[:, 1])
    adjacency[i, j] = adjacency[j, i] = 1.0

    modularity = adjacency - expected
    if not INCLUDE_DIAGONAL:
        np.fill_diagonal(modularity, 0.0)
    surprise = adjacency * (1.0 - np.minimum(1.0, expected))
    return modularity, surprise


def _cross_penalties(graph: AttributedGraph, nbhd: Neighborhood) -> np.ndarray:
    """Per cross-edge surprise 1 - min(1, k_i k_b / 2m)."""
    k_i = graph.degrees[nbhd.cross_edges[:, 0]].astype(np.float64)
    k_b = graph.degrees[nbhd.cross_edges[:, 1]].astype(np.float64)
    return 1.0 - np.minimum(1.0, k_i * k_b / graph.two_m)


def _null_bounds(graph: AttributedGraph, nbhd: Neighborhood) -> tuple[float, float]:
    degrees = graph.degrees[nbhd.members].astype(np.float64)
    expected_total = degrees.sum() ** 2 / graph.two_m
    pairs = nbhd.size**2
    if not INCLUDE_DIAGONAL:
        expected_total -= float((degrees**2).sum()) / graph.two_m
        pairs -= nbhd.size
    return -expected_total, float(pairs)


def _delta_chunk(rows: int, cols: int) -> int:
    return max(1, DELTA_CHUNK_CELLS // max(1, rows * cols))


def _weighted_pair_sum(
    weights: np.ndarray, left: np.ndarray, right: np.ndarray, kind: SimilarityKind
) -> np.ndarray:
    """Per attribute f: sum_ij weights_ij * sigma(left_if, right_jf)."""
    if kind is SimilarityKind.dot:
        return np.asarray((weights @ right) * left).sum(axis=0)

    totals = np.empty(left.shape[1])
    step = _delta_chunk(left.shape[0], right.shape[0])
    for start in range(0, left.shape[1], step):
        block = slice(start, start + step)
        equal = left[:, None, block] == right[None, :, block]
        totals[block] = np.einsum("ij,ijf->f", weights, equal)
    return totals


def _edge_sum(
    penalties: np.ndarray,
    left: np.ndarray,
    right: np.ndarray,
    kind: SimilarityKind,
) -> np.ndarray:
    """Per attribute f: sum_e penalties_e * sigma(left_ef, right_ef), rows aligned."""
    if kind is SimilarityKind.dot:
        return penalties @ (left * right)

    totals = np.empty(left.shape[1])
    step = _delta_chunk(left.shape[0], 1)
    for start in range(0, left.shape[1], step):
        block = slice(start, start + step)
        totals[block] = penalties @ (left[:, block] == right[:, block])
    return totals


def relevance_vector(
    graph: AttributedGraph, nbhd: Neighborhood, sim: SimilarityKind
) -> RelevanceVector:
    _check_graph(graph, sim)
    columns = _support_columns(graph, nbhd)
    i_min, i_max = _null_bounds(graph, nbhd)
    if columns.size == 0:
        empty = np.zeros(0)
        return RelevanceVector(
            graph.attribute_count, columns, empty, empty, empty, i_min, i_max
        )

    members = _dense_rows(graph.attributes, nbhd.members, columns)
    modularity, surprise = _structure(graph, nbhd)
    x_i = _weighted_pair_sum(modularity, members, members, sim.internal)
    x_tilde_i = _weighted_pair_sum(surprise, members, members, sim.internal)

    x_e = np.zeros(columns.size)
    if nbhd.cross_edges.size:
        boundary = _dense_rows(graph.attributes, nbhd.boundary, columns)
        inner = members[nbhd.local(nbhd.cross_edges[:, 0])]
        outer = boundary[np.searchsorted(nbhd.boundary, nbhd.cross_edges[:, 1])]
        x_e = -_edge_sum(_cross_penalties(graph, nbhd), inner, outer, sim.external)

    return RelevanceVector(
        attribute_count=graph.attribute_count,
        columns=columns,
        x_i=x_i,
        x_e=x_e,
        x_tilde_i=x_tilde_i,
        i_min=i_min,
        i_max=i_max,
    )


def _check_weights(graph: AttributedGraph, w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64).ravel()
    if w.shape != (graph.attribute_count,):
        raise WeightError(
            f"weight vector has {w.size} entries, graph has {graph.attribute_count}"
        )
    if (w < 0).any():
        raise WeightError("attribute weights must be nonnegative")
    return w


def _weighted_columns(
    graph: AttributedGraph, nbhd: Neighborhood, w: np.ndarray
) -> np.ndarray:
    columns = _support_columns(graph, nbhd)
    return columns[w[columns] > 0]


def pair_similarity(
    left: np.ndarray, right: np.ndarray, w: np.ndarray, kind: SimilarityKind
) -> np.ndarray:
    """Matrix of s(x_i, x_j | w) between the rows of ``left`` and ``right``."""
    if kind is SimilarityKind.dot:
        return (left * w) @ right.T

    similarity = np.zeros((left.shape[0], right.shape[0]))
    step = _delta_chunk(left.shape[0], right.shape[0])
    for start in range(0, left.shape[1], step):
        block = slice(start, start + step)
        equal = left[:, None, block] == right[None, :, block]
        similarity += equal @ w[block]
    return similarity


def internal_consistency(
    graph: AttributedGraph, nbhd: Neighborhood, w: np.ndarray, sim: SimilarityKind
) -> float:
    _check_graph(graph, sim)
    w = _check_weights(graph, w)
    columns = _weighted_columns(graph, nbhd, w)
    members = _dense_rows(graph.attributes, nbhd.members, columns)
    similarity = pair_similarity(members, members, w[columns], sim.internal)
    modularity, _ = _structure(graph, nbhd)
    return float((modularity * similarity).sum())


def _cross_similarities(
    graph: AttributedGraph, nbhd: Neighborhood, w: np.ndarray, sim: SimilarityKind
) -> np.ndarray:
    """s(x_i, x_b | w) for every cross-edge (i, b), in cross_edges order."""
    columns = _weighted_columns(graph, nbhd, w)
    members = _dense_rows(graph.attributes, nbhd.members, columns)
    boundary = _dense_rows(graph.attributes, nbhd.boundary, columns)
    similarity = pair_similarity(members, boundary, w[columns], sim.external)
    return similarity[
        nbhd.local(nbhd.cross_edges[:, 0]),
        np.searchsorted(nbhd.boundary, nbhd.cross_edges[:, 1]),
    ]


def external_separability(
    graph: AttributedGraph, nbhd: Neighborhood, w: np.ndarray, sim: SimilarityKind
) -> float:
    _check_graph(graph, sim)
    w = _check_weights(graph, w)
    if nbhd.cross_edges.size == 0:
        return 0.0
    similarity = _cross_similarities(graph, nbhd, w, sim)
    return -float(_cross_penalties(graph, nbhd) @ similarity)


def normality(
    graph: AttributedGraph, nbhd: Neighborhood, w: np.ndarray, sim: SimilarityKind
) -> float:
    return internal_consistency(graph, nbhd, w, sim) + external_separability(
        graph, nbhd, w, sim
    )


def normalized_normality(rv: RelevanceVector, w: np.ndarray) -> float:
    """N-hat = w . (x_hat_I + x_hat_E) over all d attributes."""
    w = np.asarray(w, dtype=np.float64).ravel()
    if w.shape != (rv.attribute_count,):
        raise WeightError(
            f"weight vector has {w.size} entries, expected {rv.attribute_count}"
        )
    if (w < 0).any():
        raise WeightError("attribute weights must be nonnegative")
    supported = w[rv.columns]
    unsupported_mass = w.sum() - supported.sum()
    return float(supported @ rv.x + unsupported_mass * rv.unsupported_x_hat_i)


class Exoneration(StrEnum):
    hub = auto()
    focus = auto()
    penalized = auto()


class CrossEdge(BaseModel):
    internal: int
    boundary: int
    penalty: float
    similarity: float
    contribution: float
    reason: Exoneration


def exonerated_edges(
    graph: AttributedGraph, nbhd: Neighborhood, w: np.ndarray, sim: SimilarityKind
) -> list[CrossEdge]:
    """Cross-edges with their share of E and why they are (not) exonerated."""
    _check_graph(graph, sim)
    w = _check_weights(graph, w)
    if nbhd.cross_edges.size == 0:
        return []

    penalties = _cross_penalties(graph, nbhd)
    similarities = _cross_similarities(graph, nbhd, w, sim)
    edges: list[CrossEdge] = []
    for (i, b), penalty, similarity in zip(
        nbhd.cross_edges.tolist(), penalties.tolist(), similarities.tolist()
    ):
        if penalty == 0.0:
            reason = Exoneration.hub
        elif similarity == 0.0:
            reason = Exoneration.focus
        else:
            reason = Exoneration.penalized
        edges.append(
            CrossEdge(
                internal=i,
                boundary=b,
                penalty=penalty,
                similarity=similarity,
                contribution=-penalty * similarity,
                reason=reason,
            )
        )
    log.debug(
        "%s: %d of %d cross-edges exonerated",
        nbhd.name,
        sum(edge.reason is not Exoneration.penalized for edge in edges),
        len(edges),
    )
    return edges
