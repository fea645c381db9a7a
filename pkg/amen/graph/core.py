from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from amen.errors import (
    DegenerateNeighborhoodError,
    DisconnectedNeighborhoodError,
    GraphError,
    NullModelError,
    UnknownNodeError,
)


class MemberSet(NamedTuple):
    """A named, not yet validated neighborhood (dense node indices)."""

    name: str
    members: tuple[int, ...]


def canonical_pairs(edges: np.ndarray) -> np.ndarray:
    """Unordered (lo, hi) pairs with self-loops dropped and duplicates merged."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    lo = np.minimum(edges[:, 0], edges[:, 1])
    hi = np.maximum(edges[:, 0], edges[:, 1])
    keep = lo != hi
    if not keep.any():
        return np.empty((0, 2), dtype=np.int64)
    return np.unique(np.column_stack([lo[keep], hi[keep]]), axis=0)


@dataclass(frozen=True, eq=False)
class AttributedGraph:
    """Immutable undirected graph with sparse node attributes in [0, 1].

    Degrees k_i and the edge count m always refer to this whole graph.
    """

    adjacency: sparse.csr_matrix
    attributes: sparse.csr_matrix
    node_labels: tuple[str, ...]
    attribute_names: tuple[str, ...]
    degrees: np.ndarray = field(init=False, repr=False)
    _label_index: dict[str, int] = field(init=False, repr=False)
    _cache: dict = field(init=False, repr=False, default_factory=dict)

    def __post_init__(self) -> None:
        n = len(self.node_labels)
        if self.adjacency.shape != (n, n):
            raise GraphError(
                f"adjacency shape {self.adjacency.shape} does not match {n} nodes"
            )
        if self.attributes.shape != (n, len(self.attribute_names)):
            raise GraphError(
                f"attribute shape {self.attributes.shape} does not match "
                f"{n} nodes x {len(self.attribute_names)} attributes"
            )
        if (self.adjacency != self.adjacency.T).nnz:
            raise GraphError("adjacency is not symmetric")
        if self.adjacency.diagonal().any():
            raise GraphError("adjacency contains self-loops")
        if self.adjacency.nnz and not np.all(self.adjacency.data == 1):
            raise GraphError("adjacency contains duplicate or weighted edges")
        values = self.attributes.data
        if values.size and (values.min() < 0.0 or values.max() > 1.0):
            raise GraphError("attribute values must lie in [0, 1]")

        label_index = {label: i for i, label in enumerate(self.node_labels)}
        if len(label_index) != n:
            raise GraphError("node labels are not unique")

        degrees = np.diff(self.adjacency.indptr).astype(np.int64)
        object.__setattr__(self, "degrees", degrees)
        object.__setattr__(self, "_label_index", label_index)

    @classmethod
    def from_edges(
        cls,
        edges: np.ndarray,
        node_labels: Iterable[str],
        attributes: sparse.spmatrix,
        attribute_names: Iterable[str],
    ) -> "AttributedGraph":
        node_labels = tuple(node_labels)
        n = len(node_labels)
        pairs = canonical_pairs(edges)
        rows = np.concatenate([pairs[:, 0], pairs[:, 1]])
        cols = np.concatenate([pairs[:, 1], pairs[:, 0]])
        adjacency = sparse.csr_matrix(
            (np.ones(rows.size, dtype=np.int8), (rows, cols)), shape=(n, n)
        )
        adjacency.sort_indices()

        attributes = sparse.csr_matrix(attributes, dtype=np.float64)
        attributes.eliminate_zeros()
        attributes.sort_indices()
        return cls(adjacency, attributes, node_labels, tuple(attribute_names))

    @property
    def node_count(self) -> int:
        return len(self.node_labels)

    @property
    def edge_count(self) -> int:
        return self.adjacency.nnz // 2

    @property
    def attribute_count(self) -> int:
        return len(self.attribute_names)

    @property
    def two_m(self) -> int:
        return self.adjacency.nnz

    @property
    def is_binary(self) -> bool:
        if "is_binary" not in self._cache:
            self._cache["is_binary"] = bool(np.all(self.attributes.data == 1.0))
        return self._cache["is_binary"]

    def neighbors(self, node: int) -> np.ndarray:
        indptr = self.adjacency.indptr
        return self.adjacency.indices[indptr[node] : indptr[node + 1]]

    def index_of(self, label: str) -> int:
        try:
            return self._label_index[label]
        except KeyError:
            raise UnknownNodeError(f"unknown node {label!r}") from None

    def label_of(self, node: int) -> str:
        return self.node_labels[node]

    def check_node(self, node: int) -> int:
        if not 0 <= node < self.node_count:
            raise UnknownNodeError(f"unknown node index {node}")
        return int(node)

    def edge_array(self) -> np.ndarray:
        """Unique undirected edges as sorted (i, j) rows with i < j."""
        upper = sparse.triu(self.adjacency, k=1, format="coo")
        pairs = np.column_stack([upper.row, upper.col]).astype(np.int64)
        order = np.lexsort((pairs[:, 1], pairs[:, 0]))
        return pairs[order]

    def with_edges(self, edges: np.ndarray) -> "AttributedGraph":
        return AttributedGraph.from_edges(
            edges, self.node_labels, self.attributes, self.attribute_names
        )

    def with_attributes(self, attributes: sparse.spmatrix) -> "AttributedGraph":
        attributes = sparse.csr_matrix(attributes, dtype=np.float64)
        attributes.eliminate_zeros()
        attributes.sort_indices()
        return AttributedGraph(
            self.adjacency, attributes, self.node_labels, self.attribute_names
        )


@dataclass(frozen=True, eq=False)
class Neighborhood:
    """Member set C with its boundary B and the edges that touch C.

    ``internal_edges`` holds unordered pairs (i < j) inside C, ``cross_edges``
    holds (i, b) pairs with i in C and b in B.
    """

    name: str
    members: np.ndarray
    boundary: np.ndarray
    internal_edges: np.ndarray
    cross_edges: np.ndarray

    @property
    def size(self) -> int:
        return int(self.members.size)

    @property
    def boundary_size(self) -> int:
        return int(self.boundary.size)

    def local(self, nodes: np.ndarray) -> np.ndarray:
        """Positions of member nodes inside ``members``."""
        return np.searchsorted(self.members, nodes)

    def contains(self, nodes: np.ndarray) -> np.ndarray:
        return isin_sorted(np.asarray(nodes), self.members)


def isin_sorted(values: np.ndarray, sorted_nodes: np.ndarray) -> np.ndarray:
    if sorted_nodes.size == 0:
        return np.zeros(values.shape, dtype=bool)
    positions = np.searchsorted(sorted_nodes, values)
    positions = np.minimum(positions, sorted_nodes.size - 1)
    return sorted_nodes[positions] == values


def boundary_of(
    graph: AttributedGraph,
    members: Iterable[int],
    name: Optional[str] = None,
    require_connected: bool = False,
) -> Neighborhood:
    nodes = np.unique(np.fromiter((int(v) for v in members), dtype=np.int64))
    if nodes.size < 2:
        raise DegenerateNeighborhoodError(
            f"neighborhood {name or ''} has {nodes.size} member(s), needs at least 2"
        )
    if nodes[0] < 0 or nodes[-1] >= graph.node_count:
        raise UnknownNodeError(f"neighborhood {name or ''} has unknown node ids")

    indptr, indices = graph.adjacency.indptr, graph.adjacency.indices
    sources = np.repeat(nodes, graph.degrees[nodes])
    targets = np.concatenate(
        [indices[indptr[node] : indptr[node + 1]] for node in nodes]
    ).astype(np.int64)

    inside = isin_sorted(targets, nodes)
    internal = np.column_stack([sources[inside], targets[inside]])
    internal = internal[internal[:, 0] < internal[:, 1]]
    cross = np.column_stack([sources[~inside], targets[~inside]])

    neighborhood = Neighborhood(
        name=name if name is not None else graph.label_of(int(nodes[0])),
        members=nodes,
        boundary=np.unique(cross[:, 1]),
        internal_edges=internal,
        cross_edges=cross,
    )
    if require_connected and not is_connected(neighborhood):
        raise DisconnectedNeighborhoodError(
            f"neighborhood {neighborhood.name} does not induce a connected subgraph"
        )
    return neighborhood


def is_connected(nbhd: Neighborhood) -> bool:
    size = nbhd.size
    rows = nbhd.local(nbhd.internal_edges[:, 0])
    cols = nbhd.local(nbhd.internal_edges[:, 1])
    induced = sparse.csr_matrix(
        (np.ones(rows.size, dtype=np.int8), (rows, cols)), shape=(size, size)
    )
    n_components, _ = csgraph.connected_components(induced, directed=False)
    return n_components == 1


def egonet_of(graph: AttributedGraph, ego: int) -> Neighborhood:
    ego = graph.check_node(ego)
    if graph.degrees[ego] == 0:
        raise DegenerateNeighborhoodError(
            f"ego {graph.label_of(ego)} has degree 0, its egonet is a single node"
        )
    members = np.append(graph.neighbors(ego), ego)
    return boundary_of(graph, members, name=graph.label_of(ego))


def egonet_member_sets(graph: AttributedGraph) -> list[MemberSet]:
    member_sets: list[MemberSet] = []
    for ego in range(graph.node_count):
        members = sorted({ego, *graph.neighbors(ego).tolist()})
        member_sets.append(MemberSet(graph.label_of(ego), tuple(members)))
    return member_sets


def expected_edge_probability(
    graph: AttributedGraph, i: int, j: int, clamped: bool = False
) -> float:
    """Configuration-model probability k_i k_j / 2m of an edge (i, j)."""
    if graph.edge_count == 0:
        raise NullModelError("graph has no edges")
    i, j = graph.check_node(i), graph.check_node(j)
    probability = graph.degrees[i] * graph.degrees[j] / graph.two_m
    return float(min(1.0, probability) if clamped else probability)
