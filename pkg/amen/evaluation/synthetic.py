"""Planted-focus benchmark graphs with known good neighborhoods."""

import logging

import networkx as nx
import numpy as np
from scipy import sparse

from amen.graph.core import AttributedGraph, MemberSet
from amen.settings import SyntheticConfig

log = logging.getLogger(__name__)


def generate_planted_focus(
    params: SyntheticConfig, rng: np.random.Generator
) -> tuple[AttributedGraph, list[MemberSet]]:
    """Planted partition graph whose communities share a few focus attributes.

    Every community gets its own focus attributes, each held by a member with
    probability ``1 - noise``. Background attributes are scattered over all
    nodes with ``background_density``.
    """
    sizes = rng.integers(
        params.size_min, params.size_max + 1, size=params.communities
    ).tolist()
    structure = nx.random_partition_graph(
        sizes, params.p_in, params.p_out, seed=int(rng.integers(2**32))
    )
    n = structure.number_of_nodes()
    edges = np.array(structure.edges(), dtype=np.int64).reshape(-1, 2)

    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    names: list[str] = []
    member_sets: list[MemberSet] = []
    start = 0
    for community, size in enumerate(sizes):
        members = np.arange(start, start + size)
        start += size
        member_sets.append(MemberSet(f"c{community}", tuple(members.tolist())))

        focus_count = int(rng.integers(params.focus_min, params.focus_max + 1))
        for _ in range(focus_count):
            holders = members[rng.random(size) >= params.noise]
            rows.append(holders)
            cols.append(np.full(holders.size, len(names)))
            names.append(f"c{community}_focus{len(names)}")

    if params.background_attributes:
        background = sparse.random(
            n,
            params.background_attributes,
            density=params.background_density,
            format="coo",
            random_state=rng,
        )
        rows.append(background.row.astype(np.int64))
        cols.append(background.col.astype(np.int64) + len(names))
        names.extend(f"bg{j}" for j in range(params.background_attributes))

    row_index = np.concatenate(rows) if rows else np.empty(0, dtype=np.int64)
    col_index = np.concatenate(cols) if cols else np.empty(0, dtype=np.int64)
    attributes = sparse.csr_matrix(
        (np.ones(row_index.size), (row_index, col_index)), shape=(n, len(names))
    )
    graph = AttributedGraph.from_edges(
        edges, [str(node) for node in range(n)], attributes, names
    )
    log.info(
        "planted-focus graph: n=%d m=%d d=%d communities=%d",
        graph.node_count,
        graph.edge_count,
        graph.attribute_count,
        len(member_sets),
    )
    return graph, member_sets
