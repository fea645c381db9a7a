import io
import logging
import math
import re
from contextlib import ExitStack
from pathlib import Path
from typing import IO, Iterable, Iterator, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel
from scipy import sparse

from amen.entities import AttributeFormat
from amen.errors import GraphError, ParseError, UnknownNodeError
from amen.graph.core import AttributedGraph, MemberSet
from amen.settings import IngestOptions

log = logging.getLogger(__name__)

TOKEN_SEPARATOR = re.compile(r"[,\s]+")


class IngestStats(BaseModel):
    self_loops: int = 0
    duplicate_edges: int = 0
    isolated_nodes: int = 0
    rescaled_attributes: int = 0
    constant_attributes: list[str] = []


def _decoded(stream: IO[bytes], source: str) -> Iterator[str]:
    for line_number, raw in enumerate(stream, start=1):
        try:
            line = raw.decode("utf-8")
        except UnicodeDecodeError as e:
            raise ParseError(
                source, line_number, f"not valid UTF-8 ({e.reason})"
            ) from None
        yield line


def _content_lines(lines: Iterable[str]) -> Iterator[tuple[int, str]]:
    """Numbered lines that are neither blank nor ``#`` comments."""
    for line_number, line in enumerate(lines, start=1):
        stripped = line.strip()
        if stripped and not stripped.startswith("#"):
            yield line_number, stripped


def _tokenized(lines: Iterable[str]) -> Iterator[tuple[int, list[str]]]:
    for line_number, stripped in _content_lines(lines):
        yield line_number, TOKEN_SEPARATOR.split(stripped)


class _NodeIndex:
    def __init__(self) -> None:
        self.labels: list[str] = []
        self.index: dict[str, int] = {}

    def add(self, label: str) -> int:
        node = self.index.get(label)
        if node is None:
            node = self.index[label] = len(self.labels)
            self.labels.append(label)
        return node


def _parse_edges(
    lines: Iterable[str], source: str, nodes: _NodeIndex, stats: IngestStats
) -> np.ndarray:
    pairs: list[tuple[int, int]] = []
    for line_number, tokens in _tokenized(lines):
        if len(tokens) != 2:
            raise ParseError(
                source, line_number, f"expected 2 node tokens, got {len(tokens)}"
            )
        i, j = nodes.add(tokens[0]), nodes.add(tokens[1])
        if i == j:
            stats.self_loops += 1
            continue
        pairs.append((min(i, j), max(i, j)))

    edges = np.array(pairs, dtype=np.int64).reshape(-1, 2)
    unique = np.unique(edges, axis=0)
    stats.duplicate_edges = len(edges) - len(unique)
    return unique


def _attribute_node(
    label: str,
    nodes: _NodeIndex,
    options: IngestOptions,
    stats: IngestStats,
    source: str,
    line_number: int,
) -> int:
    if label not in nodes.index:
        if not options.allow_isolated:
            raise ParseError(
                source, line_number, f"node {label!r} does not appear in the edge list"
            )
        stats.isolated_nodes += 1
    return nodes.add(label)


def _parse_attribute_triples(
    lines: Iterable[str],
    source: str,
    nodes: _NodeIndex,
    options: IngestOptions,
    stats: IngestStats,
) -> tuple[dict[tuple[int, int], float], list[str]]:
    names: dict[str, int] = {}
    entries: dict[tuple[int, int], float] = {}
    for line_number, tokens in _tokenized(lines):
        if len(tokens) not in (2, 3):
            raise ParseError(
                source,
                line_number,
                f"expected 'node attribute [value]', got {len(tokens)} tokens",
            )
        value = 1.0
        if len(tokens) == 3:
            try:
                value = float(tokens[2])
            except ValueError:
                raise ParseError(
                    source, line_number, f"invalid attribute value {tokens[2]!r}"
                ) from None
            if not math.isfinite(value):
                raise ParseError(source, line_number, f"non-finite value {tokens[2]!r}")

        node = _attribute_node(tokens[0], nodes, options, stats, source, line_number)
        column = names.setdefault(tokens[1], len(names))
        entries[(node, column)] = value
    return entries, list(names)


def _parse_attribute_rows(
    lines: Iterable[str],
    source: str,
    nodes: _NodeIndex,
    options: IngestOptions,
    stats: IngestStats,
) -> tuple[dict[tuple[int, int], float], list[str]]:
    content = list(_content_lines(lines))
    if not content:
        return {}, []
    # line_numbers[0] is the header, line_numbers[r + 1] holds data row r
    line_numbers = [line_number for line_number, _ in content]
    text = "".join(f"{stripped}\n" for _, stripped in content)
    try:
        frame = pd.read_csv(io.StringIO(text), dtype=str, comment="#")
    except pd.errors.ParserError as e:
        raise ParseError(source, line_numbers[0], f"malformed CSV: {e}") from e

    names = [str(name) for name in frame.columns[1:]]
    values = frame.iloc[:, 1:].apply(pd.to_numeric, errors="coerce")
    bad_rows = values.isna().any(axis=1) | ~np.isfinite(values).all(axis=1)
    if bad_rows.any():
        row = int(np.flatnonzero(bad_rows.to_numpy())[0])
        raise ParseError(source, line_numbers[row + 1], "non-numeric attribute value")

    entries: dict[tuple[int, int], float] = {}
    matrix = values.to_numpy(dtype=np.float64)
    for row, label in enumerate(frame.iloc[:, 0].astype(str)):
        node = _attribute_node(
            label, nodes, options, stats, source, line_numbers[row + 1]
        )
        for column in np.flatnonzero(matrix[row]):
            entries[(node, int(column))] = float(matrix[row, column])
    return entries, names


def _normalize_columns(
    matrix: sparse.csc_matrix,
    names: list[str],
    rescale_all: bool,
    stats: IngestStats,
) -> sparse.csr_matrix:
    """Min-max scale columns into [0, 1]; implicit zeros count toward min and max."""
    n, d = matrix.shape
    if d == 0 or n == 0:
        return matrix.tocsr()

    col_min = matrix.min(axis=0).toarray().ravel()
    col_max = matrix.max(axis=0).toarray().ravel()
    targets = np.ones(d, dtype=bool) if rescale_all else (col_min < 0) | (col_max > 1)
    span = col_max - col_min
    constant = targets & (span == 0)
    for column in np.flatnonzero(constant):
        log.warning("attribute %s is constant, mapped to 0", names[column])
        stats.constant_attributes.append(names[column])
    stats.rescaled_attributes = int(targets.sum())

    # negative minima move the implicit zeros, those columns are materialized
    shifted = targets & ~constant & (col_min < 0)
    scaled = matrix.copy()
    entry_column = np.repeat(np.arange(d), np.diff(scaled.indptr))
    linear = (targets & ~constant)[entry_column]
    scaled.data[linear] = (
        scaled.data[linear] - col_min[entry_column[linear]]
    ) / span[entry_column[linear]]
    scaled.data[constant[entry_column]] = 0.0

    if shifted.any():
        shifted_idx = np.flatnonzero(shifted)
        kept_idx = np.flatnonzero(~shifted)
        block = (matrix[:, shifted_idx].toarray() - col_min[shifted_idx]) / span[
            shifted_idx
        ]
        combined = sparse.hstack(
            [scaled[:, kept_idx], sparse.csc_matrix(block)], format="csc"
        )
        order = np.argsort(np.concatenate([kept_idx, shifted_idx]))
        scaled = combined[:, order]

    scaled = scaled.tocsr()
    np.clip(scaled.data, 0.0, 1.0, out=scaled.data)
    scaled.eliminate_zeros()
    return scaled


def parse_graph(
    edge_lines: Iterable[str],
    attribute_lines: Optional[Iterable[str]] = None,
    options: Optional[IngestOptions] = None,
    edge_source: str = "<edges>",
    attribute_source: str = "<attributes>",
) -> tuple[AttributedGraph, IngestStats]:
    options = options or IngestOptions()
    stats = IngestStats()
    nodes = _NodeIndex()
    edges = _parse_edges(edge_lines, edge_source, nodes, stats)

    entries: dict[tuple[int, int], float] = {}
    names: list[str] = []
    if attribute_lines is not None:
        match options.attribute_format:
            case AttributeFormat.triples:
                entries, names = _parse_attribute_triples(
                    attribute_lines, attribute_source, nodes, options, stats
                )
            case AttributeFormat.dense:
                entries, names = _parse_attribute_rows(
                    attribute_lines, attribute_source, nodes, options, stats
                )

    n, d = len(nodes.labels), len(names)
    keys = np.array(list(entries), dtype=np.int64).reshape(-1, 2)
    values = np.fromiter(entries.values(), dtype=np.float64, count=len(entries))
    matrix = sparse.csc_matrix((values, (keys[:, 0], keys[:, 1])), shape=(n, d))
    attributes = _normalize_columns(matrix, names, options.rescale, stats)

    if stats.self_loops:
        log.warning("dropped %d self-loop(s) from %s", stats.self_loops, edge_source)
    if stats.duplicate_edges:
        log.info("merged %d duplicate edge(s)", stats.duplicate_edges)
    if stats.isolated_nodes:
        log.warning("added %d isolated node(s) from attributes", stats.isolated_nodes)

    graph = AttributedGraph.from_edges(edges, nodes.labels, attributes, names)
    return graph, stats


def load_graph(
    edge_path: Path,
    attribute_path: Optional[Path] = None,
    options: Optional[IngestOptions] = None,
) -> AttributedGraph:
    with ExitStack() as stack:
        edge_file = stack.enter_context(open(edge_path, "rb"))
        edge_lines = _decoded(edge_file, str(edge_path))
        attribute_lines = None
        if attribute_path is not None:
            attribute_lines = _decoded(
                stack.enter_context(open(attribute_path, "rb")), str(attribute_path)
            )
        graph, _ = parse_graph(
            edge_lines,
            attribute_lines,
            options,
            str(edge_path),
            str(attribute_path),
        )
    log.info(
        "loaded %s: n=%d m=%d d=%d",
        edge_path,
        graph.node_count,
        graph.edge_count,
        graph.attribute_count,
    )
    return graph


def write_graph(graph: AttributedGraph, edge_path: Path, attribute_path: Path) -> None:
    """Write edges as label pairs and attributes as triples, column by column.

    An attribute held by nobody and a node with neither edges nor attributes
    are written as zero-valued triples, so names and nodes survive a reload.
    Graphs with isolated nodes reload with ``allow_isolated``.
    """
    labels = graph.node_labels
    bare = np.flatnonzero(
        (graph.degrees == 0) & (np.diff(graph.attributes.indptr) == 0)
    )
    if bare.size and graph.attribute_count == 0:
        raise GraphError(
            f"{bare.size} isolated node(s) cannot be written without attributes"
        )

    with open(edge_path, "w") as f:
        for i, j in graph.edge_array():
            f.write(f"{labels[i]} {labels[j]}\n")

    columns = graph.attributes.tocsc()
    with open(attribute_path, "w") as f:
        for column, name in enumerate(graph.attribute_names):
            start, end = columns.indptr[column], columns.indptr[column + 1]
            if start == end:
                f.write(f"{labels[0]} {name} 0.0\n")
            for node, value in zip(
                columns.indices[start:end], columns.data[start:end]
            ):
                f.write(f"{labels[node]} {name} {float(value)!r}\n")
        for node in bare:
            f.write(f"{labels[node]} {graph.attribute_names[0]} 0.0\n")


def parse_member_sets(
    lines: Iterable[str], graph: AttributedGraph, source: str = "<neighborhoods>"
) -> list[MemberSet]:
    member_sets: list[MemberSet] = []
    for line_number, tokens in _tokenized(lines):
        try:
            members = sorted({graph.index_of(label) for label in tokens[1:]})
        except UnknownNodeError as e:
            raise UnknownNodeError(f"{source}:{line_number}: {e}") from None
        member_sets.append(MemberSet(tokens[0], tuple(members)))
    return member_sets


def load_neighborhoods(path: Path, graph: AttributedGraph) -> list[MemberSet]:
    with open(path, "rb") as f:
        return parse_member_sets(_decoded(f, str(path)), graph, str(path))
