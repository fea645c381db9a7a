from pathlib import Path

import numpy as np
import pytest
from scipy import sparse

from amen.entities import AttributeFormat
from amen.errors import (
    DegenerateNeighborhoodError,
    DisconnectedNeighborhoodError,
    GraphError,
    NullModelError,
    ParseError,
    UnknownNodeError,
)
from amen.graph.core import (
    AttributedGraph,
    boundary_of,
    egonet_member_sets,
    egonet_of,
    expected_edge_probability,
    is_connected,
)
from amen.graph.io import load_graph, load_neighborhoods, parse_graph, write_graph
from amen.settings import IngestOptions


def test_g4_structure(g4: AttributedGraph):
    assert g4.node_count == 4
    assert g4.edge_count == 4
    assert g4.two_m == 8
    assert g4.degrees.tolist() == [2, 2, 3, 1]
    assert g4.edge_array().tolist() == [[0, 1], [0, 2], [1, 2], [2, 3]]
    assert g4.attribute_names == ("a0",)
    assert g4.attributes.toarray().ravel().tolist() == [1.0, 1.0, 1.0, 1.0]


def test_adjacency_is_symmetric(g4b: AttributedGraph):
    for i in range(g4b.node_count):
        for j in g4b.neighbors(i):
            assert i in g4b.neighbors(j)


def test_parse_drops_self_loops_and_merges_duplicates():
    graph, stats = parse_graph(["a b", "b a", "a a", "b,c", "# comment", ""])
    assert graph.edge_count == 2
    assert graph.node_labels == ("a", "b", "c")
    assert stats.self_loops == 1
    assert stats.duplicate_edges == 1


@pytest.mark.parametrize(
    "edge_lines,attribute_lines,line",
    [
        (["a b", "a b c"], None, 2),
        (["a b"], ["a f 0.5", "b f x"], 2),
        (["a b"], ["a f nan"], 1),
        (["a b"], ["a"], 1),
    ],
)
def test_parse_errors_name_the_line(edge_lines, attribute_lines, line):
    with pytest.raises(ParseError) as error:
        parse_graph(edge_lines, attribute_lines)
    assert error.value.line == line
    assert f":{line}:" in str(error.value)


def test_attribute_for_unknown_node():
    with pytest.raises(ParseError, match="does not appear"):
        parse_graph(["a b"], ["z f 1"])

    graph, stats = parse_graph(
        ["a b"], ["z f 1"], IngestOptions(allow_isolated=True)
    )
    assert graph.node_count == 3
    assert graph.degrees[graph.index_of("z")] == 0
    assert stats.isolated_nodes == 1


def test_out_of_range_columns_are_rescaled():
    graph, stats = parse_graph(
        ["a b", "b c"],
        ["a big 10", "b big 5", "a neg -1", "c neg 1", "a keep 0.25"],
    )
    dense = graph.attributes.toarray()
    big, neg, keep = map(graph.attribute_names.index, ("big", "neg", "keep"))
    # implicit zeros take part in the min-max range
    np.testing.assert_allclose(dense[:, big], [1.0, 0.5, 0.0])
    np.testing.assert_allclose(dense[:, neg], [0.0, 0.5, 1.0])
    np.testing.assert_allclose(dense[:, keep], [0.25, 0.0, 0.0])
    assert stats.rescaled_attributes == 2


def test_rescale_all_maps_constant_columns_to_zero(caplog: pytest.LogCaptureFixture):
    graph, stats = parse_graph(
        ["a b"], ["a f 0.5", "b f 0.5", "a g 0.2"], IngestOptions(rescale=True)
    )
    assert stats.constant_attributes == ["f"]
    assert "constant" in caplog.text
    dense = graph.attributes.toarray()
    assert dense[:, graph.attribute_names.index("f")].tolist() == [0.0, 0.0]
    assert dense[:, graph.attribute_names.index("g")].tolist() == [1.0, 0.0]


def test_dense_attributes_match_triples(g4b: AttributedGraph, data_dir: Path):
    dense = load_graph(
        data_dir / "g4_edges.txt",
        data_dir / "g4b_dense.csv",
        IngestOptions(attribute_format=AttributeFormat.dense),
    )
    assert dense.attribute_names == g4b.attribute_names
    assert (dense.attributes != g4b.attributes).nnz == 0


def edges_by_label(graph: AttributedGraph) -> set[frozenset[str]]:
    return {frozenset(graph.label_of(v) for v in edge) for edge in graph.edge_array()}


def rows_by_label(graph: AttributedGraph) -> dict[tuple[str, str], float]:
    coo = graph.attributes.tocoo()
    return {
        (graph.label_of(i), graph.attribute_names[f]): value
        for i, f, value in zip(coo.row, coo.col, coo.data)
    }


def degrees_by_label(graph: AttributedGraph) -> dict[str, int]:
    return {label: int(graph.degrees[v]) for v, label in enumerate(graph.node_labels)}


def reload(
    graph: AttributedGraph, tmp_path: Path, options: IngestOptions | None = None
) -> AttributedGraph:
    write_graph(graph, tmp_path / "edges.txt", tmp_path / "attrs.txt")
    return load_graph(tmp_path / "edges.txt", tmp_path / "attrs.txt", options)


def test_write_graph_round_trip(tmp_path: Path):
    graph, _ = parse_graph(
        ["x y", "y z", "z w", "w x"],
        ["x f 0.1", "y f 0.30000000000000004", "w g 1", "z g 0.7"],
    )
    reloaded = reload(graph, tmp_path)

    assert edges_by_label(reloaded) == edges_by_label(graph)
    assert rows_by_label(reloaded) == rows_by_label(graph)
    assert degrees_by_label(reloaded) == degrees_by_label(graph)
    assert reloaded.attribute_names == graph.attribute_names


def test_round_trip_keeps_isolated_nodes_and_empty_columns(tmp_path: Path):
    options = IngestOptions(allow_isolated=True)
    # q is isolated with attributes, c has neither edges nor attributes, g is empty
    graph, _ = parse_graph(
        ["a b"], ["a f 1", "q f 0.5", "c g 0", "b h 0.25"], options
    )
    assert graph.node_count == 4
    assert graph.attribute_names == ("f", "g", "h")
    assert graph.attributes[:, 1].nnz == 0

    reloaded = reload(graph, tmp_path, options)
    assert sorted(reloaded.node_labels) == sorted(graph.node_labels)
    assert reloaded.attribute_names == graph.attribute_names
    assert edges_by_label(reloaded) == edges_by_label(graph)
    assert rows_by_label(reloaded) == rows_by_label(graph)
    assert degrees_by_label(reloaded) == degrees_by_label(graph)

    with pytest.raises(ParseError, match="does not appear"):
        load_graph(tmp_path / "edges.txt", tmp_path / "attrs.txt")


def test_isolated_nodes_need_an_attribute_to_be_written(tmp_path: Path):
    graph = AttributedGraph.from_edges(
        np.array([[0, 1]]), ["a", "b", "c"], sparse.csr_matrix((3, 0)), []
    )
    with pytest.raises(GraphError, match="isolated"):
        write_graph(graph, tmp_path / "edges.txt", tmp_path / "attrs.txt")


@pytest.mark.parametrize("broken", ["edges", "attrs", "circles"])
def test_undecodable_bytes_name_the_file_and_line(tmp_path: Path, broken: str):
    files = {
        "edges": tmp_path / "edges.txt",
        "attrs": tmp_path / "attrs.txt",
        "circles": tmp_path / "circles.txt",
    }
    files["edges"].write_bytes(b"0 1\n1 2\n")
    files["attrs"].write_bytes(b"0 f\n1 f\n")
    files["circles"].write_bytes(b"c 0 1\nd 1 2\n")
    files[broken].write_bytes(files[broken].read_bytes() + b"2 \xff\xfe\n")

    with pytest.raises(ParseError) as error:
        graph = load_graph(files["edges"], files["attrs"])
        load_neighborhoods(files["circles"], graph)
    assert error.value.source == str(files[broken])
    assert error.value.line == 3
    assert "UTF-8" in str(error.value)


def test_dense_errors_count_comment_and_blank_lines():
    options = IngestOptions(attribute_format=AttributeFormat.dense)
    lines = ["# exported", "node,f,g", "", "a,1,0", "# note", "b,x,1"]
    with pytest.raises(ParseError) as error:
        parse_graph(["a b"], lines, options)
    assert error.value.line == 6

    with pytest.raises(ParseError, match="does not appear") as error:
        parse_graph(["a b"], ["node,f", "# c", "", "z,1"], options)
    assert error.value.line == 4


def test_invalid_graphs_are_rejected(g4: AttributedGraph):
    with pytest.raises(GraphError):
        AttributedGraph(
            g4.adjacency, g4.attributes * 2.0, g4.node_labels, g4.attribute_names
        )
    with pytest.raises(GraphError, match="unique"):
        AttributedGraph(
            g4.adjacency, g4.attributes, ("0", "1", "1", "3"), g4.attribute_names
        )


def test_boundary_of_g4(g4_core):
    assert g4_core.members.tolist() == [0, 1, 2]
    assert g4_core.boundary.tolist() == [3]
    assert g4_core.internal_edges.tolist() == [[0, 1], [0, 2], [1, 2]]
    assert g4_core.cross_edges.tolist() == [[2, 3]]


def test_boundary_of_whole_graph_is_empty(g4: AttributedGraph):
    nbhd = boundary_of(g4, range(4))
    assert nbhd.boundary_size == 0
    assert len(nbhd.cross_edges) == 0
    assert len(nbhd.internal_edges) == g4.edge_count


@pytest.mark.parametrize(
    "members,error",
    [
        ([3], DegenerateNeighborhoodError),
        ([], DegenerateNeighborhoodError),
        ([0, 7], UnknownNodeError),
    ],
)
def test_invalid_neighborhoods(g4: AttributedGraph, members, error):
    with pytest.raises(error):
        boundary_of(g4, members)


def test_connectivity_is_opt_in(g4: AttributedGraph):
    split = boundary_of(g4, [0, 3])
    assert not is_connected(split)
    with pytest.raises(DisconnectedNeighborhoodError):
        boundary_of(g4, [0, 3], require_connected=True)
    assert is_connected(boundary_of(g4, [0, 1, 2], require_connected=True))


def test_egonets(g4: AttributedGraph):
    ego = egonet_of(g4, 2)
    assert ego.name == "2"
    assert ego.members.tolist() == [0, 1, 2, 3]
    assert ego.boundary_size == 0

    member_sets = egonet_member_sets(g4)
    assert [item.name for item in member_sets] == ["0", "1", "2", "3"]
    assert member_sets[3].members == (2, 3)


def test_egonet_of_isolated_node():
    graph, _ = parse_graph(["a b"], ["z f 1"], IngestOptions(allow_isolated=True))
    with pytest.raises(DegenerateNeighborhoodError):
        egonet_of(graph, graph.index_of("z"))


def test_expected_edge_probability(g4: AttributedGraph):
    assert expected_edge_probability(g4, 0, 2) == pytest.approx(6 / 8)
    assert expected_edge_probability(g4, 2, 2) == pytest.approx(9 / 8)
    assert expected_edge_probability(g4, 2, 2, clamped=True) == 1.0
    with pytest.raises(UnknownNodeError):
        expected_edge_probability(g4, 0, 9)

    edgeless, _ = parse_graph(
        [], ["a f 1", "b f 1"], IngestOptions(allow_isolated=True)
    )
    with pytest.raises(NullModelError):
        expected_edge_probability(edgeless, 0, 1)


def test_load_neighborhoods(g4: AttributedGraph, data_dir: Path, tmp_path: Path):
    member_sets = load_neighborhoods(data_dir / "g4_mixed_circles.txt", g4)
    assert [item.name for item in member_sets] == ["core", "whole", "single"]
    assert member_sets[0].members == (0, 1, 2)

    circles = tmp_path / "circles.txt"
    circles.write_text("ok 0 1\nbad 0 nope\n")
    with pytest.raises(UnknownNodeError, match=":2:"):
        load_neighborhoods(circles, g4)
