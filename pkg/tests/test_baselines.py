import numpy as np
import pytest

from amen.entities import SimilarityKind
from amen.errors import GraphError, NullModelError, UndefinedScoreError
from amen.graph.core import boundary_of, egonet_of
from amen.graph.io import parse_graph
from amen.scoring.baselines import (
    NodeCategory,
    Partition,
    ScalarAttribute,
    assortativity_nominal,
    assortativity_scalar,
    average_degree,
    aw_ncut_uniform,
    conductance,
    cut_ratio,
    edge_similarity,
    flake_odf,
    modularity,
    partition_modularity,
)
from amen.settings import IngestOptions
from tests.oracles import (
    naive_aw_ncut,
    naive_baselines,
    naive_mixing,
    oracle_graph,
    random_graph,
    random_members,
)

SEEDS = range(8)
ORACLE_SEEDS = range(100)


def test_g4_core_baselines(g4, g4_core):
    assert average_degree(g4_core) == 2.0
    assert cut_ratio(g4, g4_core) == pytest.approx(1 / 3)
    assert conductance(g4, g4_core) == 1.0
    assert flake_odf(g4, g4_core) == 0.0
    assert aw_ncut_uniform(g4, g4_core, SimilarityKind.dot) == pytest.approx(8 / 7)


def test_g4_partition_modularity(g4, g4_core):
    assert partition_modularity(g4, g4_core) == pytest.approx(-0.03125)
    assert modularity(g4, Partition(np.array([1, 1, 1, 0]))) == pytest.approx(
        -0.03125
    )
    # one block holding everything has no modularity
    assert modularity(g4, Partition(np.zeros(4))) == pytest.approx(0.0)


def test_two_triangles_modularity():
    graph, _ = parse_graph(["a b", "b c", "a c", "d e", "e f", "d f", "c d"])
    assignment = np.array([0, 0, 0, 1, 1, 1])
    expected = 2 * (3 / 7 - (7 / 14) ** 2)
    assert modularity(graph, Partition(assignment)) == pytest.approx(expected)


@pytest.mark.parametrize("seed", ORACLE_SEEDS)
def test_mixing_matches_direct_summation(seed):
    graph = oracle_graph(seed)
    labels = np.random.default_rng(seed).integers(0, 4, graph.node_count)
    expected = naive_mixing(graph, labels)
    assert modularity(graph, Partition(labels)) == pytest.approx(expected, abs=1e-12)
    assert assortativity_nominal(graph, NodeCategory(labels)) == pytest.approx(
        expected, abs=1e-12
    )


@pytest.mark.parametrize("seed", ORACLE_SEEDS)
def test_scalar_assortativity_matches_direct_summation(seed):
    graph = oracle_graph(seed)
    x = np.random.default_rng(seed).random(graph.node_count)
    adjacency = graph.adjacency.toarray().astype(np.float64)
    k = adjacency.sum(axis=1)
    b = adjacency - np.outer(k, k) / adjacency.sum()
    expected = float(x @ b @ x) / adjacency.sum()
    assert assortativity_scalar(graph, ScalarAttribute(x)) == pytest.approx(
        expected, abs=1e-12
    )


def test_scalar_assortativity_of_a_constant_is_zero(g4):
    attribute = ScalarAttribute(np.full(4, 0.7))
    assert assortativity_scalar(g4, attribute) == pytest.approx(0.0, abs=1e-12)
    assert attribute.edge_end_mean(g4) == pytest.approx(0.7)


@pytest.mark.parametrize("seed", ORACLE_SEEDS)
def test_structural_baselines_match_direct_summation(seed):
    graph = oracle_graph(seed)
    members = random_members(seed + 500, graph, 7)
    nbhd = boundary_of(graph, members)
    expected = naive_baselines(graph, members)

    assert average_degree(nbhd) == pytest.approx(expected["avg_degree"])
    assert flake_odf(graph, nbhd) == pytest.approx(expected["flake_odf"])
    assert cut_ratio(graph, nbhd) == pytest.approx(expected["cut_ratio"])
    if "conductance" in expected:
        assert conductance(graph, nbhd) == pytest.approx(expected["conductance"])


@pytest.mark.parametrize("sim", list(SimilarityKind))
@pytest.mark.parametrize("seed", ORACLE_SEEDS)
def test_aw_ncut_matches_direct_summation(sim, seed):
    graph = oracle_graph(seed, binary=sim is SimilarityKind.binary_mixed)
    members = random_members(seed + 600, graph, 6)
    nbhd = boundary_of(graph, members)
    try:
        expected = naive_aw_ncut(graph, members, sim)
    except ZeroDivisionError:
        # a side with zero weighted volume
        with pytest.raises(UndefinedScoreError):
            aw_ncut_uniform(graph, nbhd, sim)
        return
    assert aw_ncut_uniform(graph, nbhd, sim) == pytest.approx(expected, rel=1e-9)


@pytest.mark.parametrize("seed", SEEDS)
def test_baseline_ranges(seed):
    graph = random_graph(seed, n=30, edge_probability=0.15)
    for ego in np.flatnonzero(graph.degrees)[:10]:
        nbhd = egonet_of(graph, int(ego))
        assert average_degree(nbhd) >= 0.0
        assert 0.0 <= flake_odf(graph, nbhd) <= 1.0
        assert -0.5 <= partition_modularity(graph, nbhd) <= 1.0
        if nbhd.size < graph.node_count:
            assert 0.0 <= cut_ratio(graph, nbhd) <= 1.0
        try:
            assert 0.0 <= conductance(graph, nbhd) <= 1.0
        except UndefinedScoreError:
            pass
        try:
            assert 0.0 <= aw_ncut_uniform(graph, nbhd, SimilarityKind.dot) <= 2.0
        except UndefinedScoreError:
            pass


def test_cut_scores_lie_in_the_unit_interval():
    for seed in ORACLE_SEEDS:
        graph = oracle_graph(seed)
        rng = np.random.default_rng(seed + 700)
        for _ in range(10):
            size = int(rng.integers(2, graph.node_count))
            members = rng.choice(graph.node_count, size=size, replace=False)
            nbhd = boundary_of(graph, members.tolist())
            assert 0.0 <= cut_ratio(graph, nbhd) <= 1.0
            assert 0.0 <= flake_odf(graph, nbhd) <= 1.0
            try:
                assert 0.0 <= conductance(graph, nbhd) <= 1.0
            except UndefinedScoreError:
                assert graph.degrees[nbhd.members].sum() in (0, graph.two_m)


def test_whole_graph_is_undefined_for_cut_scores(g4):
    whole = boundary_of(g4, range(4))
    with pytest.raises(UndefinedScoreError):
        cut_ratio(g4, whole)
    with pytest.raises(UndefinedScoreError):
        conductance(g4, whole)
    with pytest.raises(UndefinedScoreError):
        aw_ncut_uniform(g4, whole, SimilarityKind.dot)


def test_edge_similarity_is_uniform_over_attributes(g4b):
    pairs = np.array([[0, 1], [2, 3]])
    np.testing.assert_allclose(
        edge_similarity(g4b, pairs, SimilarityKind.dot), [1.0, 0.5]
    )
    np.testing.assert_allclose(
        edge_similarity(g4b, pairs, SimilarityKind.delta), [1.0, 0.5]
    )


def test_per_node_values_must_cover_every_node(g4):
    with pytest.raises(GraphError):
        modularity(g4, Partition(np.zeros(3)))
    with pytest.raises(GraphError):
        assortativity_scalar(g4, ScalarAttribute(np.zeros(5)))


def test_edgeless_graph_has_no_null_model():
    graph, _ = parse_graph([], ["a f", "b f"], IngestOptions(allow_isolated=True))
    with pytest.raises(NullModelError):
        modularity(graph, Partition(np.zeros(2)))
    with pytest.raises(NullModelError):
        aw_ncut_uniform(graph, boundary_of(graph, [0, 1]), SimilarityKind.dot)
