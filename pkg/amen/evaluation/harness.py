"""Perturbation experiments: plant anomalies, score, and measure average precision."""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

import numpy as np

from amen.entities import (
    EvalReport,
    EvalRow,
    Method,
    PerturbationConfig,
    PerturbationMode,
    SimilarityKind,
)
from amen.errors import AmenError, EvaluationError, PerturbationError
from amen.graph.core import AttributedGraph, MemberSet, Neighborhood, boundary_of
from amen.scoring import baselines
from amen.scoring.focus import focus_l1, focus_l2
from amen.scoring.normality import relevance_vector

log = logging.getLogger(__name__)

MAX_REWIRE_ATTEMPTS = 100
# intensities are keyed to the nearest millionth
INTENSITY_KEY_SCALE = 1_000_000

Edge = tuple[int, int]


def select_targets(
    graph: AttributedGraph,
    neighborhoods: Sequence[MemberSet],
    config: PerturbationConfig,
    rng: np.random.Generator,
) -> tuple[list[MemberSet], list[MemberSet]]:
    """Eligible neighborhoods (size in range, at least one outside node) and a
    seeded uniform sample of them to perturb."""
    eligible = [
        item
        for item in neighborhoods
        if config.size_min <= len(item.members) <= config.size_max
        and len(item.members) < graph.node_count
    ]
    if not eligible:
        raise EvaluationError(
            f"no neighborhood has size in [{config.size_min}, {config.size_max}]"
        )

    count = math.ceil(round(config.anomaly_fraction * len(eligible), 9))
    chosen = np.sort(rng.choice(len(eligible), size=count, replace=False))
    return eligible, [eligible[i] for i in chosen]


def _outside_nodes(graph: AttributedGraph, nbhd: Neighborhood) -> np.ndarray:
    outside = np.setdiff1d(np.arange(graph.node_count), nbhd.members)
    if outside.size == 0:
        raise PerturbationError(
            f"neighborhood {nbhd.name} covers the whole graph, nothing to rewire to"
        )
    return outside


def _rewire_into(
    edges: set[Edge],
    nbhd: Neighborhood,
    outside: np.ndarray,
    p: float,
    rng: np.random.Generator,
) -> None:
    flips = rng.random(len(nbhd.internal_edges)) < p
    for i, j in nbhd.internal_edges[flips].tolist():
        if (i, j) not in edges:
            continue
        edges.remove((i, j))
        kept = (i, j)[rng.integers(2)]
        for _ in range(MAX_REWIRE_ATTEMPTS):
            other = int(outside[rng.integers(outside.size)])
            pair = (min(kept, other), max(kept, other))
            if pair not in edges:
                edges.add(pair)
                break
        else:
            log.debug(
                "no free outside partner for node %d, edge (%d, %d) dropped",
                kept,
                i,
                j,
            )


def _inherit_into(
    row_source: np.ndarray,
    nbhd: Neighborhood,
    outside: np.ndarray,
    q: float,
    rng: np.random.Generator,
) -> None:
    replaced = nbhd.members[rng.random(nbhd.size) < q]
    row_source[replaced] = outside[rng.integers(outside.size, size=replaced.size)]


def _edge_set(graph: AttributedGraph) -> set[Edge]:
    return set(map(tuple, graph.edge_array().tolist()))


def _from_edge_set(graph: AttributedGraph, edges: set[Edge]) -> AttributedGraph:
    return graph.with_edges(np.array(sorted(edges), dtype=np.int64).reshape(-1, 2))


def perturb_structure(
    graph: AttributedGraph, nbhd: Neighborhood, p: float, rng: np.random.Generator
) -> AttributedGraph:
    """Rewire each internal edge of ``nbhd`` with probability ``p``.

    One endpoint is kept and the other replaced by a uniformly drawn node outside
    C. An edge whose kept endpoint finds no free outside partner within
    ``MAX_REWIRE_ATTEMPTS`` draws is dropped.
    """
    outside = _outside_nodes(graph, nbhd)
    if p == 0.0 or len(nbhd.internal_edges) == 0:
        return graph
    edges = _edge_set(graph)
    _rewire_into(edges, nbhd, outside, p, rng)
    return _from_edge_set(graph, edges)


def perturb_attributes(
    graph: AttributedGraph, nbhd: Neighborhood, q: float, rng: np.random.Generator
) -> AttributedGraph:
    """Replace each member's attribute row, with probability ``q``, by the row of
    a uniformly drawn outside node."""
    outside = _outside_nodes(graph, nbhd)
    if q == 0.0:
        return graph
    row_source = np.arange(graph.node_count)
    _inherit_into(row_source, nbhd, outside, q, rng)
    return graph.with_attributes(graph.attributes[row_source])


def perturb_targets(
    graph: AttributedGraph,
    targets: Sequence[MemberSet],
    p: float,
    q: float,
    rng: np.random.Generator,
) -> AttributedGraph:
    """Perturb all targets within one copy of ``graph``.

    Neighborhoods are taken from the unperturbed graph and inherited rows are
    copied from it as well.
    """
    edges = _edge_set(graph) if p > 0.0 else set()
    row_source = np.arange(graph.node_count)
    for target in targets:
        nbhd = boundary_of(graph, target.members, name=target.name)
        outside = _outside_nodes(graph, nbhd)
        if p > 0.0:
            _rewire_into(edges, nbhd, outside, p, rng)
        if q > 0.0:
            _inherit_into(row_source, nbhd, outside, q, rng)

    perturbed = graph
    if p > 0.0:
        perturbed = _from_edge_set(perturbed, edges)
    if q > 0.0:
        perturbed = perturbed.with_attributes(graph.attributes[row_source])
    return perturbed


def average_precision(
    scores: Sequence[float], anomaly_labels: Sequence[bool], lower_is_anomalous: bool
) -> float:
    """Mean precision at the rank of every positive, most anomalous first.

    Ties keep input order.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(anomaly_labels, dtype=bool)
    if scores.shape != labels.shape:
        raise EvaluationError(
            f"{scores.size} scores but {labels.size} anomaly labels"
        )
    if not labels.any():
        raise EvaluationError("average precision needs at least one positive label")

    order = np.argsort(scores if lower_is_anomalous else -scores, kind="stable")
    hits = labels[order]
    precision = np.cumsum(hits) / np.arange(1, hits.size + 1)
    return float(precision[hits].mean())


def score_neighborhood(
    graph: AttributedGraph, nbhd: Neighborhood, method: Method, sim: SimilarityKind
) -> float:
    match method:
        case Method.amen_l1:
            return focus_l1(relevance_vector(graph, nbhd, sim)).score
        case Method.amen_l2:
            return focus_l2(relevance_vector(graph, nbhd, sim)).score
        case Method.avg_degree:
            return baselines.average_degree(nbhd)
        case Method.cut_ratio:
            return baselines.cut_ratio(graph, nbhd)
        case Method.conductance:
            return baselines.conductance(graph, nbhd)
        case Method.flake_odf:
            return baselines.flake_odf(graph, nbhd)
        case Method.aw_ncut:
            return baselines.aw_ncut_uniform(graph, nbhd, sim)


def score_member_sets(
    graph: AttributedGraph,
    member_sets: Sequence[MemberSet],
    method: Method,
    sim: SimilarityKind,
    jobs: int = 1,
) -> np.ndarray:
    """Scores of one method, aligned with ``member_sets``.

    Neighborhoods that cannot be scored count as maximally anomalous.
    """
    worst = -math.inf if method.lower_is_anomalous else math.inf

    def score(item: MemberSet) -> float:
        try:
            nbhd = boundary_of(graph, item.members, name=item.name)
            return score_neighborhood(graph, nbhd, method, sim)
        except AmenError as e:
            log.warning("%s: neighborhood %s not scored: %s", method, item.name, e)
            return worst

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return np.array(list(pool.map(score, member_sets)), dtype=np.float64)
    return np.array([score(item) for item in member_sets], dtype=np.float64)


def _intensity_rng(
    config: PerturbationConfig, intensity: float
) -> np.random.Generator:
    """Random stream keyed on (seed, mode, intensity), whatever grid holds it."""
    mode_index = list(PerturbationMode).index(config.mode)
    key = round(intensity * INTENSITY_KEY_SCALE)
    return np.random.default_rng([config.seed, mode_index, key])


def run_experiment(
    graph: AttributedGraph,
    neighborhoods: Sequence[MemberSet],
    config: PerturbationConfig,
    methods: Sequence[Method],
    sim: SimilarityKind = SimilarityKind.dot,
    jobs: int = 1,
) -> EvalReport:
    """Average precision of every method at every grid intensity.

    Each intensity perturbs a fresh copy of the original graph with its own
    random stream, so the report does not depend on ``jobs``.
    """
    if not methods:
        raise EvaluationError("no scoring methods selected")
    eligible, targets = select_targets(
        graph, neighborhoods, config, np.random.default_rng([config.seed])
    )
    if not targets:
        raise EvaluationError(
            f"anomaly fraction {config.anomaly_fraction} selects no target among "
            f"{len(eligible)} eligible neighborhoods"
        )
    chosen = {id(target) for target in targets}
    labels = np.array([id(item) in chosen for item in eligible])
    log.info(
        "%d eligible neighborhoods, %d targets", len(eligible), len(targets)
    )

    def run(position: int) -> tuple[dict[Method, float], dict[Method, float]]:
        intensity = config.grid[position]
        p, q = config.rates(intensity)
        perturbed = perturb_targets(
            graph, targets, p, q, _intensity_rng(config, intensity)
        )
        precision: dict[Method, float] = {}
        timings: dict[Method, float] = {}
        for method in methods:
            started = time.perf_counter()
            scores = score_member_sets(perturbed, eligible, method, sim)
            timings[method] = time.perf_counter() - started
            precision[method] = average_precision(
                scores, labels, method.lower_is_anomalous
            )
        log.info("intensity %g (p=%g, q=%g) done", intensity, p, q)
        return precision, timings

    positions = range(len(config.grid))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, positions))
    else:
        results = [run(position) for position in positions]

    rows = [
        EvalRow(
            method=method,
            mode=config.mode,
            intensity=config.grid[position],
            ap=results[position][0][method],
            seed=config.seed,
        )
        for method in methods
        for position in positions
    ]
    runtimes = {
        str(method): sum(timings[method] for _, timings in results)
        for method in methods
    }
    return EvalReport(
        config=config,
        methods=list(methods),
        eligible=len(eligible),
        targets=[target.name for target in targets],
        rows=rows,
        runtimes=runtimes,
    )
