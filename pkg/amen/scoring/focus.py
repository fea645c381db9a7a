import logging
from concurrent.futures import ThreadPoolExecutor
from typing import NamedTuple, Optional, Sequence

import numpy as np

from amen.entities import FocusResult, NormKind, RankedNeighborhood, SimilarityKind
from amen.errors import AmenError, FocusError
from amen.graph.core import AttributedGraph, MemberSet, Neighborhood, boundary_of
from amen.scoring.normality import RelevanceVector, relevance_vector

log = logging.getLogger(__name__)

NO_FOCUS_SCORE = -1.0


def _ranked_columns(rv: RelevanceVector) -> np.ndarray:
    """Positions into rv.columns by x descending, ties by lowest attribute id."""
    return np.lexsort((rv.columns, -rv.x))


def _check(rv: RelevanceVector) -> None:
    if rv.attribute_count == 0:
        raise FocusError("relevance vector is empty, the graph has no attributes")


def _no_focus(norm: NormKind, k: Optional[int] = None) -> FocusResult:
    return FocusResult(
        weights={},
        norm=norm,
        k=k,
        score=NO_FOCUS_SCORE,
        focus_attributes=[],
        anomalous=True,
        no_focus=True,
    )


def _result(
    rv: RelevanceVector,
    positions: np.ndarray,
    weights: np.ndarray,
    score: float,
    norm: NormKind,
    k: Optional[int] = None,
) -> FocusResult:
    # positions arrive ordered by x descending, hence by weight descending
    score = float(score)
    attributes = [int(rv.columns[p]) for p in positions]
    return FocusResult(
        weights={f: float(w) for f, w in zip(attributes, weights)},
        norm=norm,
        k=k,
        score=score,
        focus_attributes=attributes,
        anomalous=score < 0,
    )


def focus_l1(rv: RelevanceVector) -> FocusResult:
    _check(rv)
    if rv.columns.size == 0:
        return _no_focus(NormKind.l1)
    best = _ranked_columns(rv)[:1]
    return _result(rv, best, np.ones(1), rv.x[best[0]], NormKind.l1)


def focus_l2(rv: RelevanceVector) -> FocusResult:
    _check(rv)
    x = rv.x
    order = _ranked_columns(rv)
    positive = order[x[order] > 0]
    if positive.size == 0:
        return focus_l1(rv).model_copy(update={"norm": NormKind.l2})

    length = float(np.linalg.norm(x[positive]))
    return _result(rv, positive, x[positive] / length, length, NormKind.l2)


def focus_topk(rv: RelevanceVector, k: int) -> FocusResult:
    _check(rv)
    if not 1 <= k <= rv.attribute_count:
        raise FocusError(f"k={k} outside [1, {rv.attribute_count}]")
    if rv.columns.size == 0:
        return _no_focus(NormKind.topk, k)
    if k > rv.columns.size:
        log.warning(
            "k=%d exceeds the %d supported attributes, using all of them",
            k,
            rv.columns.size,
        )

    chosen = _ranked_columns(rv)[:k]
    weights = np.full(chosen.size, 1.0 / chosen.size)
    return _result(rv, chosen, weights, rv.x[chosen].mean(), NormKind.topk, k)


def focus(rv: RelevanceVector, norm: NormKind, k: Optional[int] = None) -> FocusResult:
    match norm:
        case NormKind.l1:
            return focus_l1(rv)
        case NormKind.l2:
            return focus_l2(rv)
        case NormKind.topk:
            if k is None:
                raise FocusError("top-k focus needs k")
            return focus_topk(rv, k)


class _Scored(NamedTuple):
    name: str
    size: int
    boundary_size: Optional[int]
    focus: Optional[FocusResult]
    error: Optional[str]


def rank_neighborhoods(
    graph: AttributedGraph,
    neighborhoods: Sequence[Neighborhood | MemberSet],
    sim: SimilarityKind,
    norm: NormKind,
    k: Optional[int] = None,
    jobs: int = 1,
) -> list[RankedNeighborhood]:
    """Rank neighborhoods by normality, lowest (most anomalous) first.

    Neighborhoods that cannot be scored are kept as flagged entries after all
    scored ones.
    """

    def score(item: Neighborhood | MemberSet) -> _Scored:
        try:
            nbhd = (
                item
                if isinstance(item, Neighborhood)
                else boundary_of(graph, item.members, name=item.name)
            )
            result = focus(relevance_vector(graph, nbhd, sim), norm, k)
            return _Scored(nbhd.name, nbhd.size, nbhd.boundary_size, result, None)
        except AmenError as e:
            log.warning("neighborhood %s not scored: %s", item.name, e)
            size = item.size if isinstance(item, Neighborhood) else len(item.members)
            return _Scored(item.name, size, None, None, str(e))

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            scored = list(pool.map(score, neighborhoods))
    else:
        scored = [score(item) for item in neighborhoods]

    ordered = sorted(
        (s for s in scored if s.focus is not None),
        key=lambda s: (s.focus.score, s.name),
    )
    ordered += sorted((s for s in scored if s.focus is None), key=lambda s: s.name)
    return [
        RankedNeighborhood(
            neighborhood_id=s.name,
            size=s.size,
            boundary_size=s.boundary_size,
            focus=s.focus,
            rank=rank,
            error=s.error,
        )
        for rank, s in enumerate(ordered, start=1)
    ]
