"""Distributions of normality and focus statistics over a set of neighborhoods."""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import NamedTuple, Optional, Sequence

import numpy as np
import pandas as pd

from amen.entities import SimilarityKind
from amen.errors import AmenError
from amen.graph.core import AttributedGraph, MemberSet, boundary_of
from amen.scoring.baselines import conductance
from amen.scoring.focus import focus_l1, focus_l2
from amen.scoring.normality import relevance_vector

log = logging.getLogger(__name__)

CONDUCTANCE_BIN_WIDTH = 0.1

TABLES = (
    "positive_terms",
    "focus_coverage",
    "normality_l1",
    "normality_l2",
    "rank_contribution",
    "normality_by_conductance",
)


class _Profile(NamedTuple):
    positive_x: np.ndarray
    coverage: float
    l1: float
    l2: float
    conductance: Optional[float]


def _profile(
    graph: AttributedGraph, item: MemberSet, sim: SimilarityKind
) -> Optional[_Profile]:
    try:
        nbhd = boundary_of(graph, item.members, name=item.name)
        rv = relevance_vector(graph, nbhd, sim)
        l1 = focus_l1(rv)
        l2 = focus_l2(rv)
    except AmenError as e:
        log.warning("neighborhood %s skipped: %s", item.name, e)
        return None

    coverage = 0.0
    if not l1.no_focus:
        selected = l1.focus_attributes[0]
        holders = graph.attributes[nbhd.members][:, selected].nnz
        coverage = holders / nbhd.size
    try:
        phi = conductance(graph, nbhd)
    except AmenError:
        phi = None

    x = rv.x
    return _Profile(
        positive_x=-np.sort(-x[x > 0]),
        coverage=coverage,
        l1=l1.score,
        l2=l2.score,
        conductance=phi,
    )


def cdf(values: Sequence[float], column: str) -> pd.DataFrame:
    counts = pd.Series(values, dtype=np.float64).value_counts().sort_index()
    return pd.DataFrame(
        {
            column: counts.index.to_numpy(),
            "cdf": counts.cumsum().to_numpy() / max(1, counts.sum()),
        }
    )


def ccdf(values: Sequence[float], column: str) -> pd.DataFrame:
    """Fraction of values greater than or equal to each distinct value."""
    counts = pd.Series(values, dtype=np.float64).value_counts().sort_index()
    at_least = counts.iloc[::-1].cumsum().iloc[::-1]
    return pd.DataFrame(
        {
            column: counts.index.to_numpy(),
            "ccdf": at_least.to_numpy() / max(1, counts.sum()),
        }
    )


def _rank_contribution(profiles: list[_Profile]) -> pd.DataFrame:
    depth = max((p.positive_x.size for p in profiles), default=0)
    rows = []
    for k in range(1, depth + 1):
        values = [p.positive_x[k - 1] for p in profiles if p.positive_x.size >= k]
        rows.append(
            {"k": k, "mean_x": float(np.mean(values)), "neighborhoods": len(values)}
        )
    return pd.DataFrame(rows, columns=["k", "mean_x", "neighborhoods"])


def _normality_by_conductance(profiles: list[_Profile]) -> pd.DataFrame:
    frame = pd.DataFrame(
        [(p.conductance, p.l2) for p in profiles if p.conductance is not None],
        columns=["conductance", "normality"],
    )
    if frame.empty:
        return pd.DataFrame(columns=["conductance_bin", "count", "q1", "median", "q3"])
    bins = np.minimum(
        np.floor(frame["conductance"] / CONDUCTANCE_BIN_WIDTH),
        round(1 / CONDUCTANCE_BIN_WIDTH) - 1,
    )
    frame["conductance_bin"] = (bins * CONDUCTANCE_BIN_WIDTH).round(6)
    summary = (
        frame.groupby("conductance_bin")["normality"]
        .agg(
            count="count",
            q1=lambda s: s.quantile(0.25),
            median="median",
            q3=lambda s: s.quantile(0.75),
        )
        .reset_index()
    )
    return summary


def analyze_distributions(
    graph: AttributedGraph,
    neighborhoods: Sequence[MemberSet],
    sim: SimilarityKind,
    jobs: int = 1,
) -> dict[str, pd.DataFrame]:
    """Plot-ready tables keyed by the names in ``TABLES``."""

    def profile(item: MemberSet) -> Optional[_Profile]:
        return _profile(graph, item, sim)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(profile, neighborhoods))
    else:
        results = [profile(item) for item in neighborhoods]
    profiles = [p for p in results if p is not None]

    return {
        "positive_terms": cdf([p.positive_x.size for p in profiles], "positive_terms"),
        "focus_coverage": ccdf([p.coverage for p in profiles], "coverage"),
        "normality_l1": ccdf([p.l1 for p in profiles], "normality"),
        "normality_l2": ccdf([p.l2 for p in profiles], "normality"),
        "rank_contribution": _rank_contribution(profiles),
        "normality_by_conductance": _normality_by_conductance(profiles),
    }
