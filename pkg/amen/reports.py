"""Tabular and JSON output for every command, plus run manifests."""

import hashlib
import json
import math
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import click
import numpy as np
import pandas as pd

from amen import __version__
from amen.entities import (
    EvalReport,
    OutputFormat,
    RankedNeighborhood,
    RunManifest,
    SimilarityKind,
)
from amen.errors import AmenError
from amen.graph.core import AttributedGraph, MemberSet, boundary_of
from amen.scoring import baselines
from amen.scoring.normality import CrossEdge, RelevanceVector

RANKING_COLUMNS = [
    "neighborhood_id",
    "size",
    "boundary_size",
    "normality",
    "anomalous_flag",
    "focus_attr_ids",
    "focus_weights",
    "error",
]
BASELINE_COLUMNS = [
    "neighborhood_id",
    "avg_degree",
    "cut_ratio",
    "conductance",
    "flake_odf",
    "aw_ncut",
]
LIST_SEPARATOR = ";"


def format_float(value: float, precision: int) -> str:
    return f"{value:.{precision}g}"


def ranking_frame(
    ranked: Sequence[RankedNeighborhood], graph: AttributedGraph, precision: int
) -> pd.DataFrame:
    rows = []
    for item in ranked:
        focus = item.focus
        rows.append(
            {
                "neighborhood_id": item.neighborhood_id,
                "size": item.size,
                "boundary_size": item.boundary_size,
                "normality": None if focus is None else focus.score,
                "anomalous_flag": None if focus is None else focus.anomalous,
                "focus_attr_ids": ""
                if focus is None
                else LIST_SEPARATOR.join(
                    graph.attribute_names[f] for f in focus.focus_attributes
                ),
                "focus_weights": ""
                if focus is None
                else LIST_SEPARATOR.join(
                    format_float(focus.weights[f], precision)
                    for f in focus.focus_attributes
                ),
                "error": item.error or "",
            }
        )
    frame = pd.DataFrame(rows, columns=RANKING_COLUMNS)
    frame["boundary_size"] = frame["boundary_size"].astype("Int64")
    return frame


FOCUS_COLUMNS = [
    "neighborhood_id",
    "attribute_id",
    "x",
    "x_hat_i",
    "x_hat_e",
    "supported",
]


def focus_frame(
    name: str,
    rv: RelevanceVector,
    graph: AttributedGraph,
    include_unsupported: bool = False,
    top: Optional[int] = None,
) -> pd.DataFrame:
    """Attributes of one neighborhood ordered by relevance x, highest first."""
    if include_unsupported:
        attributes = np.arange(rv.attribute_count)
        x = rv.dense("x")
        x_hat_i = rv.dense("x_hat_i")
        x_hat_e = rv.dense("x_hat_e")
        supported = rv.support_mask
    else:
        attributes = rv.columns
        x, x_hat_i, x_hat_e = rv.x, rv.x_hat_i, rv.x_hat_e
        supported = np.ones(attributes.size, dtype=bool)

    order = np.lexsort((attributes, -x))
    if top is not None:
        order = order[:top]
    return pd.DataFrame(
        {
            "neighborhood_id": name,
            "attribute_id": [graph.attribute_names[f] for f in attributes[order]],
            "x": x[order],
            "x_hat_i": x_hat_i[order],
            "x_hat_e": x_hat_e[order],
            "supported": supported[order],
        }
    )


EDGE_COLUMNS = [
    "neighborhood_id",
    "internal",
    "boundary",
    "penalty",
    "similarity",
    "contribution",
    "reason",
]


def edges_frame(
    name: str, edges: Iterable[CrossEdge], graph: AttributedGraph
) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                "neighborhood_id": name,
                "internal": graph.label_of(edge.internal),
                "boundary": graph.label_of(edge.boundary),
                "penalty": edge.penalty,
                "similarity": edge.similarity,
                "contribution": edge.contribution,
                "reason": str(edge.reason),
            }
            for edge in edges
        ],
        columns=EDGE_COLUMNS,
    )


def baseline_frame(
    graph: AttributedGraph,
    member_sets: Sequence[MemberSet],
    sim: SimilarityKind,
    with_modularity: bool = False,
) -> pd.DataFrame:
    """One row of baseline scores per neighborhood; failures land in ``error``."""
    scorers = {
        "avg_degree": lambda nbhd: baselines.average_degree(nbhd),
        "cut_ratio": lambda nbhd: baselines.cut_ratio(graph, nbhd),
        "conductance": lambda nbhd: baselines.conductance(graph, nbhd),
        "flake_odf": lambda nbhd: baselines.flake_odf(graph, nbhd),
        "aw_ncut": lambda nbhd: baselines.aw_ncut_uniform(graph, nbhd, sim),
    }
    if with_modularity:
        scorers["modularity"] = lambda nbhd: baselines.partition_modularity(
            graph, nbhd
        )

    rows = []
    for item in member_sets:
        row: dict[str, Any] = {"neighborhood_id": item.name}
        errors = []
        try:
            nbhd = boundary_of(graph, item.members, name=item.name)
        except AmenError as e:
            rows.append({**row, "error": str(e)})
            continue
        for column, scorer in scorers.items():
            try:
                row[column] = scorer(nbhd)
            except AmenError as e:
                row[column] = None
                errors.append(f"{column}: {e}")
        rows.append({**row, "error": LIST_SEPARATOR.join(errors)})

    columns = BASELINE_COLUMNS + (["modularity"] if with_modularity else [])
    frame = pd.DataFrame(rows, columns=columns + ["error"])
    frame[columns[1:]] = frame[columns[1:]].astype(np.float64)
    frame["error"] = frame["error"].fillna("")
    return frame


def concat_frames(
    frames: Sequence[pd.DataFrame], columns: list[str]
) -> pd.DataFrame:
    if not frames:
        return pd.DataFrame(columns=columns)
    return pd.concat(frames, ignore_index=True)


def eval_frame(report: EvalReport) -> pd.DataFrame:
    return pd.DataFrame(
        [row.model_dump(mode="json") for row in report.rows],
        columns=["method", "mode", "intensity", "ap", "seed"],
    )


def _json_value(value: Any, precision: int) -> Any:
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        if math.isnan(value):
            return None
        return float(format_float(value, precision))
    if value is pd.NA:
        return None
    return value


def render_table(frame: pd.DataFrame, fmt: OutputFormat, precision: int) -> str:
    match fmt:
        case OutputFormat.csv:
            return frame.to_csv(
                index=False,
                float_format=f"%.{precision}g",
                na_rep="",
                lineterminator="\n",
            )
        case OutputFormat.json:
            records = [
                {key: _json_value(value, precision) for key, value in record.items()}
                for record in frame.to_dict(orient="records")
            ]
            return json.dumps(records, indent=2) + "\n"


def write_text(text: str, output: Optional[Path]) -> None:
    if output is None:
        click.echo(text, nl=False)
    else:
        output.write_text(text)


def write_table(
    frame: pd.DataFrame, output: Optional[Path], fmt: OutputFormat, precision: int
) -> None:
    write_text(render_table(frame, fmt, precision), output)


def render_report(report: EvalReport, fmt: OutputFormat, precision: int) -> str:
    match fmt:
        case OutputFormat.csv:
            return render_table(eval_frame(report), fmt, precision)
        case OutputFormat.json:
            return report.model_dump_json(indent=2) + "\n"


def file_digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def build_manifest(
    command: str,
    flags: dict[str, Any],
    inputs: Iterable[Optional[Path]],
    seed: Optional[int],
    wall_clock: float,
    timings: Optional[dict[str, float]] = None,
) -> RunManifest:
    return RunManifest(
        command=command,
        flags=flags,
        input_digests={
            str(path): file_digest(path) for path in inputs if path is not None
        },
        seed=seed,
        version=__version__,
        wall_clock=wall_clock,
        timings=timings or {},
    )


def manifest_path(
    output: Optional[Path], explicit: Optional[Path]
) -> Optional[Path]:
    if explicit is not None:
        return explicit
    if output is None:
        return None
    return output.with_name(output.name + ".manifest.json")


def write_manifest(manifest: RunManifest, path: Path) -> None:
    path.write_text(manifest.model_dump_json(indent=2) + "\n")
