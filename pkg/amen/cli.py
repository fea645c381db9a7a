import functools
import logging
import sys
import time
from pathlib import Path
from typing import Callable, Optional

import click
import numpy as np
from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler

from amen.entities import (
    AttributeFormat,
    Method,
    NormKind,
    OutputFormat,
    PerturbationConfig,
    PerturbationMode,
    SimilarityKind,
)
from amen.errors import AmenError, ConfigError
from amen.evaluation.analysis import analyze_distributions
from amen.evaluation.harness import run_experiment
from amen.evaluation.synthetic import generate_planted_focus
from amen.graph.core import AttributedGraph, MemberSet, boundary_of, egonet_member_sets
from amen.graph.io import load_graph, load_neighborhoods
from amen.reports import (
    EDGE_COLUMNS,
    FOCUS_COLUMNS,
    baseline_frame,
    build_manifest,
    concat_frames,
    edges_frame,
    focus_frame,
    manifest_path,
    ranking_frame,
    render_report,
    render_table,
    write_manifest,
    write_table,
    write_text,
)
from amen.scoring.focus import focus_l2, rank_neighborhoods
from amen.scoring.normality import exonerated_edges, relevance_vector
from amen.settings import DEFAULT_CONFIG_PATH, Config, IngestOptions, load_config

log = logging.getLogger(__name__)


def _setup_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )


def _fail(message: str) -> None:
    click.secho(f"Error: {message}", err=True, fg="red")
    sys.exit(2)


def handle_errors(command: Callable) -> Callable:
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except AmenError as e:
            _fail(str(e))

    return wrapper


def _choice(enum: type) -> click.Choice:
    return click.Choice([member.value for member in enum])


def _parse_grid(ctx, param, value: Optional[str]) -> Optional[list[float]]:
    """Accept ``start:stop:step``, a single intensity or a comma separated list."""
    if value is None:
        return None
    try:
        if ":" in value:
            start, stop, step = (float(part) for part in value.split(":"))
            if step <= 0 or stop < start:
                raise ValueError
            count = round((stop - start) / step)
            return [round(start + i * step, 10) for i in range(count + 1)]
        return [float(part) for part in value.split(",")]
    except ValueError:
        raise click.BadParameter(
            f"{value!r} is not a grid (start:stop:step or a comma list)"
        ) from None


def _parse_methods(ctx, param, value: Optional[str]) -> Optional[list[Method]]:
    if value is None:
        return None
    try:
        return [Method(name.strip()) for name in value.split(",") if name.strip()]
    except ValueError as e:
        choices = ", ".join(method.value for method in Method)
        raise click.BadParameter(f"{e}; choose from {choices}") from None


def _apply(options: list[Callable], command: Callable) -> Callable:
    for option in reversed(options):
        command = option(command)
    return command


def graph_options(command: Callable) -> Callable:
    existing_file = click.Path(exists=True, dir_okay=False, path_type=Path)
    return _apply(
        [
            click.option(
                "--graph",
                "graph_path",
                type=existing_file,
                help="Edge list, one 'u v' pair per line.",
            ),
            click.option(
                "--attrs",
                "attrs_path",
                type=existing_file,
                help="Attributes as 'node attribute [value]' lines or a dense CSV.",
            ),
            click.option("--attr-format", type=_choice(AttributeFormat)),
            click.option("--rescale/--no-rescale", default=None),
            click.option("--allow-isolated/--no-allow-isolated", default=None),
            click.option(
                "--neighborhoods",
                "neighborhoods_path",
                type=existing_file,
                help="Circles file, 'name member member ...' per line.",
            ),
            click.option("--egonets", is_flag=True, help="Score every node's egonet."),
            click.option("--similarity", type=_choice(SimilarityKind)),
        ],
        command,
    )


def output_options(command: Callable) -> Callable:
    return _apply(
        [
            click.option("--output", type=click.Path(path_type=Path)),
            click.option("--format", "fmt", type=_choice(OutputFormat), default="csv"),
            click.option("--precision", type=click.IntRange(1, 17)),
            click.option(
                "--manifest",
                "manifest_file",
                type=click.Path(dir_okay=False, path_type=Path),
                help="Run manifest path [default: <output>.manifest.json].",
            ),
        ],
        command,
    )


class Inputs:
    """Graph, neighborhoods and shared settings resolved from flags and config."""

    def __init__(self, ctx: click.Context, params: dict):
        self.ctx = ctx
        self.config: Config = ctx.obj["CONFIG"]
        self.params = params
        self.started = time.perf_counter()

    @property
    def similarity(self) -> SimilarityKind:
        return SimilarityKind(
            self.params["similarity"] or self.config.scoring.similarity
        )

    @property
    def precision(self) -> int:
        return self.params.get("precision") or self.config.scoring.precision

    @property
    def jobs(self) -> int:
        return self.params.get("jobs") or self.config.scoring.jobs

    @property
    def fmt(self) -> OutputFormat:
        return OutputFormat(self.params.get("fmt") or OutputFormat.csv)

    def graph(self) -> AttributedGraph:
        if self.params["graph_path"] is None:
            raise click.UsageError("--graph is required")
        overrides = {
            "attribute_format": self.params["attr_format"],
            "rescale": self.params["rescale"],
            "allow_isolated": self.params["allow_isolated"],
        }
        options = IngestOptions.model_validate(
            self.config.ingest.model_dump()
            | {key: value for key, value in overrides.items() if value is not None}
        )
        return load_graph(self.params["graph_path"], self.params["attrs_path"], options)

    def member_sets(self, graph: AttributedGraph) -> list[MemberSet]:
        if self.params["neighborhoods_path"] is not None:
            return load_neighborhoods(self.params["neighborhoods_path"], graph)
        if self.params["egonets"]:
            return egonet_member_sets(graph)
        raise click.UsageError("one of --neighborhoods or --egonets is required")

    def finish(
        self,
        output: Optional[Path],
        seed: Optional[int] = None,
        timings: Optional[dict[str, float]] = None,
    ) -> None:
        path = manifest_path(output, self.params.get("manifest_file"))
        if path is None:
            return
        inputs = [
            self.params[name]
            for name in ("graph_path", "attrs_path", "neighborhoods_path")
        ]
        manifest = build_manifest(
            self.ctx.command_path,
            self.ctx.params,
            inputs,
            seed,
            time.perf_counter() - self.started,
            timings,
        )
        write_manifest(manifest, path)


@click.group(help="amen - rank attributed neighborhoods by normality")
@click.option(
    "-c",
    "--config",
    default=str(DEFAULT_CONFIG_PATH),
    type=Path,
    show_default=True,
)
@click.option("-v", "--verbose", is_flag=True, help="Log at DEBUG level.")
@click.pass_context
def cli(ctx, config: Path, verbose: bool):
    _setup_logging(verbose)
    ctx.ensure_object(dict)
    try:
        ctx.obj["CONFIG"] = load_config(config.expanduser())
    except ConfigError as e:
        _fail(str(e))


@cli.command(help="Rank neighborhoods by normality, most anomalous first.")
@graph_options
@click.option("--norm", type=_choice(NormKind))
@click.option("--k", type=click.IntRange(min=1))
@click.option("--jobs", type=click.IntRange(min=1))
@output_options
@click.pass_context
@handle_errors
def rank(ctx, **params):
    inputs = Inputs(ctx, params)
    scoring = inputs.config.scoring
    norm = NormKind(params["norm"] or scoring.norm)
    k = params["k"] if params["k"] is not None else scoring.k
    if norm is NormKind.topk and k is None:
        raise click.UsageError("--norm topk needs --k")

    graph = inputs.graph()
    ranked = rank_neighborhoods(
        graph, inputs.member_sets(graph), inputs.similarity, norm, k, inputs.jobs
    )
    frame = ranking_frame(ranked, graph, inputs.precision)
    write_table(frame, params["output"], inputs.fmt, inputs.precision)

    failed = sum(item.error is not None for item in ranked)
    if failed:
        click.secho(
            f"{failed} neighborhood(s) could not be scored", err=True, fg="yellow"
        )
    inputs.finish(params["output"])


@cli.command(help="Show the attribute relevance vector of each neighborhood.")
@graph_options
@click.option("--top", type=click.IntRange(min=1), help="Keep the N most relevant.")
@click.option("--include-unsupported", is_flag=True)
@click.option(
    "--edges",
    "edges_path",
    type=click.Path(dir_okay=False, path_type=Path),
    help="Also write each cross-edge with its share of external separability.",
)
@output_options
@click.pass_context
@handle_errors
def focus(ctx, **params):
    inputs = Inputs(ctx, params)
    graph = inputs.graph()
    sim = inputs.similarity

    tables, edge_tables = [], []
    for item in inputs.member_sets(graph):
        try:
            nbhd = boundary_of(graph, item.members, name=item.name)
            rv = relevance_vector(graph, nbhd, sim)
        except AmenError as e:
            log.warning("neighborhood %s skipped: %s", item.name, e)
            continue
        if rv.columns.size == 0:
            click.secho(f"{item.name}: no focus found", err=True, fg="yellow")
        tables.append(
            focus_frame(
                item.name, rv, graph, params["include_unsupported"], params["top"]
            )
        )

        if params["edges_path"] is not None:
            weights = np.zeros(graph.attribute_count)
            for attribute, weight in focus_l2(rv).weights.items():
                weights[attribute] = weight
            edges = exonerated_edges(graph, nbhd, weights, sim)
            edge_tables.append(edges_frame(item.name, edges, graph))

    table = concat_frames(tables, FOCUS_COLUMNS)
    write_table(table, params["output"], inputs.fmt, inputs.precision)
    if params["edges_path"] is not None:
        edge_table = concat_frames(edge_tables, EDGE_COLUMNS)
        write_table(edge_table, params["edges_path"], inputs.fmt, inputs.precision)
    inputs.finish(params["output"])


@cli.command("eval", help="Average precision of each method under perturbation.")
@graph_options
@click.option("--mode", type=_choice(PerturbationMode))
@click.option("--grid", callback=_parse_grid, help="e.g. 0.05:0.50:0.05")
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), envvar="AMEN_SEED")
@click.option("--anomaly-frac", type=click.FloatRange(0.0, 1.0))
@click.option("--size-min", type=click.IntRange(min=2))
@click.option("--size-max", type=click.IntRange(min=2))
@click.option("--methods", callback=_parse_methods, help="Comma separated.")
@click.option("--synthetic", is_flag=True, help="Use a planted-focus benchmark.")
@click.option("--communities", type=click.IntRange(min=2))
@click.option("--jobs", type=click.IntRange(min=1))
@output_options
@click.pass_context
@handle_errors
def evaluate(ctx, **params):
    inputs = Inputs(ctx, params)
    evaluation = inputs.config.evaluation
    seed = params["seed"] if params["seed"] is not None else evaluation.seed
    anomaly_fraction = params["anomaly_frac"]
    try:
        perturbation = PerturbationConfig(
            mode=params["mode"] or evaluation.mode,
            grid=params["grid"] or evaluation.grid,
            anomaly_fraction=(
                evaluation.anomaly_fraction
                if anomaly_fraction is None
                else anomaly_fraction
            ),
            size_min=params["size_min"] or evaluation.size_min,
            size_max=params["size_max"] or evaluation.size_max,
            seed=seed,
        )
    except ValidationError as e:
        raise click.UsageError(str(e)) from None

    if params["synthetic"]:
        synthetic = inputs.config.synthetic
        if params["communities"] is not None:
            synthetic = synthetic.model_copy(
                update={"communities": params["communities"]}
            )
        rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
        graph, member_sets = generate_planted_focus(synthetic, rng)
    else:
        graph = inputs.graph()
        member_sets = inputs.member_sets(graph)

    report = run_experiment(
        graph,
        member_sets,
        perturbation,
        params["methods"] or evaluation.methods,
        inputs.similarity,
        inputs.jobs,
    )
    output = params["output"]
    write_text(render_report(report, inputs.fmt, inputs.precision), output)
    if output is not None:
        other = OutputFormat.csv
        if inputs.fmt is OutputFormat.csv:
            other = OutputFormat.json
        write_text(
            render_report(report, other, inputs.precision),
            output.with_suffix(f".{other}"),
        )
        click.secho(f"Report written to {output}", err=True, fg="green")
    inputs.finish(output, seed, report.runtimes)


@cli.command(help="Write distribution tables of normality and focus statistics.")
@graph_options
@click.option("--jobs", type=click.IntRange(min=1))
@click.option(
    "--output",
    type=click.Path(file_okay=False, path_type=Path),
    required=True,
    help="Directory that receives one file per table.",
)
@click.option("--format", "fmt", type=_choice(OutputFormat), default="csv")
@click.option("--precision", type=click.IntRange(1, 17))
@click.option("--manifest", "manifest_file", type=click.Path(path_type=Path))
@click.pass_context
@handle_errors
def analyze(ctx, **params):
    inputs = Inputs(ctx, params)
    graph = inputs.graph()
    tables = analyze_distributions(
        graph, inputs.member_sets(graph), inputs.similarity, inputs.jobs
    )

    output: Path = params["output"]
    output.mkdir(parents=True, exist_ok=True)
    for name, table in tables.items():
        write_text(
            render_table(table, inputs.fmt, inputs.precision),
            output / f"{name}.{inputs.fmt}",
        )
    click.secho(f"{len(tables)} tables written to {output}", err=True, fg="green")
    inputs.finish(output / "analysis")


@cli.command(help="Score neighborhoods with the structural and attributed baselines.")
@graph_options
@click.option("--modularity", is_flag=True, help="Add the modularity of {C, V - C}.")
@output_options
@click.pass_context
@handle_errors
def baselines(ctx, **params):
    inputs = Inputs(ctx, params)
    graph = inputs.graph()
    frame = baseline_frame(
        graph, inputs.member_sets(graph), inputs.similarity, params["modularity"]
    )
    write_table(frame, params["output"], inputs.fmt, inputs.precision)
    inputs.finish(params["output"])
