from pathlib import Path

import pytest
from click.testing import CliRunner

from amen.graph.core import AttributedGraph, Neighborhood, boundary_of
from amen.graph.io import load_graph

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


@pytest.fixture(scope="session")
def g4() -> AttributedGraph:
    return load_graph(DATA / "g4_edges.txt", DATA / "g4_attrs.txt")


@pytest.fixture(scope="session")
def g4b() -> AttributedGraph:
    return load_graph(DATA / "g4_edges.txt", DATA / "g4b_attrs.txt")


@pytest.fixture(scope="session")
def g4_core(g4: AttributedGraph) -> Neighborhood:
    return boundary_of(g4, [0, 1, 2], name="core")


@pytest.fixture(scope="session")
def g4b_core(g4b: AttributedGraph) -> Neighborhood:
    return boundary_of(g4b, [0, 1, 2], name="core")


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()


@pytest.fixture
def no_config(tmp_path: Path) -> list[str]:
    """Group options pointing at a config file that does not exist."""
    return ["-c", str(tmp_path / "missing.toml")]
