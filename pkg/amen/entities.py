from enum import auto

from amen._compat import StrEnum
from typing import Any, Optional

from pydantic import BaseModel, Field, model_validator

DEFAULT_GRID: list[float] = [round(0.05 * step, 2) for step in range(1, 11)]


class SimilarityKind(StrEnum):
    dot = auto()
    delta = auto()
    binary_mixed = "binary-mixed"

    @property
    def internal(self) -> "SimilarityKind":
        if self is SimilarityKind.binary_mixed:
            return SimilarityKind.dot
        return self

    @property
    def external(self) -> "SimilarityKind":
        if self is SimilarityKind.binary_mixed:
            return SimilarityKind.delta
        return self


class NormKind(StrEnum):
    l1 = auto()
    l2 = auto()
    topk = auto()


class AttributeFormat(StrEnum):
    triples = auto()
    dense = auto()


class OutputFormat(StrEnum):
    csv = auto()
    json = auto()


class PerturbationMode(StrEnum):
    structure = auto()
    attribute = auto()
    both = auto()


class Method(StrEnum):
    amen_l1 = auto()
    amen_l2 = auto()
    avg_degree = auto()
    cut_ratio = auto()
    conductance = auto()
    flake_odf = auto()
    aw_ncut = auto()

    @property
    def lower_is_anomalous(self) -> bool:
        return self in (Method.amen_l1, Method.amen_l2, Method.avg_degree)


class FocusResult(BaseModel):
    """Focus weights w_C of one neighborhood and its normality score."""

    weights: dict[int, float]
    norm: NormKind
    k: Optional[int] = None
    score: float
    focus_attributes: list[int]
    anomalous: bool
    no_focus: bool = False


class RankedNeighborhood(BaseModel):
    neighborhood_id: str
    size: int
    boundary_size: Optional[int] = None
    focus: Optional[FocusResult] = None
    rank: int
    error: Optional[str] = None

    @property
    def score(self) -> float | None:
        return None if self.focus is None else self.focus.score


class PerturbationConfig(BaseModel):
    p: float = Field(0.0, ge=0.0, le=1.0)
    q: float = Field(0.0, ge=0.0, le=1.0)
    mode: PerturbationMode = PerturbationMode.structure
    grid: list[float] = DEFAULT_GRID
    anomaly_fraction: float = Field(0.05, ge=0.0, le=1.0)
    size_min: int = Field(30, ge=2)
    size_max: int = 100
    seed: int = Field(0, ge=0, lt=2**64)

    @model_validator(mode="after")
    def _check_ranges(self) -> "PerturbationConfig":
        if self.size_min > self.size_max:
            raise ValueError(f"empty size range [{self.size_min}, {self.size_max}]")
        if not self.grid:
            raise ValueError("intensity grid is empty")
        if any(not 0.0 <= value <= 1.0 for value in self.grid):
            raise ValueError("grid intensities must lie in [0, 1]")
        return self

    def rates(self, intensity: float) -> tuple[float, float]:
        """(p, q) applied at one grid intensity; the other rate stays as configured."""
        match self.mode:
            case PerturbationMode.structure:
                return intensity, self.q
            case PerturbationMode.attribute:
                return self.p, intensity
            case PerturbationMode.both:
                return intensity, intensity


class EvalRow(BaseModel):
    method: Method
    mode: PerturbationMode
    intensity: float
    ap: float
    seed: int


class EvalReport(BaseModel):
    config: PerturbationConfig
    methods: list[Method]
    eligible: int
    targets: list[str]
    rows: list[EvalRow]
    runtimes: dict[str, float] = Field(default_factory=dict, exclude=True)

    def ap(self, method: Method, intensity: float) -> float:
        for row in self.rows:
            if row.method == method and row.intensity == intensity:
                return row.ap
        raise KeyError((method, intensity))

    def curve(self, method: Method) -> list[float]:
        return [row.ap for row in self.rows if row.method == method]


class RunManifest(BaseModel):
    command: str
    flags: dict[str, Any]
    input_digests: dict[str, str]
    seed: Optional[int] = None
    version: str
    wall_clock: float
    timings: dict[str, float] = {}
