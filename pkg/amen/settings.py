from amen._compat import tomllib
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, Field, ValidationError, model_validator

from amen.entities import (
    DEFAULT_GRID,
    AttributeFormat,
    Method,
    NormKind,
    PerturbationMode,
    SimilarityKind,
)
from amen.errors import ConfigError

DEFAULT_CONFIG_PATH = Path("~/.config/amen/config.toml")


class IngestOptions(BaseModel):
    rescale: bool = False
    allow_isolated: bool = False
    attribute_format: AttributeFormat = AttributeFormat.triples


class ScoringConfig(BaseModel):
    similarity: SimilarityKind = SimilarityKind.dot
    norm: NormKind = NormKind.l2
    k: Optional[int] = Field(None, ge=1)
    jobs: int = Field(1, ge=1)
    precision: int = Field(6, ge=1, le=17)


class EvaluationConfig(BaseModel):
    mode: PerturbationMode = PerturbationMode.attribute
    grid: list[float] = DEFAULT_GRID
    anomaly_fraction: float = Field(0.05, ge=0.0, le=1.0)
    size_min: int = 30
    size_max: int = 100
    methods: list[Method] = list(Method)
    seed: int = Field(0, ge=0)


class SyntheticConfig(BaseModel):
    """Parameters of the planted-focus generator."""

    communities: int = Field(100, ge=2)
    size_min: int = Field(30, ge=2)
    size_max: int = Field(100, ge=2)
    p_in: float = Field(0.3, gt=0.0, le=1.0)
    p_out: float = Field(0.0005, ge=0.0, le=1.0)
    focus_min: int = Field(3, ge=1)
    focus_max: int = Field(5, ge=1)
    noise: float = Field(0.1, ge=0.0, le=1.0)
    background_attributes: int = Field(200, ge=0)
    background_density: float = Field(0.02, ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _check_ranges(self) -> "SyntheticConfig":
        if self.size_min > self.size_max:
            raise ValueError(
                f"empty community size range [{self.size_min}, {self.size_max}]"
            )
        if self.focus_min > self.focus_max:
            raise ValueError(
                f"empty focus count range [{self.focus_min}, {self.focus_max}]"
            )
        return self


class Config(BaseModel):
    ingest: IngestOptions = IngestOptions()
    scoring: ScoringConfig = ScoringConfig()
    evaluation: EvaluationConfig = EvaluationConfig()
    synthetic: SyntheticConfig = SyntheticConfig()


def load_config(config_file: Path) -> Config:
    if not (config_file.exists() and config_file.is_file()):
        return Config()

    try:
        with open(config_file, "rb") as f:
            config_toml = tomllib.load(f)
        return Config.model_validate(config_toml)
    except (tomllib.TOMLDecodeError, UnicodeDecodeError, ValidationError) as e:
        raise ConfigError(f"{config_file}: {e}") from e
