"""
CohortForge - Configuration

Process settings come from the environment (pydantic-settings); the run
configuration comes from a TOML file validated with pydantic.
"""
import datetime as dt
import hashlib
import json

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Optional

from pydantic import BaseModel, Field, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from app.core.exceptions import InvalidConfig, MissingFile
from app.models.results import GenConfig
from app.models.schemas import MergePolicy, ProgressionWindow


class Settings(BaseSettings):
    """Application settings loaded from environment variables"""

    # Application
    APP_NAME: str = "CohortForge"
    APP_VERSION: str = "0.1.0"
    DEBUG: bool = False
    LOG_LEVEL: str = "INFO"

    # Pipeline defaults
    COHORTFORGE_CONFIG: str = "config/pipeline.toml"
    COHORTFORGE_JOBS: int = 1

    model_config = SettingsConfigDict(env_file=".env", case_sensitive=True)


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance"""
    return Settings()


RESOURCE_FIELDS = (
    "schema_file", "lexicon_file", "patterns_file", "code_map_file", "section_headers_file"
)


class PathsConfig(BaseModel):
    schema_file: Path = Path("schema.csv")
    lexicon_file: Path = Path("lexicon.tsv")
    patterns_file: Path = Path("patterns.tsv")
    code_map_file: Path = Path("code_map.tsv")
    section_headers_file: Path = Path("section_headers.tsv")
    data_dir: Path = Path("../data/synthetic")
    out_dir: Path = Path("../data/out")

    def resolved(self, base: Path) -> "PathsConfig":
        """Return a copy with relative paths anchored at `base`"""
        updates = {}
        for name, value in self.model_dump().items():
            path = Path(value)
            updates[name] = path if path.is_absolute() else (base / path).resolve()
        return self.model_copy(update=updates)


class CohortConfig(BaseModel):
    verification_window_days: int = Field(7, ge=0)
    study_start: Optional[dt.date] = dt.date(2015, 1, 1)
    study_end: Optional[dt.date] = None

    @model_validator(mode="after")
    def _check_bounds(self) -> "CohortConfig":
        if self.study_start and self.study_end and self.study_end < self.study_start:
            raise ValueError("cohort.study_end precedes cohort.study_start")
        return self


class StructuredConfig(BaseModel):
    lab_lookback_days: Optional[int] = Field(None, gt=0)


class NegationConfig(BaseModel):
    max_scope_tokens: int = Field(5, ge=0)


class ScoresConfig(BaseModel):
    threshold: int = Field(2, ge=0)


class BaselineConfig(BaseModel):
    l2: float = Field(0.01, ge=0.0)
    learning_rate: float = Field(0.1, gt=0.0)
    epochs: int = Field(500, gt=0)
    seed: int = 42
    train_fraction: float = Field(0.73, gt=0.0, lt=1.0)
    # Likelihood-ratio gate against the intercept-only model
    significance: Optional[float] = Field(0.001, gt=0.0, lt=1.0)


class PipelineConfig(BaseModel):
    """Validated run configuration shared by every CLI stage"""
    jobs: int = Field(1, ge=1)
    paths: PathsConfig = Field(default_factory=PathsConfig)
    merge: MergePolicy = Field(default_factory=MergePolicy)
    window: ProgressionWindow = Field(default_factory=ProgressionWindow)
    cohort: CohortConfig = Field(default_factory=CohortConfig)
    structured: StructuredConfig = Field(default_factory=StructuredConfig)
    negation: NegationConfig = Field(default_factory=NegationConfig)
    scores: ScoresConfig = Field(default_factory=ScoresConfig)
    baseline: BaselineConfig = Field(default_factory=BaselineConfig)
    synth: GenConfig = Field(default_factory=GenConfig)

    def config_hash(self) -> str:
        """
        Identify the effective configuration.

        Resource files enter the hash through their content, data/out
        directories and `jobs` do not enter it at all, so the hash is
        stable across machines and parallelism settings.
        """
        payload = self.model_dump(mode="json", exclude={"jobs", "paths"})
        payload["resources"] = {
            name: _file_digest(getattr(self.paths, name)) for name in RESOURCE_FIELDS
        }
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def _file_digest(path: Path) -> Optional[str]:
    try:
        return hashlib.sha256(Path(path).read_bytes()).hexdigest()
    except OSError:
        return None


def _validate(data: Dict[str, Any], source: str) -> PipelineConfig:
    try:
        return PipelineConfig.model_validate(data)
    except ValidationError as e:
        raise InvalidConfig(f"invalid configuration: {e.errors()[0]['msg']}", file=source) from e


def _check_resources(config: PipelineConfig) -> None:
    for name in RESOURCE_FIELDS:
        path = getattr(config.paths, name)
        if not Path(path).is_file():
            raise MissingFile(f"{name} not found: {path}")


def load_config(path: Optional[Path] = None) -> PipelineConfig:
    """
    Load and validate a pipeline TOML file

    Args:
        path: Config file; defaults to COHORTFORGE_CONFIG

    Returns:
        PipelineConfig with resolved absolute paths
    """
    settings = get_settings()
    path = Path(path or settings.COHORTFORGE_CONFIG)
    if not path.is_file():
        raise MissingFile(f"config file not found: {path}")

    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as e:
        raise InvalidConfig(f"config is not valid TOML: {e}", file=str(path)) from e

    data.setdefault("jobs", settings.COHORTFORGE_JOBS)
    config = _validate(data, str(path))
    config = config.model_copy(update={"paths": config.paths.resolved(path.parent.resolve())})
    _check_resources(config)
    return config


def apply_overrides(config: PipelineConfig, overrides: Dict[str, Any]) -> PipelineConfig:
    """
    Re-validate the config with section overrides (e.g. from CLI flags).

    `overrides` maps a section name to a dict of field values, or a
    top-level field to its value. None values are ignored.
    """
    data = config.model_dump()
    for key, value in overrides.items():
        if isinstance(value, dict):
            section = {k: v for k, v in value.items() if v is not None}
            data[key] = {**data.get(key, {}), **section}
        elif value is not None:
            data[key] = value
    return _validate(data, "<overrides>")
