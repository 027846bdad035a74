"""
CohortForge - Stage Context

Loads the declarative resources once per command and records every
artifact a stage writes in the directory's manifest.
"""
from functools import cached_property
from pathlib import Path
from typing import Iterable, List, Optional

from loguru import logger

from app.core.config import PipelineConfig
from app.models.schemas import CodeMap, FeatureSchema, Lexicon, PatternSpec
from app.services.ingest.resources import (
    HeaderAlias, load_code_map, load_lexicon, load_patterns, load_section_headers
)
from app.services.ingest.schema_loader import load_schema, validate_references
from app.services.nlp.report2vector import ReportAnalyzer
from app.services.scores import SCORE_FEATURES
from app.utils.manifest import record_artifacts

# Out-dir artifact names
COHORT_FILE = "cohort.csv"
REPORT_VECTORS_FILE = "report_vectors.csv"
STRUCTURED_VECTORS_FILE = "structured_vectors.csv"
ENRICHED_FILE = "dataset_enriched.csv"
CONFLICTS_FILE = "conflicts.jsonl"
LABELS_FILE = "labels.csv"
SCORES_FILE = "scores.csv"
TRAIN_FILE = "train.csv"
TEST_FILE = "test.csv"
MODEL_FILE = "model.json"
PREDICTIONS_FILE = "predictions.csv"
EXPERIMENTS_FILE = "experiments.json"
EVAL_FILE = "eval.json"
ENRICHMENT_CSV = "enrichment.csv"
ENRICHMENT_JSON = "enrichment.json"


class StageContext:
    """Resolved configuration plus lazily loaded shared resources"""

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.config_hash = config.config_hash()

    @property
    def data_dir(self) -> Path:
        return Path(self.config.paths.data_dir)

    @property
    def out_dir(self) -> Path:
        return Path(self.config.paths.out_dir)

    @property
    def jobs(self) -> int:
        return self.config.jobs

    def out(self, name: str) -> Path:
        return self.out_dir / name

    @cached_property
    def schema(self) -> FeatureSchema:
        schema = load_schema(self.config.paths.schema_file)
        validate_references(schema, self.lexicon, self.patterns, self.code_map, SCORE_FEATURES)
        return schema

    @cached_property
    def lexicon(self) -> Lexicon:
        return load_lexicon(self.config.paths.lexicon_file)

    @cached_property
    def patterns(self) -> List[PatternSpec]:
        return load_patterns(self.config.paths.patterns_file)

    @cached_property
    def code_map(self) -> CodeMap:
        return load_code_map(self.config.paths.code_map_file)

    @cached_property
    def aliases(self) -> List[HeaderAlias]:
        return load_section_headers(self.config.paths.section_headers_file)

    @cached_property
    def analyzer(self) -> ReportAnalyzer:
        return ReportAnalyzer(
            self.lexicon,
            self.aliases,
            self.patterns,
            max_scope_tokens=self.config.negation.max_scope_tokens,
        )

    def record(
        self,
        stage: str,
        artifacts: Iterable[Path],
        directory: Optional[Path] = None,
        seed: Optional[int] = None
    ) -> None:
        artifacts = list(artifacts)
        directory = Path(directory or self.out_dir)
        record_artifacts(directory, stage, self.config_hash, seed, artifacts)
        logger.info(f"[{stage}] wrote {', '.join(Path(a).name for a in artifacts)}")
