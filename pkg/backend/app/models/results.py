"""
CohortForge - Result, Generator and Model Types
"""
import datetime as dt
from enum import Enum
from typing import Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.models.schemas import Category, FeatureDef


class ScoreName(str, Enum):
    CHADS2VASC = "Chads2Vasc"
    HATCH = "Hatch"
    APPLE = "Apple"


SCORE_MAXIMA: Dict[ScoreName, int] = {
    ScoreName.CHADS2VASC: 9,
    ScoreName.HATCH: 7,
    ScoreName.APPLE: 5,
}


class ScoreResult(BaseModel):
    """Points of one clinical score plus how many components were observable"""
    score_name: ScoreName
    points: int
    known_components: int
    total_components: int
    prediction: Optional[bool] = None

    @model_validator(mode="after")
    def _check_range(self) -> "ScoreResult":
        if not 0 <= self.points <= SCORE_MAXIMA[self.score_name]:
            raise ValueError(f"{self.score_name.value} points out of range: {self.points}")
        return self


class ConfusionMatrix(BaseModel):
    model_config = ConfigDict(frozen=True)

    tp: int = Field(0, ge=0)
    tn: int = Field(0, ge=0)
    fp: int = Field(0, ge=0)
    fn: int = Field(0, ge=0)

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


class FeatureEnrichment(BaseModel):
    feature_id: str
    category: Category
    missing_pct_original: float
    missing_pct_enriched: float
    positive_pct_original: Optional[float] = None
    positive_pct_enriched: Optional[float] = None

    @property
    def missing_delta(self) -> float:
        return self.missing_pct_enriched - self.missing_pct_original

    @property
    def positive_delta(self) -> Optional[float]:
        if self.positive_pct_original is None or self.positive_pct_enriched is None:
            return None
        return self.positive_pct_enriched - self.positive_pct_original


class CategoryEnrichment(BaseModel):
    category: Category
    mean_missing_original: float
    mean_missing_enriched: float
    mean_positive_original: Optional[float] = None
    mean_positive_enriched: Optional[float] = None

    @property
    def missing_delta(self) -> float:
        return self.mean_missing_enriched - self.mean_missing_original


class EnrichmentReport(BaseModel):
    """Per-feature and per-category missingness / positive-rate comparison"""
    n_patients: int
    features: List[FeatureEnrichment] = Field(default_factory=list)
    categories: List[CategoryEnrichment] = Field(default_factory=list)

    def feature(self, feature_id: str) -> FeatureEnrichment:
        for item in self.features:
            if item.feature_id == feature_id:
                return item
        raise KeyError(feature_id)

    def category(self, category: Category) -> CategoryEnrichment:
        for item in self.categories:
            if item.category == category:
                return item
        raise KeyError(category)


class EncodedColumn(BaseModel):
    """One numeric input column of the baseline model"""
    name: str
    feature_id: str
    level: Optional[str] = None


class BaselineModel(BaseModel):
    """Regularized logistic model plus the training-split preprocessing it needs"""
    version: int = 1
    columns: List[EncodedColumn]
    weights: List[float]
    bias: float = 0.0
    imputation_means: List[float]
    scale_means: List[float]
    scale_stds: List[float]
    hyperparameters: Dict[str, float] = Field(default_factory=dict)
    final_loss: Optional[float] = None
    intercept_only: bool = False
    deviance_p_value: Optional[float] = None

    @model_validator(mode="after")
    def _check_lengths(self) -> "BaselineModel":
        n = len(self.columns)
        for name in ("weights", "imputation_means", "scale_means", "scale_stds"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} has {len(getattr(self, name))} entries, expected {n}")
        return self


# Table-shape presets: (patients, positive rate)
GEN_PROFILES: Dict[str, Tuple[int, float]] = {
    "train-silver": (1023, 0.654),
    "train-gold": (541, 0.6617),
    "test": (278, 0.6403),
}


def _default_missingness() -> Dict[Category, float]:
    return {
        Category.DEMOGRAPHIC: 0.3,
        Category.HISTORY: 0.5,
        Category.LAB: 0.5,
        Category.PROCEDURE: 0.6,
        Category.TREATMENT: 0.8,
    }


class GenConfig(BaseModel):
    """Knobs of the synthetic corpus generator"""
    n_patients: int = Field(1023, gt=0)
    positive_rate: float = 0.654
    structured_missingness: Dict[Category, float] = Field(default_factory=_default_missingness)
    feature_missingness: Dict[str, float] = Field(default_factory=dict)
    report_coverage: float = 0.8
    coverage_overrides: Dict[str, float] = Field(default_factory=dict)
    negation_rate: float = 0.5
    report_dropout_rate: float = 0.0
    excluded_rate: float = 0.05
    distractor_rate: float = 0.06
    gold_fraction: float = 541 / 1023
    signal_strength: float = 0.0
    seed: int = 42
    onset_start: dt.date = dt.date(2016, 1, 1)
    onset_end: dt.date = dt.date(2018, 6, 30)

    @field_validator(
        "positive_rate", "report_coverage", "negation_rate", "report_dropout_rate",
        "excluded_rate", "distractor_rate", "gold_fraction", "signal_strength"
    )
    @classmethod
    def _probability(cls, value: float) -> float:
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"probability out of [0, 1]: {value}")
        return value

    @field_validator("structured_missingness", "feature_missingness", "coverage_overrides")
    @classmethod
    def _probabilities(cls, value: Dict) -> Dict:
        for key, p in value.items():
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probability for {key} out of [0, 1]: {p}")
        return value

    @classmethod
    def for_profile(cls, profile: str, **overrides) -> "GenConfig":
        n_patients, positive_rate = GEN_PROFILES[profile]
        return cls(n_patients=n_patients, positive_rate=positive_rate, **overrides)

    def missingness_for(self, feature: FeatureDef) -> float:
        if feature.id in self.feature_missingness:
            return self.feature_missingness[feature.id]
        return self.structured_missingness.get(feature.category, 0.0)

    def coverage_for(self, feature_id: str) -> float:
        return self.coverage_overrides.get(feature_id, self.report_coverage)

    def zero_noise(self) -> "GenConfig":
        """Same corpus shape with every noise knob switched off"""
        return self.model_copy(update={
            "structured_missingness": {c: 0.0 for c in self.structured_missingness},
            "feature_missingness": {},
            "report_coverage": 1.0,
            "coverage_overrides": {},
            "negation_rate": 1.0,
            "report_dropout_rate": 0.0,
        })


class CohortRole(str, Enum):
    """What the generator planted for a patient with respect to AF onset"""
    ONSET = "onset"
    PRIOR_HISTORY = "prior_history"
    NO_TEXTUAL_EVIDENCE = "no_textual_evidence"
    BEFORE_STUDY = "before_study"
    NO_AF_CODE = "no_af_code"


class ReportFact(BaseModel):
    report_id: str
    date: dt.date
    kind: str
    facts: List[str] = Field(default_factory=list)
    dropped: bool = False


class GroundTruth(BaseModel):
    """Planted truth for one synthetic patient"""
    patient_id: str
    role: CohortRole
    onset_date: Optional[dt.date] = None
    label: Optional[int] = None
    features: Dict[str, Optional[Union[float, str]]] = Field(default_factory=dict)
    signal_planted: bool = False
    gold: bool = False
    reports: List[ReportFact] = Field(default_factory=list)

    @property
    def in_cohort(self) -> bool:
        return self.role == CohortRole.ONSET
