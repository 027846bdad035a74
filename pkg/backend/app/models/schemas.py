"""
CohortForge - Data Models
"""
import re
import datetime as dt
from enum import Enum
from typing import Any, ClassVar, Dict, List, Optional, Tuple, Union

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator, model_validator


class Category(str, Enum):
    """Feature category"""
    DEMOGRAPHIC = "Demographic"
    HISTORY = "History"
    LAB = "Lab"
    PROCEDURE = "Procedure"
    TREATMENT = "Treatment"
    AF_RELATED = "AfRelated"


class ValueKind(str, Enum):
    """How a feature value is encoded"""
    BOOLEAN3 = "Boolean3State"
    NUMERIC = "Numeric"
    CATEGORICAL = "Categorical"
    DATE = "Date"


class TriState(str, Enum):
    PRESENT = "Present"
    ABSENT = "Absent"
    UNKNOWN = "Unknown"


class Provenance(str, Enum):
    """Which source a feature value came from"""
    STRUCTURED = "Structured"
    REPORT = "Report"
    BOTH = "Both"
    NONE = "None"


# Category sizes of the shipped 85-feature schema
EXPECTED_CATEGORY_COUNTS: Dict[Category, int] = {
    Category.DEMOGRAPHIC: 7,
    Category.HISTORY: 35,
    Category.LAB: 18,
    Category.PROCEDURE: 7,
    Category.TREATMENT: 16,
    Category.AF_RELATED: 2,
}

REQUIRED_FEATURES = (
    "age", "sex", "hypertension", "diabetes", "heart_failure", "stroke_tia",
    "vascular_disease", "copd", "egfr", "lvef", "la_diameter", "albumin",
    "crp", "nt_probnp", "af_type",
)

LABEL_FEATURE = "af_progression"
AF_FEATURE = "af_type"


class FeatureDef(BaseModel):
    """One column of the feature schema"""
    model_config = ConfigDict(frozen=True)

    id: str
    category: Category
    value_kind: ValueKind
    unit: Optional[str] = None
    allowed_values: Optional[List[str]] = None

    @property
    def is_boolean(self) -> bool:
        return self.value_kind == ValueKind.BOOLEAN3


class FeatureSchema(BaseModel):
    """Ordered feature list: 84 predictive features plus the label slot"""
    features: List[FeatureDef]
    version: str = "1"
    label_id: str = LABEL_FEATURE

    _index: Dict[str, FeatureDef] = PrivateAttr(default_factory=dict)

    def model_post_init(self, __context: Any) -> None:
        self._index = {f.id: f for f in self.features}

    @property
    def ids(self) -> List[str]:
        return [f.id for f in self.features]

    @property
    def predictive(self) -> List[FeatureDef]:
        """Features in schema order, label slot excluded"""
        return [f for f in self.features if f.id != self.label_id]

    @property
    def predictive_ids(self) -> List[str]:
        return [f.id for f in self.predictive]

    def get(self, feature_id: str) -> FeatureDef:
        return self._index[feature_id]

    def has(self, feature_id: str) -> bool:
        return feature_id in self._index

    def category_counts(self) -> Dict[Category, int]:
        counts = {c: 0 for c in Category}
        for feature in self.features:
            counts[feature.category] += 1
        return counts

    def by_category(self, category: Category) -> List[FeatureDef]:
        return [f for f in self.predictive if f.category == category]


class FeatureValue(BaseModel):
    """
    Value of one feature for one patient.

    Boolean3State features use `state` only. Other kinds carry `value`
    with state Present when observed and Unknown otherwise.
    """
    model_config = ConfigDict(frozen=True)

    state: TriState = TriState.UNKNOWN
    value: Optional[Union[float, str]] = None
    provenance: Provenance = Provenance.NONE

    @model_validator(mode="after")
    def _check_provenance(self) -> "FeatureValue":
        unknown = self.state == TriState.UNKNOWN
        if unknown != (self.provenance == Provenance.NONE):
            raise ValueError("provenance must be None exactly when the value is Unknown")
        if unknown and self.value is not None:
            raise ValueError("Unknown values cannot carry a value")
        return self

    @property
    def known(self) -> bool:
        return self.state != TriState.UNKNOWN

    @classmethod
    def unknown(cls) -> "FeatureValue":
        return _UNKNOWN

    @classmethod
    def flag(cls, present: bool, provenance: Provenance) -> "FeatureValue":
        state = TriState.PRESENT if present else TriState.ABSENT
        return cls(state=state, provenance=provenance)

    @classmethod
    def observed(cls, value: Union[float, int, str], provenance: Provenance) -> "FeatureValue":
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            value = float(value)
        return cls(state=TriState.PRESENT, value=value, provenance=provenance)

    def with_provenance(self, provenance: Provenance) -> "FeatureValue":
        if not self.known:
            return self
        return self.model_copy(update={"provenance": provenance})

    def same_reading(self, other: "FeatureValue") -> bool:
        """Compare state/value ignoring provenance"""
        return self.state == other.state and self.value == other.value


_UNKNOWN = FeatureValue()


class PatientVector(BaseModel):
    """The 85-slot record for one patient: 84 predictive values + label"""
    patient_id: str
    index_date: Optional[dt.date] = None
    values: Dict[str, FeatureValue] = Field(default_factory=dict)
    label: Optional[int] = None

    @classmethod
    def empty(
        cls,
        schema: FeatureSchema,
        patient_id: str,
        index_date: Optional[dt.date] = None
    ) -> "PatientVector":
        return cls(
            patient_id=patient_id,
            index_date=index_date,
            values={fid: FeatureValue.unknown() for fid in schema.predictive_ids}
        )

    def get(self, feature_id: str) -> FeatureValue:
        return self.values.get(feature_id, _UNKNOWN)

    def missing_features(self, schema: FeatureSchema) -> List[str]:
        return [fid for fid in schema.predictive_ids if fid not in self.values]

    def extra_features(self, schema: FeatureSchema) -> List[str]:
        expected = set(schema.predictive_ids)
        return sorted(fid for fid in self.values if fid not in expected)


class SectionKind(str, Enum):
    """Typed section of a discharge report"""
    PAST_HISTORY = "PastHistory"
    CURRENT_EPISODE = "CurrentEpisode"
    EXAM = "Exam"
    EVOLUTION = "Evolution"
    TREATMENT = "Treatment"
    DIAGNOSIS = "Diagnosis"
    UNKNOWN = "Unknown"


class Section(BaseModel):
    """Contiguous slice [start, end) of a report; the header (if any) ends at body_start"""
    model_config = ConfigDict(frozen=True)

    kind: SectionKind
    start: int
    end: int
    header_text: str = ""
    body_start: int = 0

    @model_validator(mode="after")
    def _check_offsets(self) -> "Section":
        if not (0 <= self.start <= self.body_start <= self.end):
            raise ValueError(f"bad section offsets {self.start}/{self.body_start}/{self.end}")
        return self

    @property
    def length(self) -> int:
        return self.end - self.start


class ReportDocument(BaseModel):
    """One dated free-text discharge report"""
    patient_id: str
    report_id: str
    date: dt.date
    text: str
    sections: List[Section] = Field(default_factory=list)

    @field_validator("text")
    @classmethod
    def _text_not_empty(cls, value: str) -> str:
        if not value.strip():
            raise ValueError("report text is empty")
        return value


class Polarity(str, Enum):
    AFFIRMED = "Affirmed"
    NEGATED = "Negated"


class EntityMention(BaseModel):
    """A lexicon hit inside a report section"""
    model_config = ConfigDict(frozen=True)

    feature_id: str
    surface: str
    start: int
    end: int
    polarity: Polarity
    section_kind: SectionKind
    value: Optional[str] = None

    @property
    def affirmed(self) -> bool:
        return self.polarity == Polarity.AFFIRMED


class ScopeDirection(str, Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


class NegationTrigger(BaseModel):
    model_config = ConfigDict(frozen=True)

    phrase: str
    direction: ScopeDirection = ScopeDirection.FORWARD


class LexiconEntry(BaseModel):
    """A normalized surface form for a feature (or a declared concept)"""
    model_config = ConfigDict(frozen=True)

    feature_id: str
    surface: str
    value: Optional[str] = None
    display: str = ""


class Lexicon(BaseModel):
    """Surface forms, extra concepts and negation triggers"""
    entries: List[LexiconEntry]
    negation_triggers: List[NegationTrigger]
    concepts: List[str] = Field(default_factory=list)

    _by_surface: Dict[str, LexiconEntry] = PrivateAttr(default_factory=dict)
    _surface_re: Optional[re.Pattern] = PrivateAttr(default=None)
    _trigger_re: Optional[re.Pattern] = PrivateAttr(default=None)
    _directions: Dict[str, ScopeDirection] = PrivateAttr(default_factory=dict)

    def model_post_init(self, __context: Any) -> None:
        self._by_surface = {e.surface: e for e in self.entries}
        self._surface_re = _alternation([e.surface for e in self.entries])
        self._trigger_re = _alternation([t.phrase for t in self.negation_triggers])
        self._directions = {t.phrase: t.direction for t in self.negation_triggers}

    @property
    def feature_ids(self) -> List[str]:
        return sorted({e.feature_id for e in self.entries})

    @property
    def surface_pattern(self) -> Optional[re.Pattern]:
        return self._surface_re

    @property
    def trigger_pattern(self) -> Optional[re.Pattern]:
        return self._trigger_re

    def entry(self, surface: str) -> LexiconEntry:
        return self._by_surface[surface]

    def direction(self, phrase: str) -> ScopeDirection:
        return self._directions[phrase]

    def surfaces_for(self, feature_id: str, value: Optional[str] = None) -> List[str]:
        return [
            e.surface for e in self.entries
            if e.feature_id == feature_id and (value is None or e.value == value)
        ]

    def display_for(self, feature_id: str, value: Optional[str] = None) -> str:
        """First declared (display) form for a feature, or for one of its values"""
        for e in self.entries:
            if e.feature_id == feature_id and e.value == value:
                return e.display or e.surface
        raise KeyError(f"{feature_id}={value}")


def _alternation(phrases: List[str]) -> Optional[re.Pattern]:
    """Word-bounded alternation, longest phrase first so the longest match wins"""
    if not phrases:
        return None
    ordered = sorted(set(phrases), key=lambda p: (-len(p), p))
    body = "|".join(re.escape(p) for p in ordered)
    return re.compile(rf"(?<!\w)(?:{body})(?!\w)")


class PatternSpec(BaseModel):
    """Regex with one numeric capture group for a numeric feature"""
    feature_id: str
    regex: str
    unit: str
    scale: float = 1.0
    test_phrase: Optional[str] = None

    _compiled: Optional[re.Pattern] = PrivateAttr(default=None)

    def model_post_init(self, __context: Any) -> None:
        self._compiled = re.compile(self.regex, re.IGNORECASE)

    @property
    def compiled(self) -> re.Pattern:
        return self._compiled


class CodeRule(BaseModel):
    """Prefix rule for a coded diagnosis, prescription or procedure"""
    model_config = ConfigDict(frozen=True)

    system: str
    prefix: str
    feature_id: str
    value: Optional[str] = None

    def matches(self, system: str, code: str) -> bool:
        return system == self.system and code.upper().startswith(self.prefix)


class LabRule(BaseModel):
    model_config = ConfigDict(frozen=True)

    test_code: str
    feature_id: str
    unit: str
    scale: float = 1.0


class CodeMap(BaseModel):
    """Coded-data → feature mapping used by structured extraction and cohort selection"""
    diagnoses: List[CodeRule] = Field(default_factory=list)
    prescriptions: List[CodeRule] = Field(default_factory=list)
    procedures: List[CodeRule] = Field(default_factory=list)
    labs: Dict[str, LabRule] = Field(default_factory=dict)
    procedure_values: Dict[str, LabRule] = Field(default_factory=dict)

    @staticmethod
    def _first(rules: List[CodeRule], system: str, code: str) -> Optional[CodeRule]:
        for rule in rules:
            if rule.matches(system, code):
                return rule
        return None

    def match_diagnosis(self, system: str, code: str) -> Optional[CodeRule]:
        return self._first(self.diagnoses, system, code)

    def match_prescription(self, system: str, code: str) -> Optional[CodeRule]:
        return self._first(self.prescriptions, system, code)

    def match_procedure(self, code: str) -> Optional[CodeRule]:
        return self._first(self.procedures, "PROC", code)

    def af_rules(self) -> List[CodeRule]:
        return [r for r in self.diagnoses if r.feature_id == AF_FEATURE]

    def is_af_code(self, system: str, code: str) -> bool:
        rule = self.match_diagnosis(system, code)
        return rule is not None and rule.feature_id == AF_FEATURE

    def feature_ids(self) -> List[str]:
        ids = {r.feature_id for r in self.diagnoses + self.prescriptions + self.procedures}
        ids.update(r.feature_id for r in self.labs.values())
        ids.update(r.feature_id for r in self.procedure_values.values())
        return sorted(ids)


class StructuredStore(BaseModel):
    """
    Coded EHR tables keyed by patient_id.

    Treated as immutable once loaded; per-patient slices are indexed at
    construction so extraction is a dictionary lookup.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    demographics: pd.DataFrame
    diagnoses: pd.DataFrame
    labs: pd.DataFrame
    procedures: pd.DataFrame
    prescriptions: pd.DataFrame

    _by_patient: Dict[str, Dict[str, pd.DataFrame]] = PrivateAttr(default_factory=dict)

    CHILD_TABLES: ClassVar[Tuple[str, ...]] = ("diagnoses", "labs", "procedures", "prescriptions")

    def model_post_init(self, __context: Any) -> None:
        index: Dict[str, Dict[str, pd.DataFrame]] = {}
        for table in self.CHILD_TABLES:
            frame: pd.DataFrame = getattr(self, table)
            for patient_id, rows in frame.groupby("patient_id", sort=False):
                index.setdefault(str(patient_id), {})[table] = rows
        self._by_patient = index

    @property
    def patient_ids(self) -> List[str]:
        return sorted(self.demographics["patient_id"].tolist())

    def has_patient(self, patient_id: str) -> bool:
        return patient_id in set(self.demographics["patient_id"])

    def demographics_for(self, patient_id: str) -> Optional[pd.Series]:
        rows = self.demographics[self.demographics["patient_id"] == patient_id]
        if rows.empty:
            return None
        return rows.iloc[0]

    def rows_for(self, table: str, patient_id: str) -> pd.DataFrame:
        """Rows of a child table for one patient (empty frame if none)"""
        frame = self._by_patient.get(patient_id, {}).get(table)
        if frame is None:
            return getattr(self, table).iloc[0:0]
        return frame


class MergePrecedence(str, Enum):
    STRUCTURED_FIRST = "StructuredFirst"
    REPORT_FIRST = "ReportFirst"


class MergePolicy(BaseModel):
    model_config = ConfigDict(frozen=True)

    precedence: MergePrecedence = MergePrecedence.STRUCTURED_FIRST
    numeric_conflict_tolerance: float = Field(default=0.05, ge=0.0)


class Conflict(BaseModel):
    """Disagreement between two known source values for one feature"""
    patient_id: str
    feature_id: str
    structured_value: Union[float, str]
    report_value: Union[float, str]
    resolution: Provenance


class OnsetCandidate(BaseModel):
    model_config = ConfigDict(frozen=True)

    patient_id: str
    onset_date: dt.date
    trigger_code: str


class VerificationStatus(str, Enum):
    CONFIRMED = "Confirmed"
    REJECTED_PRIOR_HISTORY = "RejectedPriorHistory"
    REJECTED_NO_TEXTUAL_EVIDENCE = "RejectedNoTextualEvidence"


class VerificationOutcome(BaseModel):
    status: VerificationStatus
    evidence: List[Tuple[str, Tuple[int, int]]] = Field(default_factory=list)

    @property
    def confirmed(self) -> bool:
        return self.status == VerificationStatus.CONFIRMED


class AfStatus(str, Enum):
    AF_EPISODE = "AfEpisode"
    SINUS_RHYTHM = "SinusRhythm"
    NO_INFO = "NoInfo"


class DatedStatus(BaseModel):
    model_config = ConfigDict(frozen=True)

    date: dt.date
    status: AfStatus
    source_report_id: str


class ArrhythmiaTimeline(BaseModel):
    patient_id: str
    onset_date: dt.date
    events: List[DatedStatus] = Field(default_factory=list)


class ProgressionWindow(BaseModel):
    """Inclusive day offsets after onset in which a new episode counts as progression"""
    model_config = ConfigDict(frozen=True)

    start_offset_days: int = 30
    end_offset_days: int = 730

    @model_validator(mode="after")
    def _check_order(self) -> "ProgressionWindow":
        if not (0 < self.start_offset_days < self.end_offset_days):
            raise ValueError("progression window needs 0 < start < end")
        return self


class Label(int, Enum):
    PROGRESSION = 1
    NO_PROGRESSION = 0
    EXCLUDED = -1


class LabelRecord(BaseModel):
    """Row of labels.csv"""
    patient_id: str
    onset_date: dt.date
    label: Label
    first_event_in_window_date: Optional[dt.date] = None
