"""
CohortForge - Report2Vector

Turns a patient's discharge reports into a PatientVector: sections,
lexicon mentions with negation, regex numbers, then per-feature rules.
"""
import datetime as dt
from typing import Dict, List, Optional, Tuple

from loguru import logger
from pydantic import BaseModel, Field

from app.core.exceptions import MixedPatients
from app.models.schemas import (
    EntityMention, FeatureSchema, FeatureValue, Lexicon, PatientVector, PatternSpec,
    Provenance, ReportDocument, Section, ValueKind
)
from app.services.ingest.resources import HeaderAlias
from app.services.nlp.entities import EntityRecognizer, LexiconRecognizer
from app.services.nlp.patterns import extract_patterns
from app.services.nlp.sections import SectionSegmenter
from app.utils.text import normalize


class AnalysedReport(BaseModel):
    """Segmented report with its mentions and numeric findings"""
    report: ReportDocument
    mentions: List[EntityMention] = Field(default_factory=list)
    numbers: List[Tuple[str, float]] = Field(default_factory=list)

    @property
    def sections(self) -> List[Section]:
        return self.report.sections


class ReportAnalyzer:
    """
    Section segmentation + entity recognition + pattern extraction.

    Shared by report2vector, cohort validation and the labeler so every
    stage reads a report the same way.
    """

    def __init__(
        self,
        lexicon: Lexicon,
        aliases: List[HeaderAlias],
        specs: Optional[List[PatternSpec]] = None,
        max_scope_tokens: int = 5,
        recognizer: Optional[EntityRecognizer] = None
    ):
        self.lexicon = lexicon
        self.specs = specs or []
        self.segmenter = SectionSegmenter(aliases)
        self.recognizer = recognizer or LexiconRecognizer(lexicon, max_scope_tokens)

    def analyse(self, report: ReportDocument) -> AnalysedReport:
        sections = report.sections or self.segmenter.segment(report.text)
        report = report.model_copy(update={"sections": sections})
        norm = normalize(report.text)

        mentions: List[EntityMention] = []
        numbers: List[Tuple[str, float]] = []
        for section in sections:
            mentions.extend(self.recognizer.detect(report.text, section, norm))
            if self.specs:
                numbers.extend(extract_patterns(report.text, section, self.specs, norm))
        return AnalysedReport(report=report, mentions=mentions, numbers=numbers)


def _check_single_patient(reports: List[ReportDocument]) -> Optional[str]:
    patients = sorted({r.patient_id for r in reports})
    if len(patients) > 1:
        raise MixedPatients(f"reports of {len(patients)} patients given: {patients[:3]}")
    return patients[0] if patients else None


def report_to_vector(
    reports: List[ReportDocument],
    schema: FeatureSchema,
    analyzer: ReportAnalyzer,
    index_date: Optional[dt.date],
    patient_id: Optional[str] = None
) -> PatientVector:
    """
    Build the report-side vector for one patient

    Args:
        reports: Reports of a single patient, any order
        schema: Feature schema
        analyzer: Report analyzer holding lexicon, patterns and header aliases
        index_date: Reports dated after it are ignored (None: use all)
        patient_id: Used when `reports` is empty

    Returns:
        PatientVector with provenance Report on every known slot; label untouched
    """
    found = _check_single_patient(reports)
    patient_id = found or patient_id or ""
    vector = PatientVector.empty(schema, patient_id, index_date)

    eligible = sorted(
        (r for r in reports if index_date is None or r.date <= index_date),
        key=lambda r: (r.date, r.report_id)
    )

    affirmed: Dict[str, bool] = {}
    categorical: Dict[str, str] = {}
    numeric: Dict[str, float] = {}
    for report in eligible:
        analysed = analyzer.analyse(report)
        for mention in analysed.mentions:
            if not schema.has(mention.feature_id) or mention.feature_id == schema.label_id:
                continue
            kind = schema.get(mention.feature_id).value_kind
            if kind == ValueKind.BOOLEAN3:
                affirmed[mention.feature_id] = affirmed.get(mention.feature_id, False) or mention.affirmed
            elif kind == ValueKind.CATEGORICAL and mention.affirmed and mention.value is not None:
                categorical[mention.feature_id] = mention.value
        for feature_id, value in analysed.numbers:
            if schema.has(feature_id):
                numeric[feature_id] = value

    values = dict(vector.values)
    for feature_id, present in affirmed.items():
        values[feature_id] = FeatureValue.flag(present, Provenance.REPORT)
    for feature_id, value in {**categorical, **numeric}.items():
        values[feature_id] = FeatureValue.observed(value, Provenance.REPORT)

    logger.debug(
        f"R2V {patient_id}: {len(eligible)}/{len(reports)} reports eligible, "
        f"{sum(v.known for v in values.values())} features known"
    )
    return vector.model_copy(update={"values": values})
