"""
CohortForge - Automatic Cohort Selection

Candidates come from coded AF diagnoses; each is then verified against the
patient's reports (dual verification).
"""
import datetime as dt
from pathlib import Path
from typing import Dict, List, Optional, Protocol, Tuple

import pandas as pd
from loguru import logger
from pydantic import BaseModel

from app.models.schemas import (
    AF_FEATURE, CodeMap, OnsetCandidate, ReportDocument, SectionKind, StructuredStore,
    VerificationOutcome, VerificationStatus
)
from app.services.nlp.report2vector import AnalysedReport, ReportAnalyzer
from app.utils.io import read_csv

COHORT_COLUMNS = ["patient_id", "onset_date", "status", "evidence_report_ids"]


class CohortRecord(BaseModel):
    """Row of cohort.csv"""
    patient_id: str
    onset_date: dt.date
    status: VerificationStatus
    evidence_report_ids: List[str] = []

    @property
    def confirmed(self) -> bool:
        return self.status == VerificationStatus.CONFIRMED


def select_candidates(
    store: StructuredStore,
    code_map: CodeMap,
    study_start: Optional[dt.date] = None,
    study_end: Optional[dt.date] = None
) -> List[OnsetCandidate]:
    """
    One candidate per patient with an AF diagnosis code

    Args:
        store: Structured EHR tables
        code_map: Its af_type diagnosis rules define what an AF code is
        study_start: Patients whose earliest AF code precedes it are excluded
        study_end: Patients whose earliest AF code follows it are excluded

    Returns:
        Candidates sorted by patient_id, onset = earliest AF code date
    """
    diagnoses = store.diagnoses
    is_af = pd.Series(False, index=diagnoses.index)
    codes = diagnoses["code"].str.upper()
    for rule in code_map.af_rules():
        is_af |= (diagnoses["code_system"] == rule.system) & codes.str.startswith(rule.prefix)

    af_rows = diagnoses[is_af].sort_values(["patient_id", "date", "code"], kind="mergesort")
    earliest = af_rows.groupby("patient_id", sort=True).head(1)

    candidates: List[OnsetCandidate] = []
    excluded = 0
    for row in earliest.itertuples(index=False):
        onset = row.date.date()
        if (study_start and onset < study_start) or (study_end and onset > study_end):
            excluded += 1
            continue
        candidates.append(OnsetCandidate(patient_id=row.patient_id, onset_date=onset, trigger_code=row.code))

    logger.info(f"Selected {len(candidates)} onset candidates ({excluded} outside the study window)")
    return candidates


class OnsetValidator(Protocol):
    """Decides whether the reports confirm a coded onset"""

    def validate(self, candidate: OnsetCandidate, reports: List[AnalysedReport]) -> VerificationOutcome:
        ...


class RuleOnsetValidator:
    """
    Confirmed iff an affirmed AF mention outside PastHistory sits in a report
    within `window_days` of onset and no report up to onset lists AF in its
    PastHistory section.
    """

    def __init__(self, window_days: int = 7):
        self.window_days = window_days

    def validate(self, candidate: OnsetCandidate, reports: List[AnalysedReport]) -> VerificationOutcome:
        prior: List[Tuple[str, Tuple[int, int]]] = []
        evidence: List[Tuple[str, Tuple[int, int]]] = []
        for analysed in sorted(reports, key=lambda a: (a.report.date, a.report.report_id)):
            report = analysed.report
            for mention in analysed.mentions:
                if mention.feature_id != AF_FEATURE or not mention.affirmed:
                    continue
                span = (report.report_id, (mention.start, mention.end))
                if mention.section_kind == SectionKind.PAST_HISTORY:
                    if report.date <= candidate.onset_date:
                        prior.append(span)
                elif abs((report.date - candidate.onset_date).days) <= self.window_days:
                    evidence.append(span)

        if prior:
            return VerificationOutcome(status=VerificationStatus.REJECTED_PRIOR_HISTORY, evidence=prior)
        if evidence:
            return VerificationOutcome(status=VerificationStatus.CONFIRMED, evidence=evidence)
        return VerificationOutcome(status=VerificationStatus.REJECTED_NO_TEXTUAL_EVIDENCE)


def validate_onset(
    candidate: OnsetCandidate,
    reports: List[ReportDocument],
    analyzer: ReportAnalyzer,
    validator: Optional[OnsetValidator] = None
) -> VerificationOutcome:
    """Verify one candidate against its patient's reports"""
    validator = validator or RuleOnsetValidator()
    analysed = [analyzer.analyse(r) for r in reports if r.patient_id == candidate.patient_id]
    return validator.validate(candidate, analysed)


def to_record(candidate: OnsetCandidate, outcome: VerificationOutcome) -> CohortRecord:
    report_ids = sorted({report_id for report_id, _ in outcome.evidence})
    return CohortRecord(
        patient_id=candidate.patient_id,
        onset_date=candidate.onset_date,
        status=outcome.status,
        evidence_report_ids=report_ids,
    )


def cohort_frame(records: List[CohortRecord]) -> pd.DataFrame:
    rows = [
        {
            "patient_id": r.patient_id,
            "onset_date": r.onset_date.isoformat(),
            "status": r.status.value,
            "evidence_report_ids": ";".join(r.evidence_report_ids),
        }
        for r in sorted(records, key=lambda r: r.patient_id)
    ]
    return pd.DataFrame(rows, columns=COHORT_COLUMNS, dtype=str)


def read_cohort(path: Path) -> List[CohortRecord]:
    frame = read_csv(path)
    return [
        CohortRecord(
            patient_id=row["patient_id"],
            onset_date=dt.date.fromisoformat(row["onset_date"]),
            status=VerificationStatus(row["status"]),
            evidence_report_ids=[r for r in row["evidence_report_ids"].split(";") if r],
        )
        for row in frame.to_dict("records")
    ]


def confirmed_onsets(records: List[CohortRecord]) -> Dict[str, dt.date]:
    return {r.patient_id: r.onset_date for r in records if r.confirmed}
