"""
Cohort Selection and Extraction Commands

cohort -> extract-reports -> extract-structured -> merge. Each stage reads
the previous stage's files and writes its own.
"""
import datetime as dt
from functools import partial
from typing import Dict, List, Optional, Tuple

from loguru import logger

from app.commands.context import (
    CONFLICTS_FILE, COHORT_FILE, ENRICHED_FILE, REPORT_VECTORS_FILE, STRUCTURED_VECTORS_FILE,
    StageContext
)
from app.core.exceptions import PatientSetMismatch
from app.models.schemas import (
    CodeMap, FeatureSchema, OnsetCandidate, PatientVector, ReportDocument, StructuredStore
)
from app.services.cohort import (
    CohortRecord, RuleOnsetValidator, cohort_frame, confirmed_onsets, read_cohort,
    select_candidates, to_record, validate_onset
)
from app.services.ingest.dataset import read_dataset, write_dataset
from app.services.ingest.reports import group_by_patient, read_reports
from app.services.ingest.structured import read_structured
from app.services.nlp.report2vector import ReportAnalyzer, report_to_vector
from app.services.structured2vector import structured_to_vector
from app.services.synth.generator import REPORTS_FILE
from app.services.vector_merger import merge
from app.utils.io import write_csv, write_jsonl
from app.utils.parallel import parallel_map


def _validate_patient(
    analyzer: ReportAnalyzer,
    window_days: int,
    item: Tuple[OnsetCandidate, List[ReportDocument]]
) -> CohortRecord:
    candidate, reports = item
    outcome = validate_onset(candidate, reports, analyzer, RuleOnsetValidator(window_days))
    return to_record(candidate, outcome)


def _report_vector(
    schema: FeatureSchema,
    analyzer: ReportAnalyzer,
    item: Tuple[str, dt.date, List[ReportDocument]]
) -> PatientVector:
    patient_id, onset, reports = item
    return report_to_vector(reports, schema, analyzer, onset, patient_id=patient_id)


def _structured_vector(
    store: StructuredStore,
    schema: FeatureSchema,
    code_map: CodeMap,
    lookback: Optional[int],
    item: Tuple[str, dt.date]
) -> PatientVector:
    patient_id, onset = item
    return structured_to_vector(store, patient_id, schema, code_map, onset, lookback)


def _reports_by_patient(ctx: StageContext) -> Dict[str, List[ReportDocument]]:
    return group_by_patient(read_reports(ctx.data_dir / REPORTS_FILE))


def _confirmed(ctx: StageContext) -> Dict[str, dt.date]:
    return confirmed_onsets(read_cohort(ctx.out(COHORT_FILE)))


def run_cohort(ctx: StageContext) -> None:
    """Coded onset candidates verified against the reports -> cohort.csv"""
    store = read_structured(ctx.data_dir)
    reports = _reports_by_patient(ctx)
    settings = ctx.config.cohort
    candidates = select_candidates(store, ctx.code_map, settings.study_start, settings.study_end)

    work = [(c, reports.get(c.patient_id, [])) for c in candidates]
    records = parallel_map(
        partial(_validate_patient, ctx.analyzer, settings.verification_window_days), work, jobs=ctx.jobs
    )
    confirmed = sum(r.confirmed for r in records)
    logger.info(f"Cohort: {confirmed} confirmed, {len(records) - confirmed} rejected")
    ctx.record("cohort", [write_csv(cohort_frame(records), ctx.out(COHORT_FILE))])


def run_extract_reports(ctx: StageContext) -> None:
    """Report-side vectors of the confirmed cohort -> report_vectors.csv"""
    onsets = _confirmed(ctx)
    reports = _reports_by_patient(ctx)
    work = [(pid, onset, reports.get(pid, [])) for pid, onset in sorted(onsets.items())]
    vectors = parallel_map(partial(_report_vector, ctx.schema, ctx.analyzer), work, jobs=ctx.jobs)
    ctx.record("extract-reports", write_dataset(vectors, ctx.schema, ctx.out(REPORT_VECTORS_FILE)))


def run_extract_structured(ctx: StageContext) -> None:
    """Structured-side vectors of the confirmed cohort -> structured_vectors.csv"""
    onsets = _confirmed(ctx)
    store = read_structured(ctx.data_dir)
    worker = partial(
        _structured_vector, store, ctx.schema, ctx.code_map, ctx.config.structured.lab_lookback_days
    )
    vectors = parallel_map(worker, sorted(onsets.items()), jobs=ctx.jobs)
    ctx.record("extract-structured", write_dataset(vectors, ctx.schema, ctx.out(STRUCTURED_VECTORS_FILE)))


def run_merge(ctx: StageContext) -> None:
    """Structured + report vectors -> dataset_enriched.csv and conflicts.jsonl"""
    structured = {v.patient_id: v for v in read_dataset(ctx.out(STRUCTURED_VECTORS_FILE), ctx.schema)}
    reported = {v.patient_id: v for v in read_dataset(ctx.out(REPORT_VECTORS_FILE), ctx.schema)}
    if set(structured) != set(reported):
        raise PatientSetMismatch(
            f"{len(set(structured) ^ set(reported))} patients appear in only one vector file"
        )

    merged: List[PatientVector] = []
    conflicts = []
    for patient_id in sorted(structured):
        vector, found = merge(structured[patient_id], reported[patient_id], ctx.config.merge)
        merged.append(vector)
        conflicts.extend(found)
    for conflict in conflicts:
        logger.debug(
            f"Conflict {conflict.patient_id}/{conflict.feature_id}: "
            f"{conflict.structured_value} vs {conflict.report_value} -> {conflict.resolution.value}"
        )
    logger.info(f"Merged {len(merged)} patients, {len(conflicts)} conflicts")

    written = write_dataset(merged, ctx.schema, ctx.out(ENRICHED_FILE))
    written.append(write_jsonl((c.model_dump(mode="json") for c in conflicts), ctx.out(CONFLICTS_FILE)))
    ctx.record("merge", written)
