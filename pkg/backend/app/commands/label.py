"""
Automatic Labeling Command
"""
import datetime as dt
from collections import Counter
from functools import partial
from typing import List, Tuple

from loguru import logger

from app.commands.context import COHORT_FILE, LABELS_FILE, StageContext
from app.models.schemas import LabelRecord, ProgressionWindow, ReportDocument
from app.services.cohort import confirmed_onsets, read_cohort
from app.services.ingest.reports import group_by_patient, read_reports
from app.services.labeler import label_patient, labels_frame
from app.services.nlp.report2vector import ReportAnalyzer
from app.services.synth.generator import REPORTS_FILE
from app.utils.io import write_csv
from app.utils.parallel import parallel_map


def _label(
    analyzer: ReportAnalyzer,
    window: ProgressionWindow,
    item: Tuple[str, dt.date, List[ReportDocument]]
) -> LabelRecord:
    patient_id, onset, reports = item
    return label_patient(patient_id, onset, reports, analyzer, window)


def run_label(ctx: StageContext) -> None:
    """Silver progression labels for the confirmed cohort -> labels.csv"""
    onsets = confirmed_onsets(read_cohort(ctx.out(COHORT_FILE)))
    reports = group_by_patient(read_reports(ctx.data_dir / REPORTS_FILE))
    work = [(pid, onset, reports.get(pid, [])) for pid, onset in sorted(onsets.items())]
    records = parallel_map(partial(_label, ctx.analyzer, ctx.config.window), work, jobs=ctx.jobs)

    counts = Counter(int(r.label) for r in records)
    logger.info(f"Labels: {counts[1]} progression, {counts[0]} no progression, {counts[-1]} excluded")
    ctx.record("label", [write_csv(labels_frame(records), ctx.out(LABELS_FILE))])
