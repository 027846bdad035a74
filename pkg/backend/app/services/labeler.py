"""
CohortForge - Automatic Labeling

Rebuilds each cohort patient's arrhythmia timeline from report text and
assigns the silver progression label.
"""
import datetime as dt
from collections import defaultdict
from typing import Dict, List, Optional, Tuple

import pandas as pd

from app.models.schemas import (
    AF_FEATURE, AfStatus, ArrhythmiaTimeline, DatedStatus, Label, LabelRecord,
    ProgressionWindow, ReportDocument, SectionKind
)
from app.services.nlp.report2vector import AnalysedReport, ReportAnalyzer
from app.utils.io import read_csv

SINUS_CONCEPT = "sinus_rhythm"
LABEL_COLUMNS = ["patient_id", "onset_date", "label", "first_event_in_window_date"]


def status_of(analysed: AnalysedReport) -> DatedStatus:
    """AF status of an already analysed report"""
    af_episode = False
    sinus = False
    for mention in analysed.mentions:
        if not mention.affirmed:
            continue
        if mention.feature_id == AF_FEATURE and mention.section_kind != SectionKind.PAST_HISTORY:
            af_episode = True
        elif mention.feature_id == SINUS_CONCEPT:
            sinus = True
    if af_episode:
        status = AfStatus.AF_EPISODE
    elif sinus:
        status = AfStatus.SINUS_RHYTHM
    else:
        status = AfStatus.NO_INFO
    return DatedStatus(date=analysed.report.date, status=status, source_report_id=analysed.report.report_id)


def extract_af_status(report: ReportDocument, analyzer: ReportAnalyzer) -> DatedStatus:
    """AfEpisode > SinusRhythm > NoInfo for a single report"""
    return status_of(analyzer.analyse(report))


def build_timeline(
    statuses: List[DatedStatus],
    onset_date: dt.date,
    patient_id: str = ""
) -> ArrhythmiaTimeline:
    """
    Date-sorted informative events from onset on

    NoInfo events are dropped; several events on one day collapse into a
    single one, AfEpisode winning over SinusRhythm.
    """
    by_day: Dict[dt.date, List[DatedStatus]] = defaultdict(list)
    for status in statuses:
        if status.status == AfStatus.NO_INFO or status.date < onset_date:
            continue
        by_day[status.date].append(status)

    events: List[DatedStatus] = []
    for day in sorted(by_day):
        same_day = sorted(by_day[day], key=lambda s: (s.status != AfStatus.AF_EPISODE, s.source_report_id))
        events.append(same_day[0])
    return ArrhythmiaTimeline(patient_id=patient_id, onset_date=onset_date, events=events)


def _qualifying_event(timeline: ArrhythmiaTimeline, window: ProgressionWindow) -> Tuple[Label, Optional[dt.date]]:
    start = timeline.onset_date + dt.timedelta(days=window.start_offset_days)
    end = timeline.onset_date + dt.timedelta(days=window.end_offset_days)

    for event in timeline.events:
        if event.status == AfStatus.AF_EPISODE and start <= event.date <= end:
            return Label.PROGRESSION, event.date
    for event in timeline.events:
        if event.status == AfStatus.SINUS_RHYTHM and event.date >= start:
            return Label.NO_PROGRESSION, event.date
    return Label.EXCLUDED, None


def assign_label(timeline: ArrhythmiaTimeline, window: ProgressionWindow = ProgressionWindow()) -> Label:
    """1: new AF episode inside the window; 0: sinus rhythm from window start on; else -1"""
    label, _ = _qualifying_event(timeline, window)
    return label


def label_patient(
    patient_id: str,
    onset_date: dt.date,
    reports: List[ReportDocument],
    analyzer: ReportAnalyzer,
    window: ProgressionWindow = ProgressionWindow()
) -> LabelRecord:
    statuses = [extract_af_status(r, analyzer) for r in reports]
    timeline = build_timeline(statuses, onset_date, patient_id)
    label, event_date = _qualifying_event(timeline, window)
    return LabelRecord(
        patient_id=patient_id, onset_date=onset_date, label=label, first_event_in_window_date=event_date
    )


def labels_frame(records: List[LabelRecord]) -> pd.DataFrame:
    rows = [
        {
            "patient_id": r.patient_id,
            "onset_date": r.onset_date.isoformat(),
            "label": str(int(r.label)),
            "first_event_in_window_date": r.first_event_in_window_date.isoformat()
            if r.first_event_in_window_date else "",
        }
        for r in sorted(records, key=lambda r: r.patient_id)
    ]
    return pd.DataFrame(rows, columns=LABEL_COLUMNS, dtype=str)


def read_labels(path) -> Dict[str, int]:
    """patient_id -> label from a labels.csv-style file (patient_id,label columns)"""
    frame = read_csv(path)
    return {row["patient_id"]: int(row["label"]) for row in frame.to_dict("records")}
