"""
CohortForge - Discharge Report Reader/Writer
"""
import datetime as dt
import json
import re
from collections import defaultdict
from pathlib import Path
from typing import Dict, Iterable, List

from loguru import logger
from pydantic import ValidationError

from app.core.exceptions import BadDate, DuplicateReportId, IoError, MissingFile, ParseError
from app.models.schemas import ReportDocument

REPORT_FIELDS = ("patient_id", "report_id", "date", "text")
ISO_DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}$")


def parse_iso_date(raw: str) -> dt.date:
    """Strict YYYY-MM-DD parse; ValueError otherwise"""
    if not isinstance(raw, str) or not ISO_DATE_RE.match(raw):
        raise ValueError(f"not an ISO-8601 calendar date: {raw!r}")
    return dt.date.fromisoformat(raw)


def read_reports(path: Path) -> List[ReportDocument]:
    """
    Read reports.jsonl

    Args:
        path: JSONL file, one {patient_id, report_id, date, text} object per line

    Returns:
        Documents sorted by (patient_id, date, report_id)
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"reports file not found: {path}")

    documents: List[ReportDocument] = []
    seen: Dict[str, int] = {}
    try:
        with path.open(encoding="utf-8") as fh:
            for line_number, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as e:
                    raise ParseError(f"invalid JSON: {e.msg}", line=line_number) from e
                if not isinstance(record, dict) or any(k not in record for k in REPORT_FIELDS):
                    raise ParseError(f"report needs fields {list(REPORT_FIELDS)}", line=line_number)

                try:
                    date = parse_iso_date(record["date"])
                except ValueError as e:
                    raise BadDate(str(e), line=line_number) from e

                report_id = str(record["report_id"])
                if report_id in seen:
                    raise DuplicateReportId(
                        f"report_id {report_id} already seen on line {seen[report_id]}",
                        line=line_number
                    )
                seen[report_id] = line_number

                try:
                    documents.append(ReportDocument(
                        patient_id=str(record["patient_id"]),
                        report_id=report_id,
                        date=date,
                        text=record["text"],
                    ))
                except ValidationError as e:
                    raise ParseError(e.errors()[0]["msg"], line=line_number) from e
    except UnicodeDecodeError as e:
        raise ParseError(f"reports file is not UTF-8: {e}") from e

    documents.sort(key=lambda d: (d.patient_id, d.date, d.report_id))
    logger.info(f"Loaded {len(documents)} reports from {path.name}")
    return documents


def group_by_patient(documents: Iterable[ReportDocument]) -> Dict[str, List[ReportDocument]]:
    grouped: Dict[str, List[ReportDocument]] = defaultdict(list)
    for doc in documents:
        grouped[doc.patient_id].append(doc)
    return dict(grouped)


def write_reports(documents: Iterable[ReportDocument], path: Path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            for doc in documents:
                record = {
                    "patient_id": doc.patient_id,
                    "report_id": doc.report_id,
                    "date": doc.date.isoformat(),
                    "text": doc.text,
                }
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e
    return path
