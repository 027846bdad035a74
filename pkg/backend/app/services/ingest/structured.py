"""
CohortForge - Structured EHR Table Loader
"""
from pathlib import Path
from typing import Dict, List

import pandas as pd
from loguru import logger

from app.core.exceptions import MissingTable, OrphanRow, ParseError
from app.models.schemas import StructuredStore
from app.utils.io import read_csv, write_csv

TABLE_COLUMNS: Dict[str, List[str]] = {
    "demographics": ["patient_id", "birth_date", "sex"],
    "diagnoses": ["patient_id", "date", "code_system", "code"],
    "labs": ["patient_id", "date", "test_code", "value", "unit"],
    "procedures": ["patient_id", "date", "code", "outcome"],
    "prescriptions": ["patient_id", "date", "atc_code"],
}
DATE_COLUMN = {"demographics": "birth_date"}
VALID_SEX = {"", "F", "M"}


def _line(position: int) -> int:
    # data row 0 sits on file line 2
    return position + 2


def _load_table(directory: Path, table: str) -> pd.DataFrame:
    path = directory / f"{table}.csv"
    if not path.is_file():
        raise MissingTable(f"table {table} not found in {directory}", table=table)

    try:
        frame = read_csv(path)
    except pd.errors.ParserError as e:
        raise ParseError(f"malformed CSV: {e}", table=table) from e

    columns = TABLE_COLUMNS[table]
    if frame.empty and not len(frame.columns):
        return pd.DataFrame({c: pd.Series(dtype=str) for c in columns})
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise ParseError(f"missing columns {missing}", table=table, row=1)
    frame = frame[columns].reset_index(drop=True)

    blank = frame.index[frame["patient_id"].str.strip() == ""]
    if len(blank):
        raise ParseError("empty patient_id", table=table, row=_line(blank[0]))

    date_column = DATE_COLUMN.get(table, "date")
    parsed = pd.to_datetime(frame[date_column], format="%Y-%m-%d", errors="coerce")
    bad = frame.index[parsed.isna()]
    if len(bad):
        raw = frame.at[bad[0], date_column]
        raise ParseError(f"invalid date {raw!r}", table=table, row=_line(bad[0]))
    frame[date_column] = parsed
    return frame


def _clean_labs(labs: pd.DataFrame) -> pd.DataFrame:
    values = pd.to_numeric(labs["value"].str.replace(",", ".", regex=False), errors="coerce")
    bad = labs.index[values.isna()]
    for position in bad:
        logger.warning(
            f"Dropping lab row {_line(position)} ({labs.at[position, 'test_code']}): "
            f"unparsable value {labs.at[position, 'value']!r}"
        )
    labs = labs.assign(value=values)
    return labs.drop(index=bad)


def read_structured(directory: Path) -> StructuredStore:
    """
    Load and cross-validate the five coded EHR tables

    Args:
        directory: Folder holding demographics/diagnoses/labs/procedures/prescriptions CSVs

    Returns:
        Immutable StructuredStore with tables sorted independently of input order
    """
    directory = Path(directory)
    frames = {table: _load_table(directory, table) for table in TABLE_COLUMNS}

    demographics = frames["demographics"]
    duplicated = demographics.index[demographics["patient_id"].duplicated()]
    if len(duplicated):
        raise ParseError(
            f"duplicate patient {demographics.at[duplicated[0], 'patient_id']}",
            table="demographics", row=_line(duplicated[0])
        )
    bad_sex = demographics.index[~demographics["sex"].isin(VALID_SEX)]
    if len(bad_sex):
        raise ParseError(
            f"sex must be F or M, got {demographics.at[bad_sex[0], 'sex']!r}",
            table="demographics", row=_line(bad_sex[0])
        )

    known = set(demographics["patient_id"])
    for table in StructuredStore.CHILD_TABLES:
        frame = frames[table]
        orphans = frame.index[~frame["patient_id"].isin(known)]
        if len(orphans):
            raise OrphanRow(
                "row references a patient missing from demographics",
                table=table, row=_line(orphans[0]),
                patient_id=frame.at[orphans[0], "patient_id"]
            )

    frames["labs"] = _clean_labs(frames["labs"])
    for table, frame in frames.items():
        frames[table] = frame.sort_values(
            TABLE_COLUMNS[table], kind="mergesort"
        ).reset_index(drop=True)

    store = StructuredStore(**frames)
    logger.info(
        f"Loaded structured store: {len(demographics)} patients, "
        f"{len(frames['diagnoses'])} diagnoses, {len(frames['labs'])} labs, "
        f"{len(frames['procedures'])} procedures, {len(frames['prescriptions'])} prescriptions"
    )
    return store


def write_structured(frames: Dict[str, pd.DataFrame], directory: Path) -> List[Path]:
    """Write the five tables (string cells) with their canonical headers"""
    directory = Path(directory)
    written = []
    for table, columns in TABLE_COLUMNS.items():
        frame = frames.get(table)
        if frame is None or frame.empty:
            frame = pd.DataFrame(columns=columns)
        written.append(write_csv(frame[columns], directory / f"{table}.csv"))
    return written
