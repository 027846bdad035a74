"""
CohortForge - Tabular Dataset Writer/Reader

Dataset CSV: patient_id, index_date, the 84 predictive features in schema
order, then `label`. Unknown is an empty cell; tri-state features are
"1"/"0". Provenance lives in a JSONL sidecar next to the CSV.
"""
import datetime as dt
from pathlib import Path
from typing import Dict, Iterable, List, Optional

import pandas as pd
from loguru import logger

from app.core.exceptions import MissingFile, ParseError, SchemaMismatch
from app.models.schemas import (
    FeatureDef, FeatureSchema, FeatureValue, PatientVector, Provenance, TriState, ValueKind
)
from app.utils.io import read_csv, read_jsonl, write_csv, write_jsonl

ID_COLUMNS = ["patient_id", "index_date"]
LABEL_COLUMN = "label"


def sidecar_path(path: Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".provenance.jsonl")


def dataset_columns(schema: FeatureSchema) -> List[str]:
    return ID_COLUMNS + schema.predictive_ids + [LABEL_COLUMN]


def check_conformance(vector: PatientVector, schema: FeatureSchema) -> None:
    missing = vector.missing_features(schema)
    if missing:
        raise SchemaMismatch(f"vector lacks feature '{missing[0]}'", patient_id=vector.patient_id)
    extra = vector.extra_features(schema)
    if extra:
        raise SchemaMismatch(f"vector has unknown feature '{extra[0]}'", patient_id=vector.patient_id)


def encode_cell(feature: FeatureDef, value: FeatureValue) -> str:
    if not value.known:
        return ""
    if feature.is_boolean:
        return "1" if value.state == TriState.PRESENT else "0"
    if feature.value_kind == ValueKind.NUMERIC:
        return repr(float(value.value))
    return str(value.value)


def decode_cell(feature: FeatureDef, cell: str, provenance: Provenance) -> FeatureValue:
    if cell == "":
        return FeatureValue.unknown()
    if feature.is_boolean:
        if cell not in ("0", "1"):
            raise ParseError(f"tri-state cell must be 0/1, got {cell!r}", feature=feature.id)
        return FeatureValue.flag(cell == "1", provenance)
    if feature.value_kind == ValueKind.NUMERIC:
        try:
            return FeatureValue.observed(float(cell), provenance)
        except ValueError as e:
            raise ParseError(f"non-numeric cell {cell!r}", feature=feature.id) from e
    return FeatureValue.observed(cell, provenance)


def vectors_to_frame(vectors: Iterable[PatientVector], schema: FeatureSchema) -> pd.DataFrame:
    rows = []
    for vector in vectors:
        check_conformance(vector, schema)
        row: Dict[str, str] = {
            "patient_id": vector.patient_id,
            "index_date": vector.index_date.isoformat() if vector.index_date else "",
        }
        for feature in schema.predictive:
            row[feature.id] = encode_cell(feature, vector.values[feature.id])
        row[LABEL_COLUMN] = "" if vector.label is None else str(int(vector.label))
        rows.append(row)
    return pd.DataFrame(rows, columns=dataset_columns(schema), dtype=str)


def write_dataset(vectors: List[PatientVector], schema: FeatureSchema, path: Path) -> List[Path]:
    """
    Write a dataset CSV plus its provenance sidecar

    Args:
        vectors: Patient vectors conforming to the schema
        schema: Feature schema (column order)
        path: CSV destination; the sidecar is `<path>.provenance.jsonl`

    Returns:
        Paths of the CSV and the sidecar
    """
    frame = vectors_to_frame(vectors, schema)
    csv_path = write_csv(frame, Path(path))
    records = (
        {
            "patient_id": v.patient_id,
            "provenance": {
                fid: value.provenance.value for fid, value in v.values.items() if value.known
            },
        }
        for v in vectors
    )
    side = write_jsonl(records, sidecar_path(path))
    logger.info(f"Wrote {len(vectors)} vectors to {csv_path.name}")
    return [csv_path, side]


def read_dataset(
    path: Path,
    schema: FeatureSchema,
    assume_provenance: Optional[Provenance] = None
) -> List[PatientVector]:
    """
    Inverse of write_dataset

    Args:
        path: Dataset CSV
        schema: Feature schema the CSV must follow
        assume_provenance: Provenance for known cells when no sidecar exists

    Returns:
        Vectors in file order
    """
    path = Path(path)
    frame = read_csv(path)
    expected = dataset_columns(schema)
    if list(frame.columns) != expected:
        raise SchemaMismatch(f"{path.name} columns do not follow the schema")

    provenance: Dict[str, Dict[str, str]] = {}
    side = sidecar_path(path)
    if side.is_file():
        provenance = {r["patient_id"]: r["provenance"] for r in read_jsonl(side)}
    elif assume_provenance is None:
        raise MissingFile(f"provenance sidecar not found: {side}")

    vectors: List[PatientVector] = []
    for row_number, row in enumerate(frame.to_dict("records"), start=2):
        patient_id = row["patient_id"]
        sources = provenance.get(patient_id, {})
        values: Dict[str, FeatureValue] = {}
        for feature in schema.predictive:
            cell = row[feature.id]
            if cell == "":
                values[feature.id] = FeatureValue.unknown()
                continue
            source = sources.get(feature.id)
            if source is None and assume_provenance is None:
                raise ParseError(
                    f"no provenance for known value of '{feature.id}'",
                    patient_id=patient_id, row=row_number
                )
            values[feature.id] = decode_cell(
                feature, cell, Provenance(source) if source else assume_provenance
            )
        label = row[LABEL_COLUMN]
        vectors.append(PatientVector(
            patient_id=patient_id,
            index_date=dt.date.fromisoformat(row["index_date"]) if row["index_date"] else None,
            values=values,
            label=int(label) if label != "" else None,
        ))
    return vectors
