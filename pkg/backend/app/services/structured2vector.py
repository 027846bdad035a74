"""
CohortForge - Structured2Vector

Extracts the predictive features from coded EHR tables for one patient,
frozen at an index date.
"""
import datetime as dt
from typing import Dict, Optional

import pandas as pd
from loguru import logger

from app.core.exceptions import FutureBirthDate, UnknownPatient
from app.models.schemas import (
    CodeMap, FeatureSchema, FeatureValue, PatientVector, Provenance, StructuredStore, ValueKind
)


def age_at(birth_date: dt.date, index_date: dt.date) -> int:
    """Completed years between birth_date and index_date"""
    if birth_date > index_date:
        raise FutureBirthDate(f"birth date {birth_date} is after {index_date}")
    before_birthday = (index_date.month, index_date.day) < (birth_date.month, birth_date.day)
    return index_date.year - birth_date.year - int(before_birthday)


def _up_to(frame: pd.DataFrame, index_date: dt.date, lookback_days: Optional[int] = None) -> pd.DataFrame:
    """Rows dated at/before the index (and inside the lookback, if any), oldest first"""
    cutoff = pd.Timestamp(index_date)
    mask = frame["date"] <= cutoff
    if lookback_days is not None:
        mask &= frame["date"] >= cutoff - pd.Timedelta(days=lookback_days)
    return frame[mask].sort_values("date", kind="mergesort")


def structured_to_vector(
    store: StructuredStore,
    patient_id: str,
    schema: FeatureSchema,
    code_map: CodeMap,
    index_date: dt.date,
    lab_lookback_days: Optional[int] = None
) -> PatientVector:
    """
    Build the structured-side vector for one patient

    Args:
        store: Loaded EHR tables
        patient_id: Patient present in demographics
        schema: Feature schema
        code_map: Code prefix rules and lab conversions
        index_date: Rows after this date are ignored
        lab_lookback_days: Optional bound on how old a lab/procedure value may be

    Returns:
        PatientVector whose known slots are Present/valued with provenance Structured
    """
    demographics = store.demographics_for(patient_id)
    if demographics is None:
        raise UnknownPatient(f"patient {patient_id} not in demographics", patient_id=patient_id)

    vector = PatientVector.empty(schema, patient_id, index_date)
    values: Dict[str, FeatureValue] = dict(vector.values)

    def put(feature_id: str, value: FeatureValue) -> None:
        if schema.has(feature_id) and feature_id != schema.label_id:
            values[feature_id] = value

    birth_date = demographics["birth_date"].date()
    put("age", FeatureValue.observed(age_at(birth_date, index_date), Provenance.STRUCTURED))
    if demographics["sex"]:
        put("sex", FeatureValue.observed(demographics["sex"], Provenance.STRUCTURED))

    # Coded diagnoses and prescriptions: Present only, latest code sets categorical values
    diagnoses = _up_to(store.rows_for("diagnoses", patient_id), index_date)
    for row in diagnoses.itertuples(index=False):
        rule = code_map.match_diagnosis(row.code_system, row.code)
        if rule is None:
            continue
        if rule.value is not None:
            put(rule.feature_id, FeatureValue.observed(rule.value, Provenance.STRUCTURED))
        elif schema.has(rule.feature_id) and schema.get(rule.feature_id).is_boolean:
            put(rule.feature_id, FeatureValue.flag(True, Provenance.STRUCTURED))

    prescriptions = _up_to(store.rows_for("prescriptions", patient_id), index_date)
    for row in prescriptions.itertuples(index=False):
        rule = code_map.match_prescription("ATC", row.atc_code)
        if rule is not None:
            put(rule.feature_id, FeatureValue.flag(True, Provenance.STRUCTURED))

    procedures = _up_to(store.rows_for("procedures", patient_id), index_date)
    for row in procedures.itertuples(index=False):
        rule = code_map.match_procedure(row.code)
        if rule is not None:
            put(rule.feature_id, FeatureValue.flag(True, Provenance.STRUCTURED))

    # Numeric values: most recent row wins
    recent_procedures = _up_to(store.rows_for("procedures", patient_id), index_date, lab_lookback_days)
    for row in recent_procedures.itertuples(index=False):
        conversion = code_map.procedure_values.get(row.code)
        if conversion is None or not str(row.outcome).strip():
            continue
        try:
            raw = float(str(row.outcome).replace(",", "."))
        except ValueError:
            logger.warning(f"Patient {patient_id}: procedure {row.code} outcome {row.outcome!r} is not numeric")
            continue
        put(conversion.feature_id, FeatureValue.observed(round(raw * conversion.scale, 6), Provenance.STRUCTURED))

    labs = _up_to(store.rows_for("labs", patient_id), index_date, lab_lookback_days)
    for row in labs.itertuples(index=False):
        conversion = code_map.labs.get(row.test_code)
        if conversion is None:
            continue
        kind = schema.get(conversion.feature_id).value_kind if schema.has(conversion.feature_id) else None
        if kind == ValueKind.NUMERIC:
            put(conversion.feature_id, FeatureValue.observed(
                round(float(row.value) * conversion.scale, 6), Provenance.STRUCTURED
            ))

    return vector.model_copy(update={"values": values})
