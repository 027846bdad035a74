"""
Tests for Structured2Vector
"""
import datetime as dt

import pytest

from app.core.exceptions import FutureBirthDate, UnknownPatient
from app.models.schemas import Category, Provenance, TriState
from app.services.ingest.structured import read_structured
from app.services.structured2vector import age_at, structured_to_vector

INDEX = dt.date(2018, 3, 1)


@pytest.fixture
def store(structured_dir):
    return read_structured(structured_dir)


@pytest.mark.parametrize("birth,index,expected", [
    (dt.date(1950, 6, 15), dt.date(2020, 6, 14), 69),
    (dt.date(1950, 6, 15), dt.date(2020, 6, 15), 70),
    (dt.date(2000, 2, 29), dt.date(2000, 2, 29), 0),
    (dt.date(2000, 2, 29), dt.date(2001, 2, 28), 0),
])
def test_age_at(birth, index, expected):
    assert age_at(birth, index) == expected


def test_age_at_rejects_future_birth():
    with pytest.raises(FutureBirthDate):
        age_at(dt.date(2021, 1, 1), dt.date(2020, 1, 1))


def test_structured_vector_at_index(store, schema, code_map):
    vector = structured_to_vector(store, "P1", schema, code_map, INDEX)
    assert vector.get("age").value == 75.0
    assert vector.get("sex").value == "F"
    assert vector.get("hypertension").state == TriState.PRESENT
    assert vector.get("af_type").value == "paroxysmal"
    assert vector.get("echocardiogram").state == TriState.PRESENT
    assert vector.get("lvef").value == 45.0
    assert all(v.provenance == Provenance.STRUCTURED for v in vector.values.values() if v.known)


def test_diagnosis_before_index(store, schema, code_map):
    assert structured_to_vector(store, "P1", schema, code_map, INDEX).get("diabetes").state == TriState.UNKNOWN
    later = structured_to_vector(store, "P1", schema, code_map, dt.date(2018, 10, 1))
    assert later.get("diabetes").state == TriState.PRESENT


def test_most_recent_lab_wins(store, schema, code_map):
    vector = structured_to_vector(store, "P1", schema, code_map, INDEX)
    assert vector.get("nt_probnp").value == 1500.0


def test_lab_unit_conversion(store, schema, code_map):
    vector = structured_to_vector(store, "P1", schema, code_map, INDEX)
    assert vector.get("albumin").value == pytest.approx(3.5)


def test_rows_after_index_do_not_leak(store, schema, code_map):
    vector = structured_to_vector(store, "P1", schema, code_map, INDEX)
    assert vector.get("creatinine").state == TriState.UNKNOWN


def test_codes_never_produce_absent(store, schema, code_map):
    vector = structured_to_vector(store, "P1", schema, code_map, INDEX)
    assert all(v.state != TriState.ABSENT for v in vector.values.values())


def test_demographics_only_patient(store, schema, code_map):
    vector = structured_to_vector(store, "P2", schema, code_map, dt.date(2016, 1, 1))
    assert vector.get("age").value == 55.0
    assert vector.get("sex").value == "M"
    non_demographic = [f.id for f in schema.predictive if f.category != Category.DEMOGRAPHIC]
    assert all(not vector.get(fid).known for fid in non_demographic)


def test_prescription_prefix(store, schema, code_map):
    vector = structured_to_vector(store, "P2", schema, code_map, dt.date(2019, 6, 1))
    assert vector.get("doac").state == TriState.PRESENT
    assert vector.get("copd").state == TriState.PRESENT
    assert vector.get("af_type").value == "persistent"


def test_lab_lookback(store, schema, code_map):
    recent = structured_to_vector(store, "P1", schema, code_map, INDEX, lab_lookback_days=5)
    assert recent.get("nt_probnp").value == 1500.0
    assert recent.get("lvef").state == TriState.UNKNOWN
    assert recent.get("echocardiogram").state == TriState.PRESENT
    stale = structured_to_vector(store, "P1", schema, code_map, INDEX, lab_lookback_days=3)
    assert stale.get("nt_probnp").state == TriState.UNKNOWN


def test_unknown_patient(store, schema, code_map):
    with pytest.raises(UnknownPatient):
        structured_to_vector(store, "P9", schema, code_map, INDEX)
