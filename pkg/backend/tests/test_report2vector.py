"""
Tests for Report2Vector
"""
import datetime as dt

import pytest

from app.core.exceptions import MixedPatients
from app.models.schemas import Provenance, TriState
from app.services.nlp.report2vector import report_to_vector

INDEX = dt.date(2018, 3, 1)


def test_affirmed_and_negated_history(schema, analyzer, make_report):
    report = make_report("ANTECEDENTES PERSONALES:\nHTA. No diabetes mellitus.\n")
    vector = report_to_vector([report], schema, analyzer, INDEX)
    assert vector.patient_id == "P1"
    assert vector.get("hypertension").state == TriState.PRESENT
    assert vector.get("diabetes").state == TriState.ABSENT
    assert vector.get("copd").state == TriState.UNKNOWN
    assert vector.get("hypertension").provenance == Provenance.REPORT
    assert vector.get("copd").provenance == Provenance.NONE


def test_zero_reports(schema, analyzer):
    vector = report_to_vector([], schema, analyzer, INDEX, patient_id="P7")
    assert vector.patient_id == "P7"
    assert not vector.missing_features(schema)
    assert all(not v.known and v.provenance == Provenance.NONE for v in vector.values.values())


def test_latest_numeric_value_wins(schema, analyzer, make_report):
    later = make_report("ECOCARDIOGRAMA: FEVI 45%.", day=dt.date(2018, 2, 1))
    earlier = make_report("ECOCARDIOGRAMA: FEVI 55%.", day=dt.date(2018, 1, 1))
    vector = report_to_vector([later, earlier], schema, analyzer, INDEX)
    assert vector.get("lvef").value == 45.0
    assert vector.get("echocardiogram").state == TriState.PRESENT


def test_one_affirmation_outweighs_negations(schema, analyzer, make_report):
    reports = [
        make_report("Niega EPOC.", day=dt.date(2017, 5, 1)),
        make_report("Diagnosticado de EPOC.", day=dt.date(2018, 1, 10)),
    ]
    vector = report_to_vector(reports, schema, analyzer, INDEX)
    assert vector.get("copd").state == TriState.PRESENT


def test_reports_after_index_are_ignored(schema, analyzer, make_report):
    reports = [
        make_report("Tiene HTA.", day=dt.date(2018, 2, 1)),
        make_report("Se diagnostica EPOC.", day=dt.date(2018, 4, 1)),
    ]
    vector = report_to_vector(reports, schema, analyzer, INDEX)
    assert vector.get("hypertension").state == TriState.PRESENT
    assert vector.get("copd").state == TriState.UNKNOWN


def test_categorical_and_numeric_values(schema, analyzer, make_report):
    text = (
        "ENFERMEDAD ACTUAL:\nMujer de 76 años con FA persistente.\n"
        "PRUEBAS COMPLEMENTARIAS:\nAI de 44 mm. Albúmina 34 g/L.\n"
    )
    vector = report_to_vector([make_report(text)], schema, analyzer, INDEX)
    assert vector.get("sex").value == "F"
    assert vector.get("age").value == 76.0
    assert vector.get("af_type").value == "persistent"
    assert vector.get("la_diameter").value == 44.0
    assert vector.get("albumin").value == pytest.approx(3.4)


def test_negated_categorical_mention_sets_nothing(schema, analyzer, make_report):
    vector = report_to_vector([make_report("No se evidencia FA persistente.")], schema, analyzer, INDEX)
    assert vector.get("af_type").state == TriState.UNKNOWN


def test_mixed_patients_rejected(schema, analyzer, make_report):
    reports = [make_report("HTA."), make_report("DM.", patient_id="P2")]
    with pytest.raises(MixedPatients):
        report_to_vector(reports, schema, analyzer, INDEX)


def test_label_slot_is_never_filled(schema, analyzer, make_report):
    vector = report_to_vector([make_report("FA paroxística.")], schema, analyzer, INDEX)
    assert vector.label is None
    assert schema.label_id not in vector.values
