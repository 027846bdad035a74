"""
Tests for metrics, label agreement and the enrichment report
"""
import numpy as np
import pytest

from app.core.exceptions import (
    EmptyIntersection, EmptyMatrix, ExcludedLabelPresent, LengthMismatch, PatientSetMismatch
)
from app.models.results import ConfusionMatrix
from app.models.schemas import Category, Provenance
from app.services.evaluation import (
    ENRICHMENT_COLUMNS, accuracy, confusion, enrichment_frame, enrichment_report,
    enrichment_summary, label_agreement, mcc, metrics
)


def test_confusion_counts():
    assert confusion([1, 1, 0], [1, 0, 0]) == ConfusionMatrix(tp=1, fp=1, tn=1, fn=0)


def test_identical_vectors_have_no_errors():
    cm = confusion([1, 0, 1, 1, 0], [1, 0, 1, 1, 0])
    assert cm.fp == cm.fn == 0


def test_confusion_rejects_excluded_labels():
    with pytest.raises(ExcludedLabelPresent):
        confusion([1, 0], [1, -1])


def test_confusion_rejects_length_mismatch():
    with pytest.raises(LengthMismatch):
        confusion([1, 0], [1])


def test_mcc_examples():
    assert mcc(ConfusionMatrix(tp=5, tn=3, fp=1, fn=1)) == pytest.approx(14 / 24)
    assert mcc(ConfusionMatrix(tp=10, tn=10)) == 1.0
    assert mcc(ConfusionMatrix(tp=6, fp=4)) == 0.0
    assert mcc(ConfusionMatrix(fp=5, fn=5)) == -1.0


def test_mcc_matches_pearson_correlation():
    rng = np.random.default_rng(3)
    for _ in range(20):
        preds = rng.integers(0, 2, size=50)
        golds = rng.integers(0, 2, size=50)
        expected = np.corrcoef(preds, golds)[0, 1]
        assert mcc(confusion(preds.tolist(), golds.tolist())) == pytest.approx(expected)


def test_accuracy():
    assert accuracy(ConfusionMatrix(tp=5, tn=3, fp=1, fn=1)) == pytest.approx(0.8)
    assert accuracy(ConfusionMatrix(tp=4, tn=4)) == 1.0
    assert accuracy(ConfusionMatrix(fp=2, fn=3)) == 0.0
    with pytest.raises(EmptyMatrix):
        accuracy(ConfusionMatrix())


def test_metrics_bundle():
    result = metrics([1, 1, 0], [1, 0, 0])
    assert result["n"] == 3
    assert result["accuracy"] == pytest.approx(2 / 3)
    assert result["confusion"] == {"tp": 1, "tn": 1, "fp": 1, "fn": 0}
    assert result["mcc"] == pytest.approx(0.5)


def test_label_agreement():
    labels = {f"P{i}": i % 2 for i in range(10)}
    assert label_agreement(labels, labels) == 1.0
    gold = dict(labels, P0=1, P1=0)
    assert label_agreement(labels, gold) == pytest.approx(0.8)


def test_label_agreement_ignores_excluded_and_unshared():
    silver = {"P1": 1, "P2": -1, "P3": 0}
    gold = {"P1": 1, "P2": 0, "P4": 1}
    assert label_agreement(silver, gold) == 1.0


def test_label_agreement_disjoint():
    with pytest.raises(EmptyIntersection):
        label_agreement({"P1": 1}, {"P2": 1})


@pytest.fixture
def cohort_pair(make_vector):
    """Ten patients: albumin known for 2 structured, 6 enriched"""
    original, enriched = [], []
    for i in range(10):
        pid = f"P{i:02d}"
        structured = {"albumin": 3.9} if i < 2 else {}
        merged = {"albumin": 3.9} if i < 6 else {}
        original.append(make_vector(pid, age=70.0, hypertension=i < 3, **structured))
        enriched.append(make_vector(pid, provenance=Provenance.BOTH, age=70.0, hypertension=i < 3,
                                    copd=True if i < 5 else None, **merged))
    return original, enriched


def test_enrichment_deltas(cohort_pair, schema):
    report = enrichment_report(*cohort_pair, schema)
    albumin = report.feature("albumin")
    assert albumin.missing_pct_original == pytest.approx(80.0)
    assert albumin.missing_pct_enriched == pytest.approx(40.0)
    assert albumin.missing_delta == pytest.approx(-40.0)
    assert report.feature("weight").missing_pct_original == 100.0
    copd = report.feature("copd")
    assert copd.positive_pct_original == 0.0
    assert copd.positive_delta == pytest.approx(50.0)
    assert report.feature("hypertension").positive_delta == 0.0
    assert report.feature("albumin").positive_pct_original is None


def test_enrichment_categories(cohort_pair, schema):
    report = enrichment_report(*cohort_pair, schema)
    lab = report.category(Category.LAB)
    assert lab.missing_delta == pytest.approx(-40.0 / 18)
    assert lab.mean_positive_original is None
    summary = enrichment_summary(report)
    assert summary["n_patients"] == 10
    assert set(summary["categories"]) == {c.value for c in Category}


def test_identical_datasets_have_zero_deltas(cohort_pair, schema):
    original, _ = cohort_pair
    frame = enrichment_frame(enrichment_report(original, original, schema))
    assert list(frame.columns) == ENRICHMENT_COLUMNS
    assert (frame["delta"] == 0).all()


def test_enrichment_requires_same_patients(cohort_pair, schema):
    original, enriched = cohort_pair
    with pytest.raises(PatientSetMismatch):
        enrichment_report(original, enriched[:-1], schema)
