"""
Tests for the synthetic corpus generator
"""
import numpy as np
import pandas as pd
import pytest
from scipy.stats import chi2_contingency

from app.core.exceptions import InvalidConfig
from app.models.results import GEN_PROFILES, CohortRole, GenConfig
from app.models.schemas import Category
from app.services.ingest.reports import group_by_patient, read_reports
from app.services.ingest.structured import read_structured
from app.services.labeler import label_patient
from app.services.nlp.report2vector import report_to_vector
from app.services.scores import binarize, score_all
from app.services.structured2vector import structured_to_vector
from app.services.synth.generator import (
    GOLD_LABELS_FILE, PRESENT, REPORTS_FILE, SIGNAL_FLAG, generate, gold_labels, plant_signal,
    read_gold_labels, read_ground_truth, sample_truth, stratified_labels, truth_to_vector
)
from app.services.vector_merger import merge


def labeled(truths):
    return [t for t in truths if t.label in (0, 1)]


def test_same_seed_is_byte_identical(tmp_path, schema, lexicon, code_map):
    config = GenConfig(n_patients=40, seed=11)
    first = generate(config, schema, lexicon, code_map, tmp_path / "a")
    second = generate(config, schema, lexicon, code_map, tmp_path / "b", jobs=2)
    assert [p.name for p in first.files] == [p.name for p in second.files]
    for a, b in zip(first.files, second.files):
        assert a.read_bytes() == b.read_bytes(), a.name


def test_different_seeds_differ(schema):
    a = sample_truth(GenConfig(n_patients=40, seed=1), schema)
    b = sample_truth(GenConfig(n_patients=40, seed=2), schema)
    assert [t.features for t in a] != [t.features for t in b]


@pytest.mark.parametrize("profile", sorted(GEN_PROFILES))
def test_profiles_plant_exact_positive_counts(schema, profile):
    config = GenConfig.for_profile(profile, seed=42)
    n_patients, rate = GEN_PROFILES[profile]
    truths = labeled(sample_truth(config, schema))
    assert len(truths) == n_patients
    assert sum(t.label for t in truths) == round(n_patients * rate)


def test_default_cohort_shape(schema):
    truths = sample_truth(GenConfig(seed=42), schema)
    positives = sum(t.label for t in labeled(truths))
    assert positives == 669
    assert abs(positives / 1023 - 0.654) < 0.02
    roles = {t.role for t in truths}
    assert roles == set(CohortRole)
    assert sum(t.label == -1 for t in truths) == round(1023 * 0.05)
    assert all(t.onset_date is None for t in truths if t.role == CohortRole.NO_AF_CODE)
    assert all(t.label is None for t in truths if not t.in_cohort)


def test_labels_independent_of_scores_without_signal(schema):
    truths = labeled(sample_truth(GenConfig(seed=42), schema))
    for position in range(3):
        table = np.zeros((2, 2), dtype=int)
        for truth in truths:
            results = list(score_all(truth_to_vector(truth, schema)).values())
            table[int(binarize(results[position])), truth.label] += 1
        _, p_value, _, _ = chi2_contingency(table)
        assert p_value > 0.01


def test_stratified_labels_are_proportional():
    rng = np.random.default_rng(0)
    strata = [("a",)] * 60 + [("b",)] * 40
    labels = stratified_labels(strata, 50, rng)
    assert sum(labels) == 50
    assert sum(labels[:60]) == 30
    assert stratified_labels([], 0, rng) == []


def test_full_strength_signal_determines_flag(schema):
    truths = labeled(sample_truth(plant_signal(GenConfig(n_patients=300, seed=5), 1.0), schema))
    assert all(t.signal_planted for t in truths)
    assert all((t.features[SIGNAL_FLAG] == PRESENT) == (t.label == 1) for t in truths)
    low = max(t.features["nt_probnp"] for t in truths if t.label == 0)
    high = min(t.features["nt_probnp"] for t in truths if t.label == 1)
    assert low < high


def test_half_strength_signal_is_recountable(tmp_path, schema, lexicon, code_map):
    config = plant_signal(GenConfig(n_patients=300, seed=5), 0.5)
    corpus = generate(config, schema, lexicon, code_map, tmp_path)
    truths = labeled(read_ground_truth(tmp_path / "ground_truth.jsonl"))
    planted = [t for t in truths if t.signal_planted]
    assert 0.4 < len(planted) / len(truths) < 0.6
    assert all((t.features[SIGNAL_FLAG] == PRESENT) == (t.label == 1) for t in planted)
    assert read_ground_truth(tmp_path / "ground_truth.jsonl") == corpus.truths


def test_signal_strength_out_of_range():
    with pytest.raises(InvalidConfig):
        plant_signal(GenConfig(), 1.5)


def test_gold_labels_file(zero_noise_corpus):
    gold = read_gold_labels(zero_noise_corpus.directory / GOLD_LABELS_FILE)
    assert gold == gold_labels(zero_noise_corpus.truths)
    assert gold
    assert all(zero_noise_corpus.truths[int(pid[1:]) - 1].gold for pid in gold)


def test_report_facts_match_written_reports(zero_noise_corpus):
    written = {r.report_id for r in read_reports(zero_noise_corpus.directory / REPORTS_FILE)}
    planned = {f.report_id for t in zero_noise_corpus.truths for f in t.reports if not f.dropped}
    assert written == planned


def test_zero_noise_corpus_is_fully_recoverable(zero_noise_corpus, schema, code_map, analyzer):
    store = read_structured(zero_noise_corpus.directory)
    reports = group_by_patient(read_reports(zero_noise_corpus.directory / REPORTS_FILE))
    cohort = [t for t in zero_noise_corpus.truths if t.in_cohort]
    assert cohort
    for truth in cohort:
        structured = structured_to_vector(store, truth.patient_id, schema, code_map, truth.onset_date)
        from_reports = report_to_vector(
            reports.get(truth.patient_id, []), schema, analyzer, truth.onset_date, truth.patient_id
        )
        merged, conflicts = merge(structured, from_reports)
        expected = truth_to_vector(truth, schema)
        assert conflicts == [], truth.patient_id
        mismatched = [
            fid for fid in schema.predictive_ids if not merged.get(fid).same_reading(expected.get(fid))
        ]
        assert mismatched == [], truth.patient_id


@pytest.mark.slow
def test_realized_lab_missingness(tmp_path, schema, lexicon, code_map):
    config = GenConfig(seed=42, report_coverage=0.0)
    corpus = generate(config, schema, lexicon, code_map, tmp_path)
    labs = pd.read_csv(tmp_path / "labs.csv", dtype=str)
    # creatinine also gets post-index follow-up rows
    at_index = labs[labs["test_code"] != "CREA"]
    n_tests = len(schema.by_category(Category.LAB)) - 1
    observed = len(at_index[["patient_id", "test_code"]].drop_duplicates())
    realized = 1.0 - observed / (len(corpus.truths) * n_tests)
    assert abs(realized - 0.5) < 0.03


DROPOUT_RATES = [0.0, 0.2, 0.5, 0.8]


@pytest.fixture(scope="module")
def accuracy_by_dropout(tmp_path_factory, schema, lexicon, code_map, analyzer):
    """Share of cohort patients whose silver label equals the planted one, per dropout rate"""
    accuracy = {}
    for rate in DROPOUT_RATES:
        config = GenConfig(n_patients=200, seed=13).zero_noise().model_copy(update={"report_dropout_rate": rate})
        out_dir = tmp_path_factory.mktemp(f"dropout_{int(rate * 100)}")
        corpus = generate(config, schema, lexicon, code_map, out_dir)
        reports = group_by_patient(read_reports(out_dir / REPORTS_FILE))
        cohort = [t for t in corpus.truths if t.in_cohort]
        correct = sum(
            label_patient(t.patient_id, t.onset_date, reports.get(t.patient_id, []), analyzer).label == t.label
            for t in cohort
        )
        accuracy[rate] = correct / len(cohort)
    return accuracy


def test_no_dropout_keeps_every_label(accuracy_by_dropout):
    assert accuracy_by_dropout[0.0] == 1.0


@pytest.mark.parametrize("lower,higher", list(zip(DROPOUT_RATES, DROPOUT_RATES[1:])))
def test_label_accuracy_falls_with_dropout(accuracy_by_dropout, lower, higher):
    assert accuracy_by_dropout[higher] < accuracy_by_dropout[lower]
