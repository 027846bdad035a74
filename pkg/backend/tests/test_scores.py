"""
Tests for CHA2DS2-VASc, HATCH and APPLE
"""
import itertools

import pytest

from app.core.exceptions import MissingAge
from app.models.results import SCORE_MAXIMA, ScoreName, ScoreResult
from app.services.scores import (
    SCORES_COLUMNS, apple, binarize, chads2vasc, hatch, score_all, score_vectors
)

CHADS_FLAGS = ("heart_failure", "hypertension", "diabetes", "stroke_tia", "vascular_disease")
HATCH_FLAGS = ("hypertension", "stroke_tia", "copd", "heart_failure")


def absent(*features):
    return {f: False for f in features}


def test_chads2vasc_examples(make_vector):
    older_woman = make_vector(age=76.0, sex="F", **{**absent(*CHADS_FLAGS), "hypertension": True})
    assert chads2vasc(older_woman).points == 4
    young_man = make_vector(age=40.0, sex="M", **absent(*CHADS_FLAGS))
    assert chads2vasc(young_man).points == 0
    septuagenarian = make_vector(
        age=70.0, sex="M", **{**absent(*CHADS_FLAGS), "diabetes": True, "stroke_tia": True}
    )
    assert chads2vasc(septuagenarian).points == 4


@pytest.mark.parametrize("age,points", [(64.0, 0), (65.0, 1), (74.0, 1), (75.0, 2)])
def test_chads2vasc_age_bands(make_vector, age, points):
    assert chads2vasc(make_vector(age=age, sex="M", **absent(*CHADS_FLAGS))).points == points


def test_hatch_examples(make_vector):
    assert hatch(make_vector(age=60.0, **{**absent(*HATCH_FLAGS), "hypertension": True,
                                         "heart_failure": True})).points == 3
    assert hatch(make_vector(age=80.0, **absent(*HATCH_FLAGS))).points == 1
    assert hatch(make_vector(age=60.0, **absent(*HATCH_FLAGS))).points == 0
    assert hatch(make_vector(age=75.0, **absent(*HATCH_FLAGS))).points == 0


def test_apple_examples(make_vector):
    full = make_vector(age=70.0, af_type="persistent", egfr=45.0, la_diameter=45.0, lvef=40.0)
    assert apple(full).points == 5
    clean = make_vector(age=50.0, af_type="paroxysmal", egfr=90.0, la_diameter=38.0, lvef=60.0)
    assert apple(clean).points == 0
    partial = apple(make_vector(age=70.0, af_type="paroxysmal", egfr=90.0, lvef=60.0))
    assert partial.points == 1
    assert partial.known_components == 4
    assert partial.total_components == 5


def test_apple_thresholds_are_strict_where_stated(make_vector):
    edge = make_vector(age=65.0, af_type="permanent", egfr=60.0, la_diameter=43.0, lvef=50.0)
    assert apple(edge).points == 1


def test_unknown_components_score_zero(make_vector):
    result = chads2vasc(make_vector(age=80.0))
    assert result.points == 2
    assert result.known_components == 2
    assert result.total_components == 8


def test_missing_age(make_vector):
    for scorer in (chads2vasc, hatch, apple):
        with pytest.raises(MissingAge):
            scorer(make_vector(sex="F", hypertension=True))


def test_score_maxima_and_monotonicity(make_vector):
    best = {name: 0 for name in ScoreName}
    for flags in itertools.product([False, True], repeat=len(CHADS_FLAGS) + 1):
        *history, copd = flags
        base = dict(zip(CHADS_FLAGS, history), copd=copd)
        for age, sex in itertools.product((40.0, 70.0, 80.0), ("F", "M")):
            vector = make_vector(age=age, sex=sex, af_type="persistent", egfr=30.0,
                                 la_diameter=50.0, lvef=30.0, **base)
            for name, result in score_all(vector).items():
                assert 0 <= result.points <= SCORE_MAXIMA[name]
                best[name] = max(best[name], result.points)
            for feature, present in base.items():
                if present:
                    continue
                raised = make_vector(age=age, sex=sex, af_type="persistent", egfr=30.0,
                                     la_diameter=50.0, lvef=30.0, **{**base, feature: True})
                for scorer in (chads2vasc, hatch):
                    assert scorer(raised).points >= scorer(vector).points
    assert best == SCORE_MAXIMA


@pytest.mark.parametrize("points,expected", [(0, False), (1, False), (2, True), (3, True)])
def test_binarize(points, expected):
    result = ScoreResult(score_name=ScoreName.CHADS2VASC, points=points, known_components=8,
                         total_components=8)
    assert binarize(result) is expected


def test_binarize_custom_threshold():
    result = ScoreResult(score_name=ScoreName.HATCH, points=2, known_components=5, total_components=5)
    assert binarize(result, threshold=3) is False


def test_score_out_of_range_rejected():
    with pytest.raises(ValueError):
        ScoreResult(score_name=ScoreName.APPLE, points=6, known_components=5, total_components=5)


def test_score_vectors_skips_unknown_age(make_vector):
    vectors = [make_vector("P2", age=76.0, sex="F", hypertension=True), make_vector("P1")]
    frame = score_vectors(vectors)
    assert list(frame.columns) == SCORES_COLUMNS
    assert frame["patient_id"].tolist() == ["P2"]
    assert frame.loc[0, "chads2vasc"] == "4"
    assert frame.loc[0, "chads2vasc_pred"] == "1"
