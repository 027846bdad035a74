"""
CohortForge - Clinical Risk Scores

CHA2DS2-VASc, HATCH and APPLE computed from a patient vector. Unknown
components score 0 and are not counted as known.
"""
from typing import Callable, Dict, List, Optional, Tuple

import pandas as pd
from loguru import logger

from app.core.exceptions import MissingAge
from app.models.results import ScoreName, ScoreResult
from app.models.schemas import FeatureValue, PatientVector, TriState

SCORE_FEATURES = (
    "age", "sex", "heart_failure", "hypertension", "diabetes", "stroke_tia",
    "vascular_disease", "copd", "af_type", "egfr", "la_diameter", "lvef",
)
SCORES_COLUMNS = [
    "patient_id", "chads2vasc", "hatch", "apple",
    "chads2vasc_pred", "hatch_pred", "apple_pred",
]

# (points, known) for one component
Component = Tuple[int, bool]


def _age(v: PatientVector) -> float:
    value = v.get("age")
    if not value.known or value.value is None:
        raise MissingAge(f"age unknown for {v.patient_id}", patient_id=v.patient_id)
    return float(value.value)


def _flag(value: FeatureValue, points: int) -> Component:
    if not value.known:
        return 0, False
    return (points if value.state == TriState.PRESENT else 0), True


def _compare(value: FeatureValue, test: Callable[[object], bool]) -> Component:
    if not value.known or value.value is None:
        return 0, False
    return int(test(value.value)), True


def _result(name: ScoreName, components: List[Component]) -> ScoreResult:
    return ScoreResult(
        score_name=name,
        points=sum(points for points, _ in components),
        known_components=sum(known for _, known in components),
        total_components=len(components),
    )


def chads2vasc(v: PatientVector) -> ScoreResult:
    """C1 H1 A2(>=75) D1 S2 V1 A(65-74)1 Sc(female)1, maximum 9"""
    age = _age(v)
    components = [
        _flag(v.get("heart_failure"), 1),
        _flag(v.get("hypertension"), 1),
        (2 if age >= 75 else 0, True),
        _flag(v.get("diabetes"), 1),
        _flag(v.get("stroke_tia"), 2),
        _flag(v.get("vascular_disease"), 1),
        (1 if 65 <= age < 75 else 0, True),
        _compare(v.get("sex"), lambda s: s == "F"),
    ]
    return _result(ScoreName.CHADS2VASC, components)


def hatch(v: PatientVector) -> ScoreResult:
    """H1 A(>75)1 T2 C(COPD)1 H(heart failure)2, maximum 7"""
    age = _age(v)
    components = [
        _flag(v.get("hypertension"), 1),
        (1 if age > 75 else 0, True),
        _flag(v.get("stroke_tia"), 2),
        _flag(v.get("copd"), 1),
        _flag(v.get("heart_failure"), 2),
    ]
    return _result(ScoreName.HATCH, components)


def apple(v: PatientVector) -> ScoreResult:
    """Age >65, persistent AF, eGFR <60, LA >=43 mm, LVEF <50%; maximum 5"""
    age = _age(v)
    components = [
        (1 if age > 65 else 0, True),
        _compare(v.get("af_type"), lambda t: t == "persistent"),
        _compare(v.get("egfr"), lambda x: float(x) < 60),
        _compare(v.get("la_diameter"), lambda x: float(x) >= 43),
        _compare(v.get("lvef"), lambda x: float(x) < 50),
    ]
    return _result(ScoreName.APPLE, components)


SCORERS: Dict[ScoreName, Callable[[PatientVector], ScoreResult]] = {
    ScoreName.CHADS2VASC: chads2vasc,
    ScoreName.HATCH: hatch,
    ScoreName.APPLE: apple,
}


def binarize(result: ScoreResult, threshold: int = 2) -> bool:
    return result.points >= threshold


def score_all(v: PatientVector, threshold: int = 2) -> Dict[ScoreName, ScoreResult]:
    """All three scores with their binary predictions filled in"""
    results = {}
    for name, scorer in SCORERS.items():
        result = scorer(v)
        results[name] = result.model_copy(update={"prediction": binarize(result, threshold)})
    return results


def score_vectors(vectors: List[PatientVector], threshold: int = 2) -> pd.DataFrame:
    """scores.csv rows; vectors with unknown age are skipped with a warning"""
    rows = []
    for v in sorted(vectors, key=lambda x: x.patient_id):
        try:
            results = score_all(v, threshold)
        except MissingAge:
            logger.warning(f"Skipping scores for {v.patient_id}: age unknown")
            continue
        row: Dict[str, Optional[str]] = {"patient_id": v.patient_id}
        for name, column in zip(SCORERS, ("chads2vasc", "hatch", "apple")):
            row[column] = str(results[name].points)
            row[f"{column}_pred"] = str(int(results[name].prediction))
        rows.append(row)
    return pd.DataFrame(rows, columns=SCORES_COLUMNS, dtype=str)
