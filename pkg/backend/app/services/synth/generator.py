"""
CohortForge - Synthetic Corpus Generator

Plants a ground truth per patient (features, AF onset, progression label)
and renders it as structured EHR rows plus Spanish-style discharge reports
with controllable coverage, negation, dropout and missingness.
"""
import datetime as dt
import math
from collections import defaultdict
from functools import partial
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field

from app.core.exceptions import InvalidConfig
from app.models.results import CohortRole, GenConfig, GroundTruth, ReportFact
from app.models.schemas import (
    AF_FEATURE, Category, CodeMap, FeatureSchema, FeatureValue, LabRule, Lexicon, PatientVector,
    ProgressionWindow, Provenance, ReportDocument, ValueKind
)
from app.services.ingest.reports import write_reports
from app.services.ingest.structured import TABLE_COLUMNS, write_structured
from app.services.scores import binarize, score_all
from app.services.synth import templates
from app.utils.io import read_csv, read_jsonl, write_csv, write_jsonl
from app.utils.parallel import parallel_map

GROUND_TRUTH_FILE = "ground_truth.jsonl"
GOLD_LABELS_FILE = "gold_labels.csv"
REPORTS_FILE = "reports.jsonl"

PRESENT = "Present"
ABSENT = "Absent"

# Random streams: one generator per (seed, stream[, patient])
STREAM_COHORT = 0
STREAM_FEATURES = 1
STREAM_SIGNAL = 2
STREAM_REPORTS = 3
STREAM_MISSINGNESS = 4
STREAM_DROPOUT = 5

BOOLEAN_PREVALENCE: Dict[str, float] = {
    "smoker": 0.2, "alcohol": 0.1, "hypertension": 0.6, "diabetes": 0.25,
    "heart_failure": 0.2, "stroke_tia": 0.1, "vascular_disease": 0.15, "copd": 0.12,
    "dyslipidemia": 0.45, "obesity": 0.25, "chronic_kidney_disease": 0.15,
    "ischemic_heart_disease": 0.15, "sleep_apnea": 0.15, "hypothyroidism": 0.1,
    "echocardiogram": 0.85, "holter_monitoring": 0.3, "electrical_cardioversion": 0.15,
    "catheter_ablation": 0.08, "coronary_angiography": 0.2,
    "doac": 0.5, "vka": 0.2, "beta_blocker": 0.5, "antiplatelet": 0.25,
    "statin": 0.4, "ace_inhibitor": 0.25, "arb": 0.2, "loop_diuretic": 0.2,
    "proton_pump_inhibitor": 0.35,
}
DEFAULT_PREVALENCE = 0.1

# (mean, sd, low, high, decimals)
NUMERIC_PRIORS: Dict[str, Tuple[float, float, float, float, int]] = {
    "weight": (78.0, 14.0, 45.0, 140.0, 1),
    "height": (166.0, 9.0, 145.0, 195.0, 0),
    "egfr": (72.0, 20.0, 10.0, 120.0, 0),
    "creatinine": (1.0, 0.3, 0.4, 4.0, 1),
    "albumin": (3.9, 0.4, 2.0, 5.2, 1),
    "crp": (8.0, 6.0, 0.1, 80.0, 1),
    "nt_probnp": (900.0, 600.0, 20.0, 9000.0, 0),
    "hemoglobin": (13.5, 1.6, 7.0, 18.0, 1),
    "tsh": (2.2, 1.0, 0.1, 10.0, 1),
    "potassium": (4.3, 0.4, 3.0, 6.0, 1),
    "sodium": (139.0, 3.0, 125.0, 150.0, 0),
    "glucose": (110.0, 25.0, 60.0, 300.0, 0),
    "hba1c": (6.1, 0.8, 4.5, 12.0, 1),
    "ldl_cholesterol": (105.0, 30.0, 30.0, 250.0, 0),
    "hdl_cholesterol": (50.0, 12.0, 20.0, 100.0, 0),
    "total_cholesterol": (185.0, 35.0, 100.0, 320.0, 0),
    "triglycerides": (140.0, 50.0, 40.0, 500.0, 0),
    "troponin": (12.0, 8.0, 1.0, 100.0, 0),
    "uric_acid": (6.0, 1.4, 2.0, 12.0, 1),
    "platelets": (230.0, 55.0, 80.0, 500.0, 0),
    "lvef": (58.0, 9.0, 20.0, 75.0, 0),
    "la_diameter": (42.0, 5.0, 30.0, 60.0, 0),
}
DEFAULT_NUMERIC = (50.0, 10.0, 0.0, 100.0, 1)

AF_TYPE_WEIGHTS = {"paroxysmal": 0.5, "persistent": 0.35, "permanent": 0.15}
FEMALE_SHARE = 0.45
AGE_RANGE = (45, 90)

# Features moved toward the label when a signal is planted: (positive, negative) draws
SIGNAL_NUMERICS: Dict[str, Tuple[Tuple[float, float], Tuple[float, float]]] = {
    "nt_probnp": ((2600.0, 300.0), (350.0, 100.0)),
    "crp": ((25.0, 4.0), (3.0, 1.0)),
}
SIGNAL_FLAG = "sleep_apnea"

DISTRACTOR_ROLES = (
    CohortRole.PRIOR_HISTORY,
    CohortRole.NO_TEXTUAL_EVIDENCE,
    CohortRole.BEFORE_STUDY,
    CohortRole.NO_AF_CODE,
)
EXCLUDED = "excluded"

Truth = Dict[str, Optional[Union[float, str]]]


class SynthCorpus(BaseModel):
    """What one generator run wrote"""
    directory: Path
    files: List[Path] = Field(default_factory=list)
    truths: List[GroundTruth] = Field(default_factory=list)


class RenderContext(BaseModel):
    """Everything a worker needs to render one patient"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    config: GenConfig
    feature_schema: FeatureSchema
    lexicon: Lexicon
    code_map: CodeMap
    window: ProgressionWindow = Field(default_factory=ProgressionWindow)


class RenderedPatient(BaseModel):
    truth: GroundTruth
    reports: List[ReportDocument] = Field(default_factory=list)
    rows: Dict[str, List[Dict[str, str]]] = Field(default_factory=dict)


def stream(seed: int, kind: int, index: Optional[int] = None) -> np.random.Generator:
    key = [seed, kind] if index is None else [seed, kind, index]
    return np.random.default_rng(key)


def plant_signal(config: GenConfig, strength: float) -> GenConfig:
    """
    Config with a feature/label correlation of the given strength

    Args:
        config: Base generator config
        strength: 0 plants nothing, 1 makes the signal features determine the label

    Returns:
        Copy of `config` with `signal_strength` set
    """
    if not 0.0 <= strength <= 1.0:
        raise InvalidConfig(f"signal strength must lie in [0, 1], got {strength}")
    return config.model_copy(update={"signal_strength": strength})


# Ground truth

def _numeric(rng: np.random.Generator, feature_id: str) -> float:
    mean, sd, low, high, decimals = NUMERIC_PRIORS.get(feature_id, DEFAULT_NUMERIC)
    return round(float(np.clip(rng.normal(mean, sd), low, high)), decimals)


def sample_features(schema: FeatureSchema, rng: np.random.Generator) -> Truth:
    """Independent draw of every predictive feature, schema order"""
    features: Truth = {}
    for feature in schema.predictive:
        fid = feature.id
        if fid == "age":
            features[fid] = float(rng.integers(AGE_RANGE[0], AGE_RANGE[1] + 1))
        elif fid == "sex":
            features[fid] = "F" if rng.random() < FEMALE_SHARE else "M"
        elif fid == AF_FEATURE:
            levels = [v for v in feature.allowed_values or [] if v in AF_TYPE_WEIGHTS]
            weights = np.array([AF_TYPE_WEIGHTS[v] for v in levels])
            features[fid] = str(rng.choice(levels, p=weights / weights.sum()))
        elif feature.value_kind == ValueKind.BOOLEAN3:
            present = rng.random() < BOOLEAN_PREVALENCE.get(fid, DEFAULT_PREVALENCE)
            features[fid] = PRESENT if present else ABSENT
        elif feature.value_kind == ValueKind.CATEGORICAL:
            features[fid] = str(rng.choice(feature.allowed_values))
        else:
            features[fid] = _numeric(rng, fid)

    if {"bmi", "weight", "height"} <= set(features):
        features["bmi"] = round(features["weight"] / (features["height"] / 100.0) ** 2, 1)
    return features


def truth_to_vector(truth: GroundTruth, schema: FeatureSchema) -> PatientVector:
    """The fully observed vector the extraction should recover"""
    values: Dict[str, FeatureValue] = {}
    for feature in schema.predictive:
        value = truth.features.get(feature.id)
        if value is None:
            values[feature.id] = FeatureValue.unknown()
        elif feature.is_boolean:
            values[feature.id] = FeatureValue.flag(value == PRESENT, Provenance.BOTH)
        else:
            values[feature.id] = FeatureValue.observed(value, Provenance.BOTH)
    return PatientVector(
        patient_id=truth.patient_id,
        index_date=truth.onset_date,
        values=values,
        label=truth.label,
    )


def _stratum(truth: GroundTruth, schema: FeatureSchema) -> Tuple[bool, ...]:
    results = score_all(truth_to_vector(truth, schema))
    return tuple(binarize(r) for r in results.values())


def stratified_labels(strata: Sequence[Tuple], n_positive: int, rng: np.random.Generator) -> List[int]:
    """
    Exactly `n_positive` ones, spread over the strata by largest remainder

    Each stratum receives its proportional share of positives, so the
    labels carry no information about the stratum key.
    """
    if not strata:
        return []
    groups: Dict[Tuple, List[int]] = defaultdict(list)
    for position, key in enumerate(strata):
        groups[key].append(position)
    keys = sorted(groups)
    n = len(strata)

    exact = [len(groups[k]) * n_positive / n for k in keys]
    quotas = [math.floor(x) for x in exact]
    remaining = n_positive - sum(quotas)
    by_remainder = sorted(range(len(keys)), key=lambda j: (-(exact[j] - quotas[j]), j))
    for j in by_remainder[:remaining]:
        quotas[j] += 1

    labels = [0] * n
    for key, quota in zip(keys, quotas):
        for position in rng.permutation(groups[key])[:quota]:
            labels[int(position)] = 1
    return labels


def _onset_date(config: GenConfig, rng: np.random.Generator) -> dt.date:
    span = (config.onset_end - config.onset_start).days
    return config.onset_start + dt.timedelta(days=int(rng.integers(0, span + 1)))


def _apply_signal(truth: GroundTruth, schema: FeatureSchema, strength: float, rng: np.random.Generator) -> GroundTruth:
    planted = rng.random() < strength
    draws = {
        fid: round(float(max(0.1, rng.normal(*(pos if truth.label == 1 else neg)))), 1)
        for fid, (pos, neg) in SIGNAL_NUMERICS.items()
    }
    if not planted:
        return truth
    features = dict(truth.features)
    for fid, value in draws.items():
        if schema.has(fid):
            features[fid] = value
    if schema.has(SIGNAL_FLAG):
        features[SIGNAL_FLAG] = PRESENT if truth.label == 1 else ABSENT
    return truth.model_copy(update={"features": features, "signal_planted": True})


def sample_truth(config: GenConfig, schema: FeatureSchema) -> List[GroundTruth]:
    """
    Plant roles, features, onsets, labels and the optional signal

    Args:
        config: Generator knobs
        schema: Feature schema

    Returns:
        One GroundTruth per patient (reports not yet rendered), sorted by id
    """
    n_labeled = config.n_patients
    n_excluded = int(round(n_labeled * config.excluded_rate))
    n_distractors = int(round(n_labeled * config.distractor_rate))
    kinds: List[Union[CohortRole, str]] = [CohortRole.ONSET] * n_labeled + [EXCLUDED] * n_excluded
    kinds += [DISTRACTOR_ROLES[k % len(DISTRACTOR_ROLES)] for k in range(n_distractors)]

    cohort_rng = stream(config.seed, STREAM_COHORT)
    kinds = [kinds[int(k)] for k in cohort_rng.permutation(len(kinds))]

    truths: List[GroundTruth] = []
    for index, kind in enumerate(kinds):
        rng = stream(config.seed, STREAM_FEATURES, index)
        features = sample_features(schema, rng)
        onset = _onset_date(config, rng)
        role = CohortRole.ONSET if kind == EXCLUDED else kind
        if role == CohortRole.BEFORE_STUDY:
            onset = dt.date(config.onset_start.year - 3, 1, 1) + dt.timedelta(days=int(rng.integers(0, 365)))
        truths.append(GroundTruth(
            patient_id=f"P{index + 1:05d}",
            role=role,
            onset_date=None if role == CohortRole.NO_AF_CODE else onset,
            label=-1 if kind == EXCLUDED else None,
            features=features,
        ))

    labeled = [i for i, kind in enumerate(kinds) if kind == CohortRole.ONSET]
    n_positive = int(round(n_labeled * config.positive_rate))
    labels = stratified_labels([_stratum(truths[i], schema) for i in labeled], n_positive, cohort_rng)
    for i, label in zip(labeled, labels):
        truths[i] = truths[i].model_copy(update={"label": label})
        if config.signal_strength > 0:
            truths[i] = _apply_signal(
                truths[i], schema, config.signal_strength, stream(config.seed, STREAM_SIGNAL, i)
            )

    cohort = [i for i, t in enumerate(truths) if t.in_cohort]
    n_gold = int(round(len(cohort) * config.gold_fraction))
    for position in cohort_rng.permutation(len(cohort))[:n_gold]:
        i = cohort[int(position)]
        truths[i] = truths[i].model_copy(update={"gold": True})

    logger.info(
        f"Planted {len(truths)} patients: {n_labeled} labeled ({n_positive} positive), "
        f"{n_excluded} excluded, {n_distractors} distractors, {n_gold} gold"
    )
    return truths


# Rendering

def _birth_date(onset: dt.date, age: int, rng: np.random.Generator) -> dt.date:
    """Birth date whose age at `onset` is exactly `age`"""
    day_of_year = onset.timetuple().tm_yday
    anniversary = dt.date(onset.year, 1, 1) + dt.timedelta(days=int(rng.integers(0, day_of_year)))
    try:
        return anniversary.replace(year=onset.year - age)
    except ValueError:
        return anniversary.replace(year=onset.year - age, day=28)


def _diagnosis_code(code_map: CodeMap, feature_id: str, value: Optional[str] = None) -> Optional[Tuple[str, str]]:
    for rule in code_map.diagnoses:
        if rule.feature_id == feature_id and rule.value == value:
            code = rule.prefix if "." in rule.prefix else f"{rule.prefix}.9"
            return rule.system, code
    return None


def _prescription_code(code_map: CodeMap, feature_id: str) -> Optional[str]:
    for rule in code_map.prescriptions:
        if rule.feature_id == feature_id:
            return rule.prefix.ljust(7, "0")
    return None


def _procedure_code(code_map: CodeMap, feature_id: str) -> Optional[str]:
    for rule in code_map.procedures:
        if rule.feature_id == feature_id:
            return rule.prefix
    return None


def _lab_rule(code_map: CodeMap, feature_id: str) -> Optional[LabRule]:
    for rule in code_map.labs.values():
        if rule.feature_id == feature_id:
            return rule
    return None


def _raw(value: float, scale: float) -> str:
    raw = round(value / scale, 6)
    return repr(float(raw))


def _follow_up_plan(label: Optional[int], window: ProgressionWindow, rng: np.random.Generator) -> List[Tuple[int, str]]:
    """(day offset from onset, report kind) consistent with the planted label"""
    start, end = window.start_offset_days, window.end_offset_days
    blank_lo = min(8, start)
    plan: List[Tuple[int, str]] = []
    if label == 1:
        af_day = int(rng.integers(start, end + 1))
        plan.append((af_day, "follow_up_af"))
        if rng.random() < 0.5 and af_day > blank_lo + 1:
            plan.append((int(rng.integers(blank_lo, af_day)), "follow_up_sinus"))
        if rng.random() < 0.3 and start > blank_lo:
            plan.append((int(rng.integers(blank_lo, start)), "follow_up_af"))
    elif label == 0:
        plan.append((int(rng.integers(start, end + 1)), "follow_up_sinus"))
        if rng.random() < 0.3 and start > blank_lo:
            plan.append((int(rng.integers(blank_lo, start)), "follow_up_af"))
        if rng.random() < 0.2:
            plan.append((int(rng.integers(end + 1, end + 170)), "follow_up_af"))
    else:
        variant = int(rng.integers(5))
        if variant == 1:
            plan.append((int(rng.integers(start, end + 1)), "unrelated"))
        elif variant == 2 and start > blank_lo:
            plan.append((int(rng.integers(blank_lo, start)), "follow_up_af"))
        elif variant == 3 and start > blank_lo:
            plan.append((int(rng.integers(blank_lo, start)), "follow_up_sinus"))
        elif variant == 4:
            plan.append((int(rng.integers(end + 1, end + 170)), "follow_up_af"))
    if rng.random() < 0.3:
        plan.append((int(rng.integers(blank_lo, end + 1)), "unrelated"))
    return sorted(plan)


class PatientRenderer:
    """Renders one patient's ground truth into reports and table rows"""

    def __init__(self, context: RenderContext, truth: GroundTruth, index: int):
        self.context = context
        self.config = context.config
        self.schema = context.feature_schema
        self.lexicon = context.lexicon
        self.code_map = context.code_map
        self.truth = truth
        self.index = index
        self.reports: List[ReportDocument] = []
        self.facts: List[ReportFact] = []
        self.rows: Dict[str, List[Dict[str, str]]] = {table: [] for table in TABLE_COLUMNS}
        seed = self.config.seed
        self.report_rng = stream(seed, STREAM_REPORTS, index)
        self.missing_rng = stream(seed, STREAM_MISSINGNESS, index)
        self.dropout_rng = stream(seed, STREAM_DROPOUT, index)

    # structured side

    def _row(self, table: str, **cells: str) -> None:
        self.rows[table].append({"patient_id": self.truth.patient_id, **cells})

    def _diagnosis(self, day: dt.date, feature_id: str, value: Optional[str] = None) -> None:
        coded = _diagnosis_code(self.code_map, feature_id, value)
        if coded is not None:
            self._row("diagnoses", date=day.isoformat(), code_system=coded[0], code=coded[1])

    def render_structured(self, anchor: dt.date, follow_ups: List[dt.date]) -> None:
        features = self.truth.features
        dropped = {f.id: self.missing_rng.random() < self.config.missingness_for(f) for f in self.schema.predictive}
        rng = self.report_rng

        sex = features.get("sex")
        self._row(
            "demographics",
            birth_date=_birth_date(anchor, int(features["age"]), rng).isoformat(),
            sex="" if sex is None or dropped.get("sex") else str(sex),
        )

        for feature in self.schema.predictive:
            fid = feature.id
            value = features.get(fid)
            if dropped[fid] or value is None or value == ABSENT or fid in ("age", "sex", AF_FEATURE):
                continue
            if feature.is_boolean and feature.category == Category.TREATMENT:
                code = _prescription_code(self.code_map, fid)
                if code:
                    day = anchor - dt.timedelta(days=int(rng.integers(0, 366)))
                    self._row("prescriptions", date=day.isoformat(), atc_code=code)
            elif feature.is_boolean and feature.category == Category.PROCEDURE:
                self._procedure(fid, anchor, dropped, rng)
            elif feature.is_boolean:
                self._diagnosis(anchor - dt.timedelta(days=int(rng.integers(30, 2000))), fid)
            elif feature.value_kind == ValueKind.NUMERIC:
                rule = _lab_rule(self.code_map, fid)
                if rule is not None:
                    self._row("labs", date=anchor.isoformat(), test_code=rule.test_code,
                              value=_raw(float(value), rule.scale), unit=rule.unit)

        if self.truth.role != CohortRole.NO_AF_CODE:
            self._diagnosis(anchor, AF_FEATURE, str(features[AF_FEATURE]))
        # rows after the index date must never leak into the vectors
        creatinine = _lab_rule(self.code_map, "creatinine")
        for day in follow_ups:
            self._diagnosis(day, AF_FEATURE, str(features[AF_FEATURE]))
            if creatinine is not None and features.get("creatinine") is not None:
                self._row("labs", date=day.isoformat(), test_code=creatinine.test_code,
                          value=_raw(float(features["creatinine"]) * 1.5, creatinine.scale),
                          unit=creatinine.unit)

    def _procedure(self, feature_id: str, anchor: dt.date, dropped: Dict[str, bool], rng) -> None:
        code = _procedure_code(self.code_map, feature_id)
        if code is None:
            return
        outcome = ""
        valued = self.code_map.procedure_values.get(code)
        if valued is not None and not dropped.get(valued.feature_id, True):
            measured = self.truth.features.get(valued.feature_id)
            if measured is not None:
                outcome = _raw(float(measured), valued.scale)
        day = anchor - dt.timedelta(days=int(rng.integers(0, 31)))
        self._row("procedures", date=day.isoformat(), code=code, outcome=outcome)

    # report side

    def _display(self, feature_id: str, value: Optional[str] = None) -> Optional[str]:
        try:
            return self.lexicon.display_for(feature_id, value)
        except KeyError:
            return None

    def _add_report(self, day: dt.date, kind: str, text: str, facts: Optional[List[str]] = None,
                    dropped: bool = False) -> None:
        report_id = f"{self.truth.patient_id}-R{len(self.facts) + 1:02d}"
        self.facts.append(ReportFact(report_id=report_id, date=day, kind=kind, facts=facts or [], dropped=dropped))
        if not dropped:
            self.reports.append(ReportDocument(
                patient_id=self.truth.patient_id, report_id=report_id, date=day, text=text
            ))

    def onset_text(self) -> Tuple[str, List[str]]:
        features = self.truth.features
        rng = self.report_rng
        history: List[str] = []
        exam: List[str] = []
        tests: List[str] = []
        treatment: List[str] = []
        facts: List[str] = []
        mentioned: Dict[str, bool] = {}

        for feature in self.schema.predictive:
            fid = feature.id
            mention = rng.random() < self.config.coverage_for(fid)
            negate = rng.random() < self.config.negation_rate
            value = features.get(fid)
            mentioned[fid] = mention
            if not mention or value is None or fid in ("age", "sex", AF_FEATURE):
                continue

            sentence: Optional[str] = None
            if feature.is_boolean:
                display = self._display(fid)
                if display is None:
                    continue
                if value == PRESENT:
                    sentence = templates.affirmed_sentence(display)
                elif negate:
                    sentence = templates.negated_sentence(display, rng)
            elif feature.value_kind == ValueKind.NUMERIC:
                sentence = templates.numeric_sentence(fid, float(value))
            else:
                display = self._display(fid, str(value))
                sentence = templates.affirmed_sentence(display) if display else None
            if sentence is None:
                continue

            facts.append(f"{fid}={value}")
            if feature.category in (Category.LAB, Category.PROCEDURE):
                tests.append(sentence)
            elif feature.category == Category.TREATMENT:
                treatment.append(sentence)
            elif feature.category == Category.DEMOGRAPHIC and feature.value_kind == ValueKind.NUMERIC:
                exam.append(sentence)
            else:
                history.append(sentence)

        age = features.get("age") if mentioned.get("age") else None
        sex = features.get("sex") if mentioned.get("sex") else None
        demographics = templates.demographic_sentence(age, sex, self.lexicon)
        if age is not None:
            facts.append(f"age={age}")
        if sex is not None:
            facts.append(f"sex={sex}")

        af_type = str(features[AF_FEATURE])
        facts.append(f"{AF_FEATURE}={af_type}")
        af_display = self._display(AF_FEATURE, af_type) or self._display(AF_FEATURE)
        text = templates.onset_report(demographics, history, exam, tests, treatment, af_display)
        return text, sorted(facts)

    def render_reports(self, anchor: dt.date, plan: List[Tuple[int, str]]) -> None:
        role = self.truth.role
        rng = self.report_rng
        if role == CohortRole.PRIOR_HISTORY:
            prior = anchor - dt.timedelta(days=int(rng.integers(100, 701)))
            phrase = self._display(AF_FEATURE, "permanent") or self._display(AF_FEATURE)
            self._add_report(prior, "prior_history", templates.prior_history_report(phrase),
                             [f"{AF_FEATURE}=permanent"])
        if role == CohortRole.NO_TEXTUAL_EVIDENCE:
            earlier = anchor - dt.timedelta(days=int(rng.integers(60, 401)))
            self._add_report(earlier, "unrelated", templates.unrelated_report(rng))
            return

        text, facts = self.onset_text()
        self._add_report(anchor, "onset", text, facts)

        af_display = self._display(AF_FEATURE, str(self.truth.features[AF_FEATURE])) or self._display(AF_FEATURE)
        for offset, kind in plan:
            day = anchor + dt.timedelta(days=offset)
            dropped = kind != "unrelated" and self.dropout_rng.random() < self.config.report_dropout_rate
            if kind == "follow_up_af":
                text = templates.af_follow_up_report(af_display, anchor.year)
            elif kind == "follow_up_sinus":
                text = templates.sinus_follow_up_report(af_display, anchor.year, int(rng.integers(55, 95)))
            else:
                text = templates.unrelated_report(rng)
            self._add_report(day, kind, text, dropped=dropped)

    def render(self) -> RenderedPatient:
        truth = self.truth
        anchor = truth.onset_date
        if anchor is None:
            anchor = _onset_date(self.config, stream(self.config.seed, STREAM_FEATURES, self.index))
        plan = _follow_up_plan(truth.label, self.context.window, self.report_rng) if truth.in_cohort else []
        follow_ups = [anchor + dt.timedelta(days=offset) for offset, kind in plan if kind != "unrelated"]

        self.render_structured(anchor, follow_ups)
        self.render_reports(anchor, plan)
        return RenderedPatient(
            truth=truth.model_copy(update={"reports": self.facts}),
            reports=self.reports,
            rows=self.rows,
        )


def render_patient(context: RenderContext, item: Tuple[int, GroundTruth]) -> RenderedPatient:
    index, truth = item
    return PatientRenderer(context, truth, index).render()


# Output

def _check_resources(schema: FeatureSchema, lexicon: Lexicon, code_map: CodeMap) -> None:
    if not schema.has(AF_FEATURE) or not code_map.af_rules():
        raise InvalidConfig("generator needs an af_type feature with AF diagnosis codes")
    for level in schema.get(AF_FEATURE).allowed_values or []:
        if _diagnosis_code(code_map, AF_FEATURE, level) is None:
            raise InvalidConfig(f"no AF diagnosis code for af_type={level}")
    try:
        lexicon.display_for(AF_FEATURE)
    except KeyError as e:
        raise InvalidConfig("lexicon has no af_type surface to render onset reports") from e


def gold_labels(truths: Sequence[GroundTruth]) -> Dict[str, int]:
    return {t.patient_id: int(t.label) for t in truths if t.gold and t.label is not None}


def generate(
    config: GenConfig,
    schema: FeatureSchema,
    lexicon: Lexicon,
    code_map: CodeMap,
    out_dir: Path,
    jobs: int = 1,
    window: Optional[ProgressionWindow] = None
) -> SynthCorpus:
    """
    Write a complete synthetic corpus

    Args:
        config: Generator knobs (use plant_signal for a correlated corpus)
        schema: Feature schema
        lexicon: Lexicon whose display forms are written into reports
        code_map: Code map whose prefixes are written into the tables
        out_dir: Destination directory
        jobs: Worker processes for per-patient rendering
        window: Progression window the planted labels must respect

    Returns:
        SynthCorpus listing the written files and the ground truth
    """
    _check_resources(schema, lexicon, code_map)
    out_dir = Path(out_dir)
    truths = sample_truth(config, schema)

    context = RenderContext(
        config=config, feature_schema=schema, lexicon=lexicon, code_map=code_map,
        window=window or ProgressionWindow(),
    )
    rendered = parallel_map(partial(render_patient, context), list(enumerate(truths)), jobs=jobs)

    reports = sorted(
        (doc for patient in rendered for doc in patient.reports),
        key=lambda d: (d.patient_id, d.date, d.report_id),
    )
    frames = {}
    for table, columns in TABLE_COLUMNS.items():
        rows = [row for patient in rendered for row in patient.rows[table]]
        frame = pd.DataFrame(rows, columns=columns, dtype=str)
        frames[table] = frame.sort_values(columns, kind="mergesort").reset_index(drop=True)
    final = [patient.truth for patient in rendered]

    files = [write_reports(reports, out_dir / REPORTS_FILE)]
    files += write_structured(frames, out_dir)
    files.append(write_ground_truth(final, out_dir / GROUND_TRUTH_FILE))
    gold = gold_labels(final)
    gold_frame = pd.DataFrame(
        [{"patient_id": pid, "label": str(label)} for pid, label in sorted(gold.items())],
        columns=["patient_id", "label"],
    )
    files.append(write_csv(gold_frame, out_dir / GOLD_LABELS_FILE))

    logger.info(f"Synthetic corpus: {len(final)} patients, {len(reports)} reports written to {out_dir}")
    return SynthCorpus(directory=out_dir, files=files, truths=final)


def write_ground_truth(truths: Sequence[GroundTruth], path: Path) -> Path:
    return write_jsonl((t.model_dump(mode="json") for t in truths), path)


def read_ground_truth(path: Path) -> List[GroundTruth]:
    return [GroundTruth.model_validate(record) for record in read_jsonl(path)]


def read_gold_labels(path: Path) -> Dict[str, int]:
    frame = read_csv(path)
    if frame.empty:
        return {}
    return {row.patient_id: int(row.label) for row in frame.itertuples(index=False)}
