"""
CohortForge - Evaluation

Confusion-matrix metrics, silver/gold label agreement and the
original-vs-enriched missingness report.
"""
import math
from typing import Dict, List, Sequence

import pandas as pd
from loguru import logger

from app.core.exceptions import (
    EmptyIntersection, EmptyMatrix, ExcludedLabelPresent, LengthMismatch, PatientSetMismatch
)
from app.models.results import (
    CategoryEnrichment, ConfusionMatrix, EnrichmentReport, FeatureEnrichment, GroundTruth
)
from app.models.schemas import Category, FeatureSchema, PatientVector, TriState
from app.services.synth.generator import truth_to_vector

ENRICHMENT_COLUMNS = ["feature", "category", "metric", "original", "enriched", "delta"]


def confusion(preds: Sequence[int], golds: Sequence[int]) -> ConfusionMatrix:
    """Counts of a binary prediction vector against gold labels"""
    if len(preds) != len(golds):
        raise LengthMismatch(f"{len(preds)} predictions vs {len(golds)} labels")
    if any(int(g) == -1 for g in golds) or any(int(p) == -1 for p in preds):
        raise ExcludedLabelPresent("excluded (-1) labels must be filtered before scoring")

    tp = tn = fp = fn = 0
    for p, g in zip(preds, golds):
        p, g = int(bool(p)), int(bool(g))
        if p and g:
            tp += 1
        elif not p and not g:
            tn += 1
        elif p:
            fp += 1
        else:
            fn += 1
    return ConfusionMatrix(tp=tp, tn=tn, fp=fp, fn=fn)


def mcc(cm: ConfusionMatrix) -> float:
    """Matthews correlation; 0.0 when any marginal is empty"""
    denominator = (cm.tp + cm.fp) * (cm.tp + cm.fn) * (cm.tn + cm.fp) * (cm.tn + cm.fn)
    if denominator == 0:
        return 0.0
    return (cm.tp * cm.tn - cm.fp * cm.fn) / math.sqrt(denominator)


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise EmptyMatrix("accuracy of an empty confusion matrix")
    return (cm.tp + cm.tn) / cm.total


def metrics(preds: Sequence[int], golds: Sequence[int]) -> Dict[str, object]:
    cm = confusion(preds, golds)
    return {
        "confusion": cm.model_dump(),
        "n": cm.total,
        "accuracy": accuracy(cm) if cm.total else None,
        "mcc": mcc(cm),
    }


def label_agreement(silver: Dict[str, int], gold: Dict[str, int]) -> float:
    """Share of agreeing labels over ids present and non-excluded in both"""
    shared = [
        pid for pid in sorted(set(silver) & set(gold))
        if int(silver[pid]) != -1 and int(gold[pid]) != -1
    ]
    if not shared:
        raise EmptyIntersection("silver and gold labels share no non-excluded patient")
    agreeing = sum(int(silver[pid]) == int(gold[pid]) for pid in shared)
    return agreeing / len(shared)


def _percent(count: int, total: int) -> float:
    return 100.0 * count / total if total else 0.0


def _mean(values: List[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def enrichment_report(
    original: List[PatientVector],
    enriched: List[PatientVector],
    schema: FeatureSchema
) -> EnrichmentReport:
    """
    Per-feature and per-category missingness and positive rates

    Args:
        original: Structured-only vectors
        enriched: Merged vectors of the same patients
        schema: Feature schema

    Returns:
        EnrichmentReport; positive rates only for Boolean3State features
    """
    original_ids = {v.patient_id for v in original}
    enriched_ids = {v.patient_id for v in enriched}
    if original_ids != enriched_ids:
        raise PatientSetMismatch(
            f"{len(original_ids ^ enriched_ids)} patients appear in only one dataset"
        )

    n = len(original)
    features: List[FeatureEnrichment] = []
    for feature in schema.predictive:
        missing_o = sum(not v.get(feature.id).known for v in original)
        missing_e = sum(not v.get(feature.id).known for v in enriched)
        positive_o = positive_e = None
        if feature.is_boolean:
            positive_o = _percent(sum(v.get(feature.id).state == TriState.PRESENT for v in original), n)
            positive_e = _percent(sum(v.get(feature.id).state == TriState.PRESENT for v in enriched), n)
        features.append(FeatureEnrichment(
            feature_id=feature.id,
            category=feature.category,
            missing_pct_original=_percent(missing_o, n),
            missing_pct_enriched=_percent(missing_e, n),
            positive_pct_original=positive_o,
            positive_pct_enriched=positive_e,
        ))

    categories: List[CategoryEnrichment] = []
    for category in Category:
        members = [f for f in features if f.category == category]
        if not members:
            continue
        booleans = [f for f in members if f.positive_pct_original is not None]
        categories.append(CategoryEnrichment(
            category=category,
            mean_missing_original=_mean([f.missing_pct_original for f in members]),
            mean_missing_enriched=_mean([f.missing_pct_enriched for f in members]),
            mean_positive_original=_mean([f.positive_pct_original for f in booleans]) if booleans else None,
            mean_positive_enriched=_mean([f.positive_pct_enriched for f in booleans]) if booleans else None,
        ))

    logger.info(f"Enrichment report over {n} patients and {len(features)} features")
    return EnrichmentReport(n_patients=n, features=features, categories=categories)


def enrichment_frame(report: EnrichmentReport) -> pd.DataFrame:
    """Long-format table: feature,category,metric,original,enriched,delta"""
    rows = []
    for f in report.features:
        rows.append([f.feature_id, f.category.value, "missing_pct",
                     f.missing_pct_original, f.missing_pct_enriched, f.missing_delta])
        if f.positive_pct_original is not None:
            rows.append([f.feature_id, f.category.value, "positive_pct",
                         f.positive_pct_original, f.positive_pct_enriched, f.positive_delta])
    frame = pd.DataFrame(rows, columns=ENRICHMENT_COLUMNS)
    for column in ("original", "enriched", "delta"):
        frame[column] = frame[column].round(4)
    return frame


def enrichment_summary(report: EnrichmentReport) -> Dict[str, object]:
    """Per-category means and deltas for enrichment.json"""
    summary = {}
    for c in report.categories:
        entry = {
            "mean_missing_original": round(c.mean_missing_original, 4),
            "mean_missing_enriched": round(c.mean_missing_enriched, 4),
            "missing_delta": round(c.missing_delta, 4),
        }
        if c.mean_positive_original is not None:
            entry["mean_positive_original"] = round(c.mean_positive_original, 4)
            entry["mean_positive_enriched"] = round(c.mean_positive_enriched, 4)
            entry["positive_delta"] = round(c.mean_positive_enriched - c.mean_positive_original, 4)
        summary[c.category.value] = entry
    return {"n_patients": report.n_patients, "categories": summary}


def oracle_report(
    truths: Sequence[GroundTruth],
    confirmed: Dict[str, object],
    silver: Dict[str, int],
    enriched: Sequence[PatientVector],
    schema: FeatureSchema
) -> Dict[str, object]:
    """
    Pipeline output against the planted ground truth

    Args:
        truths: ground_truth.jsonl records
        confirmed: patient_id -> onset of the confirmed cohort
        silver: Silver labels from the labeler
        enriched: Merged vectors
        schema: Feature schema

    Returns:
        Cohort precision/recall, silver label accuracy and feature agreement
    """
    planted = {t.patient_id: t for t in truths}
    cohort = {pid for pid, t in planted.items() if t.in_cohort}
    selected = set(confirmed)
    hits = len(cohort & selected)

    labelled = [pid for pid in sorted(cohort) if pid in silver]
    label_hits = sum(int(silver[pid]) == int(planted[pid].label) for pid in labelled)

    cells = agreeing = 0
    disagreements: Dict[str, int] = {}
    for vector in enriched:
        truth = planted.get(vector.patient_id)
        if truth is None:
            continue
        expected = truth_to_vector(truth, schema)
        for fid in schema.predictive_ids:
            cells += 1
            if vector.get(fid).same_reading(expected.get(fid)):
                agreeing += 1
            else:
                disagreements[fid] = disagreements.get(fid, 0) + 1

    report = {
        "cohort_precision": hits / len(selected) if selected else 0.0,
        "cohort_recall": hits / len(cohort) if cohort else 0.0,
        "label_accuracy": label_hits / len(labelled) if labelled else 0.0,
        "n_labelled": len(labelled),
        "feature_agreement": agreeing / cells if cells else 0.0,
        "feature_disagreements": dict(sorted(disagreements.items())),
    }
    logger.info(
        f"Oracle: cohort P={report['cohort_precision']:.3f} R={report['cohort_recall']:.3f}, "
        f"labels {report['label_accuracy']:.3f}, features {report['feature_agreement']:.4f}"
    )
    return report
