"""
CohortForge - Train/Test Export and Baseline Experiments
"""
import math
from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger

from app.core.exceptions import ExcludedLabelPresent, MissingAge, PatientSetMismatch
from app.models.results import BaselineModel
from app.models.schemas import FeatureSchema, PatientVector
from app.services.baseline.model import fit, predict_proba
from app.services.evaluation import metrics
from app.services.ingest.dataset import write_dataset
from app.services.scores import binarize, score_all

PREDICTION_COLUMNS = ["patient_id", "probability", "prediction", "label"]


def attach_labels(vectors: Sequence[PatientVector], labels: Dict[str, int]) -> List[PatientVector]:
    """Copy silver/gold labels into the vectors' label slot"""
    labelled = []
    for v in vectors:
        if v.patient_id not in labels:
            raise PatientSetMismatch(f"no label for {v.patient_id}", patient_id=v.patient_id)
        label = int(labels[v.patient_id])
        if label == -1:
            raise ExcludedLabelPresent(f"{v.patient_id} is excluded (-1)", patient_id=v.patient_id)
        labelled.append(v.model_copy(update={"label": label}))
    return labelled


def score_stratum(vector: PatientVector, threshold: int = 2) -> str:
    """Binarized CHA2DS2-VASc/HATCH/APPLE as e.g. "101"; "unscored" without an age"""
    try:
        results = score_all(vector, threshold)
    except MissingAge:
        return "unscored"
    return "".join("1" if binarize(r, threshold) else "0" for r in results.values())


def _largest_remainder(sizes: Dict[str, int], total: int) -> Dict[str, int]:
    """Split `total` over the keys proportionally to `sizes`, ties broken by key"""
    n = sum(sizes.values())
    if n == 0:
        return {key: 0 for key in sizes}
    exact = {key: size * total / n for key, size in sizes.items()}
    quotas = {key: math.floor(x) for key, x in exact.items()}
    remaining = total - sum(quotas.values())
    for key in sorted(sizes, key=lambda k: (-(exact[k] - quotas[k]), k))[:remaining]:
        quotas[key] += 1
    return quotas


def split_ids(
    patient_ids: Sequence[str],
    train_fraction: float = 0.73,
    seed: int = 42,
    labels: Optional[Dict[str, int]] = None,
    strata: Optional[Dict[str, str]] = None
) -> Tuple[List[str], List[str]]:
    """
    Seeded train/test split of patient ids

    Without labels the sorted ids are shuffled and the first round(n * fraction)
    go to train. With labels the test share of every stratum is fixed by largest
    remainder and filled at the pool's positive rate, so within the test split
    the label is independent of the stratum key.
    """
    ordered = sorted(patient_ids)
    rng = np.random.default_rng(seed)
    n_train = int(round(len(ordered) * train_fraction))
    if labels is None:
        order = rng.permutation(len(ordered))
        train = sorted(ordered[i] for i in order[:n_train])
        test = sorted(ordered[i] for i in order[n_train:])
        return train, test
    if not ordered:
        return [], []

    groups: Dict[str, Tuple[List[str], List[str]]] = defaultdict(lambda: ([], []))
    for pid in ordered:
        key = (strata or {}).get(pid, "")
        groups[key][int(labels[pid]) != 1].append(pid)
    rate = sum(int(labels[pid]) == 1 for pid in ordered) / len(ordered)
    test_sizes = _largest_remainder(
        {key: len(pos) + len(neg) for key, (pos, neg) in groups.items()}, len(ordered) - n_train
    )

    test: List[str] = []
    for key in sorted(groups):
        positives, negatives = groups[key]
        size = test_sizes[key]
        n_pos = min(len(positives), max(size - len(negatives), math.floor(size * rate + 0.5)))
        test += [positives[i] for i in rng.permutation(len(positives))[:n_pos]]
        test += [negatives[i] for i in rng.permutation(len(negatives))[:size - n_pos]]
    held = set(test)
    return [pid for pid in ordered if pid not in held], sorted(test)


def split_labelled(
    vectors: Dict[str, PatientVector],
    labels: Dict[str, int],
    train_fraction: float = 0.73,
    seed: int = 42,
    score_threshold: int = 2
) -> Tuple[List[str], List[str]]:
    """split_ids stratified by label and score stratum"""
    strata = {pid: score_stratum(v, score_threshold) for pid, v in vectors.items()}
    return split_ids(list(vectors), train_fraction, seed, labels=labels, strata=strata)


def export_dataset(
    vectors: Sequence[PatientVector],
    labels: Dict[str, int],
    schema: FeatureSchema,
    out_dir: Path,
    train_fraction: float = 0.73,
    seed: int = 42,
    score_threshold: int = 2
) -> List[Path]:
    """
    Write train.csv / test.csv (dataset format, label column filled)

    Args:
        vectors: Patient vectors, excluded patients already removed
        labels: patient_id -> 0/1
        schema: Feature schema (column order)
        out_dir: Destination directory
        train_fraction: Share of rows going to train
        seed: Shuffle seed
        score_threshold: Binarization threshold of the score strata

    Returns:
        Written paths, CSVs and provenance sidecars
    """
    labelled = {v.patient_id: v for v in attach_labels(vectors, labels)}
    train_ids, test_ids = split_labelled(labelled, labels, train_fraction, seed, score_threshold)
    written = write_dataset([labelled[p] for p in train_ids], schema, Path(out_dir) / "train.csv")
    written += write_dataset([labelled[p] for p in test_ids], schema, Path(out_dir) / "test.csv")
    logger.info(f"Exported {len(train_ids)} train / {len(test_ids)} test rows")
    return written


def predictions_frame(model: BaselineModel, vectors: Sequence[PatientVector]) -> pd.DataFrame:
    probabilities = predict_proba(model, vectors) if vectors else np.empty(0)
    rows = [
        {
            "patient_id": v.patient_id,
            "probability": f"{p:.6f}",
            "prediction": str(int(p >= 0.5)),
            "label": "" if v.label is None else str(int(v.label)),
        }
        for v, p in zip(vectors, probabilities)
    ]
    return pd.DataFrame(rows, columns=PREDICTION_COLUMNS, dtype=str)


def held_out_metrics(model: BaselineModel, test: Sequence[PatientVector]) -> Dict[str, object]:
    probabilities = predict_proba(model, test)
    preds = [int(p >= 0.5) for p in probabilities]
    return metrics(preds, [int(v.label) for v in test])


def run_experiments(
    original: Dict[str, PatientVector],
    enriched: Dict[str, PatientVector],
    silver: Dict[str, int],
    gold: Optional[Dict[str, int]],
    schema: FeatureSchema,
    hyperparameters: Dict[str, float],
    train_fraction: float = 0.73,
    seed: int = 42,
    score_threshold: int = 2
) -> Dict[str, Dict[str, object]]:
    """
    Original-Silver, Enriched-Silver and (with gold labels) Enriched-Gold runs

    All runs share one seeded test split, stratified by silver label and
    enriched score stratum, scored against gold labels where
    available and silver labels elsewhere.
    """
    ids = sorted(pid for pid, label in silver.items() if label != -1 and pid in enriched)
    train_ids, test_ids = split_labelled(
        {pid: enriched[pid] for pid in ids}, silver, train_fraction, seed, score_threshold
    )
    gold = {pid: label for pid, label in (gold or {}).items() if label != -1}
    reference = {pid: gold.get(pid, silver[pid]) for pid in test_ids}

    def run(source: Dict[str, PatientVector], labels: Dict[str, int], train_pool: List[str]) -> Dict[str, object]:
        train = attach_labels([source[p] for p in train_pool], labels)
        test = attach_labels([source[p] for p in test_ids], reference)
        model = fit(train, schema, **hyperparameters)
        result = held_out_metrics(model, test)
        result["n_train"] = len(train)
        return result

    experiments = {
        "original_silver": run(original, silver, train_ids),
        "enriched_silver": run(enriched, silver, train_ids),
    }
    gold_train = [pid for pid in train_ids if pid in gold]
    if gold_train and len({gold[p] for p in gold_train}) == 2:
        experiments["enriched_gold"] = run(enriched, gold, gold_train)
    else:
        logger.warning("Skipping enriched_gold experiment: no two-class gold training labels")
    return experiments
