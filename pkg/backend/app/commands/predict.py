"""
Risk Score and Baseline Training Commands
"""
from pathlib import Path
from typing import Dict, Optional

from loguru import logger

from app.commands.context import (
    ENRICHED_FILE, EXPERIMENTS_FILE, LABELS_FILE, MODEL_FILE, PREDICTIONS_FILE, SCORES_FILE,
    STRUCTURED_VECTORS_FILE, TEST_FILE, TRAIN_FILE, StageContext
)
from app.services.baseline.export import export_dataset, predictions_frame, run_experiments
from app.services.baseline.model import fit
from app.services.ingest.dataset import read_dataset
from app.services.labeler import read_labels
from app.services.scores import score_vectors
from app.services.synth.generator import GOLD_LABELS_FILE, read_gold_labels
from app.utils.io import write_csv, write_json


def load_gold(ctx: StageContext, path: Optional[Path] = None) -> Optional[Dict[str, int]]:
    """Gold labels from `path` or the data dir; None when no file exists"""
    path = Path(path) if path else ctx.data_dir / GOLD_LABELS_FILE
    if not path.is_file():
        return None
    return read_gold_labels(path)


def run_score(ctx: StageContext) -> None:
    """CHA2DS2-VASc, HATCH and APPLE on the enriched dataset -> scores.csv"""
    vectors = read_dataset(ctx.out(ENRICHED_FILE), ctx.schema)
    frame = score_vectors(vectors, ctx.config.scores.threshold)
    logger.info(f"Scored {len(frame)} of {len(vectors)} patients")
    ctx.record("score", [write_csv(frame, ctx.out(SCORES_FILE))])


def run_train_baseline(ctx: StageContext) -> None:
    """Export train/test splits, fit the baseline, run the dataset/label experiments"""
    settings = ctx.config.baseline
    enriched = read_dataset(ctx.out(ENRICHED_FILE), ctx.schema)
    silver = read_labels(ctx.out(LABELS_FILE))
    labelled = [v for v in enriched if silver.get(v.patient_id, -1) != -1]

    written = export_dataset(
        labelled, silver, ctx.schema, ctx.out_dir, settings.train_fraction, settings.seed,
        ctx.config.scores.threshold,
    )
    train = read_dataset(ctx.out(TRAIN_FILE), ctx.schema)
    test = read_dataset(ctx.out(TEST_FILE), ctx.schema)

    hyperparameters = {
        "l2": settings.l2, "epochs": settings.epochs,
        "learning_rate": settings.learning_rate, "seed": settings.seed,
        "significance": settings.significance,
    }
    model = fit(train, ctx.schema, **hyperparameters)
    written.append(write_json(model.model_dump(mode="json"), ctx.out(MODEL_FILE)))
    written.append(write_csv(predictions_frame(model, test), ctx.out(PREDICTIONS_FILE)))

    original = {v.patient_id: v for v in read_dataset(ctx.out(STRUCTURED_VECTORS_FILE), ctx.schema)}
    experiments = run_experiments(
        original,
        {v.patient_id: v for v in enriched},
        silver,
        load_gold(ctx),
        ctx.schema,
        hyperparameters,
        settings.train_fraction,
        settings.seed,
        ctx.config.scores.threshold,
    )
    written.append(write_json(experiments, ctx.out(EXPERIMENTS_FILE)))
    ctx.record("train-baseline", written, seed=settings.seed)
