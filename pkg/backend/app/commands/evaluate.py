"""
Evaluation and Enrichment Report Commands
"""
from pathlib import Path
from typing import Dict, Optional

from loguru import logger

from app.commands.context import (
    COHORT_FILE, ENRICHED_FILE, ENRICHMENT_CSV, ENRICHMENT_JSON, EVAL_FILE, EXPERIMENTS_FILE,
    LABELS_FILE, MODEL_FILE, SCORES_FILE, STRUCTURED_VECTORS_FILE, TEST_FILE, StageContext
)
from app.commands.predict import load_gold
from app.models.results import BaselineModel
from app.services.baseline.export import held_out_metrics
from app.services.cohort import confirmed_onsets, read_cohort
from app.services.evaluation import (
    enrichment_frame, enrichment_report, enrichment_summary, label_agreement, metrics, oracle_report
)
from app.services.ingest.dataset import read_dataset
from app.services.labeler import read_labels
from app.services.synth.generator import GROUND_TRUTH_FILE, read_ground_truth
from app.utils.io import read_csv, read_json, write_csv, write_json

SCORE_COLUMNS = ("chads2vasc", "hatch", "apple")


def score_metrics(ctx: StageContext, silver: Dict[str, int]) -> Dict[str, object]:
    """Binarized scores against silver labels, excluded patients removed"""
    frame = read_csv(ctx.out(SCORES_FILE))
    rows = [r for r in frame.to_dict("records") if silver.get(r["patient_id"], -1) != -1]
    golds = [silver[r["patient_id"]] for r in rows]
    return {
        column: metrics([int(r[f"{column}_pred"]) for r in rows], golds)
        for column in SCORE_COLUMNS
    }


def run_evaluate(ctx: StageContext, gold_path: Optional[Path] = None) -> None:
    """Label agreement, score and baseline metrics, experiments and oracle -> eval.json"""
    silver = read_labels(ctx.out(LABELS_FILE))
    result: Dict[str, object] = {}

    gold = load_gold(ctx, gold_path)
    if gold is not None:
        shared = [p for p in set(silver) & set(gold) if silver[p] != -1 and gold[p] != -1]
        result["label_agreement"] = {"agreement": label_agreement(silver, gold), "n": len(shared)}

    result["scores"] = score_metrics(ctx, silver)

    model = BaselineModel.model_validate(read_json(ctx.out(MODEL_FILE)))
    result["baseline"] = held_out_metrics(model, read_dataset(ctx.out(TEST_FILE), ctx.schema))

    if ctx.out(EXPERIMENTS_FILE).is_file():
        result["experiments"] = read_json(ctx.out(EXPERIMENTS_FILE))

    truth_path = ctx.data_dir / GROUND_TRUTH_FILE
    if truth_path.is_file():
        result["oracle"] = oracle_report(
            read_ground_truth(truth_path),
            confirmed_onsets(read_cohort(ctx.out(COHORT_FILE))),
            silver,
            read_dataset(ctx.out(ENRICHED_FILE), ctx.schema),
            ctx.schema,
        )

    logger.info(f"Baseline held-out MCC {result['baseline']['mcc']:.3f}")
    ctx.record("evaluate", [write_json(result, ctx.out(EVAL_FILE))], seed=ctx.config.baseline.seed)


def run_report(ctx: StageContext) -> None:
    """Original (structured) vs enriched missingness -> enrichment.csv / enrichment.json"""
    report = enrichment_report(
        read_dataset(ctx.out(STRUCTURED_VECTORS_FILE), ctx.schema),
        read_dataset(ctx.out(ENRICHED_FILE), ctx.schema),
        ctx.schema,
    )
    written = [
        write_csv(enrichment_frame(report), ctx.out(ENRICHMENT_CSV)),
        write_json(enrichment_summary(report), ctx.out(ENRICHMENT_JSON)),
    ]
    ctx.record("report", written)
