"""
Full Pipeline Command
"""
from functools import partial
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

from loguru import logger

from app.commands.context import StageContext
from app.commands.evaluate import run_evaluate, run_report
from app.commands.extract import run_cohort, run_extract_reports, run_extract_structured, run_merge
from app.commands.label import run_label
from app.commands.predict import run_score, run_train_baseline
from app.commands.synth import run_synth
from app.core.exceptions import PipelineError

Stage = Callable[[StageContext], None]

STAGES: List[Tuple[str, Stage]] = [
    ("cohort", run_cohort),
    ("extract-reports", run_extract_reports),
    ("extract-structured", run_extract_structured),
    ("merge", run_merge),
    ("label", run_label),
    ("score", run_score),
    ("train-baseline", run_train_baseline),
    ("evaluate", run_evaluate),
    ("report", run_report),
]
STAGE_FUNCTIONS: Dict[str, Stage] = {"synth": run_synth, **dict(STAGES)}


def run_all(ctx: StageContext, with_synth: bool = False, gold_path: Optional[Path] = None) -> None:
    """Every stage in order; stage boundaries are file barriers"""
    stages = ([("synth", run_synth)] if with_synth else []) + STAGES
    stages = [
        (name, partial(run_evaluate, gold_path=gold_path) if name == "evaluate" else stage)
        for name, stage in stages
    ]
    for name, stage in stages:
        logger.info("=" * 60)
        logger.info(f"STAGE {name}")
        logger.info("=" * 60)
        try:
            stage(ctx)
        except PipelineError as e:
            raise e.with_context(stage=name)
    logger.info(f"Pipeline finished: {len(stages)} stages, artifacts in {ctx.out_dir}")
