"""
CohortForge - Command-line Entry Point

Run with: python -m app.main <subcommand> [--config FILE] [--jobs N] [flags]
"""
import argparse
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from loguru import logger

from app.commands.context import StageContext
from app.commands.evaluate import run_evaluate
from app.commands.pipeline import STAGE_FUNCTIONS, run_all
from app.commands.synth import add_synth_flags, synth_overrides
from app.core.config import apply_overrides, get_settings, load_config
from app.core.exceptions import PipelineError, exit_code_for

LOG_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | "
    "<cyan>{name}</cyan>:<cyan>{function}</cyan> - <level>{message}</level>"
)

STAGE_HELP = {
    "synth": "Generate a synthetic corpus into the data directory",
    "cohort": "Select and verify AF onset candidates",
    "extract-reports": "Build report-side vectors for the cohort",
    "extract-structured": "Build structured-side vectors for the cohort",
    "merge": "Merge both vectors into the enriched dataset",
    "label": "Assign silver progression labels",
    "score": "Compute CHA2DS2-VASc, HATCH and APPLE",
    "train-baseline": "Export train/test splits and fit the baseline",
    "evaluate": "Write eval.json",
    "report": "Write the enrichment report",
    "all": "Run the full pipeline",
}


def configure_logging(level: str) -> None:
    """Single stderr sink; stdout stays free for scripting"""
    logger.remove()
    logger.add(sys.stderr, format=LOG_FORMAT, level=level)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="Pipeline TOML (default: $COHORTFORGE_CONFIG)")
    common.add_argument("--jobs", type=int, help="Worker processes for per-patient work")
    common.add_argument("--data-dir", type=Path, help="Override paths.data_dir")
    common.add_argument("--log-level", help="Override LOG_LEVEL")

    parser = argparse.ArgumentParser(prog="cohortforge", description="AF progression cohort and dataset builder")
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="subcommand")
    for name, help_text in STAGE_HELP.items():
        sub = subparsers.add_parser(name, parents=[common], help=help_text)
        if name == "synth":
            sub.add_argument("--out-dir", type=Path, dest="synth_out_dir", help="Override paths.data_dir")
        else:
            sub.add_argument("--out-dir", type=Path, help="Override paths.out_dir")
        if name in ("synth", "all"):
            add_synth_flags(sub)
        if name == "all":
            sub.add_argument("--with-synth", action="store_true", help="Generate the corpus first")
        if name in ("evaluate", "all"):
            sub.add_argument("--gold", type=Path, help="Gold label CSV (patient_id,label)")
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    paths = {
        "data_dir": getattr(args, "synth_out_dir", None) or args.data_dir,
        "out_dir": getattr(args, "out_dir", None),
    }
    overrides: Dict[str, Any] = {
        "jobs": args.jobs,
        "paths": {k: Path(v).resolve() for k, v in paths.items() if v is not None},
    }
    synth = synth_overrides(args)
    if synth:
        overrides["synth"] = synth
    return overrides


def dispatch(args: argparse.Namespace) -> None:
    config = apply_overrides(load_config(args.config), _overrides(args))
    ctx = StageContext(config)
    logger.info(f"cohortforge {args.command} (config hash {ctx.config_hash}, jobs {ctx.jobs})")

    if args.command == "all":
        run_all(ctx, with_synth=args.with_synth, gold_path=args.gold)
    elif args.command == "evaluate":
        run_evaluate(ctx, gold_path=args.gold)
    else:
        STAGE_FUNCTIONS[args.command](ctx)


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments, run one subcommand and map failures to exit codes

    Returns:
        0 on success, 1 on data validation errors, 2 on I/O errors
    """
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level or get_settings().LOG_LEVEL)

    try:
        dispatch(args)
    except (PipelineError, OSError) as e:
        if isinstance(e, PipelineError):
            e.with_context(stage=args.command)
        logger.error(f"{args.command} failed: {e}")
        return exit_code_for(e)
    return 0


if __name__ == "__main__":
    sys.exit(main())
