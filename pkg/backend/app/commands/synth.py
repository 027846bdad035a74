"""
Synthetic Corpus Command
"""
import argparse
from typing import Any, Dict

from loguru import logger

from app.commands.context import StageContext
from app.models.results import GEN_PROFILES
from app.models.schemas import Category
from app.services.synth.generator import generate
from app.utils.manifest import MANIFEST_NAME


def add_synth_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("synthetic corpus")
    group.add_argument("--profile", choices=sorted(GEN_PROFILES), help="Table-shape preset (patients, positive rate)")
    group.add_argument("--n", type=int, dest="n_patients", help="Labeled cohort patients")
    group.add_argument("--seed", type=int, help="Generator seed")
    group.add_argument("--positive-rate", type=float, help="Share of label-1 patients")
    group.add_argument("--missingness", type=float,
                       help="Structured missingness for every category (clears per-feature overrides)")
    group.add_argument("--coverage", type=float, help="Probability a feature is mentioned in the onset report")
    group.add_argument("--negation-rate", type=float, help="Probability an absent feature is written negated")
    group.add_argument("--dropout", type=float, help="Probability a follow-up report is dropped")
    group.add_argument("--signal-strength", type=float, help="Planted feature/label correlation in [0, 1]")


def synth_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Map synth flags onto the [synth] config section"""
    section: Dict[str, Any] = {}
    profile = getattr(args, "profile", None)
    if profile:
        section["n_patients"], section["positive_rate"] = GEN_PROFILES[profile]
    for flag, field in (
        ("n_patients", "n_patients"),
        ("seed", "seed"),
        ("positive_rate", "positive_rate"),
        ("coverage", "report_coverage"),
        ("negation_rate", "negation_rate"),
        ("dropout", "report_dropout_rate"),
        ("signal_strength", "signal_strength"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            section[field] = value
    missingness = getattr(args, "missingness", None)
    if missingness is not None:
        section["structured_missingness"] = {c.value: missingness for c in Category if c != Category.AF_RELATED}
        section["feature_missingness"] = {}
    return section


def run_synth(ctx: StageContext) -> None:
    """Write a synthetic corpus into the data directory"""
    corpus = generate(
        ctx.config.synth,
        ctx.schema,
        ctx.lexicon,
        ctx.code_map,
        ctx.data_dir,
        jobs=ctx.jobs,
        window=ctx.config.window,
    )
    files = [f for f in corpus.files if f.name != MANIFEST_NAME]
    ctx.record("synth", files, directory=ctx.data_dir, seed=ctx.config.synth.seed)
    logger.info(f"Synthetic corpus ready in {ctx.data_dir}")
