"""
Zero-noise oracle check: generate a noiseless synthetic corpus, run every
stage on it and compare the outputs with the planted ground truth.
Run with: python -m scripts.oracle_check [N_PATIENTS] [SEED]
"""
import sys
import tempfile
from pathlib import Path

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from loguru import logger

from app.commands.context import EVAL_FILE, StageContext
from app.commands.pipeline import run_all
from app.core.config import apply_overrides, load_config
from app.utils.io import read_json

CONFIG_FILE = Path(__file__).parent.parent / "config" / "pipeline.toml"
ORACLE_KEYS = ("cohort_precision", "cohort_recall", "label_accuracy", "feature_agreement")


def run_oracle(workdir: Path, n_patients: int, seed: int) -> dict:
    """Synthesize, run the full pipeline and return the oracle section of eval.json"""
    config = load_config(CONFIG_FILE)
    synth = config.synth.model_copy(update={"n_patients": n_patients, "seed": seed}).zero_noise()
    config = apply_overrides(config, {
        "paths": {"data_dir": workdir / "data", "out_dir": workdir / "out"},
        "synth": synth.model_dump(),
    })
    ctx = StageContext(config)
    run_all(ctx, with_synth=True)
    return read_json(ctx.out(EVAL_FILE))["oracle"]


def main():
    n_patients = int(sys.argv[1]) if len(sys.argv) > 1 else 200
    seed = int(sys.argv[2]) if len(sys.argv) > 2 else 42

    logger.info("\n" + "=" * 60)
    logger.info(f"COHORTFORGE - ZERO-NOISE ORACLE ({n_patients} patients, seed {seed})")
    logger.info("=" * 60 + "\n")

    with tempfile.TemporaryDirectory(prefix="cohortforge-oracle-") as tmp:
        oracle = run_oracle(Path(tmp), n_patients, seed)

    failed = [key for key in ORACLE_KEYS if oracle[key] != 1.0]
    for key in ORACLE_KEYS:
        mark = "✓" if key not in failed else "✗"
        logger.info(f"{mark} {key}: {oracle[key]:.4f}")

    if failed:
        logger.error(f"\n❌ ORACLE FAILED: {', '.join(failed)}")
        for feature, count in oracle["feature_disagreements"].items():
            logger.error(f"  {feature}: {count} patients disagree")
        sys.exit(1)

    logger.info("\n" + "=" * 60)
    logger.info("✅ ORACLE PASSED")
    logger.info("=" * 60)


if __name__ == "__main__":
    main()
