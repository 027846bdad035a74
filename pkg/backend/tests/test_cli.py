"""
End-to-end tests for the cohortforge command line
"""
from pathlib import Path

import pandas as pd
import pytest

from app.core.config import load_config
from app.main import main
from app.services.labeler import read_labels
from app.services.synth.generator import GROUND_TRUTH_FILE, read_ground_truth
from app.utils.io import read_json
from app.utils.manifest import MANIFEST_NAME
from tests.conftest import PIPELINE_TOML

STAGE_ORDER = [
    "cohort", "extract-reports", "extract-structured", "merge", "label",
    "score", "train-baseline", "evaluate", "report",
]


def cli(command: str, data_dir: Path, out_dir: Path, *extra: str) -> int:
    return main([
        command, "--config", str(PIPELINE_TOML), "--data-dir", str(data_dir),
        "--out-dir", str(out_dir), "--log-level", "WARNING", *extra,
    ])


def artifact_bytes(directory: Path):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir()) if p.is_file()}


@pytest.fixture(scope="module")
def full_run(tmp_path_factory, zero_noise_corpus):
    out_dir = tmp_path_factory.mktemp("cli") / "out"
    assert cli("all", zero_noise_corpus.directory, out_dir) == 0
    return out_dir


def test_all_writes_every_artifact(full_run):
    names = {p.name for p in full_run.iterdir()}
    for name in (
        "cohort.csv", "report_vectors.csv", "structured_vectors.csv", "dataset_enriched.csv",
        "conflicts.jsonl", "labels.csv", "scores.csv", "train.csv", "test.csv", "model.json",
        "predictions.csv", "experiments.json", "eval.json", "enrichment.csv", "enrichment.json",
        MANIFEST_NAME,
    ):
        assert name in names, name


def test_zero_noise_labels_match_ground_truth(full_run, zero_noise_corpus):
    truths = read_ground_truth(zero_noise_corpus.directory / GROUND_TRUTH_FILE)
    silver = read_labels(full_run / "labels.csv")
    expected = {t.patient_id: t.label for t in truths if t.in_cohort}
    assert silver == expected


def test_zero_noise_oracle(full_run):
    result = read_json(full_run / "eval.json")
    oracle = result["oracle"]
    assert oracle["cohort_precision"] == 1.0
    assert oracle["cohort_recall"] == 1.0
    assert oracle["label_accuracy"] == 1.0
    assert oracle["feature_agreement"] == 1.0
    assert oracle["feature_disagreements"] == {}
    assert result["label_agreement"]["agreement"] == 1.0
    assert set(result["scores"]) == {"chads2vasc", "hatch", "apple"}
    assert "mcc" in result["baseline"]


def test_manifest_records_config_hash(full_run):
    config_hash = load_config(PIPELINE_TOML).config_hash()
    manifest = read_json(full_run / MANIFEST_NAME)
    assert manifest["labels.csv"]["stage"] == "label"
    assert manifest["model.json"]["seed"] == 42
    assert manifest["eval.json"]["seed"] == 42
    assert manifest["labels.csv"]["seed"] is None
    assert manifest["dataset_enriched.csv"]["seed"] is None
    assert {entry["config_hash"] for entry in manifest.values()} == {config_hash}


def test_rerun_is_byte_identical(full_run, zero_noise_corpus, tmp_path):
    assert cli("all", zero_noise_corpus.directory, tmp_path / "again", "--jobs", "2") == 0
    assert artifact_bytes(tmp_path / "again") == artifact_bytes(full_run)


def test_stages_run_in_isolation(full_run, zero_noise_corpus, tmp_path):
    out_dir = tmp_path / "staged"
    for stage in STAGE_ORDER:
        assert cli(stage, zero_noise_corpus.directory, out_dir) == 0, stage
    assert artifact_bytes(out_dir) == artifact_bytes(full_run)


def test_merge_with_mismatched_schema(zero_noise_corpus, tmp_path):
    out_dir = tmp_path / "out"
    for stage in ("cohort", "extract-reports", "extract-structured"):
        assert cli(stage, zero_noise_corpus.directory, out_dir) == 0
    vectors = out_dir / "report_vectors.csv"
    header, rest = vectors.read_text(encoding="utf-8").split("\n", 1)
    vectors.write_text(header.replace(",lvef,", ",lvef_pct,") + "\n" + rest, encoding="utf-8")
    assert cli("merge", zero_noise_corpus.directory, out_dir) == 1
    assert not (out_dir / "dataset_enriched.csv").exists()


def test_stage_without_inputs(zero_noise_corpus, tmp_path):
    assert cli("label", zero_noise_corpus.directory, tmp_path / "empty") == 2


def test_missing_data_dir(tmp_path):
    assert cli("cohort", tmp_path / "nowhere", tmp_path / "out") == 2


def test_invalid_config(tmp_path):
    bad = tmp_path / "pipeline.toml"
    bad.write_text(
        PIPELINE_TOML.read_text(encoding="utf-8").replace("start_offset_days = 30", "start_offset_days = 900"),
        encoding="utf-8",
    )
    assert main(["cohort", "--config", str(bad), "--log-level", "WARNING"]) == 1


def test_synth_subcommand(tmp_path):
    data_dir = tmp_path / "corpus"
    argv = ["synth", "--config", str(PIPELINE_TOML), "--out-dir", str(data_dir),
            "--n", "30", "--seed", "3", "--log-level", "WARNING"]
    assert main(argv) == 0
    assert (data_dir / GROUND_TRUTH_FILE).is_file()
    assert read_json(data_dir / MANIFEST_NAME)["reports.jsonl"]["seed"] == 3


@pytest.mark.slow
def test_enrichment_never_adds_missingness(tmp_path, schema):
    data_dir, out_dir = tmp_path / "data", tmp_path / "out"
    argv = ["--with-synth", "--n", "300", "--seed", "42", "--missingness", "0.5", "--coverage", "0.8"]
    assert cli("all", data_dir, out_dir, *argv) == 0

    frame = pd.read_csv(out_dir / "enrichment.csv")
    missing = frame[frame["metric"] == "missing_pct"]
    assert set(missing["feature"]) == set(schema.predictive_ids)
    worse = missing[missing["enriched"] > missing["original"]]
    assert worse.empty, list(worse["feature"])

    categories = read_json(out_dir / "enrichment.json")["categories"]
    for category in ("Lab", "History", "Treatment"):
        entry = categories[category]
        assert entry["mean_missing_enriched"] < entry["mean_missing_original"], category
