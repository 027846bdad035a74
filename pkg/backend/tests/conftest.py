"""
Shared fixtures: shipped resources, hand-written mini corpora and a
session-scoped zero-noise synthetic corpus.
"""
import datetime as dt
import json
from pathlib import Path
from typing import Dict, List

import pytest

from app.core.config import PipelineConfig, apply_overrides, load_config
from app.models.results import GenConfig
from app.models.schemas import (
    FeatureSchema, FeatureValue, PatientVector, Provenance, ReportDocument
)
from app.services.ingest.resources import (
    load_code_map, load_lexicon, load_patterns, load_section_headers
)
from app.services.ingest.schema_loader import load_schema
from app.services.nlp.report2vector import ReportAnalyzer
from app.services.synth.generator import SynthCorpus, generate

CONFIG_DIR = Path(__file__).resolve().parent.parent / "config"
PIPELINE_TOML = CONFIG_DIR / "pipeline.toml"

# Enough patients for every distractor role to appear
ZERO_NOISE_PATIENTS = 70


@pytest.fixture(scope="session")
def schema() -> FeatureSchema:
    return load_schema(CONFIG_DIR / "schema.csv")


@pytest.fixture(scope="session")
def lexicon():
    return load_lexicon(CONFIG_DIR / "lexicon.tsv")


@pytest.fixture(scope="session")
def patterns():
    return load_patterns(CONFIG_DIR / "patterns.tsv")


@pytest.fixture(scope="session")
def code_map():
    return load_code_map(CONFIG_DIR / "code_map.tsv")


@pytest.fixture(scope="session")
def aliases():
    return load_section_headers(CONFIG_DIR / "section_headers.tsv")


@pytest.fixture(scope="session")
def analyzer(lexicon, aliases, patterns) -> ReportAnalyzer:
    return ReportAnalyzer(lexicon, aliases, patterns)


@pytest.fixture
def make_vector(schema):
    """Build a conforming vector from {feature: value} (True/False for tri-state)"""
    def _make(patient_id: str = "P1", provenance: Provenance = Provenance.STRUCTURED, **values) -> PatientVector:
        vector = PatientVector.empty(schema, patient_id, dt.date(2018, 3, 1))
        filled = dict(vector.values)
        for feature_id, value in values.items():
            if value is None:
                continue
            if isinstance(value, bool):
                filled[feature_id] = FeatureValue.flag(value, provenance)
            else:
                filled[feature_id] = FeatureValue.observed(value, provenance)
        return vector.model_copy(update={"values": filled})
    return _make


@pytest.fixture
def make_report():
    counter = {"n": 0}

    def _make(text: str, day: dt.date = dt.date(2018, 3, 1), patient_id: str = "P1") -> ReportDocument:
        counter["n"] += 1
        return ReportDocument(
            patient_id=patient_id, report_id=f"{patient_id}-{counter['n']:03d}", date=day, text=text
        )
    return _make


def write_jsonl_lines(path: Path, records: List[Dict]) -> Path:
    path.write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records), encoding="utf-8")
    return path


@pytest.fixture
def structured_dir(tmp_path) -> Path:
    """Two patients, five diagnoses and a few labs/procedures/prescriptions"""
    directory = tmp_path / "tables"
    directory.mkdir()
    (directory / "demographics.csv").write_text(
        "patient_id,birth_date,sex\n"
        "P1,1942-05-10,F\n"
        "P2,1960-11-30,M\n"
    )
    (directory / "diagnoses.csv").write_text(
        "patient_id,date,code_system,code\n"
        "P1,2017-02-01,ICD10,I10.9\n"
        "P1,2018-03-01,ICD10,I48.0\n"
        "P1,2018-09-01,ICD10,E11.9\n"
        "P2,2016-04-12,ICD10,J44.9\n"
        "P2,2019-05-01,ICD10,I48.1\n"
    )
    (directory / "labs.csv").write_text(
        "patient_id,date,test_code,value,unit\n"
        "P1,2018-01-30,NTPROBNP,900,pg/mL\n"
        "P1,2018-02-24,NTPROBNP,1500,pg/mL\n"
        "P1,2018-02-24,ALB,35,g/L\n"
        "P1,2018-05-01,CREA,1.9,mg/dL\n"
    )
    (directory / "procedures.csv").write_text(
        "patient_id,date,code,outcome\n"
        "P1,2018-02-20,ECO,45\n"
    )
    (directory / "prescriptions.csv").write_text(
        "patient_id,date,atc_code\n"
        "P2,2019-01-10,B01AF02\n"
    )
    return directory


@pytest.fixture(scope="session")
def zero_noise_config() -> GenConfig:
    return GenConfig(n_patients=ZERO_NOISE_PATIENTS, seed=7).zero_noise()


@pytest.fixture(scope="session")
def zero_noise_corpus(tmp_path_factory, zero_noise_config, schema, lexicon, code_map) -> SynthCorpus:
    out_dir = tmp_path_factory.mktemp("zero_noise")
    return generate(zero_noise_config, schema, lexicon, code_map, out_dir)


@pytest.fixture
def pipeline_config(tmp_path, zero_noise_corpus, zero_noise_config) -> PipelineConfig:
    """Shipped config pointed at the zero-noise corpus and a fresh out dir"""
    config = load_config(PIPELINE_TOML)
    return apply_overrides(config, {
        "paths": {"data_dir": zero_noise_corpus.directory, "out_dir": tmp_path / "out"},
        "synth": zero_noise_config.model_dump(),
    })
