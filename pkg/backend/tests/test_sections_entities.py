"""
Tests for section segmentation, negation-aware entity recognition and regex extraction
"""
import numpy as np
import pytest

from app.models.schemas import Polarity, Section, SectionKind
from app.services.nlp.entities import LexiconRecognizer, detect_entities
from app.services.nlp.patterns import extract_patterns
from app.services.nlp.sections import SectionSegmenter, segment_sections


def whole(text: str) -> Section:
    return Section(kind=SectionKind.UNKNOWN, start=0, end=len(text), body_start=0)


# Sections

def test_uppercase_headers(aliases):
    text = "ANTECEDENTES PERSONALES:\nHTA.\nENFERMEDAD ACTUAL:\nDisnea de esfuerzo.\n"
    sections = segment_sections(text, aliases)
    assert [s.kind for s in sections] == [SectionKind.PAST_HISTORY, SectionKind.CURRENT_EPISODE]
    assert sections[0].start == 0
    assert sections[-1].end == len(text)
    assert sections[0].end == sections[1].start
    assert text[sections[0].body_start:sections[0].end] == "HTA.\n"


def test_text_without_headers_is_one_unknown_section(aliases):
    text = "Paciente estable, se da de alta."
    (section,) = segment_sections(text, aliases)
    assert section.kind == SectionKind.UNKNOWN
    assert (section.start, section.end) == (0, len(text))


def test_lowercase_accented_header(aliases):
    text = "evolución:\nBuena evolución clínica.\n"
    (section,) = segment_sections(text, aliases)
    assert section.kind == SectionKind.EVOLUTION


def test_preamble_becomes_unknown_section(aliases):
    text = "Informe de alta\nJUICIO CLÍNICO:\nFA paroxística.\n"
    sections = segment_sections(text, aliases)
    assert [s.kind for s in sections] == [SectionKind.UNKNOWN, SectionKind.DIAGNOSIS]


def test_inline_uppercase_header_keeps_body_on_line(aliases):
    text = "EVOLUCIÓN: estable, sin incidencias.\nTRATAMIENTO: bisoprolol.\n"
    sections = segment_sections(text, aliases)
    assert [s.kind for s in sections] == [SectionKind.EVOLUTION, SectionKind.TREATMENT]
    assert text[sections[1].body_start:sections[1].end].strip() == "bisoprolol."


def test_lowercase_inline_text_is_not_a_header(aliases):
    text = "Se comenta tratamiento: bisoprolol.\n"
    assert [s.kind for s in segment_sections(text, aliases)] == [SectionKind.UNKNOWN]


BODY_LINES = [
    "Paciente estable.", "Se comenta tratamiento: bisoprolol.", "FA paroxística.", "", "   ",
    "TA 130/80, FC 72 lpm.", "Sin incidencias\r", "Nota: revisar en 3 meses.", "HTA. DM2.",
]


@pytest.mark.parametrize("seed", range(25))
def test_sections_partition_random_text(aliases, seed):
    rng = np.random.default_rng(seed)
    headers = [alias.alias.upper() for alias in aliases if not alias.wildcard]
    lines = []
    for _ in range(int(rng.integers(0, 12))):
        if rng.random() < 0.35:
            header = headers[int(rng.integers(len(headers)))]
            lines.append(header + (": " + BODY_LINES[int(rng.integers(len(BODY_LINES)))] if rng.random() < 0.5 else ":"))
        else:
            lines.append(BODY_LINES[int(rng.integers(len(BODY_LINES)))])
    text = "\n".join(lines) + ("\n" if rng.random() < 0.5 else "")
    sections = segment_sections(text, aliases)
    assert sections
    assert sections[0].start == 0
    assert sections[-1].end == len(text)
    assert sum(s.end - s.start for s in sections) == len(text)
    for before, after in zip(sections, sections[1:]):
        assert before.end == after.start
        assert before.start < before.end


@pytest.mark.parametrize("candidate,kind", [
    ("Antecedentes", SectionKind.PAST_HISTORY),
    ("ANTECEDENTES PERSONALES Y FAMILIARES:", SectionKind.PAST_HISTORY),
    ("Exploración física", SectionKind.EXAM),
    ("Juicio diagnóstico:", SectionKind.DIAGNOSIS),
    ("Antecedentes de HTA, DM.", None),
    ("Comentario", None),
])
def test_match_header(aliases, candidate, kind):
    assert SectionSegmenter(aliases).match_header(candidate) == kind


# Entities

def test_negated_af(lexicon):
    text = "no se evidencia fibrilación auricular"
    (mention,) = detect_entities(text, whole(text), lexicon)
    assert mention.feature_id == "af_type"
    assert mention.polarity == Polarity.NEGATED
    assert mention.surface == "fibrilación auricular"


def test_longest_match_carries_value(lexicon):
    text = "fibrilación auricular paroxística"
    (mention,) = detect_entities(text, whole(text), lexicon)
    assert mention.polarity == Polarity.AFFIRMED
    assert mention.value == "paroxysmal"
    assert (mention.start, mention.end) == (0, len(text))


def test_sin_negates_within_scope(lexicon):
    text = "sin datos de insuficiencia cardíaca"
    (mention,) = detect_entities(text, whole(text), lexicon)
    assert mention.feature_id == "heart_failure"
    assert mention.polarity == Polarity.NEGATED


def test_backward_trigger(lexicon):
    text = "Diabetes descartada en el estudio."
    (mention,) = detect_entities(text, whole(text), lexicon)
    assert mention.feature_id == "diabetes"
    assert mention.polarity == Polarity.NEGATED


def test_negation_scope_is_limited(lexicon):
    text = "No acude a urgencias por dolor en el pecho, tiene HTA."
    (mention,) = detect_entities(text, whole(text), lexicon, max_scope_tokens=5)
    assert mention.polarity == Polarity.AFFIRMED
    (wide,) = detect_entities(text, whole(text), lexicon, max_scope_tokens=10)
    assert wide.polarity == Polarity.NEGATED


def test_negation_does_not_cross_sentences(lexicon):
    text = "No fuma. Tiene HTA."
    (mention,) = detect_entities(text, whole(text), lexicon)
    assert mention.feature_id == "hypertension"
    assert mention.polarity == Polarity.AFFIRMED


def test_short_surfaces_respect_word_boundaries(lexicon):
    text = "Se envía por fax al centro de referencia."
    assert detect_entities(text, whole(text), lexicon) == []


def test_section_kind_and_header_exclusion(lexicon, aliases):
    text = "ANTECEDENTES:\nHTA. DM.\nTRATAMIENTO:\nSintrom.\n"
    sections = segment_sections(text, aliases)
    recognizer = LexiconRecognizer(lexicon)
    found = [(m.feature_id, m.section_kind) for s in sections for m in recognizer.detect(text, s)]
    assert found == [
        ("hypertension", SectionKind.PAST_HISTORY),
        ("diabetes", SectionKind.PAST_HISTORY),
        ("vka", SectionKind.TREATMENT),
    ]


# Patterns

@pytest.mark.parametrize("text,expected", [
    ("FEVI 45%", [("lvef", 45.0)]),
    ("AI de 43 mm", [("la_diameter", 43.0)]),
    ("NT-proBNP: 1500 pg/ml", [("nt_probnp", 1500.0)]),
    ("Albúmina 35 g/L", [("albumin", 3.5)]),
    ("Albúmina 3,4 g/dl", [("albumin", 3.4)]),
    ("Creatinina 1,3 mg/dl", [("creatinine", 1.3)]),
])
def test_extract_patterns(patterns, text, expected):
    assert extract_patterns(text, whole(text), patterns) == expected


def test_last_occurrence_wins(patterns):
    text = "Ingreso con FEVI 55%. Al alta FEVI 45%."
    assert extract_patterns(text, whole(text), patterns) == [("lvef", 45.0)]


def test_patterns_stay_inside_section(patterns, aliases):
    text = "PRUEBAS COMPLEMENTARIAS:\nFEVI 40%.\nEVOLUCIÓN:\nEstable.\n"
    sections = segment_sections(text, aliases)
    assert extract_patterns(text, sections[0], patterns) == [("lvef", 40.0)]
    assert extract_patterns(text, sections[1], patterns) == []
