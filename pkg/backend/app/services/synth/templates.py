"""
CohortForge - Report Templates for the Synthetic Corpus

Reports are rendered from the shipped lexicon's display forms and the
phrases the extraction patterns expect, so every emitted fact is
recoverable by the extractor.
"""
from typing import Dict, List, Optional

import numpy as np

from app.models.schemas import Lexicon
from app.utils.text import format_number

FORWARD_NEGATIONS = ("No {x}.", "Sin {x}.", "Niega {x}.", "No se evidencia {x}.")
BACKWARD_NEGATION = "{X} descartado."

# Phrases matching the shipped numeric patterns
NUMERIC_PHRASES: Dict[str, str] = {
    "weight": "Peso {v} kg.",
    "height": "Talla {v} cm.",
    "bmi": "IMC {v} kg/m2.",
    "egfr": "FG {v} ml/min.",
    "creatinine": "Creatinina {v} mg/dl.",
    "albumin": "Albúmina {v} g/dl.",
    "crp": "PCR {v} mg/l.",
    "nt_probnp": "NT-proBNP: {v} pg/ml.",
    "hemoglobin": "Hemoglobina {v} g/dl.",
    "tsh": "TSH {v} mU/l.",
    "potassium": "Potasio {v} mmol/l.",
    "sodium": "Sodio {v} mmol/l.",
    "glucose": "Glucosa {v} mg/dl.",
    "hba1c": "HbA1c {v}%.",
    "ldl_cholesterol": "LDL {v} mg/dl.",
    "hdl_cholesterol": "HDL {v} mg/dl.",
    "total_cholesterol": "Colesterol total {v} mg/dl.",
    "triglycerides": "Triglicéridos {v} mg/dl.",
    "troponin": "Troponina {v} ng/l.",
    "uric_acid": "Ácido úrico {v} mg/dl.",
    "platelets": "Plaquetas {v} x10^3/ul.",
    "lvef": "FEVI {v}%.",
    "la_diameter": "AI de {v} mm.",
}

AF_ECG = "ECG: fibrilación auricular con respuesta ventricular rápida."
SINUS_ECG = "ECG: ritmo sinusal a {rate} lpm."
EMPTY_BODY = "Nada reseñable."

UNRELATED_EPISODES = (
    "Caída casual con fractura de tobillo derecho.",
    "Cuadro de gastroenteritis aguda.",
    "Herida incisa en mano izquierda.",
    "Lumbalgia mecánica tras esfuerzo.",
)


def capitalize(text: str) -> str:
    return text[:1].upper() + text[1:]


def affirmed_sentence(display: str) -> str:
    return f"{capitalize(display)}."


def negated_sentence(display: str, rng: np.random.Generator) -> str:
    choice = int(rng.integers(len(FORWARD_NEGATIONS) + 1))
    if choice == len(FORWARD_NEGATIONS):
        return BACKWARD_NEGATION.format(X=capitalize(display))
    return FORWARD_NEGATIONS[choice].format(x=display)


def numeric_sentence(feature_id: str, value: float) -> Optional[str]:
    template = NUMERIC_PHRASES.get(feature_id)
    if template is None:
        return None
    return template.format(v=format_number(value))


def demographic_sentence(age: Optional[float], sex: Optional[str], lexicon: Lexicon) -> Optional[str]:
    who = lexicon.display_for("sex", sex) if sex else "Paciente"
    if age is None:
        return f"{capitalize(who)}." if sex else None
    return f"{capitalize(who)} de {int(age)} años."


def render(sections: List[tuple]) -> str:
    """Header line followed by one body line per section"""
    lines = []
    for header, sentences in sections:
        lines.append(f"{header}:")
        lines.append(" ".join(sentences) if sentences else EMPTY_BODY)
    return "\n".join(lines) + "\n"


def onset_report(
    demographics: Optional[str],
    history: List[str],
    exam: List[str],
    tests: List[str],
    treatment: List[str],
    af_display: str
) -> str:
    return render([
        ("ANTECEDENTES PERSONALES", history),
        ("ENFERMEDAD ACTUAL", ([demographics] if demographics else []) + [
            "Acude por palpitaciones de inicio reciente.", AF_ECG,
        ]),
        ("EXPLORACIÓN FÍSICA", exam),
        ("PRUEBAS COMPLEMENTARIAS", tests),
        ("EVOLUCIÓN", ["Evolución favorable durante el ingreso."]),
        ("JUICIO CLÍNICO", [f"{capitalize(af_display)} de debut."]),
        ("TRATAMIENTO", treatment),
    ])


def af_follow_up_report(af_display: str, onset_year: int) -> str:
    return render([
        ("ANTECEDENTES PERSONALES", [f"{capitalize(af_display)} diagnosticada en {onset_year}."]),
        ("ENFERMEDAD ACTUAL", ["Acude a urgencias por palpitaciones.", AF_ECG]),
        ("JUICIO CLÍNICO", ["Recurrencia de fibrilación auricular."]),
    ])


def sinus_follow_up_report(af_display: str, onset_year: int, heart_rate: int) -> str:
    return render([
        ("ANTECEDENTES PERSONALES", [f"{capitalize(af_display)} diagnosticada en {onset_year}."]),
        ("ENFERMEDAD ACTUAL", ["Revisión programada en consulta.", SINUS_ECG.format(rate=heart_rate)]),
        ("JUICIO CLÍNICO", ["Control del ritmo estable."]),
    ])


def prior_history_report(history_phrase: str) -> str:
    return render([
        ("ANTECEDENTES PERSONALES", [f"{capitalize(history_phrase)}."]),
        ("ENFERMEDAD ACTUAL", ["Ingreso programado para cirugía de cataratas."]),
    ])


def unrelated_report(rng: np.random.Generator) -> str:
    episode = UNRELATED_EPISODES[int(rng.integers(len(UNRELATED_EPISODES)))]
    return render([
        ("ENFERMEDAD ACTUAL", [episode]),
        ("TRATAMIENTO", ["Paracetamol a demanda."]),
    ])
