"""
CohortForge - Text Normalization Helpers
"""
import re
import unicodedata
from functools import lru_cache
from typing import List, Tuple

WORD_RE = re.compile(r"\w+")
# . ! ? ; followed by whitespace or end of text, or a newline
SENTENCE_END_RE = re.compile(r"[.!?;](?=\s|$)|\n")


@lru_cache(maxsize=4096)
def _fold(ch: str) -> str:
    base = unicodedata.normalize("NFD", ch)[0].lower()
    return base if len(base) == 1 else ch


def normalize(text: str) -> str:
    """Lowercase and strip accents, one output char per input char"""
    return "".join(_fold(ch) for ch in text)


def sentence_spans(text: str, start: int = 0, end: int = -1) -> List[Tuple[int, int]]:
    """Sentence [start, end) spans covering text[start:end]"""
    if end < 0:
        end = len(text)
    spans: List[Tuple[int, int]] = []
    cursor = start
    for match in SENTENCE_END_RE.finditer(text, start, end):
        spans.append((cursor, match.end()))
        cursor = match.end()
    if cursor < end:
        spans.append((cursor, end))
    return spans


def count_words(text: str) -> int:
    return len(WORD_RE.findall(text))


def parse_number(raw: str) -> float:
    """Parse a captured number, accepting a decimal comma"""
    return float(raw.strip().replace(",", "."))


def format_number(value: float) -> str:
    """Render a one-decimal number the way reports write it (decimal comma)"""
    text = f"{value:.1f}".rstrip("0").rstrip(".")
    return text.replace(".", ",")
