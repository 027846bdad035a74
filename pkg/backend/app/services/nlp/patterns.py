"""
CohortForge - Regex Extraction of Numeric Findings
"""
from typing import Dict, List, Optional, Tuple

from loguru import logger

from app.models.schemas import PatternSpec, Section
from app.utils.text import normalize, parse_number


def extract_patterns(
    text: str,
    section: Section,
    specs: List[PatternSpec],
    normalized: Optional[str] = None
) -> List[Tuple[str, float]]:
    """
    Numeric values found in one section, converted to schema units

    Args:
        text: Full report text
        section: Section to scan (header excluded)
        specs: Compiled extraction patterns
        normalized: Pre-normalized text, computed when omitted

    Returns:
        One (feature_id, value) per feature, the last occurrence in document order
    """
    norm = normalized if normalized is not None else normalize(text)
    hits: List[Tuple[int, str, float]] = []
    for spec in specs:
        for match in spec.compiled.finditer(norm, section.body_start, section.end):
            raw = match.group(1)
            try:
                value = round(parse_number(raw) * spec.scale, 6)
            except (TypeError, ValueError):
                logger.warning(f"Skipping {spec.feature_id} capture {raw!r}: not a number")
                continue
            hits.append((match.start(), spec.feature_id, value))

    hits.sort(key=lambda h: h[0])
    last: Dict[str, Tuple[int, float]] = {}
    for position, feature_id, value in hits:
        last[feature_id] = (position, value)
    return [
        (feature_id, value)
        for feature_id, (_, value) in sorted(last.items(), key=lambda kv: kv[1][0])
    ]
