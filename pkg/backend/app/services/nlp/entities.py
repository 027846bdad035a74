"""
CohortForge - Lexicon Entity Recognition with Negation
"""
from typing import List, Optional, Protocol, Tuple

from app.models.schemas import (
    EntityMention, Lexicon, Polarity, ScopeDirection, Section
)
from app.utils.text import count_words, normalize, sentence_spans


class EntityRecognizer(Protocol):
    """Anything that finds feature mentions in one section of a report"""

    def detect(self, text: str, section: Section, normalized: Optional[str] = None) -> List[EntityMention]:
        ...


class LexiconRecognizer:
    """
    Longest-match lexicon lookup with sentence-scoped negation.

    A forward trigger negates a mention it precedes, a backward trigger
    one it follows; either way at most `max_scope_tokens` words may sit
    between them and both must share a sentence.
    """

    def __init__(self, lexicon: Lexicon, max_scope_tokens: int = 5):
        self.lexicon = lexicon
        self.max_scope_tokens = max_scope_tokens

    def _triggers(self, norm: str, start: int, end: int) -> List[Tuple[int, int, ScopeDirection]]:
        pattern = self.lexicon.trigger_pattern
        if pattern is None:
            return []
        return [
            (m.start(), m.end(), self.lexicon.direction(m.group(0)))
            for m in pattern.finditer(norm, start, end)
        ]

    def _negated(self, norm: str, start: int, end: int, triggers) -> bool:
        for t_start, t_end, direction in triggers:
            if direction == ScopeDirection.FORWARD and t_end <= start:
                if count_words(norm[t_end:start]) <= self.max_scope_tokens:
                    return True
            elif direction == ScopeDirection.BACKWARD and t_start >= end:
                if count_words(norm[end:t_start]) <= self.max_scope_tokens:
                    return True
        return False

    def detect(self, text: str, section: Section, normalized: Optional[str] = None) -> List[EntityMention]:
        pattern = self.lexicon.surface_pattern
        if pattern is None:
            return []
        norm = normalized if normalized is not None else normalize(text)

        mentions: List[EntityMention] = []
        for s_start, s_end in sentence_spans(norm, section.body_start, section.end):
            triggers = self._triggers(norm, s_start, s_end)
            for match in pattern.finditer(norm, s_start, s_end):
                entry = self.lexicon.entry(match.group(0))
                negated = self._negated(norm, match.start(), match.end(), triggers)
                mentions.append(EntityMention(
                    feature_id=entry.feature_id,
                    surface=text[match.start():match.end()],
                    start=match.start(),
                    end=match.end(),
                    polarity=Polarity.NEGATED if negated else Polarity.AFFIRMED,
                    section_kind=section.kind,
                    value=entry.value,
                ))
        return mentions


def detect_entities(
    text: str,
    section: Section,
    lexicon: Lexicon,
    max_scope_tokens: int = 5
) -> List[EntityMention]:
    """Lexicon mentions inside one section, each with its polarity"""
    return LexiconRecognizer(lexicon, max_scope_tokens).detect(text, section)
