"""
CohortForge - Report Section Segmentation
"""
import re
from typing import Dict, List, Optional, Tuple

from app.models.schemas import Section, SectionKind
from app.services.ingest.resources import HeaderAlias
from app.utils.text import normalize

# Inline header: an UPPERCASE word run at line start followed by a colon
INLINE_HEADER_RE = re.compile(r"[ \t]*([^\W\d_]+(?:[ \t]+[^\W\d_]+){0,5})[ \t]*:")
MAX_WILDCARD_WORDS = 3


class SectionSegmenter:
    """
    Splits a report into typed sections.

    A line is a header when its normalized form (trailing colon optional)
    equals a known alias, or when it starts with an UPPERCASE alias
    followed by a colon (the body then continues on the same line).
    """

    def __init__(self, aliases: List[HeaderAlias]):
        self._exact: Dict[str, SectionKind] = {}
        self._wildcards: List[HeaderAlias] = []
        for alias in aliases:
            if alias.wildcard:
                self._wildcards.append(alias)
            else:
                self._exact.setdefault(alias.alias, alias.kind)
        self._wildcards.sort(key=lambda a: -len(a.alias))

    def match_header(self, candidate: str) -> Optional[SectionKind]:
        """Section kind for a header candidate, None if it is not a header"""
        candidate = " ".join(normalize(candidate).split())
        if candidate.endswith(":"):
            candidate = candidate[:-1].rstrip()
        if not candidate:
            return None
        if candidate in self._exact:
            return self._exact[candidate]
        for alias in self._wildcards:
            if candidate == alias.alias:
                return alias.kind
            if candidate.startswith(alias.alias + " "):
                rest = candidate[len(alias.alias) + 1:]
                if not set(rest) & {".", ":", ","} and len(rest.split()) <= MAX_WILDCARD_WORDS:
                    return alias.kind
        return None

    def _header_in_line(self, line: str) -> Optional[Tuple[SectionKind, int]]:
        """(kind, length of the header part) when the line opens a section"""
        body = line.rstrip("\r\n")
        kind = self.match_header(body)
        if kind is not None:
            return kind, len(line)
        match = INLINE_HEADER_RE.match(body)
        if match:
            word_run = match.group(1)
            if word_run == word_run.upper():
                kind = self.match_header(word_run)
                if kind is not None:
                    return kind, match.end()
        return None

    def segment(self, text: str) -> List[Section]:
        if not text.strip():
            return [Section(kind=SectionKind.UNKNOWN, start=0, end=len(text), body_start=0)]

        headers: List[Tuple[int, int, SectionKind]] = []
        offset = 0
        for line in text.splitlines(keepends=True):
            found = self._header_in_line(line)
            if found is not None:
                kind, header_length = found
                headers.append((offset, offset + header_length, kind))
            offset += len(line)

        sections: List[Section] = []
        first_start = headers[0][0] if headers else len(text)
        if first_start > 0:
            sections.append(Section(kind=SectionKind.UNKNOWN, start=0, end=first_start, body_start=0))
        for i, (start, body_start, kind) in enumerate(headers):
            end = headers[i + 1][0] if i + 1 < len(headers) else len(text)
            sections.append(Section(
                kind=kind,
                start=start,
                end=end,
                header_text=text[start:body_start].strip(),
                body_start=body_start,
            ))
        return sections


def segment_sections(text: str, aliases: List[HeaderAlias]) -> List[Section]:
    """Partition `text` into ordered, non-overlapping sections covering all of it"""
    return SectionSegmenter(aliases).segment(text)
