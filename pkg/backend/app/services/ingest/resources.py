"""
CohortForge - Declarative Resource Loaders

Lexicon, regex patterns, code map and section-header aliases are
tab-separated text files with `#` comments.
"""
import re
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Tuple

from loguru import logger
from pydantic import BaseModel, ConfigDict

from app.core.exceptions import MissingFile, ParseError, SchemaInvariantViolation
from app.models.schemas import (
    CodeMap, CodeRule, LabRule, Lexicon, LexiconEntry, NegationTrigger, PatternSpec,
    ScopeDirection, SectionKind
)
from app.utils.text import normalize, parse_number


def _rows(path: Path) -> Iterator[Tuple[int, List[str]]]:
    """Yield (line number, tab-separated fields) for non-comment lines"""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"resource file not found: {path}")
    with path.open(encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            stripped = line.rstrip("\n").rstrip("\r")
            if not stripped.strip() or stripped.lstrip().startswith("#"):
                continue
            yield line_number, [field.strip() for field in stripped.split("\t")]


# Lexicon

def load_lexicon(path: Path) -> Lexicon:
    """
    Load surface forms and negation triggers

    Args:
        path: `NEG<TAB>phrase<TAB>forward|backward`, `CONCEPT<TAB>id`,
              or `feature_id<TAB>surface[<TAB>value]` lines

    Returns:
        Lexicon with accent/case-normalized surfaces
    """
    entries: List[LexiconEntry] = []
    triggers: List[NegationTrigger] = []
    concepts: List[str] = []
    owners: Dict[str, Tuple[str, Optional[str]]] = {}

    for line_number, fields in _rows(path):
        kind = fields[0]
        if kind == "NEG":
            if len(fields) < 2:
                raise ParseError("NEG line needs a trigger phrase", file=str(path), line=line_number)
            direction = fields[2] if len(fields) > 2 and fields[2] else "forward"
            try:
                triggers.append(NegationTrigger(
                    phrase=normalize(fields[1]), direction=ScopeDirection(direction)
                ))
            except ValueError as e:
                raise ParseError(f"bad scope direction {direction!r}",
                                 file=str(path), line=line_number) from e
            continue
        if kind == "CONCEPT":
            if len(fields) < 2:
                raise ParseError("CONCEPT line needs an id", file=str(path), line=line_number)
            concepts.append(fields[1])
            continue

        if len(fields) < 2 or not fields[1]:
            raise ParseError("lexicon line needs a surface form", file=str(path), line=line_number)
        value = fields[2] if len(fields) > 2 and fields[2] else None
        surface = normalize(fields[1])
        owner = owners.get(surface)
        if owner is not None and owner != (kind, value):
            raise ParseError(
                f"surface '{fields[1]}' claimed by both {owner[0]} and {kind}",
                file=str(path), line=line_number
            )
        if owner is not None:
            continue
        owners[surface] = (kind, value)
        entries.append(LexiconEntry(feature_id=kind, surface=surface, value=value, display=fields[1]))

    if not triggers:
        raise ParseError("lexicon declares no negation triggers", file=str(path))
    lexicon = Lexicon(entries=entries, negation_triggers=triggers, concepts=concepts)
    logger.debug(f"Lexicon: {len(entries)} surfaces, {len(triggers)} triggers, {len(concepts)} concepts")
    return lexicon


# Patterns

def load_patterns(path: Path) -> List[PatternSpec]:
    """Load numeric extraction patterns; each must parse its own test phrase"""
    specs: List[PatternSpec] = []
    for line_number, fields in _rows(path):
        if len(fields) < 4:
            raise ParseError("pattern line needs feature, regex, unit, scale",
                             file=str(path), line=line_number)
        feature_id, regex, unit, raw_scale = fields[:4]
        try:
            scale = float(raw_scale)
            spec = PatternSpec(
                feature_id=feature_id, regex=regex, unit=unit, scale=scale,
                test_phrase=fields[4] if len(fields) > 4 and fields[4] else None
            )
        except (ValueError, re.error) as e:
            raise ParseError(f"bad pattern for {feature_id}: {e}",
                             file=str(path), line=line_number) from e
        if spec.compiled.groups != 1:
            raise ParseError(f"pattern for {feature_id} needs exactly one capture group",
                             file=str(path), line=line_number)
        if spec.test_phrase is not None:
            match = spec.compiled.search(normalize(spec.test_phrase))
            try:
                if match is None:
                    raise ValueError("no match")
                parse_number(match.group(1))
            except ValueError as e:
                raise ParseError(
                    f"pattern for {feature_id} does not parse its test phrase {spec.test_phrase!r}",
                    file=str(path), line=line_number
                ) from e
        specs.append(spec)
    logger.debug(f"Loaded {len(specs)} extraction patterns")
    return specs


# Code map

def load_code_map(path: Path) -> CodeMap:
    """Load DX/RX/PROC prefix rules and LAB/PROCVAL conversions"""
    diagnoses: List[CodeRule] = []
    prescriptions: List[CodeRule] = []
    procedures: List[CodeRule] = []
    labs: Dict[str, LabRule] = {}
    procedure_values: Dict[str, LabRule] = {}

    for line_number, fields in _rows(path):
        kind = fields[0]
        try:
            if kind in ("DX", "RX"):
                rule = CodeRule(
                    system=fields[1], prefix=fields[2].upper(), feature_id=fields[3],
                    value=fields[4] if len(fields) > 4 and fields[4] else None
                )
                (diagnoses if kind == "DX" else prescriptions).append(rule)
            elif kind == "PROC":
                procedures.append(CodeRule(system="PROC", prefix=fields[1].upper(), feature_id=fields[2]))
            elif kind in ("LAB", "PROCVAL"):
                rule = LabRule(test_code=fields[1], feature_id=fields[2], unit=fields[3],
                               scale=float(fields[4]))
                (labs if kind == "LAB" else procedure_values)[fields[1]] = rule
            else:
                raise ParseError(f"unknown code map entry {kind!r}", file=str(path), line=line_number)
        except (IndexError, ValueError) as e:
            raise ParseError(f"malformed {kind} line: {e}", file=str(path), line=line_number) from e

    code_map = CodeMap(
        diagnoses=diagnoses, prescriptions=prescriptions, procedures=procedures,
        labs=labs, procedure_values=procedure_values
    )
    check_prefixes(code_map)
    return code_map


def check_prefixes(code_map: CodeMap) -> None:
    """Within a system, no feature may claim a prefix of another feature's prefix"""
    for rules in (code_map.diagnoses, code_map.prescriptions, code_map.procedures):
        for a in rules:
            for b in rules:
                if a is b or a.system != b.system:
                    continue
                if b.prefix.startswith(a.prefix) and (a.feature_id, a.value) != (b.feature_id, b.value):
                    raise SchemaInvariantViolation(
                        f"ambiguous prefixes {a.system} {a.prefix} ({a.feature_id}) "
                        f"and {b.prefix} ({b.feature_id})"
                    )


# Section headers

class HeaderAlias(BaseModel):
    """Normalized header alias; wildcard aliases accept up to three extra words"""
    model_config = ConfigDict(frozen=True)

    kind: SectionKind
    alias: str
    wildcard: bool = False


def load_section_headers(path: Path) -> List[HeaderAlias]:
    aliases: List[HeaderAlias] = []
    for line_number, fields in _rows(path):
        if len(fields) < 2:
            raise ParseError("header line needs kind and alias", file=str(path), line=line_number)
        alias = fields[1]
        wildcard = alias.endswith("*")
        try:
            aliases.append(HeaderAlias(
                kind=SectionKind(fields[0]),
                alias=normalize(alias.rstrip("*").strip()),
                wildcard=wildcard
            ))
        except ValueError as e:
            raise ParseError(f"unknown section kind {fields[0]!r}",
                             file=str(path), line=line_number) from e
    return aliases
