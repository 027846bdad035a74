"""
CohortForge - Feature Schema Loader
"""
from pathlib import Path
from typing import Iterable, List

import pandas as pd
from loguru import logger
from pydantic import ValidationError

from app.core.exceptions import MissingFile, ParseError, SchemaInvariantViolation
from app.models.schemas import (
    AF_FEATURE, EXPECTED_CATEGORY_COUNTS, LABEL_FEATURE, REQUIRED_FEATURES,
    Category, CodeMap, FeatureDef, FeatureSchema, Lexicon, PatternSpec, ValueKind
)

SCHEMA_COLUMNS = ["id", "category", "value_kind", "unit", "allowed_values"]
EXPECTED_TOTAL = sum(EXPECTED_CATEGORY_COUNTS.values())


def load_schema(path: Path) -> FeatureSchema:
    """
    Load and validate the declarative feature schema

    Args:
        path: CSV file `id,category,value_kind,unit,allowed_values` with # comments

    Returns:
        FeatureSchema honouring the 85-feature / category-count invariants
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"schema file not found: {path}")

    try:
        frame = pd.read_csv(path, comment="#", dtype=str, keep_default_na=False,
                            skipinitialspace=True)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ParseError(f"schema is not valid CSV: {e}", file=str(path)) from e

    missing = [c for c in SCHEMA_COLUMNS[:3] if c not in frame.columns]
    if missing:
        raise ParseError(f"schema lacks columns {missing}", file=str(path))

    features: List[FeatureDef] = []
    for row_number, row in enumerate(frame.to_dict("records"), start=1):
        allowed = row.get("allowed_values", "").strip()
        try:
            features.append(FeatureDef(
                id=row["id"].strip(),
                category=row["category"].strip(),
                value_kind=row["value_kind"].strip(),
                unit=row.get("unit", "").strip() or None,
                allowed_values=[v.strip() for v in allowed.split("|")] if allowed else None,
            ))
        except ValidationError as e:
            raise ParseError(f"bad schema entry: {e.errors()[0]['msg']}", row=row_number) from e

    schema = FeatureSchema(features=features)
    check_schema(schema)
    logger.info(f"Loaded schema with {len(schema.features)} features from {path.name}")
    return schema


def check_schema(schema: FeatureSchema) -> None:
    """Raise SchemaInvariantViolation naming the first broken invariant"""
    seen = set()
    for feature in schema.features:
        if feature.id in seen:
            raise SchemaInvariantViolation(f"duplicate feature id '{feature.id}'")
        seen.add(feature.id)

    if len(schema.features) != EXPECTED_TOTAL:
        raise SchemaInvariantViolation(
            f"expected {EXPECTED_TOTAL} features, found {len(schema.features)}"
        )

    counts = schema.category_counts()
    for category, expected in EXPECTED_CATEGORY_COUNTS.items():
        if counts[category] != expected:
            raise SchemaInvariantViolation(
                f"category {category.value} has {counts[category]} features, expected {expected}"
            )

    for required in REQUIRED_FEATURES + (LABEL_FEATURE,):
        if not schema.has(required):
            raise SchemaInvariantViolation(f"required feature '{required}' is missing")

    for feature in schema.features:
        if feature.category == Category.LAB and not (
            feature.value_kind == ValueKind.NUMERIC and feature.unit
        ):
            raise SchemaInvariantViolation(f"lab feature '{feature.id}' must be Numeric with a unit")
        if feature.category in (Category.HISTORY, Category.TREATMENT) and not feature.is_boolean:
            raise SchemaInvariantViolation(f"feature '{feature.id}' must be Boolean3State")
        if feature.value_kind == ValueKind.NUMERIC and not feature.unit:
            raise SchemaInvariantViolation(f"numeric feature '{feature.id}' declares no unit")
        if feature.value_kind == ValueKind.CATEGORICAL and not feature.allowed_values:
            raise SchemaInvariantViolation(f"categorical feature '{feature.id}' lists no values")

    if schema.get(AF_FEATURE).value_kind != ValueKind.CATEGORICAL:
        raise SchemaInvariantViolation(f"'{AF_FEATURE}' must be Categorical")


def _require(schema: FeatureSchema, feature_ids: Iterable[str], source: str) -> None:
    for feature_id in feature_ids:
        if not schema.has(feature_id):
            raise SchemaInvariantViolation(f"{source} references unknown feature '{feature_id}'")


def validate_references(
    schema: FeatureSchema,
    lexicon: Lexicon,
    patterns: List[PatternSpec],
    code_map: CodeMap,
    score_features: Iterable[str] = ()
) -> None:
    """Every feature referenced by a resource or a score must exist in the schema"""
    concepts = set(lexicon.concepts)
    _require(schema, [f for f in lexicon.feature_ids if f not in concepts], "lexicon")
    _require(schema, [p.feature_id for p in patterns], "patterns")
    _require(schema, code_map.feature_ids(), "code map")
    _require(schema, score_features, "scores")

    for spec in patterns:
        if schema.get(spec.feature_id).value_kind != ValueKind.NUMERIC:
            raise SchemaInvariantViolation(f"pattern feature '{spec.feature_id}' is not Numeric")

    for entry in lexicon.entries:
        if entry.value is None or entry.feature_id in concepts:
            continue
        allowed = schema.get(entry.feature_id).allowed_values or []
        if entry.value not in allowed:
            raise SchemaInvariantViolation(
                f"lexicon value '{entry.value}' not allowed for '{entry.feature_id}'"
            )
