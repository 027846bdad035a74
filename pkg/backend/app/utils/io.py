"""
CohortForge - Artifact I/O Helpers

Every writer produces deterministic bytes (sorted keys, "\n" line endings)
and turns OS failures into IoError.
"""
import json
from pathlib import Path
from typing import Any, Dict, Iterable, List

import pandas as pd

from app.core.exceptions import IoError, MissingFile


def _prepare(path: Path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise IoError(f"cannot create directory {path.parent}: {e}") from e
    return path


def write_csv(frame: pd.DataFrame, path: Path) -> Path:
    path = _prepare(path)
    try:
        frame.to_csv(path, index=False, lineterminator="\n")
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e
    return path


def read_csv(path: Path, **kwargs: Any) -> pd.DataFrame:
    """Read a CSV as strings, empty cells kept as empty strings"""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"file not found: {path}")
    try:
        return pd.read_csv(path, dtype=str, keep_default_na=False, **kwargs)
    except pd.errors.EmptyDataError:
        return pd.DataFrame()
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e


def write_json(payload: Any, path: Path) -> Path:
    path = _prepare(path)
    try:
        path.write_text(json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n",
                        encoding="utf-8")
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e
    return path


def read_json(path: Path) -> Any:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"file not found: {path}")
    return json.loads(path.read_text(encoding="utf-8"))


def write_jsonl(records: Iterable[Dict[str, Any]], path: Path) -> Path:
    path = _prepare(path)
    try:
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            for record in records:
                fh.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e
    return path


def read_jsonl(path: Path) -> List[Dict[str, Any]]:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"file not found: {path}")
    with path.open(encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
