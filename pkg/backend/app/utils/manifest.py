"""
CohortForge - Artifact Manifest

manifest.json maps each artifact file name to the stage that wrote it, the
config hash and seed of the run, and the SHA-256 of its bytes.
"""
import hashlib
from pathlib import Path
from typing import Dict, Iterable, Optional

from app.utils.io import read_json, write_json

MANIFEST_NAME = "manifest.json"


def file_sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def load_manifest(directory: Path) -> Dict[str, Dict]:
    path = Path(directory) / MANIFEST_NAME
    if not path.is_file():
        return {}
    return read_json(path)


def record_artifacts(
    directory: Path,
    stage: str,
    config_hash: str,
    seed: Optional[int],
    artifacts: Iterable[Path]
) -> Path:
    """Add (or refresh) manifest entries for files written by one stage"""
    manifest = load_manifest(directory)
    for artifact in artifacts:
        artifact = Path(artifact)
        manifest[artifact.name] = {
            "stage": stage,
            "config_hash": config_hash,
            "seed": seed,
            "sha256": file_sha256(artifact),
        }
    return write_json(manifest, Path(directory) / MANIFEST_NAME)
