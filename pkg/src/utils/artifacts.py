"""
Artifact storage for AML IDS Lab.

Every stage writes its outputs below one run directory under stable
relative paths, then a manifest (`manifests/<stage>.json`) recording the
config hash and the SHA-256 of each artifact. Later stages and the report
check those hashes before trusting an artifact.
"""
import hashlib
import json
import platform
import time
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Union

import numpy as np
import pandas as pd
import pydantic

from .errors import ArtifactError
from .logging import get_logger

MANIFEST_DIR = "manifests"

logger = get_logger("artifacts")


def sha256_file(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def canonical_json(payload: Any) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def package_versions() -> Dict[str, str]:
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "pandas": pd.__version__,
        "pydantic": pydantic.VERSION,
    }


class ArtifactStore:
    """Run directory with atomic writes and per-stage manifests."""

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)
        self.logger = logger

    def path(self, relative: str) -> Path:
        return self.root / relative

    def exists(self, relative: str) -> bool:
        return self.path(relative).is_file()

    def write_with(self, relative: str, writer: Callable[[Path], Any]) -> str:
        """
        Write an artifact through `writer(tmp_path)` and move it into place.

        Returns:
            SHA-256 of the written file
        """
        target = self.path(relative)
        target.parent.mkdir(parents=True, exist_ok=True)
        tmp = target.with_name(f".{target.name}.tmp")
        try:
            writer(tmp)
            tmp.replace(target)
        finally:
            if tmp.exists():
                tmp.unlink()
        self.logger.debug(f"Wrote {relative}")
        return sha256_file(target)

    def write_text(self, relative: str, text: str) -> str:
        return self.write_with(relative, lambda p: p.write_text(text, encoding="utf-8"))

    def write_json(self, relative: str, payload: Any) -> str:
        return self.write_text(relative, canonical_json(payload))

    def read_json(self, relative: str) -> Any:
        try:
            return json.loads(self.path(relative).read_text(encoding="utf-8"))
        except FileNotFoundError as e:
            raise ArtifactError(f"missing artifact {relative} in {self.root}") from e
        except json.JSONDecodeError as e:
            raise ArtifactError(f"artifact {relative} is not valid JSON: {e}") from e

    def manifest_path(self, stage: str) -> str:
        return f"{MANIFEST_DIR}/{stage}.json"

    def write_manifest(
        self,
        stage: str,
        config_hash: str,
        artifacts: Iterable[str],
        timings: Optional[Dict[str, float]] = None,
        extra: Optional[Dict[str, Any]] = None,
    ) -> Dict[str, Any]:
        """
        Record a finished stage.

        Args:
            stage: Stage name
            config_hash: Hash of the experiment config that produced the artifacts
            artifacts: Relative paths written by the stage
            timings: Wall-clock seconds by step
            extra: Additional stage-specific fields

        Returns:
            The manifest payload
        """
        manifest = {
            "stage": stage,
            "config_hash": config_hash,
            "artifacts": {rel: sha256_file(self.path(rel)) for rel in sorted(set(artifacts))},
            "versions": package_versions(),
            "timings": timings or {},
            "finished_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            **(extra or {}),
        }
        self.write_json(self.manifest_path(stage), manifest)
        self.logger.info(f"Stage {stage} finished with {len(manifest['artifacts'])} artifacts")
        return manifest

    def read_manifest(self, stage: str) -> Dict[str, Any]:
        if not self.exists(self.manifest_path(stage)):
            raise ArtifactError(f"stage '{stage}' has not been run in {self.root}")
        return self.read_json(self.manifest_path(stage))

    def verify(self, stage: str) -> Dict[str, str]:
        """
        Re-hash a stage's artifacts.

        Returns:
            relative path -> "missing" or "hash_mismatch" for every bad artifact
        """
        problems: Dict[str, str] = {}
        for rel, expected in self.read_manifest(stage)["artifacts"].items():
            if not self.exists(rel):
                problems[rel] = "missing"
            elif sha256_file(self.path(rel)) != expected:
                problems[rel] = "hash_mismatch"
        return problems

    def require(self, stage: str, config_hash: str) -> Dict[str, Any]:
        """Manifest of a prior stage, checked against the current config and on-disk hashes."""
        manifest = self.read_manifest(stage)
        if manifest["config_hash"] != config_hash:
            raise ArtifactError(
                f"stage '{stage}' artifacts were produced by config {manifest['config_hash'][:12]}, "
                f"current config is {config_hash[:12]}; rerun '{stage}'"
            )
        problems = self.verify(stage)
        if problems:
            listing = ", ".join(f"{rel} ({status})" for rel, status in sorted(problems.items()))
            raise ArtifactError(f"stage '{stage}' artifacts are damaged: {listing}")
        return manifest

    def stages(self) -> List[str]:
        directory = self.path(MANIFEST_DIR)
        if not directory.is_dir():
            return []
        return sorted(p.stem for p in directory.glob("*.json"))
