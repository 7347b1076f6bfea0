"""
Versioned JSON model files.
"""
import json
from pathlib import Path
from typing import Any, Dict, Optional, Union

from pydantic import BaseModel, ConfigDict, ValidationError

from ..utils.errors import ModelFormatError
from ..utils.logging import get_logger
from .base import ClassifierModel
from .config import ModelKind
from .registry import MODEL_CLASSES

MODEL_FORMAT = "aml-ids-lab/model"
MODEL_VERSION = 1

logger = get_logger("models.persistence")


class ModelEnvelope(BaseModel):
    """On-disk container: kind tag, header fields and learned state."""

    model_config = ConfigDict(extra="forbid")

    format: str
    version: int
    kind: ModelKind
    n_features: int
    train_seed: int
    schema_fingerprint: Optional[str] = None
    hyperparameters: Dict[str, Any] = {}
    provenance: Dict[str, Any] = {}
    state: Dict[str, Any]


def model_to_json(m: ClassifierModel) -> str:
    """Canonical JSON text of a model (sorted keys, so equal models give equal bytes)."""
    envelope = ModelEnvelope(
        format=MODEL_FORMAT,
        version=MODEL_VERSION,
        kind=m.kind,
        state=m.state_dict(),
        **m.header(),
    )
    return json.dumps(envelope.model_dump(mode="json"), sort_keys=True)


def model_from_json(text: str) -> ClassifierModel:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"model file is not valid JSON: {e}") from e
    if not isinstance(payload, dict) or payload.get("format") != MODEL_FORMAT:
        raise ModelFormatError("not an aml-ids-lab model file")
    if payload.get("version") != MODEL_VERSION:
        raise ModelFormatError(
            f"model file version {payload.get('version')} is not supported (expected {MODEL_VERSION})"
        )
    try:
        envelope = ModelEnvelope.model_validate(payload)
    except ValidationError as e:
        raise ModelFormatError(f"malformed model file: {e}") from e

    header = envelope.model_dump(exclude={"format", "version", "kind", "state"})
    try:
        return MODEL_CLASSES[envelope.kind].from_state(header, envelope.state)
    except (KeyError, TypeError, ValueError) as e:
        raise ModelFormatError(f"corrupt {envelope.kind.value} state: {e}") from e


def save_model(m: ClassifierModel, path: Union[str, Path]) -> None:
    """Write a model file; the target is replaced atomically."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(model_to_json(m), encoding="utf-8")
    tmp.replace(path)
    logger.debug(f"Saved {m.kind.value} model to {path}")


def load_model(path: Union[str, Path]) -> ClassifierModel:
    """
    Read a model file written by `save_model`.

    Raises:
        ModelFormatError: unreadable, truncated, foreign or wrong-version file
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ModelFormatError(f"cannot read model file {path}: {e}") from e
    return model_from_json(text)
