"""
Exception hierarchy for AML IDS Lab.
"""
from typing import Optional


class AmlLabError(Exception):
    """Base class for every error raised by the lab."""


class ConfigError(AmlLabError, ValueError):
    """Invalid experiment configuration or settings."""


class DataError(AmlLabError, ValueError):
    """
    Failure while ingesting or transforming tabular data.

    Carries optional location context so the CLI can report exactly
    where the input went wrong.
    """

    def __init__(
        self,
        message: str,
        path: Optional[str] = None,
        row: Optional[int] = None,
        column: Optional[str] = None,
    ):
        self.path = path
        self.row = row
        self.column = column
        context = []
        if path is not None:
            context.append(f"file={path}")
        if row is not None:
            context.append(f"row={row}")
        if column is not None:
            context.append(f"column={column}")
        suffix = f" ({', '.join(context)})" if context else ""
        super().__init__(f"{message}{suffix}")


class EvaluationError(AmlLabError, ValueError):
    """Labels, confusion counts or fold settings that cannot be scored."""


class SchemaMismatchError(AmlLabError, ValueError):
    """Feature dimension or schema fingerprint does not match."""


class TrainingError(AmlLabError, RuntimeError):
    """Model training diverged or could not proceed."""


class ModelFormatError(AmlLabError, ValueError):
    """Persisted model or schema file is corrupt or incompatible."""


class AttackError(AmlLabError, ValueError):
    """Adversarial crafting could not be performed."""


class ArtifactError(AmlLabError):
    """A pipeline stage is missing required artifacts from earlier stages."""
