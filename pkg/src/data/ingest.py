"""
Raw CSV ingestion, sanitization and label binarization.
"""
import re
from enum import Enum
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd

from ..utils.errors import DataError
from ..utils.logging import get_logger
from .tables import BENIGN, MALICIOUS, LabeledTable, RawTable

logger = get_logger("data.ingest")

PathLike = Union[str, Path]

_FIELD_COUNT = re.compile(r"Expected (\d+) fields in line (\d+), saw (\d+)")

# Scenario tags of the power-system corpus, keyed by normalized tag.
DEFAULT_LABEL_MAPPING: Dict[str, int] = {
    "noevents": BENIGN,
    "noevent": BENIGN,
    "natural": BENIGN,
    "naturalevent": BENIGN,
    "attack": MALICIOUS,
    "attackevent": MALICIOUS,
}


class SanitizePolicy(str, Enum):
    DROP_ROW = "drop_row"
    CLAMP_TO_COLUMN_EXTREMES = "clamp_to_column_extremes"


def normalize_tag(tag: str) -> str:
    """Lower-case a scenario tag and strip everything but letters and digits."""
    return re.sub(r"[^0-9a-z]", "", str(tag).strip().lower())


def load_csv(
    path: PathLike,
    has_header: bool = True,
    label_column: Optional[str] = None,
) -> RawTable:
    """
    Load a delimited numeric CSV with one label column.

    Blank lines are skipped; error rows are physical line numbers in the file.

    Args:
        path: CSV file path
        has_header: Whether the first line holds column names
        label_column: Name of the label column (default: last column)

    Returns:
        RawTable with label tags preserved verbatim
    """
    path = Path(path)
    if not path.is_file():
        raise DataError("input file does not exist", path=str(path))

    try:
        frame = pd.read_csv(path, header=None, dtype=str, keep_default_na=False, skip_blank_lines=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise DataError("CSV file contains no data rows", path=str(path)) from None
    except pd.errors.ParserError as e:
        match = _FIELD_COUNT.search(str(e))
        if match is None:
            raise DataError(f"cannot read CSV: {e}", path=str(path)) from e
        expected, line, found = (int(g) for g in match.groups())
        raise DataError(f"expected {expected} fields, found {found}", path=str(path), row=line) from None
    except (OSError, UnicodeDecodeError) as e:
        raise DataError(f"cannot read CSV: {e}", path=str(path)) from e

    lines = np.arange(1, len(frame) + 1)
    blank = frame.fillna("").eq("").all(axis=1).to_numpy()
    frame, lines = frame[~blank], lines[~blank]
    if frame.empty or (has_header and len(frame) < 2):
        raise DataError("CSV file contains no data rows", path=str(path))

    width = frame.shape[1]
    if width < 2:
        raise DataError("CSV needs at least one feature column and one label column", path=str(path))
    # read_csv pads short rows with NaN; real empty fields stay ""
    short = frame.isna().any(axis=1).to_numpy()
    if short.any():
        i = int(np.argmax(short))
        raise DataError(
            f"expected {width} fields, found {int(frame.iloc[i].notna().sum())}",
            path=str(path),
            row=int(lines[i]),
        )

    if has_header:
        header = [str(name).strip() for name in frame.iloc[0]]
        body = frame.iloc[1:]
    else:
        header = [f"f{i}" for i in range(width - 1)] + ["label"]
        body = frame

    if label_column is None:
        label_index = width - 1
    else:
        try:
            label_index = header.index(label_column)
        except ValueError:
            raise DataError(f"label column '{label_column}' not found", path=str(path)) from None

    labels = body[label_index].str.strip().tolist()
    # "inf", "-inf", "nan" parse to their float values; anything else unparsable is missing
    numeric = body.drop(columns=label_index).apply(lambda column: pd.to_numeric(column.str.strip(), errors="coerce"))
    feature_names = [header[i] for i in range(width) if i != label_index]

    if len(set(feature_names)) != len(feature_names):
        raise DataError("feature names must be unique", path=str(path))

    logger.info(f"Loaded {len(body)} rows x {len(feature_names)} features from {path}")
    return RawTable(
        feature_names=tuple(feature_names),
        rows=numeric.to_numpy(dtype=float),
        raw_labels=tuple(labels),
        provenance=(("source", str(path)),),
    )


def load_csv_files(
    paths: Sequence[PathLike],
    has_header: bool = True,
    label_column: Optional[str] = None,
) -> RawTable:
    """Load several CSV files sharing one header and concatenate them in order."""
    if not paths:
        raise DataError("no input files given")

    tables = [load_csv(path, has_header=has_header, label_column=label_column) for path in paths]
    names = tables[0].feature_names
    for path, table in zip(paths[1:], tables[1:]):
        if table.feature_names != names:
            raise DataError("header differs from the first input file", path=str(path))

    if len(tables) == 1:
        return tables[0]
    return RawTable(
        feature_names=names,
        rows=np.vstack([t.rows for t in tables]),
        raw_labels=tuple(tag for t in tables for tag in t.raw_labels),
        provenance=tuple(("source", str(p)) for p in paths),
    )


def sanitize(
    table: RawTable,
    policy: Union[SanitizePolicy, str] = SanitizePolicy.CLAMP_TO_COLUMN_EXTREMES,
) -> RawTable:
    """
    Remove non-finite and missing readings.

    drop_row removes every row holding a bad entry. clamp_to_column_extremes
    replaces +inf by the column's finite maximum, and -inf and missing
    entries by its finite minimum, so no value leaves the observed range.

    Args:
        table: Raw table
        policy: Sanitize policy

    Returns:
        Table without non-finite entries, policy recorded in provenance
    """
    policy = SanitizePolicy(policy)
    rows = np.array(table.rows, dtype=float)
    bad = ~np.isfinite(rows)
    n_bad = int(bad.sum())

    if n_bad == 0:
        return RawTable(
            feature_names=table.feature_names,
            rows=rows,
            raw_labels=table.raw_labels,
            provenance=table.with_provenance("sanitize", f"{policy.value}:0"),
        )

    if policy is SanitizePolicy.DROP_ROW:
        keep = ~bad.any(axis=1)
        logger.info(f"Dropping {int((~keep).sum())} rows with non-finite readings")
        return RawTable(
            feature_names=table.feature_names,
            rows=rows[keep],
            raw_labels=tuple(tag for tag, k in zip(table.raw_labels, keep) if k),
            provenance=table.with_provenance("sanitize", f"{policy.value}:{int((~keep).sum())}"),
        )

    for j in np.flatnonzero(bad.any(axis=0)):
        column = rows[:, j]
        finite = np.isfinite(column)
        if not finite.any():
            raise DataError("column has no finite values to clamp to", column=table.feature_names[j])
        low, high = column[finite].min(), column[finite].max()
        column[np.isposinf(column)] = high
        column[np.isneginf(column) | np.isnan(column)] = low

    logger.info(f"Clamped {n_bad} non-finite readings to column extremes")
    return RawTable(
        feature_names=table.feature_names,
        rows=rows,
        raw_labels=table.raw_labels,
        provenance=table.with_provenance("sanitize", f"{policy.value}:{n_bad}"),
    )


def binarize_labels(
    table: RawTable,
    mapping: Optional[Mapping[str, int]] = None,
) -> LabeledTable:
    """
    Map scenario tags to {0 = benign, 1 = malicious}.

    Tags and mapping keys are compared after `normalize_tag`, so "no-event",
    "NoEvents" and "no event" are the same tag.
    """
    mapping = DEFAULT_LABEL_MAPPING if mapping is None else mapping
    lookup: Dict[str, int] = {}
    for tag, value in mapping.items():
        if value not in (BENIGN, MALICIOUS):
            raise DataError(f"label mapping for '{tag}' must be 0 or 1, got {value!r}")
        lookup[normalize_tag(tag)] = int(value)

    normalized = [normalize_tag(tag) for tag in table.raw_labels]
    unknown: List[str] = sorted({raw for raw, key in zip(table.raw_labels, normalized) if key not in lookup})
    if unknown:
        raise DataError(f"unmapped label tags: {', '.join(unknown)}")

    return LabeledTable(
        feature_names=table.feature_names,
        rows=table.rows,
        labels=np.array([lookup[key] for key in normalized], dtype=np.int64),
        provenance=table.provenance,
    )
