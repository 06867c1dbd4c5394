"""Readers for scored observation files.

Two layouts are understood:

- the canonical layout, one row per scored observation with ``id``,
  ``score``, ``label`` and ``terminal`` columns followed by numeric
  covariates (:func:`load_records`);
- the public Backblaze daily drive-stats layout (``date``,
  ``serial_number``, ``model``, ``failure`` and ``smart_N_raw`` columns),
  which :func:`backblaze_adapt` turns into canonical records.

Examples:
    ```python
    import scorehazard as sh

    records = sh.load_data.load_records("scored.csv")

    # Semicolon separated file with a different id column
    schema = sh.load_data.RecordSchema(id_column="serial", delimiter=";")
    records = sh.load_data.load_records("scored.txt", schema)
    ```
"""

import io
import logging
import math
import os
import re
from dataclasses import dataclass
from typing import IO, Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

import scorehazard.config as config
from scorehazard.dataset import Label, RecordSet, ScoredRecord
from scorehazard.exceptions import ParseError, SchemaError

LOG = logging.getLogger(__name__)

Source = Union[str, os.PathLike, bytes, IO[bytes], IO[str]]

SMART_RAW = re.compile(r"^smart_(\d+)_raw$")
TIME_COLUMN = "smart_9_raw"
BACKBLAZE_REQUIRED = ("serial_number", "failure", TIME_COLUMN)


@dataclass(frozen=True)
class RecordSchema:
    """Column mapping for the canonical layout.

    Attributes:
        id_column: Observation identifier column.
        score_column: Classifier score column.
        label_column: Column holding responder / non_responder / unlabeled.
        terminal_column: 0/1 column marking a responder's final row.
        covariate_columns: Covariate columns in order. ``None`` takes every
            remaining column in file order.
        delimiter: Field separator.
    """

    id_column: str = "id"
    score_column: str = "score"
    label_column: str = "label"
    terminal_column: str = "terminal"
    covariate_columns: Optional[Tuple[str, ...]] = None
    delimiter: str = ","

    @property
    def fixed_columns(self) -> Tuple[str, str, str, str]:
        return (
            self.id_column,
            self.score_column,
            self.label_column,
            self.terminal_column,
        )


def _read_table(source: Source, delimiter: str, **kwargs: Any) -> pd.DataFrame:
    """Read delimited UTF-8 text from a path, bytes or a file object."""
    if isinstance(source, (bytes, bytearray)):
        source = io.BytesIO(source)
    try:
        frame = pd.read_csv(source, sep=delimiter, encoding="utf-8", **kwargs)
    except pd.errors.EmptyDataError as e:
        raise SchemaError("input has no header row") from e
    except UnicodeDecodeError as e:
        raise ParseError(f"input is not valid UTF-8 (byte offset {e.start})") from e
    except pd.errors.ParserError as e:
        raise ParseError(f"malformed delimited text: {e}") from e
    frame.columns = [str(c).strip() for c in frame.columns]
    return frame


def _parse_float(text: str, row: int, column: str) -> float:
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise ParseError(f"{column}={text!r} is not a number", row, column) from None
    if not math.isfinite(value):
        raise ParseError(f"{column}={text!r} is not finite", row, column)
    return value


def _parse_label(text: str, row: int, column: str) -> Label:
    try:
        return Label(text.strip().lower())
    except ValueError:
        raise ParseError(
            f"{column}={text!r} is not one of "
            + ", ".join(label.value for label in Label),
            row,
            column,
        ) from None


def _parse_terminal(text: str, row: int, column: str) -> bool:
    value = text.strip()
    if value not in ("0", "1"):
        raise ParseError(f"{column}={text!r} must be 0 or 1", row, column)
    return value == "1"


def load_records(source: Source, schema: Optional[RecordSchema] = None) -> RecordSet:
    """Load and validate a canonical scored-observation file.

    Args:
        source: Path, raw bytes or file object with a header row.
        schema: Column mapping; defaults to ``id,score,label,terminal``.

    Returns:
        RecordSet: Records in file order, covariates in schema order.

    Raises:
        SchemaError: If a named column is missing.
        ParseError: If a score, covariate, label or terminal cell is invalid.
        ValidationError: If the records break a RecordSet invariant.
    """
    schema = schema or RecordSchema()
    frame = _read_table(
        source, schema.delimiter, dtype=str, keep_default_na=False, na_filter=False
    )

    missing = [c for c in schema.fixed_columns if c not in frame.columns]
    if schema.covariate_columns is None:
        covariates = [c for c in frame.columns if c not in schema.fixed_columns]
    else:
        covariates = list(schema.covariate_columns)
        missing += [c for c in covariates if c not in frame.columns]
    if missing:
        raise SchemaError(f"missing column(s): {', '.join(missing)}")

    records: List[ScoredRecord] = []
    for row, values in enumerate(frame.itertuples(index=False, name=None)):
        cells = dict(zip(frame.columns, values))
        records.append(
            ScoredRecord(
                observation_id=cells[schema.id_column].strip(),
                score=_parse_float(
                    cells[schema.score_column], row, schema.score_column
                ),
                label=_parse_label(
                    cells[schema.label_column], row, schema.label_column
                ),
                is_terminal=_parse_terminal(
                    cells[schema.terminal_column], row, schema.terminal_column
                ),
                covariates={
                    name: _parse_float(cells[name], row, name) for name in covariates
                },
            )
        )

    LOG.info("Loaded %d records with %d covariates", len(records), len(covariates))
    return RecordSet(records, covariates)


def _attach_scores(
    frame: pd.DataFrame, scores: Optional[Source], delimiter: str
) -> pd.DataFrame:
    if "score" in frame.columns:
        return frame
    if scores is None:
        raise SchemaError(
            "raw rows carry no 'score' column and no score table was given"
        )
    table = _read_table(scores, delimiter)
    keys = ["serial_number", "date"]
    missing = [c for c in keys + ["score"] if c not in table.columns]
    if missing:
        raise SchemaError(f"score table missing column(s): {', '.join(missing)}")
    if "date" not in frame.columns:
        raise SchemaError("raw rows need a 'date' column to join scores")
    table = table[keys + ["score"]].astype({"serial_number": str, "date": str})
    frame = frame.astype({"serial_number": str, "date": str})
    return frame.merge(table, on=keys, how="left", validate="many_to_one")


def _smart_columns(frame: pd.DataFrame) -> List[str]:
    found = [c for c in frame.columns if SMART_RAW.match(c)]
    return sorted(found, key=lambda c: int(SMART_RAW.match(c).group(1)))


def backblaze_adapt(
    raw_rows: Source,
    lookback_days: int = config.lookback_days,
    scores: Optional[Source] = None,
    delimiter: str = ",",
) -> RecordSet:
    """Turn Backblaze daily drive rows into canonical scored records.

    SMART 9 (power-on hours) becomes ``smart_9`` in years. Every other raw
    SMART statistic is min-max normalised over the ingested rows into
    ``smart_N``, and each SMART statistic gets an indicator ``smart_N_i``
    equal to 1 when its raw value is above zero. A drive whose failure flag
    is ever 1 becomes a responder: its failure row is terminal and the
    ``lookback_days`` rows before it are kept as non-terminal responder rows.
    Drives that never fail are non-responders.

    Args:
        raw_rows: Backblaze daily rows, possibly several days concatenated.
        lookback_days: Rows retained before each failure row.
        scores: Optional table with ``serial_number,date,score`` used when
            the raw rows carry no ``score`` column.
        delimiter: Field separator of both inputs.

    Returns:
        RecordSet: Canonical records; ``metadata`` holds the normalisation
        constants and settings for the sidecar file.

    Raises:
        SchemaError: If the column layout is not the Backblaze one or no
            score source is available.
        ParseError: If a retained row has no score.
    """
    if lookback_days < 0:
        raise ValueError("lookback_days must be non-negative")

    frame = _read_table(raw_rows, delimiter)
    missing = [c for c in BACKBLAZE_REQUIRED if c not in frame.columns]
    if missing:
        raise SchemaError(f"not a Backblaze layout, missing: {', '.join(missing)}")
    frame = _attach_scores(frame, scores, delimiter)
    frame["serial_number"] = frame["serial_number"].astype(str)

    smart = _smart_columns(frame)
    dropped = [c for c in smart if frame[c].isna().any()]
    if TIME_COLUMN in dropped:
        raise SchemaError(f"{TIME_COLUMN} has missing values")
    if dropped:
        LOG.warning("Dropping SMART columns with missing values: %s", dropped)
    smart = [c for c in smart if c not in dropped]

    order = ["serial_number", "date"] if "date" in frame.columns else ["serial_number"]
    frame = frame.sort_values(order, kind="mergesort").reset_index(drop=True)

    normalization: Dict[str, Dict[str, float]] = {}
    features: Dict[str, np.ndarray] = {}
    for column in smart:
        try:
            raw = pd.to_numeric(frame[column]).to_numpy(dtype=float)
        except (TypeError, ValueError) as e:
            raise ParseError(f"{column} holds non-numeric values", column=column) from e
        number = SMART_RAW.match(column).group(1)
        low, high = float(raw.min()), float(raw.max())
        if column == TIME_COLUMN:
            normalization[column] = {
                "min": low,
                "max": high,
                "divisor": config.hours_per_year,
            }
            features[f"smart_{number}"] = raw / config.hours_per_year
        else:
            normalization[column] = {"min": low, "max": high}
            span = high - low
            features[f"smart_{number}"] = (
                (raw - low) / span if span > 0 else np.zeros_like(raw)
            )
        features[f"smart_{number}_i"] = (raw > 0).astype(float)
    names = list(features)

    failure = pd.to_numeric(frame["failure"], errors="raise").to_numpy() == 1
    records: List[ScoredRecord] = []
    for serial, positions in frame.groupby("serial_number", sort=False).indices.items():
        positions = np.sort(positions)
        failed = positions[failure[positions]]
        if failed.size:
            end = int(np.where(positions == failed[-1])[0][0])
            start = end - lookback_days
            if start < 0:
                LOG.warning(
                    "Drive %s has %d rows before failure, fewer than lookback %d",
                    serial,
                    end,
                    lookback_days,
                )
                start = 0
            kept = positions[start : end + 1]
            label = Label.RESPONDER
        else:
            kept = positions
            label = Label.NON_RESPONDER
        for position in kept:
            score = frame.at[position, "score"]
            records.append(
                ScoredRecord(
                    observation_id=serial,
                    score=_parse_float(score, int(position), "score"),
                    label=label,
                    is_terminal=bool(failed.size and position == kept[-1]),
                    covariates={n: float(features[n][position]) for n in names},
                )
            )

    metadata = {
        "source_layout": "backblaze",
        "lookback_days": int(lookback_days),
        "hours_per_year": float(config.hours_per_year),
        "time_column": TIME_COLUMN,
        "normalization": normalization,
        "dropped_columns": dropped,
    }
    LOG.info(
        "Adapted %d Backblaze rows into %d records (%d covariates)",
        len(frame),
        len(records),
        len(names),
    )
    return RecordSet(records, names, metadata=metadata)

