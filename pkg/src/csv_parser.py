"""
CSV ingestion for observational circular outcome data.

Reads the whole file as text, checks its shape (unique header names, no
ragged rows), drops incomplete rows with a per-reason count, converts the
outcome column to radians and builds the design matrix.

Data rows are indexed by their 1-based line number in the file (the header
is line 1), so every parse error can name the offending line.
"""

import logging
import math
import re
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING, Dict, List, Mapping, NamedTuple, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, model_validator

from src.circular import TWO_PI, Angle
from src.estimators import CausalDataset
from src.features import ConfounderKind, build_design_matrix
from src.utils import DataError

if TYPE_CHECKING:
    from src.analysis import AnalysisConfig

logger = logging.getLogger(__name__)

MISSING_TOKENS = frozenset({"", "NA", "NaN"})
MINUTES_PER_DAY = 24 * 60

_HHMM = re.compile(r"^(\d{1,2}):(\d{2})$")


class OutcomeKind(str, Enum):
    RADIANS = "radians"
    CLOCK24 = "clock24"
    DEGREES = "degrees"


class IngestionLog(BaseModel):
    n_total: int = Field(..., ge=0)
    n_used: int = Field(..., ge=0)
    n_dropped: int = Field(..., ge=0)
    reasons: Dict[str, int] = Field(default_factory=dict)

    @model_validator(mode="after")
    def check_accounting(self):
        if self.n_used + self.n_dropped != self.n_total:
            raise ValueError(
                f"{self.n_used} used + {self.n_dropped} dropped != {self.n_total} total rows"
            )
        if sum(self.reasons.values()) != self.n_dropped:
            raise ValueError("per-reason counts do not add up to the dropped rows")
        return self


class LoadedData(NamedTuple):
    dataset: CausalDataset
    ingestion: IngestionLog
    design_columns: List[str]


# ============================================================
# Outcome conversion
# ============================================================

def time_to_radians(hhmm: str, line: Optional[int] = None) -> Angle:
    """'HH:MM' on a 24-hour clock -> 2*pi * minutes / 1440"""
    match = _HHMM.match(hhmm.strip()) if isinstance(hhmm, str) else None
    if match:
        hours, minutes = int(match.group(1)), int(match.group(2))
        if hours <= 23 and minutes <= 59:
            return TWO_PI * (hours * 60 + minutes) / MINUTES_PER_DAY
    where = f"line {line}: " if line is not None else ""
    raise DataError(f"{where}malformed time {hhmm!r}, expected HH:MM with HH in 0-23 and MM in 0-59")


def radians_to_minutes(radians: float) -> float:
    """Clock-time shift in minutes; the sign of the angle is kept"""
    return radians * MINUTES_PER_DAY / TWO_PI


def outcome_to_radians(values: pd.Series, kind: OutcomeKind) -> np.ndarray:
    """Convert raw outcome strings to (not yet canonical) radians"""
    kind = OutcomeKind(kind)
    if kind is OutcomeKind.CLOCK24:
        return np.array([time_to_radians(v, line) for line, v in values.items()], dtype=float)

    out = np.empty(len(values))
    for i, (line, v) in enumerate(values.items()):
        try:
            x = float(v)
        except ValueError:
            raise DataError(f"line {line}: outcome {v!r} is not a number") from None
        if not math.isfinite(x):
            raise DataError(f"line {line}: outcome {v!r} is not finite")
        out[i] = x
    if kind is OutcomeKind.DEGREES:
        out = np.deg2rad(out)
    return out


# ============================================================
# Reading
# ============================================================

def read_table(path: Union[str, Path]) -> pd.DataFrame:
    """
    Read a headed CSV as strings, indexed by line number.

    Raises DataError for unreadable, non-UTF-8, empty or ragged files and for
    duplicate header names.
    """
    path = Path(path)
    try:
        raw = pd.read_csv(
            path,
            header=None,
            dtype=str,
            keep_default_na=False,
            skip_blank_lines=False,
            encoding="utf-8",
        )
    except FileNotFoundError:
        raise DataError(f"input file not found: {path}") from None
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}") from None
    except UnicodeDecodeError as e:
        raise DataError(f"{path} is not valid UTF-8: {e}") from None
    except pd.errors.EmptyDataError:
        raise DataError(f"{path} is empty") from None
    except pd.errors.ParserError as e:
        raise DataError(f"{path} has ragged rows: {e}") from None

    header = [str(h).strip() for h in raw.iloc[0].tolist()]
    duplicates = sorted({h for h in header if header.count(h) > 1})
    if duplicates:
        raise DataError(f"duplicate header names {duplicates}")

    body = raw.iloc[1:].copy()
    body.columns = header
    body.index = pd.RangeIndex(2, len(raw) + 1)
    if body.empty:
        return body

    # blank lines come through as a single empty field
    blank = body.iloc[:, 0].fillna("").eq("") & body.iloc[:, 1:].isna().all(axis=1)
    body = body[~blank]

    short = body.isna().any(axis=1)
    if short.any():
        raise DataError(f"line {short.idxmax()}: expected {len(header)} fields")
    return body


def drop_incomplete(
    df: pd.DataFrame, treatment: str, outcome: str, confounders: List[str]
) -> Tuple[pd.DataFrame, Dict[str, int]]:
    """
    Drop rows with a missing value in any used column. Each row is counted
    once, under the first missing role: treatment, outcome, then confounders
    in order.
    """
    missing = df.apply(lambda col: col.str.strip().isin(MISSING_TOKENS))
    keep = pd.Series(True, index=df.index)
    reasons: Dict[str, int] = {}

    roles = [("missing treatment", treatment), ("missing outcome", outcome)]
    roles += [(f"missing confounder {name}", name) for name in confounders]
    for reason, column in roles:
        hit = keep & missing[column]
        if hit.any():
            reasons[reason] = int(hit.sum())
            keep &= ~hit
    return df[keep], reasons


# ============================================================
# Loading
# ============================================================

def load_frame(
    path: Union[str, Path],
    treatment_column: str,
    treated_value: str,
    outcome_column: str,
    outcome_kind: OutcomeKind,
    confounders: Mapping[str, ConfounderKind],
) -> LoadedData:
    df = read_table(path)
    needed = [treatment_column, outcome_column, *confounders]
    absent = [c for c in needed if c not in df.columns]
    if absent:
        raise DataError(f"columns {absent} not found in {path}")

    n_total = len(df)
    if n_total == 0:
        raise DataError(f"{path} has a header but no data rows")
    df, reasons = drop_incomplete(df, treatment_column, outcome_column, list(confounders))
    ingestion = IngestionLog(
        n_total=n_total,
        n_used=len(df),
        n_dropped=n_total - len(df),
        reasons=reasons,
    )
    logger.info(
        f"read {n_total} rows from {path}: {ingestion.n_used} used, "
        f"{ingestion.n_dropped} dropped {reasons or ''}"
    )
    if ingestion.n_used == 0:
        raise DataError(f"no usable rows in {path}")

    treatment = (df[treatment_column].str.strip() == str(treated_value).strip()).to_numpy(dtype=float)
    n_treated = int(treatment.sum())
    if n_treated == 0 or n_treated == len(treatment):
        raise DataError(
            f"treatment column '{treatment_column}' gives a single arm "
            f"(treated={n_treated}, control={len(treatment) - n_treated})"
        )

    theta = outcome_to_radians(df[outcome_column], outcome_kind)
    design = build_design_matrix(df, confounders)
    dataset = CausalDataset.from_arrays(treatment=treatment, covariates=design.values, theta=theta)
    return LoadedData(dataset=dataset, ingestion=ingestion, design_columns=design.columns)


def load_dataset(config: "AnalysisConfig") -> LoadedData:
    """Ingest the CSV named by an analysis config"""
    return load_frame(
        path=config.input_path,
        treatment_column=config.treatment_column,
        treated_value=config.treated_value,
        outcome_column=config.outcome_column,
        outcome_kind=config.outcome_kind,
        confounders={c.name: c.kind for c in config.confounders},
    )
