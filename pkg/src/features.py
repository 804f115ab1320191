# src/features.py - design matrix for the propensity model

from dataclasses import dataclass
from enum import Enum
from typing import List, Mapping

import numpy as np
import pandas as pd

from src.utils import DataError

INTERCEPT = "(intercept)"


class ConfounderKind(str, Enum):
    NUMERIC = "numeric"
    CATEGORICAL = "categorical"


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    values: np.ndarray
    columns: List[str]

    @property
    def n_covariates(self) -> int:
        """Columns besides the intercept"""
        return len(self.columns) - 1


def encode_numeric(series: pd.Series, name: str) -> pd.Series:
    """
    Parse a numeric confounder. The frame index carries the source line
    number, which is reported for unparseable values.
    """
    values = pd.to_numeric(series.str.strip(), errors="coerce")
    bad = values.isna() | ~np.isfinite(values.astype(float))
    if bad.any():
        line = bad.idxmax()
        raise DataError(
            f"line {line}: confounder '{name}' has non-numeric value {series.loc[line]!r}"
        )
    return values.astype(float).rename(name)


def encode_categorical(series: pd.Series, name: str) -> pd.DataFrame:
    """
    One-hot encode with the lexicographically smallest level as reference;
    k levels give k - 1 indicator columns named name[level].
    """
    labels = series.str.strip()
    levels = sorted(labels.unique())
    categorical = pd.Categorical(labels, categories=levels)
    dummies = pd.get_dummies(categorical, drop_first=True, dtype=float)
    dummies.columns = [f"{name}[{level}]" for level in levels[1:]]
    dummies.index = series.index
    return dummies


def build_design_matrix(df: pd.DataFrame, confounders: Mapping[str, ConfounderKind]) -> DesignMatrix:
    """Intercept followed by the encoded confounders, in the order given"""
    parts = [pd.Series(1.0, index=df.index, name=INTERCEPT)]

    for name, kind in confounders.items():
        if name not in df.columns:
            raise DataError(f"confounder column '{name}' not found")
        if ConfounderKind(kind) is ConfounderKind.CATEGORICAL:
            parts.append(encode_categorical(df[name], name))
        else:
            parts.append(encode_numeric(df[name], name))

    design = pd.concat(parts, axis=1)
    if design.columns.duplicated().any():
        duplicated = sorted(set(design.columns[design.columns.duplicated()]))
        raise DataError(f"encoded design has duplicate columns {duplicated}")

    return DesignMatrix(values=design.to_numpy(dtype=float), columns=list(design.columns))
