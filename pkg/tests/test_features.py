import numpy as np
import pandas as pd
import pytest

from src.features import (
    INTERCEPT, ConfounderKind, build_design_matrix, encode_categorical, encode_numeric,
)
from src.utils import DataError


@pytest.fixture
def frame():
    return pd.DataFrame(
        {
            "age": ["45", " 38", "52.5", "29"],
            "shift": ["night", "day", "rotating", "day"],
        },
        index=[2, 3, 4, 5],
    )


def test_numeric_column(frame):
    values = encode_numeric(frame["age"], "age")
    np.testing.assert_array_equal(values.to_numpy(), [45.0, 38.0, 52.5, 29.0])


def test_non_numeric_value_names_line(frame):
    frame.loc[4, "age"] = "fifty"
    with pytest.raises(DataError, match="line 4"):
        encode_numeric(frame["age"], "age")


def test_categorical_reference_is_smallest_level(frame):
    dummies = encode_categorical(frame["shift"], "shift")
    assert list(dummies.columns) == ["shift[night]", "shift[rotating]"]
    np.testing.assert_array_equal(dummies.to_numpy(), [[1, 0], [0, 0], [0, 1], [0, 0]])
    assert list(dummies.index) == [2, 3, 4, 5]


def test_single_level_gives_no_columns():
    dummies = encode_categorical(pd.Series(["a", "a", "a"]), "g")
    assert dummies.shape == (3, 0)


def test_design_matrix(frame):
    design = build_design_matrix(
        frame, {"age": ConfounderKind.NUMERIC, "shift": ConfounderKind.CATEGORICAL}
    )
    assert design.columns == [INTERCEPT, "age", "shift[night]", "shift[rotating]"]
    assert design.values.shape == (4, 4)
    assert design.n_covariates == 3
    np.testing.assert_array_equal(design.values[:, 0], 1.0)


def test_intercept_only(frame):
    design = build_design_matrix(frame, {})
    assert design.columns == [INTERCEPT]
    assert design.values.shape == (4, 1)


def test_missing_column(frame):
    with pytest.raises(DataError, match="income"):
        build_design_matrix(frame, {"income": ConfounderKind.NUMERIC})
