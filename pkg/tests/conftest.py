"""
Shared fixtures
"""

import json
from pathlib import Path

import numpy as np
import pytest
from scipy.special import expit

from src.estimators import CausalDataset

DATA_DIR = Path(__file__).resolve().parent.parent / "data"
SAMPLE_CSV = DATA_DIR / "sample_sleep.csv"


def logistic_design(rng: np.random.Generator, n: int, k: int, scale: float = 0.8):
    """Intercept plus k standard normal covariates and a non-separated treatment"""
    X = np.column_stack([np.ones(n), rng.standard_normal((n, k))])
    coef = rng.uniform(-scale, scale, size=k + 1)
    p = expit(X @ coef)
    a = (rng.random(n) < p).astype(float)
    return X, a, p


def observational_dataset(rng: np.random.Generator, n: int = 400, k: int = 2) -> CausalDataset:
    """Von Mises outcomes whose mean direction shifts with treatment and the covariates"""
    while True:
        X, a, _ = logistic_design(rng, n, k)
        if 0 < a.sum() < n:
            break
    mu = 0.5 + 0.3 * X[:, 1] + 0.8 * a
    theta = rng.vonmises(mu, 2.0 + a)
    return CausalDataset.from_arrays(a, X, theta)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def dataset(rng):
    return observational_dataset(rng)


@pytest.fixture
def sample_csv():
    return SAMPLE_CSV


@pytest.fixture
def config_dict(sample_csv):
    return {
        "input_path": str(sample_csv),
        "treatment_column": "job",
        "treated_value": "assistant_chief",
        "outcome_column": "sleep_onset",
        "outcome_kind": "clock24",
        "confounders": [
            {"name": "age", "kind": "numeric"},
            {"name": "shift", "kind": "categorical"},
        ],
    }


@pytest.fixture
def config_file(tmp_path, config_dict):
    path = tmp_path / "analysis.json"
    path.write_text(json.dumps(config_dict), encoding="utf-8")
    return path
