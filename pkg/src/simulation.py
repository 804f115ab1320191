"""
Monte Carlo study of the IPW circular effect estimators.

Data generating process, for each unit:
    X1, X2, X3 ~ Beta(2, 1) iid,  S = X1 + X2 + X3
    logit P(A = 1 | X) = 1 + S
    Theta(1) | X ~ WC(mu1(S), rho1(S)),  Theta(0) | X ~ WC(mu0(S), rho0(S))
    Theta = A Theta(1) + (1 - A) Theta(0)

Scenarios:
    1  WC(S, 5/6)      vs  WC(S/2, 2/3)
    2  WC(1, S/3)      vs  WC(0, S/4)
    3  WC(S, S/3)      vs  WC(S/2, S/4)

Every replication draws from its own generator seeded by (seed, rep_index),
so results do not depend on execution order or on the number of workers.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from itertools import repeat
from typing import Any, Dict, Iterable, List, Literal, NamedTuple, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, model_validator
from scipy.special import expit
from tqdm import tqdm

from src.circular import (
    TWO_PI, ResultantVector, angular_difference, angular_differences, canonical_angles,
    mean_direction, mean_length,
)
from src.config import settings
from src.estimators import CausalDataset, WeightScheme
from src.propensity import fit_logistic
from src.utils import CircularEffectsError, DomainError, generate_run_id, log_execution_time
from src.variance import covers, estimate_with_inference

logger = logging.getLogger(__name__)

# Effects quoted for the scenarios; the study scores against scenario_truth()
NOMINAL_TAU = 1.0
NOMINAL_XI = 1.0 / 6.0

SCENARIOS = (1, 2, 3)
TABLE_SIZES = (250, 500, 1000)
ESTIMANDS = ("tau", "xi")
SCHEMES = (WeightScheme.HT, WeightScheme.HAJEK)

SUMMARY_COLUMNS = ["scenario", "n", "estimand", "scheme", "BIAS", "SE", "MSE", "CR", "ASE", "n_failed"]


# ============================================================
# Configuration
# ============================================================

class ScenarioSpec(BaseModel):
    """One cell of the study: scenario, sample size, replication count and seed"""

    id: Literal[1, 2, 3]
    n: int = Field(..., ge=50)
    replications: int = Field(1000, ge=1)
    seed: int = Field(20240601, ge=0, lt=2 ** 64)
    true_tau: Optional[float] = None
    true_xi: Optional[float] = None
    level: float = Field(default_factory=lambda: settings.CONFIDENCE_LEVEL, gt=0.0, lt=1.0)

    @model_validator(mode="after")
    def fill_truth(self):
        if self.true_tau is None or self.true_xi is None:
            truth = scenario_truth(self.id)
            if self.true_tau is None:
                self.true_tau = truth.tau
            if self.true_xi is None:
                self.true_xi = truth.xi
        return self


@dataclass(frozen=True)
class ScenarioTruth:
    tau: float
    xi: float
    mu1: float
    mu0: float
    rho1: float
    rho0: float


class SimulatedData(NamedTuple):
    dataset: CausalDataset
    theta1: np.ndarray
    theta0: np.ndarray
    propensity: np.ndarray


# ============================================================
# Samplers
# ============================================================

def beta21_inverse_cdf(u):
    """Inverse of F(x) = x^2 on [0, 1]"""
    u = np.asarray(u, dtype=float)
    if np.any((u < 0.0) | (u > 1.0)) or not np.all(np.isfinite(u)):
        raise DomainError("Beta(2, 1) inverse CDF needs u in [0, 1]")
    x = np.sqrt(u)
    return float(x) if x.ndim == 0 else x


def sample_beta21(rng: np.random.Generator, size=None):
    return beta21_inverse_cdf(rng.random(size))


def sample_wrapped_cauchy(mu, rho, rng: np.random.Generator, size=None):
    """
    Draw from WC(mu, rho) by wrapping Cauchy(mu, -ln rho).

    mu and rho broadcast against each other (and `size`). rho = 1 returns mu,
    rho = 0 returns a uniform angle.
    """
    mu = np.asarray(mu, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if not np.all(np.isfinite(rho)) or np.any((rho < 0.0) | (rho > 1.0)):
        raise DomainError("wrapped Cauchy concentration must lie in [0, 1]")
    if not np.all(np.isfinite(mu)):
        raise DomainError("wrapped Cauchy location must be finite")

    shape = np.broadcast_shapes(mu.shape, rho.shape) if size is None else size
    u = rng.random(shape)
    degenerate = rho == 0.0
    gamma = np.where(degenerate, 0.0, -np.log(np.where(degenerate, 1.0, rho)))
    draw = mu + gamma * np.tan(math.pi * (u - 0.5))
    draw = np.where(degenerate, TWO_PI * u, draw)
    draw = np.where(rho == 1.0, mu, draw)

    angles = canonical_angles(draw)
    return float(angles) if angles.ndim == 0 else angles


def arm_parameters(scenario_id: int, s: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(mu1, rho1, mu0, rho0) as functions of S = X1 + X2 + X3"""
    s = np.asarray(s, dtype=float)
    ones = np.ones_like(s)
    if scenario_id == 1:
        return s, 5.0 / 6.0 * ones, s / 2.0, 2.0 / 3.0 * ones
    if scenario_id == 2:
        return ones, s / 3.0, 0.0 * ones, s / 4.0
    if scenario_id == 3:
        return s, s / 3.0, s / 2.0, s / 4.0
    raise DomainError(f"unknown scenario {scenario_id}; expected one of {SCENARIOS}")


# ============================================================
# True effects
# ============================================================

@lru_cache(maxsize=None)
def scenario_truth(scenario_id: int, nodes: Optional[int] = None) -> ScenarioTruth:
    """
    Counterfactual moments E[rho_a(X) exp(i mu_a(X))] by tensor Gauss-Legendre
    quadrature over the three Beta(2, 1) covariates.
    """
    nodes = nodes or settings.SIM_QUADRATURE_NODES
    t, w = np.polynomial.legendre.leggauss(nodes)
    x = 0.5 * (t + 1.0)
    # dx = dt / 2 and the Beta(2, 1) density is 2x
    weight = w * x

    s = x[:, None, None] + x[None, :, None] + x[None, None, :]
    mass = weight[:, None, None] * weight[None, :, None] * weight[None, None, :]
    mu1, rho1, mu0, rho0 = arm_parameters(scenario_id, s)

    treated = ResultantVector(
        alpha=float(np.sum(mass * rho1 * np.cos(mu1))),
        beta=float(np.sum(mass * rho1 * np.sin(mu1))),
    )
    control = ResultantVector(
        alpha=float(np.sum(mass * rho0 * np.cos(mu0))),
        beta=float(np.sum(mass * rho0 * np.sin(mu0))),
    )
    m1, m0 = mean_direction(treated), mean_direction(control)
    r1, r0 = mean_length(treated), mean_length(control)
    return ScenarioTruth(
        tau=angular_difference(m1, m0),
        xi=r1 - r0,
        mu1=m1,
        mu0=m0,
        rho1=r1,
        rho0=r0,
    )


# ============================================================
# Data generation
# ============================================================

def replication_rng(seed: int, rep_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(rep_index)]))


def generate_dataset(spec: ScenarioSpec, rep_index: int) -> SimulatedData:
    """Observed sample plus both potential outcomes and the true propensities"""
    rng = replication_rng(spec.seed, rep_index)
    n = spec.n

    covariates = sample_beta21(rng, (n, 3))
    s = covariates.sum(axis=1)
    propensity = expit(1.0 + s)
    treatment = (rng.random(n) < propensity).astype(float)

    mu1, rho1, mu0, rho0 = arm_parameters(spec.id, s)
    theta1 = sample_wrapped_cauchy(mu1, rho1, rng)
    theta0 = sample_wrapped_cauchy(mu0, rho0, rng)
    theta = np.where(treatment == 1.0, theta1, theta0)

    dataset = CausalDataset.from_arrays(
        treatment=treatment,
        covariates=np.column_stack([np.ones(n), covariates]),
        theta=theta,
    )
    return SimulatedData(dataset=dataset, theta1=theta1, theta0=theta0, propensity=propensity)


# ============================================================
# Replications
# ============================================================

def _failed_records(rep_index: int, error: str) -> List[Dict[str, Any]]:
    return [
        {
            "rep": rep_index, "scheme": scheme.value, "failed": True, "error": error,
            "tau": np.nan, "xi": np.nan, "se_tau": np.nan, "se_xi": np.nan,
            "cover_tau": np.nan, "cover_xi": np.nan,
        }
        for scheme in SCHEMES
    ]


def run_replication(spec: ScenarioSpec, rep_index: int) -> List[Dict[str, Any]]:
    """One replication, one record per weighting scheme"""
    try:
        data = generate_dataset(spec, rep_index)
        dataset = data.dataset
        fit = fit_logistic(dataset.covariates, dataset.treatment)

        records = []
        for scheme in SCHEMES:
            effect, _, _ = estimate_with_inference(dataset, fit, scheme, spec.level)
            hit_tau, hit_xi = covers(effect, spec.true_tau, spec.true_xi, spec.level)
            records.append({
                "rep": rep_index, "scheme": scheme.value, "failed": False, "error": "",
                "tau": effect.tau, "xi": effect.xi,
                "se_tau": effect.se_tau, "se_xi": effect.se_xi,
                "cover_tau": float(hit_tau), "cover_xi": float(hit_xi),
            })
        return records
    except CircularEffectsError as e:
        logger.debug(f"replication {rep_index} failed: {e.__class__.__name__}: {e}")
        return _failed_records(rep_index, e.__class__.__name__)


def run_replications(
    spec: ScenarioSpec,
    n_jobs: int = 1,
    progress: Optional[bool] = None,
) -> pd.DataFrame:
    """All replications of a spec as a long frame sorted by (rep, scheme)"""
    progress = settings.SIM_PROGRESS if progress is None else progress
    indices = range(spec.replications)
    desc = f"scenario {spec.id}, n={spec.n}"

    if n_jobs > 1:
        chunksize = max(1, spec.replications // (4 * n_jobs))
        with ProcessPoolExecutor(max_workers=n_jobs) as executor:
            results = list(tqdm(
                executor.map(run_replication, repeat(spec), indices, chunksize=chunksize),
                total=spec.replications, desc=desc, disable=not progress,
            ))
    else:
        results = [
            run_replication(spec, i)
            for i in tqdm(indices, desc=desc, disable=not progress)
        ]

    frame = pd.DataFrame([record for batch in results for record in batch])
    return frame.sort_values(["rep", "scheme"], kind="mergesort").reset_index(drop=True)


# ============================================================
# Summaries
# ============================================================

@dataclass(frozen=True)
class SummaryRow:
    estimand: str
    scheme: WeightScheme
    bias: Optional[float]
    se: Optional[float]
    mse: Optional[float]
    cr: Optional[float]
    ase: Optional[float]


@dataclass(frozen=True)
class SimSummary:
    """
    BIAS = mean error, SE = sample SD of the estimates (R - 1 denominator),
    MSE = mean squared error, CR = share of Wald intervals covering the
    truth, ASE = mean estimated standard error. tau errors are wrapped.

    With R successful replications, MSE = BIAS^2 + SE^2 (R - 1) / R.
    """

    scenario: int
    n: int
    replications: int
    n_failed: int
    true_tau: float
    true_xi: float
    rows: Tuple[SummaryRow, ...]

    @property
    def failure_rate(self) -> float:
        return self.n_failed / self.replications

    @property
    def flagged(self) -> bool:
        return self.failure_rate > settings.SIM_FAILURE_FLAG_RATE

    def row(self, estimand: str, scheme: WeightScheme) -> SummaryRow:
        scheme = WeightScheme(scheme)
        for row in self.rows:
            if row.estimand == estimand and row.scheme is scheme:
                return row
        raise KeyError((estimand, scheme))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "scenario": self.scenario,
                    "n": self.n,
                    "estimand": row.estimand,
                    "scheme": row.scheme.value,
                    "BIAS": row.bias,
                    "SE": row.se,
                    "MSE": row.mse,
                    "CR": row.cr,
                    "ASE": row.ase,
                    "n_failed": self.n_failed,
                }
                for row in self.rows
            ],
            columns=SUMMARY_COLUMNS,
        )

    def write_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False)


def _summary_row(estimand: str, scheme: WeightScheme, frame: pd.DataFrame, truth: float) -> SummaryRow:
    if frame.empty:
        return SummaryRow(estimand, scheme, None, None, None, None, None)

    estimates = frame[estimand].to_numpy(dtype=float)
    if estimand == "tau":
        errors = angular_differences(estimates, truth)
    else:
        errors = estimates - truth

    r = errors.size
    return SummaryRow(
        estimand=estimand,
        scheme=scheme,
        bias=float(errors.mean()),
        # SD of the wrapped errors equals the SD of the estimates unwrapped around the truth
        se=float(errors.std(ddof=1)) if r > 1 else None,
        mse=float(np.mean(errors ** 2)),
        cr=float(frame[f"cover_{estimand}"].mean()),
        ase=float(frame[f"se_{estimand}"].mean()),
    )


def summarize(records: pd.DataFrame, spec: ScenarioSpec) -> SimSummary:
    """Aggregate replication records; failed replications count but are not scored"""
    failed_reps = records.loc[records["failed"].astype(bool), "rep"].unique()
    n_failed = int(failed_reps.size)
    ok = records[~records["rep"].isin(failed_reps)].sort_values(["rep", "scheme"], kind="mergesort")

    rows = []
    for estimand in ESTIMANDS:
        truth = spec.true_tau if estimand == "tau" else spec.true_xi
        for scheme in SCHEMES:
            rows.append(_summary_row(estimand, scheme, ok[ok["scheme"] == scheme.value], truth))

    return SimSummary(
        scenario=spec.id,
        n=spec.n,
        replications=spec.replications,
        n_failed=n_failed,
        true_tau=spec.true_tau,
        true_xi=spec.true_xi,
        rows=tuple(rows),
    )


@log_execution_time
def run_study(
    spec: ScenarioSpec,
    n_jobs: int = 1,
    progress: Optional[bool] = None,
    run_id: Optional[str] = None,
) -> SimSummary:
    run_id = run_id or generate_run_id("SIM")
    logger.info(
        f"[{run_id}] scenario {spec.id}: n={spec.n}, {spec.replications} replications, "
        f"seed={spec.seed}, truth=({spec.true_tau:.4f}, {spec.true_xi:.4f})"
    )
    summary = summarize(run_replications(spec, n_jobs=n_jobs, progress=progress), spec)
    if summary.flagged:
        logger.warning(
            f"[{run_id}] {summary.n_failed}/{summary.replications} replications failed "
            f"({summary.failure_rate:.1%})"
        )
    return summary


def run_table(
    scenarios: Iterable[int] = SCENARIOS,
    sizes: Iterable[int] = TABLE_SIZES,
    replications: int = 1000,
    seed: int = 20240601,
    n_jobs: int = 1,
    progress: Optional[bool] = None,
    run_id: Optional[str] = None,
) -> pd.DataFrame:
    """
    Sweep scenarios x sample sizes into one summary table, ordered by
    scenario then n. Every spec is validated before the first study runs.
    """
    run_id = run_id or generate_run_id("SIM")
    sizes = tuple(sizes)
    specs = [
        ScenarioSpec(id=scenario, n=n, replications=replications, seed=seed)
        for scenario in scenarios
        for n in sizes
    ]
    frames = [
        run_study(spec, n_jobs=n_jobs, progress=progress, run_id=run_id).to_frame()
        for spec in specs
    ]
    return pd.concat(frames, ignore_index=True)
