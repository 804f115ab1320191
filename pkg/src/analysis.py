"""
End-to-end analysis of one observational dataset:
ingest -> propensity -> estimate -> variance -> report.
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src import __version__
from src.circular import mean_direction, mean_length
from src.config import settings
from src.csv_parser import IngestionLog, OutcomeKind, load_dataset, radians_to_minutes
from src.estimators import CausalDataset, WeightScheme, estimate_effects, estimate_omega, scheme_weights
from src.features import ConfounderKind
from src.propensity import fit_logistic
from src.utils import ConfigError, generate_run_id, log_execution_time, pipeline_stage
from src.variance import effect_covariance, empirical_pieces, jacobian, wald_interval

logger = logging.getLogger(__name__)

ARMS = ("treated", "control")


# ============================================================
# Configuration
# ============================================================

class Confounder(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = Field(..., min_length=1)
    kind: ConfounderKind = ConfounderKind.NUMERIC


class OutputPaths(BaseModel):
    model_config = ConfigDict(extra="forbid")

    report: Optional[Path] = None
    vectors: Optional[Path] = None
    weights: Optional[Path] = None


class AnalysisConfig(BaseModel):
    """Column mapping and options of an `analyze` run"""

    model_config = ConfigDict(extra="forbid")

    input_path: Path
    treatment_column: str = Field(..., min_length=1)
    treated_value: str
    outcome_column: str = Field(..., min_length=1)
    outcome_kind: OutcomeKind = OutcomeKind.RADIANS
    confounders: List[Confounder] = Field(default_factory=list)
    level: float = Field(default_factory=lambda: settings.CONFIDENCE_LEVEL, gt=0.0, lt=1.0)
    scheme: Literal["HT", "Hajek", "both"] = "both"
    report_format: Literal["text", "csv", "json"] = "text"
    output: OutputPaths = Field(default_factory=OutputPaths)

    @field_validator("treated_value", mode="before")
    @classmethod
    def literal_as_text(cls, v):
        # JSON configs may give 1, 1.0 or true for the treated level; the
        # result is matched against the stripped CSV cell as literal text
        if isinstance(v, bool):
            return str(v).lower()
        if isinstance(v, float) and v.is_integer():
            return str(int(v))
        return str(v) if isinstance(v, (int, float)) else v

    @field_validator("confounders", mode="before")
    @classmethod
    def names_as_numeric(cls, v):
        if isinstance(v, list):
            return [{"name": c} if isinstance(c, str) else c for c in v]
        return v

    @model_validator(mode="after")
    def check_roles(self):
        names = [c.name for c in self.confounders]
        if len(set(names)) != len(names):
            raise ValueError(f"confounders listed twice: {sorted({n for n in names if names.count(n) > 1})}")
        if self.treatment_column == self.outcome_column:
            raise ValueError(f"'{self.outcome_column}' is both treatment and outcome")
        for role, column in (("treatment", self.treatment_column), ("outcome", self.outcome_column)):
            if column in names:
                raise ValueError(f"'{column}' is both {role} and confounder")
        return self

    @property
    def schemes(self) -> List[WeightScheme]:
        if self.scheme == "both":
            return [WeightScheme.HT, WeightScheme.HAJEK]
        return [WeightScheme(self.scheme)]


def parse_config(path: Union[str, Path], overrides: Optional[Dict] = None) -> AnalysisConfig:
    """
    Load a JSON analysis config. A relative input_path is taken relative to
    the config file; `overrides` replace top-level keys before validation.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except (OSError, UnicodeDecodeError) as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path} is not valid JSON: {e}") from None

    if not isinstance(raw, dict):
        raise ConfigError(f"{path} must hold a JSON object")
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})

    try:
        config = AnalysisConfig(**raw)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}" for err in e.errors()
        )
        raise ConfigError(f"invalid config {path}: {problems}") from None

    if not config.input_path.is_absolute():
        config.input_path = (path.parent / config.input_path).resolve()
    return config


# ============================================================
# Report
# ============================================================

class SchemeResult(BaseModel):
    scheme: WeightScheme
    tau: float
    xi: float
    se_tau: float
    se_xi: float
    tau_lo: float
    tau_hi: float
    xi_lo: float
    xi_hi: float
    tau_minutes: Optional[float] = None
    se_tau_minutes: Optional[float] = None


class ArmVector(BaseModel):
    scheme: WeightScheme
    arm: Literal["treated", "control"]
    alpha: float
    beta: float
    mu: float
    rho: float


class UnitWeight(BaseModel):
    scheme: WeightScheme
    arm: Literal["treated", "control"]
    angle: float
    weight: float


class AnalysisReport(BaseModel):
    """
    Effects per weighting scheme with their standard errors and Wald
    intervals. Minutes (clock24 outcomes only) are radians * 1440 / (2 pi),
    rounded to 3 decimals; a negative value means the treated arm's mean
    clock time is earlier.
    """

    version: str = __version__
    n_total: int
    n_used: int
    n_dropped: int
    dropped_reasons: Dict[str, int] = Field(default_factory=dict)
    outcome_kind: OutcomeKind
    level: float
    design_columns: List[str]
    propensity_iterations: int
    propensity_log_likelihood: float
    results: List[SchemeResult]
    vectors: List[ArmVector]
    units: List[UnitWeight] = Field(default_factory=list, exclude=True)

    def result(self, scheme: WeightScheme) -> SchemeResult:
        scheme = WeightScheme(scheme)
        for result in self.results:
            if result.scheme is scheme:
                return result
        raise KeyError(scheme)


def _minutes(radians: float) -> float:
    return round(radians_to_minutes(radians), 3)


# ============================================================
# Orchestration
# ============================================================

def analyze_dataset(
    dataset: CausalDataset,
    schemes: Sequence[WeightScheme] = (WeightScheme.HT, WeightScheme.HAJEK),
    level: Optional[float] = None,
    outcome_kind: OutcomeKind = OutcomeKind.RADIANS,
    ingestion: Optional[IngestionLog] = None,
    design_columns: Optional[List[str]] = None,
    run_id: str = "unknown",
) -> AnalysisReport:
    """Propensity fit, both effect estimates and their inference for one dataset"""
    level = settings.CONFIDENCE_LEVEL if level is None else level
    outcome_kind = OutcomeKind(outcome_kind)
    ingestion = ingestion or IngestionLog(n_total=dataset.n, n_used=dataset.n, n_dropped=0)
    design_columns = design_columns or [f"x{j}" for j in range(dataset.covariates.shape[1])]

    with pipeline_stage("propensity", run_id):
        fit = fit_logistic(dataset.covariates, dataset.treatment)
    logger.info(
        f"[{run_id}] propensity fit: {fit.n_iter} iterations, log-likelihood {fit.log_likelihood:.4f}"
    )

    results, vectors, units = [], [], []
    for scheme in schemes:
        scheme = WeightScheme(scheme)
        with pipeline_stage("estimate", run_id):
            omega = estimate_omega(dataset, fit.fitted, scheme)
            effect = estimate_effects(omega, n=dataset.n)
            w1, w0 = scheme_weights(dataset, fit.fitted, scheme)

        with pipeline_stage("variance", run_id):
            covariance = effect_covariance(empirical_pieces(dataset, fit, omega, scheme), jacobian(omega))
            effect = effect.with_covariance(covariance.sigma)
            interval = wald_interval(effect, level)

        clock = outcome_kind is OutcomeKind.CLOCK24
        results.append(SchemeResult(
            scheme=scheme,
            tau=effect.tau,
            xi=effect.xi,
            se_tau=effect.se_tau,
            se_xi=effect.se_xi,
            tau_lo=interval.lo_tau,
            tau_hi=interval.hi_tau,
            xi_lo=interval.lo_xi,
            xi_hi=interval.hi_xi,
            tau_minutes=_minutes(effect.tau) if clock else None,
            se_tau_minutes=_minutes(effect.se_tau) if clock else None,
        ))
        for arm, vector in zip(ARMS, (omega.treated, omega.control)):
            vectors.append(ArmVector(
                scheme=scheme,
                arm=arm,
                alpha=vector.alpha,
                beta=vector.beta,
                mu=mean_direction(vector),
                rho=mean_length(vector),
            ))
        for i in range(dataset.n):
            treated = dataset.treatment[i] == 1.0
            units.append(UnitWeight(
                scheme=scheme,
                arm="treated" if treated else "control",
                angle=float(dataset.theta[i]),
                weight=float(w1[i] if treated else w0[i]),
            ))
        logger.info(
            f"[{run_id}] {scheme.value}: tau={effect.tau:.4f} (se {effect.se_tau:.4f}), "
            f"xi={effect.xi:.4f} (se {effect.se_xi:.4f})"
        )

    return AnalysisReport(
        n_total=ingestion.n_total,
        n_used=ingestion.n_used,
        n_dropped=ingestion.n_dropped,
        dropped_reasons=dict(ingestion.reasons),
        outcome_kind=outcome_kind,
        level=level,
        design_columns=design_columns,
        propensity_iterations=fit.n_iter,
        propensity_log_likelihood=fit.log_likelihood,
        results=results,
        vectors=vectors,
        units=units,
    )


@log_execution_time
def run_analysis(config: AnalysisConfig, run_id: Optional[str] = None) -> AnalysisReport:
    run_id = run_id or generate_run_id("ANA")
    logger.info(f"[{run_id}] analysing {config.input_path} (schemes: {config.scheme}, level {config.level})")

    with pipeline_stage("ingest", run_id):
        loaded = load_dataset(config)

    return analyze_dataset(
        loaded.dataset,
        schemes=config.schemes,
        level=config.level,
        outcome_kind=config.outcome_kind,
        ingestion=loaded.ingestion,
        design_columns=loaded.design_columns,
        run_id=run_id,
    )
