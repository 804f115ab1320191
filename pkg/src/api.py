"""
FastAPI application: batch estimation and simulation endpoints
"""

from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field, model_validator
from typing import List, Literal, Union
import logging
import time

import numpy as np

from src import __version__
from src.analysis import analyze_dataset
from src.config import settings, setup_logging
from src.csv_parser import IngestionLog, OutcomeKind, time_to_radians
from src.estimators import CausalDataset, WeightScheme
from src.simulation import ScenarioSpec, run_study
from src.utils import (
    CircularEffectsError, ConfigError, generate_run_id, pipeline_stage,
    success_response, error_response,
)

# Setup logging
setup_logging()
logger = logging.getLogger(__name__)

# Initialize FastAPI app
app = FastAPI(
    title=settings.API_TITLE,
    version=settings.API_VERSION,
    description="Average direction and length treatment effects for circular outcomes"
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=settings.CORS_ORIGINS,
    allow_methods=["GET", "POST"],
    allow_headers=["*"],
)


@app.middleware("http")
async def add_request_id(request: Request, call_next):
    """Tag every request with an id, echoed in X-Request-ID"""
    request_id = generate_run_id("REQ")
    request.state.request_id = request_id

    start_time = time.time()
    response = await call_next(request)
    process_time = time.time() - start_time

    response.headers["X-Request-ID"] = request_id
    response.headers["X-Process-Time"] = f"{process_time:.4f}"

    logger.info(f"[{request_id}] {request.method} {request.url.path} - {response.status_code} ({process_time:.3f}s)")
    return response


# ============================================================
# Pydantic Models for Request/Response
# ============================================================

class UnitRecord(BaseModel):
    """One observed unit; covariates exclude the intercept"""
    treatment: int = Field(..., ge=0, le=1)
    covariates: List[float] = Field(default_factory=list)
    outcome: Union[float, str]


class EffectsRequest(BaseModel):
    units: List[UnitRecord] = Field(..., min_length=2)
    outcome_kind: OutcomeKind = OutcomeKind.RADIANS
    scheme: str = Field(default="both", pattern="^(HT|Hajek|both)$")
    level: float = Field(default=0.95, gt=0.0, lt=1.0)

    @model_validator(mode="after")
    def check_units(self):
        widths = {len(u.covariates) for u in self.units}
        if len(widths) > 1:
            raise ValueError(f"units disagree on the number of covariates: {sorted(widths)}")
        return self

    @property
    def schemes(self) -> List[WeightScheme]:
        if self.scheme == "both":
            return [WeightScheme.HT, WeightScheme.HAJEK]
        return [WeightScheme(self.scheme)]


class SimulateRequest(BaseModel):
    scenario: Literal[1, 2, 3]
    n: int = Field(default=1000, ge=50, le=20000)
    replications: int = Field(default=100, ge=1)
    seed: int = Field(default=20240601, ge=0)


def _dataset_from_units(request: EffectsRequest) -> CausalDataset:
    theta = []
    for i, unit in enumerate(request.units):
        if request.outcome_kind is OutcomeKind.CLOCK24:
            theta.append(time_to_radians(str(unit.outcome), line=i))
        else:
            try:
                value = float(unit.outcome)
            except ValueError:
                raise ConfigError(f"unit {i}: outcome {unit.outcome!r} is not a number") from None
            theta.append(np.deg2rad(value) if request.outcome_kind is OutcomeKind.DEGREES else value)

    n = len(request.units)
    width = len(request.units[0].covariates)
    raw = np.array([u.covariates for u in request.units], dtype=float).reshape(n, width)
    covariates = np.column_stack([np.ones(n), raw])
    return CausalDataset.from_arrays(
        treatment=[u.treatment for u in request.units],
        covariates=covariates,
        theta=theta,
    )


# ============================================================
# Health Check Endpoint
# ============================================================

@app.get("/api/v1/health", tags=["Health"])
def health_check():
    """Health check endpoint"""
    return {
        "status": "healthy",
        "api_version": settings.API_VERSION,
        "package_version": __version__,
    }


# ============================================================
# Estimation Endpoint
# ============================================================

@app.post("/api/v1/effects", tags=["Estimation"])
def estimate_effects(body: EffectsRequest, request: Request):
    """ADTE/ALTE with sandwich standard errors for a batch of units"""
    request_id = request.state.request_id

    with pipeline_stage("ingest", request_id):
        dataset = _dataset_from_units(body)
    report = analyze_dataset(
        dataset,
        schemes=body.schemes,
        level=body.level,
        outcome_kind=body.outcome_kind,
        ingestion=IngestionLog(n_total=dataset.n, n_used=dataset.n, n_dropped=0),
        design_columns=["(intercept)"] + [f"x{j + 1}" for j in range(dataset.covariates.shape[1] - 1)],
        run_id=request_id,
    )
    return success_response(report.model_dump(mode="json"), request_id=request_id)


# ============================================================
# Simulation Endpoint
# ============================================================

@app.post("/api/v1/simulate", tags=["Simulation"])
def simulate(body: SimulateRequest, request: Request):
    """Small Monte Carlo study of one scenario"""
    request_id = request.state.request_id

    if body.replications > settings.API_MAX_REPLICATIONS:
        raise HTTPException(
            status_code=422,
            detail=f"at most {settings.API_MAX_REPLICATIONS} replications per request",
        )

    spec = ScenarioSpec(id=body.scenario, n=body.n, replications=body.replications, seed=body.seed)
    summary = run_study(spec, run_id=request_id)
    frame = summary.to_frame().astype(object)
    rows = frame.where(frame.notna(), None).to_dict(orient="records")
    return success_response({
        "scenario": summary.scenario,
        "n": summary.n,
        "replications": summary.replications,
        "n_failed": summary.n_failed,
        "flagged": summary.flagged,
        "true_tau": summary.true_tau,
        "true_xi": summary.true_xi,
        "rows": rows,
    }, request_id=request_id)


# ============================================================
# Root Endpoint
# ============================================================

@app.get("/", tags=["Info"])
def root():
    """Root endpoint with API info"""
    return {
        "name": settings.API_TITLE,
        "version": settings.API_VERSION,
        "status": "running",
        "docs": "/docs"
    }


# ============================================================
# Error Handlers
# ============================================================

@app.exception_handler(CircularEffectsError)
async def estimation_exception_handler(request: Request, exc: CircularEffectsError):
    """Input and numerical failures are the caller's to fix"""
    request_id = getattr(request.state, 'request_id', 'unknown')
    logger.warning(f"[{request_id}] {exc.__class__.__name__}: {exc}")
    return JSONResponse(
        status_code=422,
        content=error_response(str(exc), error_code=exc.__class__.__name__, request_id=request_id)
    )


@app.exception_handler(HTTPException)
async def http_exception_handler(request: Request, exc: HTTPException):
    """Handle HTTP exceptions"""
    request_id = getattr(request.state, 'request_id', 'unknown')
    return JSONResponse(
        status_code=exc.status_code,
        content=error_response(exc.detail, request_id=request_id)
    )


@app.exception_handler(Exception)
async def general_exception_handler(request: Request, exc: Exception):
    """Handle general exceptions"""
    request_id = getattr(request.state, 'request_id', 'unknown')
    logger.error(f"[{request_id}] Unhandled exception: {exc}")
    return JSONResponse(
        status_code=500,
        content=error_response("Internal server error", request_id=request_id)
    )


if __name__ == "__main__":
    import uvicorn

    uvicorn.run("src.api:app", host=settings.API_HOST, port=settings.API_PORT, reload=settings.DEBUG)
