"""
Utility functions, error types and shared linear algebra
"""

import uuid
from contextlib import contextmanager
from typing import Dict, Any, Optional
from datetime import datetime, timezone
import logging
from functools import wraps
import time

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from src.config import settings

logger = logging.getLogger(__name__)

# ============================================================
# Run ID & Correlation
# ============================================================

def generate_run_id(prefix: str = "RUN") -> str:
    """Generate unique run ID for tracking one analysis, study or request"""
    return f"{prefix}_{datetime.now(timezone.utc).strftime('%Y%m%d_%H%M%S')}_{str(uuid.uuid4())[:8]}"


# ============================================================
# Errors
# ============================================================

class CircularEffectsError(Exception):
    """Base error; `stage` names the pipeline step that raised it"""

    def __init__(self, message: str, stage: Optional[str] = None):
        super().__init__(message)
        self.stage = stage

    def __str__(self):
        message = super().__str__()
        return f"{self.stage}: {message}" if self.stage else message


class ConfigError(CircularEffectsError):
    """Invalid or contradictory configuration"""


class DataError(CircularEffectsError):
    """Unusable input data"""


class DomainError(CircularEffectsError, ValueError):
    """Argument outside the domain of a function"""


class SingleArmError(DomainError):
    """All units are treated or all are controls"""


class NumericalError(CircularEffectsError):
    """Estimation broke down numerically"""


class UndefinedDirection(NumericalError):
    """Resultant length too small for a mean direction to exist"""


class Separation(NumericalError):
    """Treatment is (quasi-)perfectly separated by the covariates"""


class NoConvergence(NumericalError):
    """Iterative solver did not converge"""


class SingularInformation(NumericalError):
    """Information matrix is numerically singular"""


class InternalConsistencyError(NumericalError):
    """A computed quantity violates an invariant it must satisfy"""


@contextmanager
def pipeline_stage(stage: str, run_id: str = "unknown"):
    """Tag errors raised inside the block with the stage name"""
    try:
        yield
    except CircularEffectsError as e:
        if e.stage is None:
            e.stage = stage
        logger.error(f"[{run_id}] {e.__class__.__name__} at {e}")
        raise


# ============================================================
# Linear Algebra
# ============================================================

def solve_symmetric(matrix: np.ndarray, rhs: np.ndarray, what: str = "matrix") -> np.ndarray:
    """
    Solve matrix @ x = rhs for a symmetric positive definite matrix.

    Singularity is judged on the eigenvalue ratio against PIVOT_TOL; a singular
    system raises instead of falling back to a pseudo-inverse.
    """
    matrix = np.asarray(matrix, dtype=float)
    eigenvalues = np.linalg.eigvalsh(matrix)
    top = eigenvalues[-1]
    if not np.all(np.isfinite(eigenvalues)) or top <= 0 or eigenvalues[0] <= settings.PIVOT_TOL * top:
        raise SingularInformation(
            f"{what} is numerically singular "
            f"(eigenvalue range {eigenvalues[0]:.3e} .. {top:.3e})"
        )
    factor = cho_factor(matrix)
    return cho_solve(factor, rhs)


def symmetrize(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + matrix.T)


# ============================================================
# Logging & Timing
# ============================================================

def log_execution_time(func):
    """Decorator to log function execution time"""
    @wraps(func)
    def wrapper(*args, **kwargs):
        start_time = time.time()
        run_id = kwargs.get('run_id', 'unknown')

        try:
            result = func(*args, **kwargs)
            elapsed_ms = (time.time() - start_time) * 1000
            logger.info(
                f"[{run_id}] {func.__name__} completed in {elapsed_ms:.2f}ms"
            )
            return result
        except Exception as e:
            elapsed_ms = (time.time() - start_time) * 1000
            logger.error(
                f"[{run_id}] {func.__name__} failed after {elapsed_ms:.2f}ms: {str(e)}"
            )
            raise

    return wrapper


# ============================================================
# Response Formatting
# ============================================================

def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat().replace("+00:00", "Z")


def success_response(data: Dict[str, Any], request_id: str = None) -> Dict[str, Any]:
    """Format success response"""
    return {
        "status": "success",
        "request_id": request_id,
        "timestamp": _timestamp(),
        "data": data
    }


def error_response(message: str, error_code: str = None, request_id: str = None) -> Dict[str, Any]:
    """Format error response"""
    return {
        "status": "error",
        "request_id": request_id,
        "timestamp": _timestamp(),
        "error": message,
        "error_code": error_code or "INTERNAL_ERROR"
    }
