"""
Logistic propensity model fitted by maximum likelihood.

Newton-Raphson on the concave log-likelihood with step-halving, started at
eta = 0. The fit exposes the fitted probabilities and the empirical Fisher
information (1/n) sum p(1-p) x x^T used by the sandwich variance.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

from src.config import settings
from src.utils import (
    DomainError, NoConvergence, Separation, SingleArmError, solve_symmetric,
)

logger = logging.getLogger(__name__)

_PROB_FLOOR = np.finfo(float).tiny
_PROB_CEIL = 1.0 - np.finfo(float).eps / 2


@dataclass(frozen=True)
class DesignRow:
    """One unit: covariates with leading intercept and the treatment indicator"""

    x: Tuple[float, ...]
    a: int


@dataclass(frozen=True)
class FitOptions:
    tol_score: float = field(default_factory=lambda: settings.TOL_SCORE)
    max_iter: int = field(default_factory=lambda: settings.MAX_ITER)
    max_halvings: int = field(default_factory=lambda: settings.MAX_HALVINGS)
    delta_sep: float = field(default_factory=lambda: settings.DELTA_SEP)
    eta_max: float = field(default_factory=lambda: settings.ETA_MAX)
    x_bound: float = field(default_factory=lambda: settings.X_BOUND)


@dataclass(frozen=True, eq=False)
class PropensityFit:
    eta: np.ndarray
    fitted: np.ndarray
    n_iter: int
    max_score_norm: float
    fisher_info: np.ndarray
    log_likelihood: float
    history: Tuple[float, ...] = ()
    tol_score: float = field(default_factory=lambda: settings.TOL_SCORE)

    @property
    def n(self) -> int:
        return int(self.fitted.size)

    @property
    def converged(self) -> bool:
        return self.max_score_norm <= self.tol_score


# ============================================================
# Validation
# ============================================================

def design_from_rows(rows: Sequence[DesignRow]) -> Tuple[np.ndarray, np.ndarray]:
    """Stack DesignRows into a design matrix and a treatment vector"""
    if len(rows) == 0:
        raise DomainError("no design rows")
    X = np.array([row.x for row in rows], dtype=float)
    a = np.array([row.a for row in rows], dtype=float)
    return X, a


def validate_design(X: np.ndarray, treatment: np.ndarray, x_bound: Optional[float] = None):
    """Check the design matrix and treatment vector; raises DomainError"""
    x_bound = settings.X_BOUND if x_bound is None else x_bound

    if X.ndim != 2:
        raise DomainError(f"design matrix must be 2-D, got shape {X.shape}")
    n, k = X.shape
    if treatment.shape != (n,):
        raise DomainError(f"treatment has shape {treatment.shape}, expected ({n},)")
    if n < k:
        raise DomainError(f"need at least {k} rows for {k} coefficients, got {n}")
    if not np.all(np.isfinite(X)):
        raise DomainError("design matrix has non-finite entries")
    if not np.all(X[:, 0] == 1.0):
        raise DomainError("first design column must be the intercept (all ones)")
    if np.any(np.abs(X) >= x_bound):
        raise DomainError(f"covariates must be bounded by {x_bound:g} in absolute value")
    if not np.all((treatment == 0) | (treatment == 1)):
        raise DomainError("treatment must be coded 0/1")

    n_treated = int(treatment.sum())
    if n_treated == 0 or n_treated == n:
        raise SingleArmError(
            f"both treatment arms must be non-empty (treated={n_treated}, control={n - n_treated})"
        )


# ============================================================
# Model
# ============================================================

def logistic(z: np.ndarray) -> np.ndarray:
    """Overflow-safe logistic, clamped strictly inside (0, 1)"""
    return np.clip(expit(z), _PROB_FLOOR, _PROB_CEIL)


def log_likelihood(X: np.ndarray, treatment: np.ndarray, eta: np.ndarray) -> float:
    z = X @ eta
    return float(np.sum(treatment * z - np.logaddexp(0.0, z)))


def score(X: np.ndarray, treatment: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """sum_i (A_i - pi(X_i)) X_i"""
    return X.T @ (treatment - logistic(X @ eta))


def _information(X: np.ndarray, p: np.ndarray) -> np.ndarray:
    return X.T @ ((p * (1.0 - p))[:, None] * X)


def _outside_band(p: np.ndarray, delta: float) -> bool:
    return bool(np.any((p <= delta) | (p >= 1.0 - delta)))


def fit_logistic(
    X: np.ndarray,
    treatment: np.ndarray,
    options: Optional[FitOptions] = None,
) -> PropensityFit:
    """
    Solve sum_i (A_i - pi(X_i)) X_i = 0 for eta.

    Raises SingleArmError for one-arm data, SingularInformation when a Newton
    system is singular (e.g. duplicated columns), Separation when the
    coefficients diverge against the probability bounds, NoConvergence when
    the iteration budget runs out.
    """
    options = options or FitOptions()
    X = np.asarray(X, dtype=float)
    treatment = np.asarray(treatment, dtype=float).ravel()
    validate_design(X, treatment, options.x_bound)

    n, k = X.shape
    eta = np.zeros(k)
    ll = log_likelihood(X, treatment, eta)
    history = [ll]

    for n_iter in range(options.max_iter + 1):
        p = logistic(X @ eta)
        grad = X.T @ (treatment - p)
        max_score = float(np.max(np.abs(grad)))

        if max_score <= options.tol_score:
            if _outside_band(p, options.delta_sep):
                raise Separation(
                    f"fitted probabilities reach the {options.delta_sep:g} bound "
                    f"(|eta| = {np.linalg.norm(eta):.1f})"
                )
            logger.debug(f"logistic fit converged in {n_iter} iterations (score {max_score:.2e})")
            return PropensityFit(
                eta=eta,
                fitted=p,
                n_iter=n_iter,
                max_score_norm=max_score,
                fisher_info=_information(X, p) / n,
                log_likelihood=ll,
                history=tuple(history),
                tol_score=options.tol_score,
            )

        if n_iter == options.max_iter:
            break

        step = solve_symmetric(_information(X, p), grad, what="logistic information matrix")

        # Step-halving keeps the log-likelihood non-decreasing
        scale = 1.0
        for _ in range(options.max_halvings + 1):
            candidate = eta + scale * step
            ll_candidate = log_likelihood(X, treatment, candidate)
            # tolerance absorbs rounding once the step is at machine scale
            if ll_candidate >= ll - 1e-12 * max(1.0, abs(ll)):
                break
            scale *= 0.5
        else:
            raise NoConvergence(
                f"no ascent step after {options.max_halvings} halvings at iteration {n_iter}"
            )

        eta, ll = candidate, ll_candidate
        history.append(ll)

        if np.linalg.norm(eta) > options.eta_max and _outside_band(logistic(X @ eta), options.delta_sep):
            raise Separation(
                f"|eta| = {np.linalg.norm(eta):.1f} exceeds {options.eta_max:g} "
                f"with fitted probabilities at the bounds"
            )

    raise NoConvergence(
        f"logistic fit did not converge in {options.max_iter} iterations "
        f"(max |score| = {max_score:.3e})"
    )


def predict(fit: PropensityFit, x: np.ndarray) -> float:
    """Fitted propensity for one covariate vector (with intercept)"""
    x = np.asarray(x, dtype=float).ravel()
    if x.shape != fit.eta.shape:
        raise DomainError(f"covariate vector has length {x.size}, expected {fit.eta.size}")
    if x[0] != 1.0:
        raise DomainError("first covariate must be the intercept (1)")
    return float(logistic(np.dot(x, fit.eta)))
