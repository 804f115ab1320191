"""
Empirical sandwich variance for the nuisance moments and delta-method
covariance for (tau, xi).

The per-unit estimating functions are stacked as

    psi = (psi_eta, psi_alpha1, psi_beta1, psi_alpha0, psi_beta0)

with psi_eta = (A - pi) X and, for the treated cosine moment,

    HT     A cos(Theta) / pi - alpha1
    Hajek  A (cos(Theta) - alpha1) / pi

(control and sine rows analogously). For a logistic propensity the
derivative of the moment rows with respect to eta equals minus their cross
product with the score, so the nuisance covariance reduces to

    V = b22 - b21 a11^{-1} b21^T

with a11 the Fisher information, b21 = E[psi_omega psi_eta^T] and
b22 = E[psi_omega psi_omega^T], all replaced by sample averages at the
estimates. Sigma = J V J^T with J the Jacobian of (tau, xi) in omega;
standard errors are sqrt(diag(Sigma) / n).
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.stats import norm

from src.circular import angular_difference, mean_length
from src.config import settings
from src.estimators import (
    CausalDataset, EffectEstimate, OmegaEstimate, WeightScheme, estimate_effects,
    estimate_omega,
)
from src.propensity import PropensityFit
from src.utils import (
    DomainError, InternalConsistencyError, UndefinedDirection, solve_symmetric, symmetrize,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SandwichPieces:
    a11: np.ndarray
    b21: np.ndarray
    b22: np.ndarray
    scheme: WeightScheme
    n: int

    @property
    def nuisance_covariance(self) -> np.ndarray:
        """b22 - b21 a11^{-1} b21^T (asymptotic, root-n scale)"""
        correction = self.b21 @ solve_symmetric(self.a11, self.b21.T, what="Fisher information")
        return symmetrize(self.b22 - correction)


@dataclass(frozen=True, eq=False)
class EffectCovariance:
    sigma: np.ndarray
    se_tau: float
    se_xi: float
    nuisance: Optional[np.ndarray] = None


@dataclass(frozen=True)
class WaldInterval:
    lo_tau: float
    hi_tau: float
    lo_xi: float
    hi_xi: float
    level: float
    z: float


# ============================================================
# Estimating functions
# ============================================================

def estimating_functions(
    dataset: CausalDataset,
    fitted: np.ndarray,
    omega: OmegaEstimate,
    scheme: WeightScheme,
) -> np.ndarray:
    """Per-unit stacked psi, shape (n, k + 4) with k covariate columns"""
    scheme = WeightScheme(scheme)
    fitted = np.asarray(fitted, dtype=float).ravel()
    a = dataset.treatment
    X = dataset.covariates
    cos_t = np.cos(dataset.theta)
    sin_t = np.sin(dataset.theta)

    inv1 = a / fitted
    inv0 = (1.0 - a) / (1.0 - fitted)

    psi_eta = (a - fitted)[:, None] * X
    if scheme is WeightScheme.HT:
        psi_omega = np.column_stack([
            inv1 * cos_t - omega.alpha1,
            inv1 * sin_t - omega.beta1,
            inv0 * cos_t - omega.alpha0,
            inv0 * sin_t - omega.beta0,
        ])
    else:
        psi_omega = np.column_stack([
            inv1 * (cos_t - omega.alpha1),
            inv1 * (sin_t - omega.beta1),
            inv0 * (cos_t - omega.alpha0),
            inv0 * (sin_t - omega.beta0),
        ])
    return np.hstack([psi_eta, psi_omega])


def empirical_pieces(
    dataset: CausalDataset,
    fit: PropensityFit,
    omega: OmegaEstimate,
    scheme: WeightScheme,
) -> SandwichPieces:
    """Sample-average sandwich blocks at (eta_hat, omega_hat)"""
    scheme = WeightScheme(scheme)
    if fit.n != dataset.n:
        raise DomainError(f"fit has {fit.n} units, dataset has {dataset.n}")
    psi = estimating_functions(dataset, fit.fitted, omega, scheme)
    n, width = psi.shape
    k = width - 4
    psi_eta, psi_omega = psi[:, :k], psi[:, k:]

    p = fit.fitted
    a11 = symmetrize(dataset.covariates.T @ ((p * (1.0 - p))[:, None] * dataset.covariates) / n)
    b21 = psi_omega.T @ psi_eta / n
    b22 = symmetrize(psi_omega.T @ psi_omega / n)

    # a11 must be invertible
    solve_symmetric(a11, np.eye(k), what="Fisher information")
    return SandwichPieces(a11=a11, b21=b21, b22=b22, scheme=scheme, n=n)


# ============================================================
# Delta method
# ============================================================

def jacobian(omega: OmegaEstimate) -> np.ndarray:
    """d(tau, xi) / d(alpha1, beta1, alpha0, beta0)"""
    rho1 = mean_length(omega.treated)
    rho0 = mean_length(omega.control)
    if min(rho1, rho0) < settings.EPS_RHO:
        raise UndefinedDirection(
            f"resultant lengths ({rho1:.3e}, {rho0:.3e}) too small for a Jacobian"
        )
    a1, b1, a0, b0 = omega.alpha1, omega.beta1, omega.alpha0, omega.beta0
    return np.array([
        [-b1 / rho1 ** 2, a1 / rho1 ** 2, b0 / rho0 ** 2, -a0 / rho0 ** 2],
        [a1 / rho1, b1 / rho1, -a0 / rho0, -b0 / rho0],
    ])


def effect_covariance(pieces: SandwichPieces, J: np.ndarray) -> EffectCovariance:
    """Sigma = J V J^T; standard errors sqrt(diag(Sigma) / n)"""
    nuisance = pieces.nuisance_covariance
    sigma = symmetrize(J @ nuisance @ J.T)

    diagonal = np.diag(sigma)
    if np.any(diagonal < -settings.NEGATIVE_VARIANCE_TOL):
        raise InternalConsistencyError(
            f"effect covariance has negative variance {diagonal.min():.3e}"
        )
    if np.any(diagonal < 0.0):
        logger.debug(f"clipping rounding-level negative variances {diagonal} to zero")
    n = pieces.n
    return EffectCovariance(
        sigma=sigma,
        se_tau=math.sqrt(max(diagonal[0], 0.0) / n),
        se_xi=math.sqrt(max(diagonal[1], 0.0) / n),
        nuisance=nuisance,
    )


# ============================================================
# Intervals
# ============================================================

def normal_quantile(level: float) -> float:
    """z_{(1+level)/2}; 1.959964 at level 0.95"""
    if not 0.0 < level < 1.0:
        raise DomainError(f"confidence level must lie in (0, 1), got {level}")
    return float(norm.ppf(0.5 * (1.0 + level)))


def wald_interval(estimate: EffectEstimate, level: Optional[float] = None) -> WaldInterval:
    """
    estimate +/- z * se. The tau interval is an arc: its endpoints are
    reported unwrapped around the wrapped estimate.
    """
    level = settings.CONFIDENCE_LEVEL if level is None else level
    if estimate.sigma is None:
        raise DomainError("estimate has no covariance; run the variance step first")
    z = normal_quantile(level)
    half_tau = z * estimate.se_tau
    half_xi = z * estimate.se_xi
    return WaldInterval(
        lo_tau=estimate.tau - half_tau,
        hi_tau=estimate.tau + half_tau,
        lo_xi=estimate.xi - half_xi,
        hi_xi=estimate.xi + half_xi,
        level=level,
        z=z,
    )


def covers(
    estimate: EffectEstimate, true_tau: float, true_xi: float, level: Optional[float] = None
) -> Tuple[bool, bool]:
    """Whether the Wald intervals contain the truth; tau judged on the circle"""
    interval = wald_interval(estimate, level)
    tau_hit = abs(angular_difference(estimate.tau, true_tau)) <= interval.z * estimate.se_tau
    xi_hit = interval.lo_xi <= true_xi <= interval.hi_xi
    return bool(tau_hit), bool(xi_hit)


# ============================================================
# Pipeline
# ============================================================

def estimate_with_inference(
    dataset: CausalDataset,
    fit: PropensityFit,
    scheme: WeightScheme,
    level: Optional[float] = None,
) -> Tuple[EffectEstimate, EffectCovariance, WaldInterval]:
    """omega -> (tau, xi) -> sandwich -> Wald interval for one scheme"""
    scheme = WeightScheme(scheme)
    omega = estimate_omega(dataset, fit.fitted, scheme)
    effect = estimate_effects(omega, n=dataset.n)
    pieces = empirical_pieces(dataset, fit, omega, scheme)
    covariance = effect_covariance(pieces, jacobian(omega))
    effect = effect.with_covariance(covariance.sigma)
    return effect, covariance, wald_interval(effect, level)
