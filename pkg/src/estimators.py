"""
Inverse probability weighted estimators of the average direction treatment
effect (ADTE, tau) and the average length treatment effect (ALTE, xi).

Two weighting schemes:
    HT     w1_i = A_i / (n pi_i),  w0_i = (1 - A_i) / (n (1 - pi_i))
    Hajek  the HT weights normalised to sum to one within each arm

Both schemes give the same direction estimate because normalising a
resultant vector by a positive constant does not change its angle; they
differ only in the length estimate.
"""

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from src.circular import (
    ResultantVector, angular_difference, canonical_angles, mean_direction,
    mean_length, weighted_trig_moment,
)
from src.config import settings
from src.propensity import FitOptions, PropensityFit, fit_logistic
from src.utils import DomainError, SingleArmError, UndefinedDirection

logger = logging.getLogger(__name__)


class WeightScheme(str, Enum):
    HT = "HT"
    HAJEK = "Hajek"


# ============================================================
# Domain Types
# ============================================================

@dataclass(frozen=True, eq=False)
class CausalDataset:
    """
    Observed sample (A_i, X_i, Theta_i).

    `covariates` includes the leading intercept column; `theta` is canonical
    in [0, 2*pi).
    """

    treatment: np.ndarray
    covariates: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        n = self.treatment.shape[0]
        if n < 2:
            raise DomainError(f"need at least 2 units, got {n}")
        if self.covariates.ndim != 2 or self.covariates.shape[0] != n or self.theta.shape != (n,):
            raise DomainError(
                f"inconsistent shapes: treatment {self.treatment.shape}, "
                f"covariates {self.covariates.shape}, theta {self.theta.shape}"
            )
        if not np.all((self.treatment == 0) | (self.treatment == 1)):
            raise DomainError("treatment must be coded 0/1")
        n_treated = int(self.treatment.sum())
        if n_treated == 0 or n_treated == n:
            raise SingleArmError(
                f"both arms must be non-empty (treated={n_treated}, control={n - n_treated})"
            )
        if np.any(self.theta < 0.0) or np.any(self.theta >= 2.0 * math.pi):
            raise DomainError("outcome angles must be canonical, in [0, 2*pi)")

    @classmethod
    def from_arrays(cls, treatment, covariates, theta) -> "CausalDataset":
        """Build a dataset, canonicalising angles; covariates must include the intercept"""
        covariates = np.asarray(covariates, dtype=float)
        if covariates.ndim == 1:
            covariates = covariates[:, None]
        return cls(
            treatment=np.asarray(treatment, dtype=float).ravel(),
            covariates=covariates,
            theta=canonical_angles(np.asarray(theta, dtype=float).ravel()),
        )

    @property
    def n(self) -> int:
        return int(self.treatment.shape[0])

    @property
    def n_treated(self) -> int:
        return int(self.treatment.sum())

    def rotate(self, delta: float) -> "CausalDataset":
        """Same units with every outcome rotated by delta"""
        return CausalDataset.from_arrays(self.treatment, self.covariates, self.theta + delta)


@dataclass(frozen=True)
class OmegaEstimate:
    """Nuisance vector (alpha1, beta1, alpha0, beta0)"""

    alpha1: float
    beta1: float
    alpha0: float
    beta0: float
    scheme: WeightScheme

    @property
    def treated(self) -> ResultantVector:
        return ResultantVector(self.alpha1, self.beta1)

    @property
    def control(self) -> ResultantVector:
        return ResultantVector(self.alpha0, self.beta0)

    def as_vector(self) -> np.ndarray:
        return np.array([self.alpha1, self.beta1, self.alpha0, self.beta0])


@dataclass(frozen=True, eq=False)
class EffectEstimate:
    """tau (radians, wrapped to (-pi, pi]) and xi, with their 2x2 covariance once filled"""

    tau: float
    xi: float
    scheme: WeightScheme
    n: int
    omega: OmegaEstimate
    sigma: Optional[np.ndarray] = None

    @property
    def se_tau(self) -> Optional[float]:
        if self.sigma is None or self.n <= 0:
            return None
        return math.sqrt(max(self.sigma[0, 0], 0.0) / self.n)

    @property
    def se_xi(self) -> Optional[float]:
        if self.sigma is None or self.n <= 0:
            return None
        return math.sqrt(max(self.sigma[1, 1], 0.0) / self.n)

    def with_covariance(self, sigma: np.ndarray) -> "EffectEstimate":
        return replace(self, sigma=sigma)


# ============================================================
# Weights
# ============================================================

def _check_fitted(dataset: CausalDataset, fitted: np.ndarray) -> np.ndarray:
    fitted = np.asarray(fitted, dtype=float).ravel()
    if fitted.shape != (dataset.n,):
        raise DomainError(f"need {dataset.n} propensities, got {fitted.size}")
    if np.any(fitted <= 0.0) or np.any(fitted >= 1.0):
        raise DomainError("propensities must lie strictly inside (0, 1)")
    return fitted


def ht_weights(dataset: CausalDataset, fitted: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Horvitz-Thompson weights for the treated and control arms"""
    fitted = _check_fitted(dataset, fitted)
    a = dataset.treatment
    n = dataset.n
    w1 = a / (n * fitted)
    w0 = (1.0 - a) / (n * (1.0 - fitted))
    return w1, w0


def hajek_weights(w1: np.ndarray, w0: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """HT weights normalised to sum to one within each arm"""
    w1 = np.asarray(w1, dtype=float)
    w0 = np.asarray(w0, dtype=float)
    total1, total0 = w1.sum(), w0.sum()
    if not total1 > 0.0 or not total0 > 0.0:
        raise DomainError(
            f"an arm has no effective weight (treated sum {total1:g}, control sum {total0:g})"
        )
    v1 = w1 / total1
    v0 = w0 / total0
    # second pass removes the rounding left by the first division
    return v1 / v1.sum(), v0 / v0.sum()


def scheme_weights(
    dataset: CausalDataset, fitted: np.ndarray, scheme: WeightScheme
) -> Tuple[np.ndarray, np.ndarray]:
    w1, w0 = ht_weights(dataset, fitted)
    if WeightScheme(scheme) is WeightScheme.HAJEK:
        return hajek_weights(w1, w0)
    return w1, w0


# ============================================================
# Estimators
# ============================================================

def estimate_omega(dataset: CausalDataset, fitted: np.ndarray, scheme: WeightScheme) -> OmegaEstimate:
    """Weighted first trigonometric moments of each counterfactual arm"""
    scheme = WeightScheme(scheme)
    w1, w0 = scheme_weights(dataset, fitted, scheme)
    treated = weighted_trig_moment(dataset.theta, w1)
    control = weighted_trig_moment(dataset.theta, w0)
    return OmegaEstimate(
        alpha1=treated.alpha,
        beta1=treated.beta,
        alpha0=control.alpha,
        beta0=control.beta,
        scheme=scheme,
    )


def estimate_effects(omega: OmegaEstimate, n: int) -> EffectEstimate:
    """
    tau = wrapped difference of the arm directions, xi = difference of the
    arm resultant lengths. `n` is the sample size the standard errors divide by.
    """
    if n < 1:
        raise DomainError(f"sample size must be positive, got {n}")
    for arm, vector in (("treated", omega.treated), ("control", omega.control)):
        if mean_length(vector) < settings.EPS_RHO:
            raise UndefinedDirection(
                f"{arm} resultant length {mean_length(vector):.3e} is below {settings.EPS_RHO:.0e}"
            )
    tau = angular_difference(mean_direction(omega.treated), mean_direction(omega.control))
    xi = mean_length(omega.treated) - mean_length(omega.control)
    return EffectEstimate(tau=tau, xi=xi, scheme=omega.scheme, n=n, omega=omega)


def estimate(
    dataset: CausalDataset,
    scheme: WeightScheme = WeightScheme.HAJEK,
    fit: Optional[PropensityFit] = None,
    propensity: Optional[np.ndarray] = None,
    options: Optional[FitOptions] = None,
) -> EffectEstimate:
    """
    Point estimate of (tau, xi).

    Uses `propensity` when given (known propensities), else the fitted
    probabilities of `fit`, else fits the logistic model on the dataset.
    """
    if propensity is None:
        if fit is None:
            fit = fit_logistic(dataset.covariates, dataset.treatment, options)
        propensity = fit.fitted
    omega = estimate_omega(dataset, propensity, scheme)
    return estimate_effects(omega, n=dataset.n)
