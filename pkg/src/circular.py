"""
Circular statistics kernel: canonical angles, weighted first trigonometric
moments, mean direction / resultant length and wrapped angular differences.

Angles are counterclockwise radians. Only the first moment (p = 1) is
computed; a p-th moment is the same computation applied to p * theta.
"""

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from src.config import settings
from src.utils import DomainError, UndefinedDirection

TWO_PI = 2.0 * math.pi

# Canonical representative in [0, 2*pi)
Angle = float

ArrayLike = Union[Sequence[float], np.ndarray]


@dataclass(frozen=True)
class ResultantVector:
    """First cosine moment `alpha` and first sine moment `beta`"""

    alpha: float
    beta: float

    @property
    def length(self) -> float:
        return mean_length(self)

    @property
    def direction(self) -> Angle:
        return mean_direction(self)


# ============================================================
# Angles
# ============================================================

def canonical_angle(theta: float) -> Angle:
    """Return theta mod 2*pi in [0, 2*pi)"""
    theta = float(theta)
    if not math.isfinite(theta):
        raise DomainError(f"angle must be finite, got {theta}")
    value = math.fmod(theta, TWO_PI)
    if value < 0.0:
        value += TWO_PI
    # fmod of a tiny negative number plus 2*pi can round up to 2*pi
    if value >= TWO_PI:
        value = 0.0
    return value


def canonical_angles(theta: ArrayLike) -> np.ndarray:
    """Vectorised canonical_angle"""
    theta = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(theta)):
        raise DomainError("angles must be finite")
    value = np.mod(theta, TWO_PI)
    return np.where(value >= TWO_PI, 0.0, value)


def atan2_circle(beta: float, alpha: float) -> Angle:
    """Direction of the vector (alpha, beta) in [0, 2*pi)"""
    if math.hypot(alpha, beta) < settings.EPS_RHO:
        raise UndefinedDirection(
            f"resultant ({alpha:.3e}, {beta:.3e}) is shorter than {settings.EPS_RHO:.0e}"
        )
    return canonical_angle(math.atan2(beta, alpha))


def angular_difference(a: float, b: float) -> float:
    """
    Unique d in (-pi, pi] with canonical(b + d) == canonical(a).

    An exactly antipodal pair returns +pi.
    """
    return float(angular_differences(a, b))


def angular_differences(a: ArrayLike, b: ArrayLike) -> np.ndarray:
    """Vectorised angular_difference"""
    raw = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    d = math.pi - np.mod(math.pi - raw, TWO_PI)
    # np.mod may round a tiny negative up to 2*pi
    return np.where(d <= -math.pi, math.pi, d)


# ============================================================
# Moments
# ============================================================

def weighted_trig_moment(angles: ArrayLike, weights: ArrayLike) -> ResultantVector:
    """
    alpha = sum_i w_i cos(theta_i), beta = sum_i w_i sin(theta_i).

    Weights need not sum to one (Horvitz-Thompson weights do not).
    """
    angles = np.asarray(angles, dtype=float).ravel()
    weights = np.asarray(weights, dtype=float).ravel()
    if angles.size == 0:
        raise DomainError("cannot take the moment of an empty sample")
    if angles.shape != weights.shape:
        raise DomainError(
            f"angles and weights differ in length ({angles.size} vs {weights.size})"
        )
    if not np.all(np.isfinite(weights)):
        raise DomainError("weights must be finite")
    if not np.all(np.isfinite(angles)):
        raise DomainError("angles must be finite")

    return ResultantVector(
        alpha=float(np.dot(weights, np.cos(angles))),
        beta=float(np.dot(weights, np.sin(angles))),
    )


def sample_resultant(angles: ArrayLike) -> ResultantVector:
    """Equal-weight first trigonometric moment of a sample"""
    angles = np.asarray(angles, dtype=float).ravel()
    if angles.size == 0:
        raise DomainError("cannot take the moment of an empty sample")
    return weighted_trig_moment(angles, np.full(angles.size, 1.0 / angles.size))


def mean_direction(v: ResultantVector) -> Angle:
    return atan2_circle(v.beta, v.alpha)


def mean_length(v: ResultantVector) -> float:
    return math.hypot(v.alpha, v.beta)
