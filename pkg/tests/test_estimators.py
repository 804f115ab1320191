import math

import numpy as np
import pytest

from src.circular import TWO_PI, mean_length
from src.estimators import (
    CausalDataset, EffectEstimate, WeightScheme, estimate, estimate_effects, estimate_omega,
    hajek_weights, ht_weights,
)
from src.propensity import fit_logistic
from src.utils import DomainError, SingleArmError, UndefinedDirection


def _random_known_propensity_data(rng, n):
    while True:
        p = rng.uniform(0.05, 0.95, n)
        a = (rng.random(n) < p).astype(float)
        if 0 < a.sum() < n:
            break
    X = np.column_stack([np.ones(n), rng.standard_normal(n)])
    theta = rng.vonmises(rng.uniform(-math.pi, math.pi), rng.uniform(0.1, 5.0), n)
    return CausalDataset.from_arrays(a, X, theta), p


def test_direction_identical_under_both_schemes(rng):
    for _ in range(1000):
        dataset, p = _random_known_propensity_data(rng, int(rng.integers(20, 501)))
        try:
            ht = estimate(dataset, WeightScheme.HT, propensity=p)
        except UndefinedDirection:
            continue
        hajek = estimate(dataset, WeightScheme.HAJEK, propensity=p)
        assert abs(ht.tau - hajek.tau) <= 1e-12


def test_hajek_weights_sum_to_one(dataset):
    fit = fit_logistic(dataset.covariates, dataset.treatment)
    w1, w0 = hajek_weights(*ht_weights(dataset, fit.fitted))
    assert w1.sum() == pytest.approx(1.0, abs=1e-12)
    assert w0.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(w1[dataset.treatment == 0] == 0)
    assert np.all(w0[dataset.treatment == 1] == 0)


def test_hajek_lengths_bounded(rng):
    for _ in range(50):
        dataset, p = _random_known_propensity_data(rng, 100)
        omega = estimate_omega(dataset, p, WeightScheme.HAJEK)
        assert mean_length(omega.treated) <= 1 + 1e-12
        assert mean_length(omega.control) <= 1 + 1e-12


def test_ht_weights_formula(dataset):
    p = np.full(dataset.n, 0.25)
    w1, w0 = ht_weights(dataset, p)
    a = dataset.treatment
    np.testing.assert_allclose(w1, a / (dataset.n * 0.25))
    np.testing.assert_allclose(w0, (1 - a) / (dataset.n * 0.75))


def test_constant_shift_is_recovered(rng):
    n = 200
    X = np.column_stack([np.ones(n), rng.standard_normal(n)])
    a = (rng.random(n) < 0.5).astype(float)
    theta = 5.9 + 0.7 * a

    for scheme in WeightScheme:
        effect = estimate(CausalDataset.from_arrays(a, X, theta), scheme)
        assert effect.tau == pytest.approx(0.7, abs=1e-10)
    hajek = estimate(CausalDataset.from_arrays(a, X, theta), WeightScheme.HAJEK)
    assert hajek.xi == pytest.approx(0.0, abs=1e-10)


def test_rotation_leaves_effects_unchanged(dataset):
    fit = fit_logistic(dataset.covariates, dataset.treatment)
    for scheme in WeightScheme:
        base = estimate(dataset, scheme, fit=fit)
        for delta in (0.4, -2.0, 3 * math.pi):
            rotated = estimate(dataset.rotate(delta), scheme, fit=fit)
            assert rotated.tau == pytest.approx(base.tau, abs=1e-10)
            assert rotated.xi == pytest.approx(base.xi, abs=1e-10)


def test_antipodal_arms_give_plus_pi():
    a = np.array([1, 1, 0, 0.0])
    X = np.ones((4, 1))
    effect = estimate(CausalDataset.from_arrays(a, X, [math.pi] * 2 + [0.0] * 2), propensity=np.full(4, 0.5))
    assert effect.tau == pytest.approx(math.pi)


def test_balanced_treated_arm_has_no_direction():
    a = np.array([1, 1, 0, 0.0])
    X = np.ones((4, 1))
    dataset = CausalDataset.from_arrays(a, X, [0.0, math.pi, 1.0, 1.1])
    with pytest.raises(UndefinedDirection):
        estimate(dataset, propensity=np.full(4, 0.5))


def test_effect_carries_omega(dataset):
    effect = estimate(dataset, WeightScheme.HT)
    assert effect.n == dataset.n
    assert effect.omega.scheme is WeightScheme.HT
    again = estimate_effects(effect.omega, n=dataset.n)
    assert again.tau == effect.tau and again.xi == effect.xi
    assert effect.se_tau is None


def test_effects_need_a_sample_size(dataset):
    effect = estimate(dataset, WeightScheme.HT)
    with pytest.raises(DomainError):
        estimate_effects(effect.omega, n=0)


def test_no_standard_errors_without_sample_size(dataset):
    effect = estimate(dataset, WeightScheme.HT)
    orphan = EffectEstimate(
        tau=effect.tau, xi=effect.xi, scheme=effect.scheme, n=0, omega=effect.omega, sigma=np.eye(2),
    )
    assert orphan.se_tau is None and orphan.se_xi is None
    assert effect.with_covariance(np.eye(2)).se_tau == pytest.approx(1 / math.sqrt(dataset.n))


class TestCausalDataset:
    def test_angles_canonicalised(self):
        ds = CausalDataset.from_arrays([1, 0], np.ones((2, 1)), [-0.5, 7.0])
        np.testing.assert_allclose(ds.theta, [TWO_PI - 0.5, 7.0 - TWO_PI])
        assert ds.n == 2 and ds.n_treated == 1

    def test_single_arm(self):
        with pytest.raises(SingleArmError):
            CausalDataset.from_arrays([1, 1, 1], np.ones((3, 1)), [0.1, 0.2, 0.3])

    def test_shape_mismatch(self):
        with pytest.raises(DomainError):
            CausalDataset.from_arrays([1, 0, 1], np.ones((2, 1)), [0.1, 0.2, 0.3])

    def test_non_binary_treatment(self):
        with pytest.raises(DomainError):
            CausalDataset.from_arrays([1, 0, 0.5], np.ones((3, 1)), [0.1, 0.2, 0.3])

    def test_propensities_must_be_interior(self, dataset):
        p = np.full(dataset.n, 0.5)
        p[0] = 1.0
        with pytest.raises(DomainError):
            estimate_omega(dataset, p, WeightScheme.HT)
