"""Conjugate updates, incremental statistics and the Student-t predictive.

Expected log-density values were frozen from numerical integration of the
explicit normal-times-NIW marginal (tools/compute_niw_oracles.py): nested
quadrature over (mean, variance) in one dimension, Bartlett-coordinate
Gauss-Legendre integration over the covariance in two.
"""

import math

import numpy as np
import pytest
from scipy import stats
from scipy.integrate import quad

from repdensity import (ComponentStats, NIWParams, NumericalError,
                        ParameterError, ValidationError, add_observation,
                        log_predictive, posterior_update, remove_observation,
                        sample_predictive)
from repdensity.errors import UnderflowError_
from repdensity.niw import studentt_params


@pytest.fixture
def prior_1d():
    return NIWParams(mu0=np.zeros(1), kappa0=1.0, nu0=3.0, psi0=[[2.0]])


@pytest.fixture
def prior_2d():
    return NIWParams(mu0=np.zeros(2), kappa0=1.5, nu0=4.0,
                     psi0=[[2.0, 0.5], [0.5, 1.5]])


class TestNIWParams:
    def test_rejects_non_positive_kappa(self):
        with pytest.raises(ParameterError):
            NIWParams(mu0=np.zeros(2), kappa0=0.0, nu0=4.0, psi0=np.eye(2))

    def test_rejects_small_dof(self):
        with pytest.raises(ParameterError):
            NIWParams(mu0=np.zeros(3), kappa0=1.0, nu0=1.5, psi0=np.eye(3))

    def test_rejects_indefinite_scale(self):
        with pytest.raises(ParameterError):
            NIWParams(mu0=np.zeros(2), kappa0=1.0, nu0=4.0,
                      psi0=[[1.0, 2.0], [2.0, 1.0]])


class TestPosteriorUpdate:
    def test_empty_update_returns_prior(self, prior_1d):
        post = posterior_update(prior_1d, np.empty((0, 1)))
        assert post is prior_1d

    def test_hand_case_d1(self, prior_1d):
        post = posterior_update(prior_1d, [[1.0], [3.0]])
        assert post.kappa0 == pytest.approx(3.0)
        assert post.nu0 == pytest.approx(5.0)
        assert post.mu0[0] == pytest.approx(4.0 / 3.0)
        assert post.psi0[0, 0] == pytest.approx(20.0 / 3.0)

    def test_order_invariance(self, prior_2d):
        rng = np.random.default_rng(0)
        obs = rng.standard_normal((17, 2))
        base = posterior_update(prior_2d, obs)
        for seed in range(3):
            perm = np.random.default_rng(seed).permutation(17)
            other = posterior_update(prior_2d, obs[perm])
            np.testing.assert_allclose(other.mu0, base.mu0, atol=1e-12)
            np.testing.assert_allclose(other.psi0, base.psi0, atol=1e-10)

    def test_dimension_mismatch(self, prior_2d):
        with pytest.raises(ParameterError):
            posterior_update(prior_2d, np.ones((4, 3)))


class TestIncrementalStats:
    def test_add_then_remove_is_identity(self, prior_2d):
        rng = np.random.default_rng(1)
        stats_ = ComponentStats.from_data(prior_2d, rng.standard_normal((6, 2)))
        before = stats_.copy()
        x = rng.standard_normal(2)
        add_observation(stats_, x, prior_2d)
        remove_observation(stats_, x, prior_2d)
        assert stats_.count == before.count
        np.testing.assert_allclose(stats_.sum, before.sum, atol=1e-10)
        np.testing.assert_allclose(stats_.chol_psi, before.chol_psi,
                                   atol=1e-8)

    def test_add_twice_matches_batch(self, prior_2d):
        x = np.array([0.7, -1.2])
        stats_ = ComponentStats.empty(prior_2d)
        add_observation(stats_, x, prior_2d)
        add_observation(stats_, x, prior_2d)
        batch = posterior_update(prior_2d, np.stack([x, x]))
        assert stats_.count == 2
        np.testing.assert_allclose(stats_.sum / 2, x, atol=1e-12)
        np.testing.assert_allclose(stats_.chol_psi @ stats_.chol_psi.T,
                                   batch.psi0, atol=1e-8)

    def test_incremental_matches_batch_over_100_points(self, prior_2d):
        rng = np.random.default_rng(2)
        stats_ = ComponentStats.empty(prior_2d)
        pts = rng.standard_normal((100, 2)) * 2.0 + 1.0
        for x in pts:
            add_observation(stats_, x, prior_2d)
        batch = posterior_update(prior_2d, pts)
        incr = stats_.chol_psi @ stats_.chol_psi.T
        err = np.linalg.norm(incr - batch.psi0) / np.linalg.norm(batch.psi0)
        assert err < 1e-6

    def test_remove_only_observation_restores_prior(self, prior_2d):
        stats_ = ComponentStats.empty(prior_2d)
        x = np.array([3.0, -2.0])
        add_observation(stats_, x, prior_2d)
        remove_observation(stats_, x, prior_2d)
        assert stats_.count == 0
        np.testing.assert_allclose(stats_.chol_psi, prior_2d.chol_psi0,
                                   atol=1e-8)

    def test_add_pair_remove_one(self, prior_1d):
        a, b = np.array([1.5]), np.array([-0.5])
        stats_ = ComponentStats.empty(prior_1d)
        add_observation(stats_, a, prior_1d)
        add_observation(stats_, b, prior_1d)
        remove_observation(stats_, a, prior_1d)
        only_b = ComponentStats.empty(prior_1d)
        add_observation(only_b, b, prior_1d)
        np.testing.assert_allclose(stats_.chol_psi, only_b.chol_psi,
                                   atol=1e-8)
        np.testing.assert_allclose(stats_.sum, only_b.sum, atol=1e-10)

    def test_random_add_remove_walk_returns_to_prior(self, prior_2d):
        rng = np.random.default_rng(3)
        stats_ = ComponentStats.empty(prior_2d)
        stack = []
        for _ in range(50):
            x = rng.standard_normal(2) * 3.0
            stack.append(x)
            add_observation(stats_, x, prior_2d)
        rng.shuffle(stack)
        for x in stack:
            remove_observation(stats_, x, prior_2d)
        assert stats_.count == 0
        np.testing.assert_allclose(stats_.sum, 0.0, atol=1e-9)
        np.testing.assert_allclose(
            stats_.chol_psi @ stats_.chol_psi.T, prior_2d.psi0, atol=1e-6)

    def test_remove_from_empty_raises(self, prior_1d):
        with pytest.raises(UnderflowError_):
            remove_observation(ComponentStats.empty(prior_1d),
                               np.zeros(1), prior_1d)

    def test_failed_downdate_raises_and_preserves(self, prior_1d):
        stats_ = ComponentStats.empty(prior_1d)
        add_observation(stats_, np.array([1.0]), prior_1d)
        before = stats_.copy()
        # removing a point that was never added destroys definiteness
        with pytest.raises(NumericalError):
            remove_observation(stats_, np.array([50.0]), prior_1d)
        np.testing.assert_allclose(stats_.chol_psi, before.chol_psi)
        assert stats_.count == before.count

    def test_non_finite_observation_rejected(self, prior_1d):
        with pytest.raises(ValidationError):
            add_observation(ComponentStats.empty(prior_1d),
                            np.array([np.nan]), prior_1d)


class TestLogPredictive:
    # frozen oracle values from tools/compute_niw_oracles.py
    ORACLE_1D_PRIOR = [(0.0, -1.144729885849), (1.0, -1.591016988478),
                       (-2.5, -3.026696574778)]
    ORACLE_1D_DATA = [(0.0, -1.803266331888), (2.0, -1.402672154015)]
    ORACLE_2D_PRIOR = [((0.0, 0.0), -1.7558908573),
                       ((1.0, -0.5), -2.8441860355)]
    ORACLE_2D_DATA = [((0.0, 0.0), -2.3182714624),
                      ((1.5, 1.0), -2.2695453918)]

    def test_matches_integration_oracle_1d_prior(self, prior_1d):
        stats_ = ComponentStats.empty(prior_1d)
        for x, expected in self.ORACLE_1D_PRIOR:
            got = log_predictive(stats_, prior_1d, np.array([x]))
            assert got == pytest.approx(expected, abs=1e-6)

    def test_matches_integration_oracle_1d_posterior(self, prior_1d):
        stats_ = ComponentStats.from_data(prior_1d, [[1.0], [3.0]])
        for x, expected in self.ORACLE_1D_DATA:
            got = log_predictive(stats_, prior_1d, np.array([x]))
            assert got == pytest.approx(expected, abs=1e-6)

    def test_matches_integration_oracle_2d(self, prior_2d):
        stats_ = ComponentStats.empty(prior_2d)
        for x, expected in self.ORACLE_2D_PRIOR:
            got = log_predictive(stats_, prior_2d, np.array(x))
            assert got == pytest.approx(expected, abs=1e-4)
        stats_ = ComponentStats.from_data(
            prior_2d, [[1.0, 0.0], [2.0, 1.0], [0.0, 2.0]])
        for x, expected in self.ORACLE_2D_DATA:
            got = log_predictive(stats_, prior_2d, np.array(x))
            assert got == pytest.approx(expected, abs=1e-4)

    def test_prior_case_is_student_t(self, prior_1d):
        # dof 3, location 0, squared scale psi0 (kappa0+1)/(kappa0 dof) = 4/3
        stats_ = ComponentStats.empty(prior_1d)
        got = log_predictive(stats_, prior_1d, np.array([0.0]))
        assert math.exp(got) == pytest.approx(0.31831, abs=1e-5)

    def test_elliptical_symmetry(self, prior_1d):
        stats_ = ComponentStats.from_data(prior_1d, [[1.0], [3.0]])
        dof, loc, _, _ = studentt_params(stats_, prior_1d)
        for delta in (0.3, 1.7, 4.0):
            hi = log_predictive(stats_, prior_1d, loc + delta)
            lo = log_predictive(stats_, prior_1d, loc - delta)
            assert hi == pytest.approx(lo, abs=1e-12)

    def test_density_integrates_to_one(self, prior_1d):
        stats_ = ComponentStats.from_data(prior_1d, [[1.0], [3.0]])
        val, _ = quad(lambda x: math.exp(
            log_predictive(stats_, prior_1d, np.array([x]))), -50, 50,
            limit=200)
        assert val == pytest.approx(1.0, abs=1e-4)

    def test_concentrated_data_moves_mode(self, prior_1d):
        # location shrinks toward mu0 by kappa0/(kappa0+n); vanishes as n grows
        gaps = []
        for n in (100, 1000, 10000):
            pts = np.full((n, 1), 6.0) + np.random.default_rng(4).normal(
                0, 1e-3, size=(n, 1))
            stats_ = ComponentStats.from_data(prior_1d, pts)
            _, loc, _, _ = studentt_params(stats_, prior_1d)
            gaps.append(abs(loc[0] - 6.0))
        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps[2] < 0.002

    def test_finite_for_extreme_inputs(self, prior_2d):
        stats_ = ComponentStats.empty(prior_2d)
        assert np.isfinite(log_predictive(stats_, prior_2d,
                                          np.array([1e8, -1e8])))


class TestSamplePredictive:
    def test_median_near_location(self, prior_1d):
        rng = np.random.default_rng(5)
        stats_ = ComponentStats.empty(prior_1d)
        draws = np.array([sample_predictive(stats_, prior_1d, rng)[0]
                          for _ in range(100000)])
        assert abs(np.median(draws)) < 0.02

    def test_ks_against_analytic_cdf(self, prior_1d):
        rng = np.random.default_rng(6)
        stats_ = ComponentStats.from_data(prior_1d, [[1.0], [3.0]])
        dof, loc, chol, _ = studentt_params(stats_, prior_1d)
        draws = np.array([sample_predictive(stats_, prior_1d, rng)[0]
                          for _ in range(100000)])
        ks = stats.kstest(draws, stats.t(df=dof, loc=loc[0],
                                         scale=chol[0, 0]).cdf)
        assert ks.statistic < 0.01

    def test_seeded_determinism(self, prior_2d):
        stats_ = ComponentStats.from_data(
            prior_2d, np.random.default_rng(7).standard_normal((5, 2)))
        a = [sample_predictive(stats_, prior_2d,
                               np.random.default_rng(99)) for _ in range(3)]
        b = [sample_predictive(stats_, prior_2d,
                               np.random.default_rng(99)) for _ in range(3)]
        assert np.array_equal(a[0], b[0])
