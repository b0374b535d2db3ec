"""Moment estimation, conditional laws, and sampling.

The conditional-law oracle is the classical partitioned-covariance
formula, evaluated here independently of the precision-matrix route the
implementation uses.
"""

import numpy as np
import pytest
from scipy import linalg

from profmon import (
    GaussianModel,
    InsufficientSamplesError,
    ProfileSample,
    SingularCovarianceError,
    conditional_law,
    estimate_moments,
    sample,
)

from conftest import random_spd


def schur_conditional(mean, cov, values, site):
    """Partitioned-covariance conditional law: the dual route."""
    n = mean.size
    rest = [i for i in range(n) if i != site]
    s_jr = cov[site, rest]
    s_rr = cov[np.ix_(rest, rest)]
    w = linalg.solve(s_rr, values[rest] - mean[rest], assume_a="pos")
    cond_mean = mean[site] + s_jr @ w
    cond_var = cov[site, site] - s_jr @ linalg.solve(s_rr, s_jr, assume_a="pos")
    return float(cond_mean), float(cond_var)


class TestEstimateMoments:
    def test_hand_example(self):
        pts = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [2.0, 2.0]])
        model = estimate_moments(pts)
        np.testing.assert_allclose(model.mean, [1.0, 1.0], atol=1e-14)
        np.testing.assert_allclose(model.covariance, [[4.0 / 3.0, 0.0], [0.0, 4.0 / 3.0]], atol=1e-14)

    def test_accepts_profile_samples(self):
        profs = [ProfileSample(values=np.array([0.0, 1.0])), ProfileSample(values=np.array([1.0, 0.0])),
                 ProfileSample(values=np.array([2.0, 2.0])), ProfileSample(values=np.array([3.0, 1.0]))]
        model = estimate_moments(profs)
        assert model.n_sites == 2

    def test_too_few_profiles(self):
        with pytest.raises(InsufficientSamplesError):
            estimate_moments(np.zeros((3, 3)) + np.eye(3))
        with pytest.raises(InsufficientSamplesError):
            estimate_moments([])

    def test_identical_profiles_are_singular(self):
        pts = np.ones((10, 3))
        with pytest.raises(SingularCovarianceError):
            estimate_moments(pts)

    def test_recovers_population(self, rng):
        n = 10
        truth = GaussianModel(np.zeros(n), np.eye(n))
        draws = sample(truth, 100_000, rng)
        model = estimate_moments(draws)
        np.testing.assert_allclose(model.mean, truth.mean, atol=0.02)
        np.testing.assert_allclose(model.covariance, truth.covariance, atol=0.05)


class TestGaussianModel:
    def test_needs_two_sites(self):
        with pytest.raises(ValueError):
            GaussianModel([0.0], [[1.0]])

    def test_rejects_asymmetry_above_tolerance(self):
        cov = np.eye(2)
        cov[0, 1] = 1e-9
        with pytest.raises(ValueError, match="asymmetry"):
            GaussianModel([0.0, 0.0], cov)

    def test_symmetrizes_below_tolerance(self):
        cov = np.eye(2)
        cov[0, 1] = 4e-11
        model = GaussianModel([0.0, 0.0], cov)
        np.testing.assert_array_equal(model.covariance, model.covariance.T)

    def test_jitter_rescues_rank_deficiency(self):
        v = np.array([1.0, 2.0, 3.0])
        model = GaussianModel(np.zeros(3), np.outer(v, v))
        assert model.jitter > 0
        assert np.all(np.diag(model.precision) > 0)

    def test_zero_covariance_is_singular(self):
        with pytest.raises(SingularCovarianceError):
            GaussianModel([0.0, 0.0], np.zeros((2, 2)))

    def test_immutable(self):
        model = GaussianModel([0.0, 0.0], np.eye(2))
        with pytest.raises(AttributeError):
            model.mean = np.zeros(2)
        with pytest.raises(ValueError):
            model.covariance[0, 0] = 5.0


class TestConditionalLaw:
    def test_bivariate_frozen_example(self):
        model = GaussianModel([0.0, 0.0], [[1.0, 0.8], [0.8, 1.0]])
        law = conditional_law(model, np.array([0.0, 1.0]), 0)
        assert law.site == 0
        assert law.cond_mean == pytest.approx(0.8, abs=1e-12)
        assert law.cond_var == pytest.approx(0.36, abs=1e-12)

    def test_bivariate_closed_form(self, rng):
        for _ in range(50):
            cov = random_spd(rng, 2)
            mean = rng.standard_normal(2)
            y = rng.standard_normal(2) * 2.0
            model = GaussianModel(mean, cov)
            for site in (0, 1):
                other = 1 - site
                rho_term = cov[site, other] / cov[other, other]
                want_mean = mean[site] + rho_term * (y[other] - mean[other])
                want_var = cov[site, site] - cov[site, other] ** 2 / cov[other, other]
                law = conditional_law(model, y, site)
                assert law.cond_mean == pytest.approx(want_mean, rel=1e-10, abs=1e-12)
                assert law.cond_var == pytest.approx(want_var, rel=1e-10)

    def test_schur_dual_route(self, rng):
        for n in (4, 8, 12):
            cov = random_spd(rng, n)
            mean = rng.standard_normal(n)
            model = GaussianModel(mean, cov)
            y = sample(model, 1, rng)[0]
            for site in range(n):
                want_mean, want_var = schur_conditional(mean, model.covariance, y, site)
                law = conditional_law(model, y, site)
                assert law.cond_mean == pytest.approx(want_mean, rel=1e-8, abs=1e-10)
                assert law.cond_var == pytest.approx(want_var, rel=1e-8)

    def test_cond_var_never_exceeds_marginal(self, rng):
        for _ in range(20):
            n = int(rng.integers(2, 9))
            cov = random_spd(rng, n)
            model = GaussianModel(np.zeros(n), cov)
            for site in range(n):
                law = conditional_law(model, np.zeros(n), site)
                assert law.cond_var <= cov[site, site] * (1 + 1e-10)
                assert law.cond_var > 0

    def test_permutation_equivariance(self, rng):
        n = 6
        cov = random_spd(rng, n)
        mean = rng.standard_normal(n)
        model = GaussianModel(mean, cov)
        y = rng.standard_normal(n)
        for _ in range(10):
            perm = rng.permutation(n)
            pmodel = GaussianModel(mean[perm], cov[np.ix_(perm, perm)])
            for site in range(n):
                base = conditional_law(model, y, perm[site])
                moved = conditional_law(pmodel, y[perm], site)
                assert moved.cond_mean == pytest.approx(base.cond_mean, rel=1e-10, abs=1e-12)
                assert moved.cond_var == pytest.approx(base.cond_var, rel=1e-10)

    def test_standardized_residuals_are_standard_normal(self, rng):
        """Under the true model every site's conditional z-score is N(0,1)."""
        n = 5
        cov = random_spd(rng, n)
        model = GaussianModel(rng.standard_normal(n), cov)
        draws = sample(model, 200_000, rng)
        z = model.standardized_residuals(draws)
        np.testing.assert_allclose(z.mean(axis=0), np.zeros(n), atol=0.012)
        np.testing.assert_allclose(z.var(axis=0), np.ones(n), atol=0.02)

    def test_site_out_of_range(self):
        model = GaussianModel([0.0, 0.0], np.eye(2))
        with pytest.raises(IndexError):
            conditional_law(model, np.zeros(2), 2)


class TestSample:
    def test_round_trip_moments(self, rng):
        n = 10
        cov = random_spd(rng, n)
        mean = rng.standard_normal(n)
        model = GaussianModel(mean, cov)
        draws = sample(model, 1_000_000, rng)
        refit = estimate_moments(draws)
        np.testing.assert_allclose(refit.mean, mean, atol=0.01)
        np.testing.assert_allclose(refit.covariance, model.covariance, atol=0.02)

    def test_deterministic_given_seed(self):
        model = GaussianModel([1.0, -1.0], [[2.0, 0.5], [0.5, 1.0]])
        a = sample(model, 100, np.random.default_rng(7))
        b = sample(model, 100, np.random.default_rng(7))
        np.testing.assert_array_equal(a, b)

    def test_degenerate_concentration(self, rng):
        model = GaussianModel([3.0, 3.0], 1e-12 * np.eye(2))
        draws = sample(model, 1000, rng)
        assert np.all(np.abs(draws - 3.0) < 1e-3)

    def test_count_validation(self, rng):
        model = GaussianModel([0.0, 0.0], np.eye(2))
        with pytest.raises(ValueError):
            sample(model, 0, rng)


class TestProfileSample:
    def test_validation(self):
        with pytest.raises(ValueError):
            ProfileSample(values=np.array([1.0, np.nan]))
        with pytest.raises(ValueError):
            ProfileSample(values=np.zeros((2, 2)))
        with pytest.raises(ValueError):
            ProfileSample(values=np.array([1.0]), time_index=-1)

    def test_values_read_only(self):
        p = ProfileSample(values=np.array([1.0, 2.0]), time_index=3)
        with pytest.raises(ValueError):
            p.values[0] = 9.0
        assert p.time_index == 3
