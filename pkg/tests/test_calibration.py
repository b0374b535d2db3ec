"""Order-statistic limits, run-length theory, and the bootstrap.

arl0_series is checked against two independent routes: brute-force
summation of the first-alarm pmf, and a closed-form partial sum obtained
by telescoping t * pmf(t) (verified against the brute force below).
"""

import math

import numpy as np
import pytest
from scipy.special import gammaln

from profmon import (
    BootstrapPlan,
    GaussianModel,
    InfiniteRunLengthError,
    InsufficientSamplesError,
    InvalidOrderIndexError,
    OrderStatChart,
    arl0_exact,
    arl0_series,
    bootstrap_calibrate,
    calibration_report,
    estimate_moments,
    first_alarm_pmf,
    geometric_limit_check,
    no_alarm_prob,
    order_index,
    order_stat_limit,
    sample,
    score_profiles,
    simulate_run_lengths,
    willemain_sd,
)
from profmon._backend import kernels


def closed_partial_sum(m: int, k: int, horizon: int) -> float:
    """Closed form of sum_{t<=T} t*pmf(t), derived by telescoping."""
    log_tail = gammaln(m + 1) - gammaln(m - k + 1) + gammaln(horizon + m - k + 1) - gammaln(horizon + m + 1)
    return m / (k - 1) - math.exp(log_tail) * (k * horizon + m) / (k - 1)


class TestOrderIndex:
    def test_frozen_examples(self):
        assert order_index(400, 200) == 3
        assert order_index(200, 200) == 2
        assert order_index(2000, 200) == 11

    def test_non_integer_k_rejected(self):
        with pytest.raises(InvalidOrderIndexError, match="1.5"):
            order_index(200, 400)

    def test_k_must_stay_below_m(self):
        with pytest.raises(InvalidOrderIndexError):
            order_index(2, 1)


class TestArl0Exact:
    def test_frozen_values(self):
        assert arl0_exact(200, 2) == 200.0
        assert arl0_exact(400, 3) == 200.0
        assert arl0_exact(2000, 11) == 200.0
        assert arl0_exact(9, 5) == 2.25

    def test_k_one_is_infinite(self):
        with pytest.raises(InfiniteRunLengthError):
            arl0_exact(200, 1)

    def test_range_validation(self):
        with pytest.raises(InvalidOrderIndexError):
            arl0_exact(5, 5)
        with pytest.raises(InvalidOrderIndexError):
            arl0_exact(5, 0)


class TestOrderStatLimit:
    def test_small_example(self):
        chart = order_stat_limit([5.0, 1.0, 3.0, 2.0, 4.0], arl0=5)
        assert chart.k == 2
        assert chart.limit == 2.0
        assert chart.m == 5
        assert chart.arl0 == 5.0
        np.testing.assert_array_equal(chart.alarms([1.5, 2.0, 2.5]), [True, False, False])

    def test_ties_are_separated(self):
        scores = [1.0, 1.0, 1.0, 2.0, 3.0, 4.0]
        chart = order_stat_limit(scores, arl0=3)
        assert np.all(np.diff(chart.reference) > 0)
        # exactly k-1 reference scores strictly below the limit
        assert int(np.sum(chart.reference < chart.limit)) == chart.k - 1

    def test_exactly_k_minus_one_below(self, rng):
        for _ in range(20):
            scores = rng.standard_normal(60)
            chart = order_stat_limit(scores, arl0=20)
            assert int(np.sum(chart.reference < chart.limit)) == chart.k - 1

    def test_non_integer_target_rejected(self):
        with pytest.raises(InvalidOrderIndexError):
            order_stat_limit(np.arange(10.0), arl0=3)

    def test_chart_validation(self):
        with pytest.raises(ValueError):
            OrderStatChart(reference=np.array([3.0, 2.0, 1.0, 0.5]), k=2, limit=2.0)


class TestRunLengthTheory:
    def test_no_alarm_frozen(self):
        assert no_alarm_prob(9, 5, 0) == pytest.approx(1.0, abs=1e-14)
        assert no_alarm_prob(9, 5, 1) == pytest.approx(0.5, rel=1e-12)
        assert no_alarm_prob(200, 2, 200) == pytest.approx(19900.0 / 79800.0, rel=1e-10)

    def test_no_alarm_array(self):
        out = no_alarm_prob(50, 3, np.array([0, 1, 10]))
        assert out.shape == (3,)
        assert out[0] == pytest.approx(1.0)
        assert np.all(np.diff(out) < 0)

    def test_pmf_frozen(self):
        assert first_alarm_pmf(9, 5, 1) == pytest.approx(0.5, rel=1e-12)
        # first step alarms with probability k/(m+1)
        for m, k in [(50, 2), (200, 11), (999, 100)]:
            assert first_alarm_pmf(m, k, 1) == pytest.approx(k / (m + 1), rel=1e-11)

    def test_pmf_telescopes_against_no_alarm(self):
        t = np.arange(1, 201)
        for m, k in [(50, 3), (200, 2), (200, 11), (1000, 6)]:
            pmf = first_alarm_pmf(m, k, t)
            surv = no_alarm_prob(m, k, t)
            surv_prev = no_alarm_prob(m, k, t - 1)
            np.testing.assert_allclose(pmf, surv_prev - surv, rtol=1e-12)

    def test_pmf_recurrence_ratio(self):
        t = np.arange(1, 500, dtype=np.float64)
        for m, k in [(50, 3), (400, 5)]:
            pmf = first_alarm_pmf(m, k, np.arange(1, 501))
            np.testing.assert_allclose(pmf[1:] / pmf[:-1], (t + m - k) / (t + m + 1), rtol=1e-11)

    def test_pmf_mass_accounts_for_survival(self):
        m, k, horizon = 200, 2, 100_000
        total = 0.0
        for start in range(1, horizon + 1, 10**6):
            t = np.arange(start, min(start + 10**6, horizon + 1))
            total += float(first_alarm_pmf(m, k, t).sum())
        assert total + no_alarm_prob(m, k, horizon) == pytest.approx(1.0, abs=1e-9)

    def test_dependence_of_successive_steps(self):
        """Alarm events at successive steps are positively dependent:
        P(W=2) < P(alarm at 1) * P(no alarm at... the independence value."""
        m, k = 200, 2
        p1 = k / (m + 1)
        exact = first_alarm_pmf(m, k, 2)
        independent = (1 - p1) * p1
        assert exact == pytest.approx(p1 * (m - k + 1) / (m + 2), rel=1e-11)
        assert exact < independent

    def test_series_frozen_single_term(self):
        assert arl0_series(9, 5, 1) == pytest.approx(0.5, rel=1e-13)

    def test_series_against_brute_force(self):
        for m, k, horizon in [(50, 6, 2_000), (200, 11, 5_000), (400, 3, 5_000)]:
            t = np.arange(1, horizon + 1)
            brute = float(t @ first_alarm_pmf(m, k, t))
            assert arl0_series(m, k, horizon) == pytest.approx(brute, rel=1e-10)

    def test_series_against_closed_form(self):
        for m, k, horizon in [(50, 6, 10_000), (200, 2, 100_000), (200, 11, 100_000), (400, 3, 2_000_000)]:
            assert arl0_series(m, k, horizon) == pytest.approx(closed_partial_sum(m, k, horizon), rel=1e-9)

    def test_series_converges_to_exact(self):
        assert arl0_series(100, 11, 10**6) == pytest.approx(10.0, rel=1e-6)

    def test_series_k_one_is_infinite(self):
        with pytest.raises(InfiniteRunLengthError):
            arl0_series(200, 1, 1000)


class TestWillemainSd:
    def test_infinite_at_k_two(self):
        assert willemain_sd(200, 2) == math.inf

    def test_frozen_value(self):
        # m=20000, k=101: coverage 19900/20000
        q = 19900.0 / 20000.0
        var = (q / (1 - q) ** 2) * ((1 - q + 1 / 20000.0) / (1 - q - 1 / 20000.0))
        assert willemain_sd(20000, 101) == pytest.approx(math.sqrt(var), rel=1e-12)
        assert willemain_sd(20000, 101) == pytest.approx(201.5, abs=0.1)

    def test_exceeds_geometric_sd(self):
        for m, arl0 in [(400, 200), (2000, 200), (20000, 200)]:
            k = order_index(m, arl0)
            if k <= 2:
                continue
            geo = math.sqrt(arl0 * (arl0 - 1.0))
            assert willemain_sd(m, k) > geo


class TestSimulatedRunLengths:
    def test_mean_matches_theory(self, rng):
        rl = simulate_run_lengths(400, 3, 3000, rng, "uniform")
        se = rl.std(ddof=1) / math.sqrt(rl.size)
        assert abs(rl.mean() - 200.0) < 3 * se

    def test_distribution_free_law(self, rng):
        from scipy import stats

        a = simulate_run_lengths(200, 5, 4000, rng, "normal")
        b = simulate_run_lengths(200, 5, 4000, rng, "cauchy")
        assert stats.ks_2samp(a, b).pvalue > 1e-3

    def test_deterministic(self):
        a = simulate_run_lengths(100, 3, 200, np.random.default_rng(5), "t2")
        b = simulate_run_lengths(100, 3, 200, np.random.default_rng(5), "t2")
        np.testing.assert_array_equal(a, b)

    def test_unknown_distribution(self, rng):
        with pytest.raises(ValueError, match="unknown distribution"):
            simulate_run_lengths(100, 3, 10, rng, "lognormal")


class TestGeometricLimitCheck:
    def test_summary_fields(self, rng):
        s = geometric_limit_check(400, 200, 2000, rng, distribution="uniform")
        assert s.k == 3
        assert s.m == 400
        assert s.target_arl0 == 200.0
        assert abs(s.sample_arl - 200.0) < 3 * s.arl_se
        assert s.geometric_sd == pytest.approx(math.sqrt(200.0 * 199.0), rel=1e-12)
        assert s.willemain_sd > s.geometric_sd
        assert 0.0 <= s.chi2_pvalue <= 1.0

    def test_m_equals_arl0(self, rng):
        s = geometric_limit_check(100, 100, 1500, rng, distribution="normal")
        assert s.k == 2
        assert abs(s.sample_arl - 100.0) < 3 * s.arl_se
        assert s.willemain_sd == math.inf


class TestBootstrapPlan:
    def test_frozen_sizes(self):
        plan = BootstrapPlan(m_star=500, b1=100, b2=5, arl0=1000)
        assert plan.b2_arl == 5000
        assert plan.m_prime == 500_000
        assert plan.limit_index == 501

    def test_validation(self):
        with pytest.raises(ValueError):
            BootstrapPlan(m_star=0, b1=1, b2=1, arl0=10)
        with pytest.raises(ValueError):
            BootstrapPlan(m_star=5, b1=1, b2=1, arl0=10, inner_size=1)


class TestBootstrapCalibrate:
    def _historical(self, rng, m=120, n=4):
        cov = 0.4 * np.ones((n, n)) + 0.6 * np.eye(n)
        model = GaussianModel(np.linspace(-1, 1, n), cov)
        return model, sample(model, m, rng)

    def test_shapes_and_limit_index(self, rng):
        _, hist = self._historical(rng)
        plan = BootstrapPlan(m_star=60, b1=10, b2=2, arl0=50)
        model, chart = bootstrap_calibrate(hist, plan, "minimum", rng)
        assert chart.m == plan.m_prime == 1000
        assert chart.k == plan.limit_index == 21
        assert model.n_sites == 4
        assert 0.0 < chart.limit < 0.5

    def test_deterministic(self):
        rng = np.random.default_rng(11)
        _, hist = self._historical(rng)
        plan = BootstrapPlan(m_star=60, b1=5, b2=1, arl0=40)
        _, c1 = bootstrap_calibrate(hist.copy(), plan, "geometric_mean", np.random.default_rng(3))
        _, c2 = bootstrap_calibrate(hist.copy(), plan, "geometric_mean", np.random.default_rng(3))
        assert c1.limit == c2.limit
        np.testing.assert_array_equal(c1.reference, c2.reference)

    def test_split_validation(self, rng):
        _, hist = self._historical(rng, m=50)
        with pytest.raises(InsufficientSamplesError):
            bootstrap_calibrate(hist, BootstrapPlan(m_star=50, b1=2, b2=1, arl0=10), "minimum", rng)
        with pytest.raises(InsufficientSamplesError):
            bootstrap_calibrate(hist, BootstrapPlan(m_star=47, b1=2, b2=1, arl0=10), "minimum", rng)

    def test_degenerate_historical(self, rng):
        hist = np.ones((80, 3))
        plan = BootstrapPlan(m_star=40, b1=2, b2=1, arl0=10)
        with pytest.raises(Exception) as exc_info:
            bootstrap_calibrate(hist, plan, "minimum", rng)
        assert "positive" in str(exc_info.value) or "Singular" in type(exc_info.value).__name__

    def test_calibrated_chart_holds_rate_under_truth(self, rng):
        """In-control run lengths under a chart calibrated from the true
        process should average near the target ARL."""
        truth, hist = self._historical(rng, m=400)
        plan = BootstrapPlan(m_star=200, b1=40, b2=2, arl0=50)
        model, chart = bootstrap_calibrate(hist, plan, "minimum", rng)
        reps, lengths = 400, []
        for _ in range(reps):
            scores = score_profiles(model, sample(truth, 450, rng), "minimum")
            hit = kernels.first_below(scores, chart.limit)
            lengths.append(hit + 1 if hit >= 0 else 450)
        mean = float(np.mean(lengths))
        assert 25.0 < mean < 100.0

    def test_report_schema(self, rng):
        _, hist = self._historical(rng)
        plan = BootstrapPlan(m_star=60, b1=10, b2=2, arl0=50)
        _, chart = bootstrap_calibrate(hist, plan, "minimum", rng)
        report = calibration_report(120, plan, "minimum", chart)
        assert set(report) == {"m", "m_star", "b1", "b2", "arl0", "rule", "limit", "score_quantiles"}
        assert report["m"] == 120
        assert report["rule"] == "minimum"
        assert report["limit"] == chart.limit
        assert report["score_quantiles"]["0.5"] == pytest.approx(np.quantile(chart.reference, 0.5))
