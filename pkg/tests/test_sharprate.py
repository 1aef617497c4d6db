import math

import numpy as np
import pytest
from scipy.stats import binom as scipy_binom

from wassmooth.measures import DiscreteMeasure, sharp_rate_measure, stream_rng
from wassmooth.numerics import normal_cdf
from wassmooth.sharprate import (
    C0,
    C1,
    V0,
    EpsilonAudit,
    binomial_event_prob,
    binomial_threshold,
    epsilon_vs_rate_audit,
    lower_bound_experiment,
    mass_smoothed_interval,
    paper_lower_bound,
    sharp_quantities,
    step2_margins,
)


class TestConstants:
    def test_c0_from_normal_cdf(self):
        assert C0 == pytest.approx((1.0 - normal_cdf(0.5)) / 2.0)
        assert C0 == pytest.approx(0.154269, abs=1e-6)

    def test_c1(self):
        assert C1 == pytest.approx(math.sqrt(3.0) / 4.0)

    def test_v0_from_berry_esseen(self):
        assert V0 == 10
        assert V0 == math.ceil((0.4748 / C0) ** 2)


class TestSharpQuantities:
    def test_n_2_16(self):
        q = sharp_quantities(2 ** 16)
        assert (q.l_n, q.k_n, q.x_n, q.r_n) == (16.0, 4, 16.0, 2.0)
        assert q.w_n == 2.0 ** -17

    def test_n_2_20(self):
        q = sharp_quantities(2 ** 20)
        assert (q.l_n, q.k_n, q.w_n) == (20.0, 4, 2.0 ** -17)
        assert q.n * q.w_n == pytest.approx(8.0)

    def test_sandwich_invariant(self):
        ns = np.unique(np.geomspace(16, 2 ** 30, 100).astype(np.int64))
        for n in ns:
            q = sharp_quantities(int(n))
            assert q.l_n / 2.0 <= 2.0 ** q.k_n <= q.l_n
            assert q.r_n == 2.0 ** (q.k_n - 3)
            assert q.w_n == 2.0 ** (-q.k_n ** 2 - 1)

    def test_minimum_n(self):
        with pytest.raises(ValueError):
            sharp_quantities(15)


class TestBinomialEventProb:
    def test_single_trial(self):
        # threshold 0.5 + 0.25 rounds up to 1; P(X >= 1) = 0.5
        out = binomial_event_prob(1, 0.5)
        assert out.exact
        assert float(out) == pytest.approx(0.5, abs=1e-15)

    def test_exact_against_sf_oracle(self):
        # the log-space sum carries ~1e-9 relative error from gammaln
        # cancellation at large n; the oracle (incomplete beta) is sharper
        for n, prob in ((100, 0.5), (1000, 0.02), (2 ** 20, 2.0 ** -17), (77, 0.9)):
            k0 = binomial_threshold(n, prob)
            oracle = float(scipy_binom.sf(k0 - 1, n, prob))
            assert float(binomial_event_prob(n, prob)) == pytest.approx(
                oracle, rel=1e-8)

    def test_exceeds_c0_above_variance_threshold(self):
        out = binomial_event_prob(100, 0.5)  # np(1-p) = 25 >= v_0
        assert float(out) >= C0

    def test_threshold_sweep_against_c0(self):
        rng = np.random.default_rng(55)
        checked = 0
        for _ in range(50):
            n = int(rng.integers(20, 5000))
            prob = float(rng.uniform(0.002, 0.5))
            if n * prob * (1.0 - prob) >= V0:
                assert float(binomial_event_prob(n, prob)) >= C0
                checked += 1
        assert checked >= 10

    def test_exact_vs_monte_carlo_consistency(self):
        n, prob = 10 ** 6, 2.0 ** -17
        exact = float(binomial_event_prob(n, prob))
        rng = stream_rng(99)
        reps = 10 ** 6
        k0 = binomial_threshold(n, prob)
        hits = rng.binomial(n, prob, size=reps) >= k0
        mc = float(hits.mean())
        se = math.sqrt(mc * (1.0 - mc) / reps)
        assert abs(exact - mc) <= 3.0 * se

    def test_fallback_path_reports_stderr(self):
        n = 2 * 10 ** 7
        prob = 1e-6
        out = binomial_event_prob(n, prob, mc_reps=200_000, seed=3)
        assert not out.exact
        assert out.stderr > 0
        oracle = float(scipy_binom.sf(binomial_threshold(n, prob) - 1, n, prob))
        assert abs(float(out) - oracle) <= 4.0 * out.stderr


class TestMassSmoothedInterval:
    def test_single_gaussian(self):
        mu = DiscreteMeasure(points=[[0.0]], weights=[1.0])
        assert mass_smoothed_interval(mu, 1.0, (-1.0, 1.0)) == pytest.approx(
            2.0 * normal_cdf(1.0) - 1.0, rel=1e-13)

    def test_normalization(self):
        mu = DiscreteMeasure(points=[[0.0]], weights=[1.0])
        assert mass_smoothed_interval(mu, 1.0, (-40.0, 40.0)) == pytest.approx(
            1.0, abs=1e-12)

    def test_dimension_guard(self):
        mu = DiscreteMeasure(points=[[0.0, 0.0]], weights=[1.0])
        with pytest.raises(ValueError):
            mass_smoothed_interval(mu, 1.0, (-1.0, 1.0))


@pytest.fixture(scope="module")
def report():
    return lower_bound_experiment(2 ** 20, sigma=0.25, p=1.0, reps=4000,
                                  seed=2024)


class TestLowerBoundExperiment:
    def test_step4_errors_negligible(self, report):
        assert report.errors_ok
        assert report.eps_n == pytest.approx(2.0 * (1.0 - normal_cdf(8.0)), rel=1e-6)
        assert report.eps_n < 1e-14
        assert report.eps_n + report.delta_n <= (C1 / 4.0) * math.sqrt(
            report.quantities.w_n / report.quantities.n)

    def test_lemma_tail_bound_dominates_exact(self, report):
        assert report.eps_lemma_bound >= report.eps_n
        assert report.delta_lemma_bound >= report.delta_n

    def test_event_frequency_matches_exact_binomial(self, report):
        p_exact = report.exact_event_prob
        se = math.sqrt(p_exact * (1.0 - p_exact) / report.reps)
        assert abs(report.freq_en - p_exact) <= 3.0 * se

    def test_certified_bound_positive_and_comparable(self, report):
        assert report.certified_lb > 0.0
        assert report.paper_lb == pytest.approx(paper_lower_bound(2 ** 20, 1.0))
        assert report.certified_lb >= report.paper_lb / 4.0

    def test_deterministic(self):
        a = lower_bound_experiment(2 ** 16, sigma=0.25, p=1.0, reps=500, seed=7)
        b = lower_bound_experiment(2 ** 16, sigma=0.25, p=1.0, reps=500, seed=7)
        assert a == b


class TestStep2Inequalities:
    def test_margins_nonnegative(self):
        margins, ref_margin = step2_margins(2 ** 12, sigma=0.25, n_clouds=10,
                                            seed=11)
        assert np.all(margins >= 0.0)
        assert ref_margin >= 0.0

    def test_reference_mass_formula(self):
        # mu^sigma(B^(r)) must sit within delta_N of the atom mass w_N
        q = sharp_quantities(2 ** 12)
        ref = sharp_rate_measure(1, 26)
        mass = mass_smoothed_interval(
            ref, 0.25, (q.x_n - 2 * q.r_n, q.x_n + 2 * q.r_n))
        delta = 2.0 * (1.0 - normal_cdf(2.0 * q.r_n / 0.25))
        assert q.w_n <= mass + 1e-18
        assert mass <= q.w_n + delta


@pytest.fixture(scope="module")
def audit() -> EpsilonAudit:
    grid = [2 ** k for k in range(8, 61, 2)]
    return epsilon_vs_rate_audit(1.0, 0.5, grid)


class TestEpsilonAudit:
    def test_symbolic_threshold(self, audit):
        assert audit.first_symbolic_ok == 2 ** 16

    def test_factor_dominates_on_grid(self, audit):
        assert audit.first_factor_ok == 2 ** 8  # direct inequality holds early
        for row in audit.rows:
            if row.n >= 2 ** 16:
                assert row.factor_ok

    def test_factor_bounded_by_pure_power(self):
        for n in (2 ** 8, 2 ** 16, 2 ** 40):
            q = sharp_quantities(n)
            factor = 2.0 ** (q.k_n * 1.0 - q.k_n ** 2 / 2.0)
            assert factor <= 2.0 ** q.k_n

    def test_step6_conclusion_rescaled(self, audit):
        # paper_lb * N^(1/2 + eps) >= C from the first stable grid point on
        c_const = (C1 * C0 / 2.0) * 2.0 ** (-3.0 - 0.5)
        for row in audit.rows:
            if row.n >= audit.first_factor_ok:
                scaled = paper_lower_bound(row.n, 1.0) * row.n ** (0.5 + 0.5)
                assert scaled >= c_const * (1.0 - 1e-12)
