import math
from fractions import Fraction

import numpy as np
import pytest

from wassmooth.measures import (
    DiscreteMeasure,
    SampleCloud,
    exponential_spec,
    gaussian_spec,
    get_measure,
    load_cloud_csv,
    load_measure_csv,
    moment,
    point_mass_spec,
    sample,
    sample_sharp_rate,
    sharp_moment_series,
    sharp_rate_measure,
    sharp_rate_spec,
    save_cloud_csv,
    save_measure_csv,
    stream_rng,
    zygmund_spec,
)
from wassmooth.numerics import IntegralDivergenceError, tail_integral


class TestDiscreteMeasure:
    def test_weight_sum_enforced(self):
        with pytest.raises(ValueError, match="sum to 1"):
            DiscreteMeasure(points=[[0.0], [1.0]], weights=[0.5, 0.6])

    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError, match="non-negative"):
            DiscreteMeasure(points=[[0.0], [1.0]], weights=[1.5, -0.5])

    def test_duplicate_points_rejected(self):
        with pytest.raises(ValueError, match="distinct"):
            DiscreteMeasure(points=[[1.0], [1.0]], weights=[0.5, 0.5])

    def test_1d_input_promoted(self):
        m = DiscreteMeasure(points=[0.0, 1.0], weights=[0.25, 0.75])
        assert m.dimension == 1
        assert m.points.shape == (2, 1)


class TestStreams:
    def test_same_stream_reproduces(self):
        a = stream_rng(99, 3, 1).random(8)
        b = stream_rng(99, 3, 1).random(8)
        assert np.array_equal(a, b)

    def test_distinct_streams_differ(self):
        a = stream_rng(99, 3, 1).random(8)
        b = stream_rng(99, 3, 2).random(8)
        assert not np.array_equal(a, b)


class TestSample:
    def test_point_mass(self):
        cloud = sample(point_mass_spec(3), 5, seed=11)
        assert cloud.points.shape == (5, 3)
        assert np.all(cloud.points == 0.0)

    def test_bit_identical_reproducibility(self):
        spec = gaussian_spec(2)
        a = sample(spec, 64, seed=5)
        b = sample(spec, 64, seed=5)
        assert np.array_equal(a.points, b.points)
        c = sample(spec, 64, seed=6)
        assert not np.array_equal(a.points, c.points)

    def test_gaussian_clt_width(self):
        n = 100_000
        cloud = sample(gaussian_spec(1), n, seed=1)
        assert abs(float(cloud.points.mean())) <= 4.0 / math.sqrt(n)

    def test_sharp_rate_atom_frequency(self):
        n = 1_000_000
        cloud = sample_sharp_rate(1, n, seed=7)
        frac = float(np.mean(cloud.points[:, 0] == 2.0))
        assert abs(frac - 0.25) <= 4.0 * math.sqrt(0.25 * n) / n

    def test_sharp_rate_support_on_axis(self):
        cloud = sample_sharp_rate(3, 2000, seed=3)
        assert np.all(cloud.points[:, 1:] == 0.0)
        vals = np.abs(cloud.points[:, 0])
        nonzero = vals[vals > 0]
        assert np.allclose(np.log2(nonzero), np.round(np.log2(nonzero)))

    def test_sharp_rate_x2_frequency(self):
        n = 1_000_000
        cloud = sample_sharp_rate(1, n, seed=21)
        w = 2.0 ** -5
        frac = float(np.mean(cloud.points[:, 0] == 4.0))
        assert abs(frac - w) <= 4.0 * math.sqrt(w / n)


class TestMoment:
    def test_two_point_cloud(self):
        cloud = SampleCloud(points=np.array([[-1.0], [1.0]]), seed=0, source="manual")
        assert moment(cloud, 2.0) == pytest.approx(1.0, abs=1e-15)

    def test_gaussian_second_moment_from_tail(self):
        assert moment(gaussian_spec(1), 2.0) == pytest.approx(1.0, rel=1e-7)

    def test_exponential_moments_match_factorials(self):
        spec = exponential_spec()
        for q in (1.0, 2.0, 3.0):
            assert moment(spec, q) == pytest.approx(
                math.gamma(q + 1.0) ** (1.0 / q), rel=1e-7
            )

    def test_sharp_rate_series_oracle(self):
        # partial sums of 2^-(k^2 - 3k), summed until terms < 1e-18
        spec = sharp_rate_spec(1)
        oracle = sharp_moment_series(3.0)
        expected = 0.0
        k = 1
        while True:
            term = 2.0 ** -(k * k - 3 * k)
            expected += term
            if k > 3 and term < 1e-18:
                break
            k += 1
        assert oracle == pytest.approx(expected, rel=1e-15)
        assert moment(spec, 3.0) ** 3 == pytest.approx(expected, rel=1e-6)

    def test_empirical_moment_consistency(self):
        n = 100_000
        for spec in (gaussian_spec(1), exponential_spec()):
            cloud = sample(spec, n, seed=13)
            radii = np.abs(cloud.points[:, 0])
            for q in (1.0, 2.0, 3.0):
                emp_q = radii ** q
                se = float(emp_q.std(ddof=1)) / math.sqrt(n)
                assert abs(float(emp_q.mean()) - moment(spec, q) ** q) <= 5.0 * se


class TestSharpRateMeasure:
    def test_k_max_1(self):
        m = sharp_rate_measure(1, 1)
        assert sorted(m.points[:, 0].tolist()) == [-2.0, 0.0, 2.0]
        lookup = dict(zip(m.points[:, 0].tolist(), m.weights.tolist()))
        assert lookup[0.0] == 0.5
        assert lookup[2.0] == 0.25
        assert lookup[-2.0] == 0.25

    def test_k_max_3_origin_weight(self):
        m = sharp_rate_measure(1, 3)
        origin = float(m.weights[np.argmin(np.abs(m.points[:, 0]))])
        # exact dyadic arithmetic oracle
        expected = 1 - (Fraction(1, 2) + Fraction(1, 16) + Fraction(1, 512))
        assert origin == float(expected) == 0.435546875

    def test_k_max_6_atom_x4(self):
        m = sharp_rate_measure(1, 6)
        idx = int(np.argmin(np.abs(m.points[:, 0] - 16.0)))
        assert m.weights[idx] == 2.0 ** -17

    @pytest.mark.parametrize("k_max", range(1, 8))
    def test_total_mass_exact_dyadic(self, k_max):
        m = sharp_rate_measure(1, k_max)
        total = sum(Fraction(w) for w in m.weights.tolist())
        assert total == 1

    def test_dimension_embedding(self):
        m = sharp_rate_measure(4, 2)
        assert m.points.shape[1] == 4
        assert np.all(m.points[:, 1:] == 0.0)


class TestZygmund:
    def test_tail_at_one(self):
        spec = zygmund_spec(1.0, 1.0)
        expected = min(1.0, math.log(math.e + 1.0) ** -3.0)
        assert spec.tail_fn(1.0) == pytest.approx(expected, rel=1e-14)
        assert expected < 1.0

    def test_critical_moment_finite(self):
        spec = zygmund_spec(1.0, 1.0)
        m1 = moment(spec, 1.0)
        assert math.isfinite(m1) and m1 > 0

    def test_supercritical_moment_diverges(self):
        spec = zygmund_spec(1.0, 1.0)
        tail = spec.tail_fn
        q = 1.5
        with pytest.raises(IntegralDivergenceError):
            tail_integral(lambda t: q * t ** (q - 1.0) * tail(t), 0.0)

    def test_tail_monotone_on_grid(self):
        tail = zygmund_spec(2.0, 0.5).tail_fn
        grid = np.geomspace(1e-6, 1e8, 10_000)
        vals = np.array([tail(float(t)) for t in grid])
        assert np.all(np.diff(vals) <= 1e-15)
        assert vals[0] <= 1.0

    def test_sampler_matches_tail(self):
        spec = zygmund_spec(1.0, 1.0)
        n = 200_000
        cloud = sample(spec, n, seed=17)
        radii = np.abs(cloud.points[:, 0])
        for t in (0.5, 1.0, 3.0, 10.0, 100.0):
            emp = float(np.mean(radii > t))
            expect = spec.tail_fn(t)
            se = math.sqrt(max(expect * (1 - expect), 1e-12) / n)
            assert abs(emp - expect) <= 5.0 * se

    def test_zygmund_functional_finite(self):
        # E[|X|^p log(1+|X|)^alpha] < inf is the defining property
        spec = zygmund_spec(1.0, 1.0)
        tail = spec.tail_fn

        def derivative(t):
            return math.log1p(t) + t / (1.0 + t)

        val = tail_integral(lambda t: derivative(t) * tail(t), 0.0)
        assert math.isfinite(val) and val > 0


class TestCatalog:
    def test_lookup(self):
        assert get_measure("exponential").name == "exponential"
        assert get_measure("gaussian", d=3).dimension == 3
        assert get_measure("zygmund", p=2.0, alpha=0.5).name == "zygmund[p=2,alpha=0.5]"
        with pytest.raises(KeyError):
            get_measure("cauchy")


class TestCsv:
    def test_measure_roundtrip(self, tmp_path):
        m = sharp_rate_measure(2, 3)
        path = tmp_path / "measure.csv"
        save_measure_csv(m, path)
        loaded = load_measure_csv(path)
        assert np.allclose(loaded.points, m.points)
        assert np.allclose(loaded.weights, m.weights)

    def test_cloud_roundtrip(self, tmp_path):
        c = sample(gaussian_spec(3), 50, seed=2)
        path = tmp_path / "cloud.csv"
        save_cloud_csv(c, path)
        loaded = load_cloud_csv(path)
        assert np.array_equal(loaded.points, c.points)

    def test_loader_rejects_bad_weights(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x_1,weight\n0.0,0.5\n1.0,0.6\n")
        with pytest.raises(ValueError, match="1e-9"):
            load_measure_csv(path)
