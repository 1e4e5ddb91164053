import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from daeflow._gauss_sum import kernel_sums
from daeflow.empirical_dae import MeanShiftMap, anisotropic_mean_shift, empirical_score, kde_logpdf, mean_shift_dae
from daeflow.errors import OutOfSupportError
from daeflow.measures import GaussianMeasure, ParticleCloud, sample


@pytest.fixture(scope="module")
def normal_cloud():
    return sample(GaussianMeasure.univariate(0, 1), 100_000, 11)


class TestMeanShift:
    def test_single_point(self):
        c = ParticleCloud(np.array([[0.7, -0.3]]))
        np.testing.assert_allclose(mean_shift_dae(c, 0.2, np.array([[5.0, 5.0], [-1.0, 0.0]])), [[0.7, -0.3]] * 2)

    def test_symmetric_pair(self):
        c = ParticleCloud(np.array([-1.0, 1.0]))
        for t in (0.01, 0.5, 10.0):
            assert mean_shift_dae(c, t, np.array([0.0]))[0] == pytest.approx(0.0, abs=1e-15)

    def test_brute_force_value(self):
        c = ParticleCloud(np.array([-1.0, 1.0]))
        assert mean_shift_dae(c, 0.5, np.array([1.0]))[0] == pytest.approx(0.96403, abs=1e-5)
        w = np.array([np.exp(-4.0), 1.0])
        assert mean_shift_dae(c, 0.5, np.array([1.0]))[0] == pytest.approx(w @ [-1.0, 1.0] / w.sum(), rel=1e-14)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.01, 5.0))
    def test_convex_hull(self, seed, t):
        rng = np.random.default_rng(seed)
        c = ParticleCloud(rng.standard_normal((50, 2)))
        y = mean_shift_dae(c, t, rng.uniform(-3, 3, (20, 2)))
        assert np.all(y >= c.points.min(axis=0) - 1e-12)
        assert np.all(y <= c.points.max(axis=0) + 1e-12)

    def test_large_time_is_mean(self):
        rng = np.random.default_rng(0)
        w = rng.uniform(size=100)
        c = ParticleCloud(rng.standard_normal((100, 2)), w / w.sum())
        np.testing.assert_allclose(mean_shift_dae(c, 1e6, np.zeros((3, 2))), np.tile(c.mean(), (3, 1)), atol=1e-4)

    def test_matches_gaussian_dae(self, normal_cloud):
        x = np.linspace(-2, 2, 41)[:, None]
        y = mean_shift_dae(normal_cloud, 0.3, x)
        assert np.mean(np.abs(y - x / 1.3)) < 0.05

    def test_out_of_support(self):
        c = ParticleCloud(np.array([0.0]))
        with pytest.raises(OutOfSupportError):
            mean_shift_dae(c, 1e-4, np.array([10.0]))

    def test_invalid_time(self):
        with pytest.raises(ValueError):
            mean_shift_dae(ParticleCloud(np.array([0.0])), 0.0, np.array([0.0]))

    def test_map_kind(self):
        c = ParticleCloud(np.array([-1.0, 1.0]))
        m = MeanShiftMap(c, 0.5)
        assert m.kind == "mean_shift"
        assert m(np.array([1.0]))[0] == pytest.approx(0.96403, abs=1e-5)


class TestScore:
    def test_identity(self):
        rng = np.random.default_rng(1)
        c = ParticleCloud(rng.standard_normal((200, 2)))
        x = rng.standard_normal((20, 2))
        t = 0.4
        np.testing.assert_allclose(x + t * empirical_score(c, t, x), mean_shift_dae(c, t, x), atol=1e-14)

    def test_symmetric_mode(self):
        c = ParticleCloud(np.array([-1.0, 1.0]))
        assert empirical_score(c, 0.3, np.array([0.0]))[0] == pytest.approx(0.0, abs=1e-14)

    def test_gaussian_oracle(self, normal_cloud):
        t = 0.3
        x = np.linspace(-2, 2, 41)[:, None]
        np.testing.assert_allclose(empirical_score(normal_cloud, t, x), -x / (1 + t), atol=0.05)

    def test_finite_difference_of_kde(self):
        rng = np.random.default_rng(2)
        c = ParticleCloud(rng.standard_normal((300, 2)))
        t = 0.2
        x = rng.uniform(-1.5, 1.5, (10, 2))
        h = 1e-5
        fd = np.stack([(kde_logpdf(c, t, x + h * e) - kde_logpdf(c, t, x - h * e)) / (2 * h) for e in np.eye(2)], axis=1)
        np.testing.assert_allclose(empirical_score(c, t, x), fd, atol=1e-6)


class TestAnisotropic:
    def test_half_identity(self):
        rng = np.random.default_rng(3)
        c = ParticleCloud(rng.standard_normal((100, 2)))
        x = rng.standard_normal((10, 2))
        np.testing.assert_allclose(anisotropic_mean_shift(c, 0.3, 0.5 * np.eye(2), x), mean_shift_dae(c, 0.3, x), atol=1e-12)

    def test_single_point_fixed(self):
        c = ParticleCloud(np.array([[1.0, 2.0]]))
        d = np.diag([0.3, 2.0])
        np.testing.assert_allclose(anisotropic_mean_shift(c, 0.3, d, np.array([1.0, 2.0])), [1.0, 2.0])
        y = anisotropic_mean_shift(c, 0.3, d, np.array([2.0, 2.0]))
        assert y[0] < 2.0 and y[1] == pytest.approx(2.0)

    def test_finite_difference(self):
        rng = np.random.default_rng(4)
        c = ParticleCloud(rng.standard_normal((100, 2)))
        d = np.array([[0.8, 0.2], [0.2, 1.5]])
        t = 0.25
        cov = 2 * t * d
        prec = np.linalg.inv(cov)

        def log_kde(p):
            diff = p[:, None, :] - c.points[None, :, :]
            q = np.einsum("nki,ij,nkj->nk", diff, prec, diff)
            return np.log(np.mean(np.exp(-0.5 * q), axis=1))

        x = rng.uniform(-1, 1, (8, 2))
        h = 1e-5
        fd = np.stack([(log_kde(x + h * e) - log_kde(x - h * e)) / (2 * h) for e in np.eye(2)], axis=1)
        np.testing.assert_allclose(anisotropic_mean_shift(c, t, d, x), x + t * fd, atol=1e-6)


class TestGaussSum:
    def test_fgt_matches_direct(self):
        rng = np.random.default_rng(5)
        src = rng.standard_normal((5000, 1)) * 3
        w = rng.uniform(0.1, 1.0, 5000)
        tgt = np.linspace(-10, 10, 700)[:, None]
        a = kernel_sums(src, w, src, tgt, "direct")
        b = kernel_sums(src, w, src, tgt, "fgt")
        np.testing.assert_allclose(a[0], b[0], atol=1e-10)
        np.testing.assert_allclose(a[1], b[1], atol=1e-10)

    def test_fgt_with_offset_channels(self):
        # carried values far from zero stress the cancellation in the kernel mean
        rng = np.random.default_rng(6)
        src = rng.standard_normal((2000, 1))
        vals = src * 1e-3 + 50.0
        w = np.full(2000, 1.0)
        tgt = np.linspace(-2, 2, 50)[:, None]
        np.testing.assert_allclose(kernel_sums(src, w, vals, tgt, "direct")[1], kernel_sums(src, w, vals, tgt, "fgt")[1], atol=1e-10)
