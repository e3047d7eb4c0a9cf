import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from smoothreg.errors import InvalidInputError
from smoothreg.smoothing import (SmoothingConfig, kernel_mean, scale_factors, smooth_moments,
                                 smoothed_mu, smoothing_weights, truncation_level)

CFG = SmoothingConfig()


def _quad_kernel_mean(h):
    phi = lambda v: np.exp(-v * v / 2) / np.sqrt(2 * np.pi)
    return integrate.quad(lambda v: phi(v / h) * phi(v), -np.inf, np.inf, epsabs=1e-14)[0]


class TestConfig:
    def test_gaussian_constants(self):
        assert CFG.c2 == pytest.approx(1 / (2 * np.sqrt(np.pi)), rel=1e-15)
        assert CFG.d2 == 1.0
        assert CFG.f0 == pytest.approx(1 / np.sqrt(2 * np.pi))
        assert CFG.kappa == pytest.approx(-0.5, rel=1e-14)
        assert CFG.lambda_gap == 3.0

    def test_quadrature_constants_match_closed_form(self):
        c2, d2 = CFG.kernel_obj.moment_constants()
        assert c2 == pytest.approx(CFG.c2, rel=1e-10)
        assert d2 == pytest.approx(1.0, rel=1e-10)

    def test_epanechnikov_constants(self):
        cfg = SmoothingConfig(kernel="epanechnikov")
        assert cfg.c2 == pytest.approx(0.6, rel=1e-10)
        assert cfg.d2 == pytest.approx(0.2, rel=1e-10)

    @pytest.mark.parametrize("kw", [{"kernel": "box"}, {"aux_density": "laplace"},
                                    {"lambda_sigma": 2.0, "lambda_gamma": 2.0},
                                    {"lambda_sigma": -1.0}])
    def test_rejects(self, kw):
        with pytest.raises(InvalidInputError):
            SmoothingConfig(**kw)

    def test_lambda_diag(self):
        d = CFG.lambda_matrix_diag(4)
        assert d.size == 14 and np.all(d[:10] == 1.0) and np.all(d[10:] == 4.0)


class TestKernelMean:
    def test_h1(self):
        assert kernel_mean(1.0, CFG) == pytest.approx(1 / np.sqrt(4 * np.pi), rel=1e-14)

    def test_h_small(self):
        assert kernel_mean(0.1, CFG) == pytest.approx(0.1 / np.sqrt(2 * np.pi * 1.01), rel=1e-14)
        assert kernel_mean(0.1, CFG) == pytest.approx(0.03970, abs=5e-6)

    def test_large_h_limit(self):
        assert kernel_mean(1e6, CFG) == pytest.approx(1 / np.sqrt(2 * np.pi), rel=1e-10)

    @pytest.mark.parametrize("h", [0.03, 0.3, 2.0])
    def test_closed_form_vs_quadrature(self, h):
        assert kernel_mean(h, CFG) == pytest.approx(_quad_kernel_mean(h), rel=1e-9)

    def test_non_gaussian_pair_uses_quadrature(self):
        cfg = SmoothingConfig(aux_density="cauchy")
        h = 0.2
        ref = integrate.quad(lambda v: np.exp(-(v / h) ** 2 / 2) / np.sqrt(2 * np.pi)
                             / (np.pi * (1 + v * v)), -np.inf, np.inf, epsabs=1e-14)[0]
        assert kernel_mean(h, cfg) == pytest.approx(ref, rel=1e-8)

    def test_small_h_law(self):
        # E[K(V/h)]/h -> f(0) int K = f(0)
        assert kernel_mean(1e-4, CFG) / 1e-4 == pytest.approx(CFG.f0, rel=1e-7)

    def test_bad_h(self):
        with pytest.raises(InvalidInputError):
            kernel_mean(0.0, CFG)


class TestSmoothedMu:
    def test_constant_rows(self, rng):
        u0 = np.array([1.0, -2.0, 0.5])
        v = rng.standard_normal(50)
        h = 0.4
        out = smoothed_mu(np.tile(u0, (50, 1)), v, h, CFG)
        scale = np.mean(np.exp(-(v / h) ** 2 / 2) / np.sqrt(2 * np.pi)) / kernel_mean(h, CFG)
        np.testing.assert_allclose(out, u0 * scale, rtol=1e-13)

    def test_two_points(self):
        u = np.eye(2)
        h = 0.3
        out = smoothed_mu(u, np.array([0.0, 1e6]), h, CFG)
        assert out[1] == pytest.approx(0.0, abs=1e-300)
        assert out[0] == pytest.approx((1 / np.sqrt(2 * np.pi)) / (2 * kernel_mean(h, CFG)))

    def test_length_mismatch(self):
        with pytest.raises(InvalidInputError):
            smoothed_mu(np.zeros((3, 2)), np.zeros(4), 0.5, CFG)

    @given(st.integers(0, 2**32 - 1), st.floats(-3, 3), st.floats(-3, 3))
    def test_linearity(self, seed, a, b):
        r = np.random.default_rng(seed)
        u1, u2 = r.standard_normal((2, 20, 5))
        v = r.standard_normal(20)
        lhs = smoothed_mu(a * u1 + b * u2, v, 0.3, CFG)
        rhs = a * smoothed_mu(u1, v, 0.3, CFG) + b * smoothed_mu(u2, v, 0.3, CFG)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)

    def test_weights_are_the_estimator(self, rng):
        u = rng.standard_normal((30, 4))
        v = rng.standard_normal(30)
        w = smoothing_weights(v, 0.2, CFG)
        np.testing.assert_allclose(smoothed_mu(u, v, 0.2, CFG), w @ u, rtol=1e-14)

    def test_weights_sum_to_one(self):
        n = 100_000
        h = n ** -0.2
        sums = [smoothing_weights(np.random.default_rng(s).standard_normal(n), h, CFG).sum()
                for s in range(50)]
        assert np.max(np.abs(np.array(sums) - 1)) < 0.05

    def test_consistency_iid_normal(self):
        n = 100_000
        r = np.random.default_rng(7)
        u = r.standard_normal((n, 3)) + np.array([0.0, 1.0, -2.0])
        v = r.standard_normal(n)
        h = n ** -0.2
        est = smoothed_mu(u, v, h, CFG)
        w = smoothing_weights(v, h, CFG)
        # conditional s.e. of the weighted mean plus weight noise times the mean
        se = np.sqrt(np.sum(w ** 2) * 1.0 + np.var(w * n) / n * np.array([0, 1, 4]))
        assert np.all(np.abs(est - [0.0, 1.0, -2.0]) < 4 * se + 1e-12)


class TestScaleFactors:
    def test_closed_form(self):
        a_s, a_g = scale_factors(0.5, CFG)
        assert a_s == pytest.approx(1 / np.sqrt(1.25), rel=1e-14)
        assert a_g == pytest.approx(1 / np.sqrt(2.0), rel=1e-14)

    def test_limits_and_order(self):
        a_s, a_g = scale_factors(1e-6, CFG)
        assert a_s == pytest.approx(1.0, abs=1e-10) and a_g == pytest.approx(1.0, abs=1e-10)
        for h in (0.01, 0.1, 1.0):
            a_s, a_g = scale_factors(h, CFG)
            assert 0 < a_g < a_s <= 1

    def test_quadrature_pair_ordering(self):
        cfg = SmoothingConfig(kernel="epanechnikov", aux_density="cauchy")
        a_s, a_g = scale_factors(0.3, cfg)
        assert a_g < a_s


class TestTruncationLevel:
    def test_values(self):
        assert truncation_level(1000, 0.05) == pytest.approx(np.log(np.log(1000)) / np.sqrt(50))
        assert truncation_level(1000, 0.05) == pytest.approx(0.27331, abs=1e-5)
        assert truncation_level(16, 1.0) == pytest.approx(np.log(np.log(16)) / 4, rel=1e-14)
        assert truncation_level(16, 1.0) == pytest.approx(0.25493, abs=2e-5)

    def test_scaling(self):
        assert truncation_level(1000, 0.1) == pytest.approx(truncation_level(1000, 0.05) / np.sqrt(2))

    def test_small_n(self):
        with pytest.raises(InvalidInputError):
            truncation_level(2, 0.5)


def test_smooth_moments_rescales_blocks(rng):
    u = rng.standard_normal((40, 14))
    v = rng.standard_normal(40)
    sm = smooth_moments(u, v, 0.3, CFG)
    np.testing.assert_allclose(sm.mu_tilde[:10], sm.mu_hat[:10] * sm.a_sigma)
    np.testing.assert_allclose(sm.mu_tilde[10:], sm.mu_hat[10:] * sm.a_gamma)
    assert sm.c_n == truncation_level(40, 0.3)
