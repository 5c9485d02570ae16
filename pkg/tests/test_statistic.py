import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bmlab.covariance import CovarianceModel, rho_vector
from bmlab.errors import NotSummable, TooFewReplicates
from bmlab.hermite import HermiteSeries, absx_series, evaluate, norm_sq, tail_mass
from bmlab.sampler import PathEnsemble, sample, sample_batches
from bmlab.statistic import (
    FunctionalSample,
    compute_f,
    compute_phi,
    compute_phi_direct,
    functional_sample,
    lag_covariance,
    phi_variance_h2,
    sigma_n_sq_exact,
    sigma_sq_limit,
    toeplitz_apply,
    var_phi,
    variance_with_stderr,
)

H1 = HermiteSeries.basis(1)
H2 = HermiteSeries.basis(2)
WHITE = CovarianceModel.white_noise()
AR1 = CovarianceModel.ar1(0.5)
PL = CovarianceModel.power_law(0.75)


def within(est, se, target, k=3.0):
    return abs(est - target) <= k * se


class TestComputeF:
    def test_zero_series(self):
        ens = sample(AR1, 16, 5, 0)
        assert np.all(compute_f(ens, HermiteSeries(np.zeros(4))) == 0)

    def test_h1_white_is_standard_normal(self):
        ens = sample(WHITE, 32, 100_000, 1)
        f = compute_f(ens, H1)
        assert abs(f.mean()) <= 3 / math.sqrt(f.size)
        assert abs(f.var(ddof=1) - 1) < 0.02

    def test_h2_n2_direct(self):
        ens = sample(WHITE, 2, 50, 2)
        x = ens.data
        assert np.allclose(compute_f(ens, H2), (x[:, 0] ** 2 + x[:, 1] ** 2 - 2) / math.sqrt(2), rtol=0, atol=1e-12)

    def test_constant_removed_with_warning(self):
        ens = sample(WHITE, 4, 3, 0)
        s = HermiteSeries(np.array([1.0, 0.0, 1.0]))
        with pytest.warns(UserWarning):
            f = compute_f(ens, s)
        assert np.allclose(f, compute_f(ens, H2))


class TestSigma:
    def test_white(self):
        assert sigma_n_sq_exact(H2, WHITE, 37) == pytest.approx(2.0)
        g = absx_series()
        # truncation at Q=40 drops a small tail, which tail_mass accounts for
        assert sigma_n_sq_exact(g, WHITE, 10) == pytest.approx(norm_sq(g), rel=1e-14)
        assert norm_sq(g) + tail_mass(g) == pytest.approx(1 - 2 / math.pi, abs=1e-5)

    def test_n1_any_model(self):
        for m in (AR1, PL):
            assert sigma_n_sq_exact(H2, m, 1) == pytest.approx(2.0)

    def test_ar1_limit(self):
        assert abs(sigma_n_sq_exact(H2, AR1, 4096) - 10 / 3) < 1e-3
        assert sigma_sq_limit(H2, AR1) == pytest.approx(10 / 3, rel=1e-13)

    @pytest.mark.parametrize("m", [AR1, PL, CovarianceModel.fgn(0.7)], ids=lambda m: m.tag)
    def test_exact_against_lag_covariances(self, m):
        # oracle: E F_n^2 = n^-1 sum_{i,j} Cov(g(X_i), g(X_j))
        n = 40
        g = absx_series(1.0, Q=20)
        cov = np.array([lag_covariance(g, m, k) for k in range(n)])
        i = np.arange(n)
        direct = cov[np.abs(i[:, None] - i[None, :])].sum() / n
        assert sigma_n_sq_exact(g, m, n) == pytest.approx(direct, rel=1e-12)

    def test_limits(self):
        assert sigma_sq_limit(H2, WHITE) == pytest.approx(2.0, rel=1e-15)
        with pytest.raises(NotSummable):
            sigma_sq_limit(H2, CovarianceModel.power_law(0.4))

    def test_power_law_limit_direct_sum(self):
        K = 10**7
        r = (1.0 + np.arange(1, K + 1)) ** -3.0
        tail = 2 * 0.5 * (K + 1.5) ** -2.0  # integral of (1+k)^-3 beyond K
        direct = 2 * (1 + 2 * r.sum() + tail)
        assert sigma_sq_limit(H2, CovarianceModel.power_law(1.5)) == pytest.approx(direct, rel=1e-10)

    def test_fgn_limit_direct_sum(self):
        H = 0.7
        m = CovarianceModel.fgn(H)
        K = 1 << 22
        r = rho_vector(m, K)
        amp = H * (2 * H - 1)
        tail = 2 * amp**2 * (K + 0.5) ** (-0.2) / 0.2
        direct = 2 * (2 * np.sum(r[1:] ** 2) + 1 + tail)
        assert sigma_sq_limit(H2, m) == pytest.approx(direct, rel=1e-5)

    def test_converges_to_limit(self):
        m = CovarianceModel.power_law(1.5)
        lim = sigma_sq_limit(H2, m)
        vals = [sigma_n_sq_exact(H2, m, n) for n in (64, 512, 4096)]
        assert vals[0] < vals[1] < vals[2] < lim
        assert lim - vals[2] < 0.01


class TestPhi:
    def test_h2_white_closed_form(self):
        ens = sample(WHITE, 16, 200, 3)
        phi = compute_phi(ens, H2, WHITE)
        assert np.allclose(phi, 2 * np.mean(ens.data**2, axis=1), rtol=1e-12)

    def test_h2_white_mean(self):
        fs = functional_sample(sample(WHITE, 32, 20_000, 4), H2, WHITE)
        assert within(fs.phi_values.mean(), fs.phi_values.std() / math.sqrt(fs.R), 2.0)

    def test_n1(self):
        x = np.array([[0.3], [-1.2], [2.0]])
        g = HermiteSeries(np.array([0.0, 0.0, 1.0, 0.5]))
        phi = compute_phi(PathEnsemble(x), g, AR1)
        gp = evaluate(HermiteSeries(np.array([0.0, 2.0, 1.5])), x[:, 0])
        g1 = evaluate(HermiteSeries(np.array([0.0, 1.0, 0.5])), x[:, 0])
        assert np.allclose(phi, gp * g1, rtol=1e-13)

    def test_fast_matches_direct(self):
        ens = sample(PL, 512, 100, 5)
        g = absx_series(1.0, Q=20)
        fast, slow = compute_phi(ens, g, PL), compute_phi_direct(ens, g, PL)
        assert np.max(np.abs(fast - slow) / np.abs(slow)) < 1e-9

    @given(st.integers(1, 70))
    def test_toeplitz_apply(self, n):
        rng = np.random.default_rng(n)
        b = rng.standard_normal((3, n))
        r = rho_vector(AR1, n - 1)
        i = np.arange(n)
        gamma = r[np.abs(i[:, None] - i[None, :])]
        assert np.allclose(toeplitz_apply(AR1, b), b @ gamma, atol=1e-12)


class TestVarPhi:
    def test_constant(self):
        assert var_phi(np.full(200, 1.5)).variance == 0.0

    def test_too_few(self):
        with pytest.raises(TooFewReplicates):
            var_phi(np.zeros(99))

    def test_jackknife_matches_normal_theory(self):
        x = np.random.default_rng(0).standard_normal(50_000)
        v = variance_with_stderr(x)
        assert v.variance == pytest.approx(np.var(x, ddof=1))
        assert v.stderr == pytest.approx(math.sqrt(2 / x.size), rel=0.05)

    def test_h2_white(self):
        n = 64
        fs = functional_sample(sample(WHITE, n, 100_000, 6), H2, WHITE)
        v = var_phi(fs)
        assert within(v.variance, v.stderr, 8 / n)

    def test_h2_ar1_wick(self):
        n = 256
        fs = functional_sample(sample(AR1, n, 20_000, 7), H2, AR1)
        v = var_phi(fs)
        assert within(v.variance, v.stderr, phi_variance_h2(H2, AR1, n))

    def test_wick_white(self):
        assert phi_variance_h2(H2, WHITE, 50) == pytest.approx(8 / 50)
        with pytest.raises(ValueError):
            phi_variance_h2(absx_series(), WHITE, 10)


class TestFunctionalSample:
    @pytest.mark.parametrize("g", [H2, absx_series(1.0, Q=20)], ids=["h2", "absx"])
    @pytest.mark.parametrize("m", [AR1, PL], ids=lambda m: m.tag)
    def test_duality_and_variance(self, g, m):
        n = 128
        fs = functional_sample(sample_batches(m, n, 20_000, 8, batch_size=3000), g, m)
        vf = variance_with_stderr(fs.f_values)
        assert within(vf.variance, vf.stderr, fs.sigma_n_sq)
        vy = variance_with_stderr(fs.y_values)
        assert within(vy.variance, vy.stderr, 1.0)
        phi = fs.phi_values
        assert within(phi.mean(), phi.std(ddof=1) / math.sqrt(phi.size), fs.sigma_n_sq)

    def test_phi_subset(self):
        fs = functional_sample(sample_batches(AR1, 16, 500, 1, batch_size=64), H2, AR1, phi_replicates=130)
        assert fs.R == 500 and fs.phi_values.size == 130
        full = functional_sample(sample(AR1, 16, 500, 1), H2, AR1)
        assert np.array_equal(fs.phi_values, full.phi_values[:130])

    def test_y_invariant(self):
        fs = FunctionalSample(np.array([1.0, -2.0]), None, 4.0, 3)
        assert np.array_equal(fs.y_values, np.array([0.5, -1.0]))
        with pytest.raises(ValueError):
            FunctionalSample(np.zeros(2), None, 0.0, 3)
