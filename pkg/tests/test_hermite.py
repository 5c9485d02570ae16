import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bmlab.errors import (
    CorrelationOutOfRange,
    NonFiniteIntegrand,
    NoRank,
    SeriesParseError,
    ShiftExceedsRank,
)
from bmlab.hermite import (
    DEFAULT_QUADRATURE,
    HermiteSeries,
    L_apply,
    Linv_apply,
    QuadratureSpec,
    abs_series,
    absx_series,
    centered,
    cross_covariance,
    derivative,
    evaluate,
    hermite_eval,
    hermite_rank,
    lp_norm,
    norm_sq,
    ou_apply,
    parse_series,
    project,
    shift,
    sobolev_norm,
    tail_mass,
)

SQRT_2_PI = math.sqrt(2.0 / math.pi)


def series(*pairs, Q=None):
    top = max(q for q, _ in pairs)
    c = np.zeros(max(top, Q or 0) + 1)
    for q, v in pairs:
        c[q] = v
    return HermiteSeries(c)


coeff_vectors = st.lists(st.floats(-2, 2, allow_nan=False), min_size=2, max_size=11).map(np.array)


class TestEval:
    @pytest.mark.parametrize("q,x,expected", [(0, 3.7, 1.0), (2, 1.0, 0.0), (3, 2.0, 2.0)])
    def test_examples(self, q, x, expected):
        assert hermite_eval(q, x) == pytest.approx(expected, abs=1e-14)

    def test_matches_explicit_polynomials(self):
        x = np.linspace(-3, 3, 13)
        assert np.allclose(hermite_eval(4, x), x**4 - 6 * x**2 + 3)
        assert np.allclose(hermite_eval(5, x), x**5 - 10 * x**3 + 15 * x)

    @given(coeff_vectors, st.floats(-6, 6))
    def test_series_matches_raw_recurrence(self, c, x):
        s = HermiteSeries(c)
        direct = sum(cq * hermite_eval(q, x) for q, cq in enumerate(c))
        assert evaluate(s, x) == pytest.approx(direct, rel=1e-10, abs=1e-9)

    def test_high_order_stays_finite(self):
        s = HermiteSeries(np.ones(61) / np.exp(np.arange(61)))
        assert np.isfinite(norm_sq(s))
        assert np.all(np.isfinite(evaluate(s, np.linspace(-10, 10, 41))))


class TestQuadrature:
    def test_orthogonality(self):
        x, w = DEFAULT_QUADRATURE.nodes()
        H = np.array([hermite_eval(q, x) for q in range(11)])
        gram = (H * w) @ H.T
        off = gram - np.diag(np.diag(gram))
        assert np.max(np.abs(off)) < 1e-9
        fact = np.array([math.factorial(q) for q in range(11)], float)
        assert np.allclose(np.diag(gram), fact, rtol=1e-9)

    def test_zero_is_panel_boundary(self):
        q = DEFAULT_QUADRATURE
        assert (q.domain_halfwidth / q.panel_width) == int(q.domain_halfwidth / q.panel_width)

    @pytest.mark.parametrize("kw", [dict(domain_halfwidth=6.0), dict(panel_width=0.7), dict(panel_width=0.0)])
    def test_rejects_bad_specs(self, kw):
        with pytest.raises(ValueError):
            QuadratureSpec(**kw)


class TestProject:
    def test_square(self):
        s = project(lambda x: x**2, 4)
        assert np.allclose(s.coeffs, [1, 0, 1, 0, 0], atol=1e-10)

    def test_abs(self):
        s = project(np.abs, 6)
        assert s.coeffs[0] == pytest.approx(SQRT_2_PI, abs=1e-10)
        assert abs(s.coeffs[1]) < 1e-12
        assert s.coeffs[2] == pytest.approx(SQRT_2_PI / 2, abs=1e-10)

    def test_h5(self):
        s = project(lambda x: hermite_eval(5, x), 8)
        expected = np.zeros(9)
        expected[5] = 1
        assert np.allclose(s.coeffs, expected, atol=1e-10)

    @given(st.lists(st.floats(-3, 3, allow_nan=False), min_size=1, max_size=11))
    def test_round_trip_polynomials(self, c):
        s = HermiteSeries(np.array(c))
        back = project(lambda x: evaluate(s, x), 10)
        assert np.allclose(back.coeffs[: len(c)], c, atol=1e-8)
        assert np.allclose(back.coeffs[len(c):], 0, atol=1e-8)

    def test_scalar_only_callable(self):
        s = project(lambda x: math.cos(x), 4)
        assert s.coeffs[0] == pytest.approx(math.exp(-0.5), abs=1e-12)

    def test_non_finite(self):
        with pytest.raises(NonFiniteIntegrand):
            project(lambda x: np.where(x > 3, np.inf, x), 4)


class TestRank:
    def test_examples(self):
        assert hermite_rank(series((2, 1.0))) == 2
        assert hermite_rank(absx_series(1.0)) == 2
        assert hermite_rank(series((1, 1.0))) == 1

    def test_relative_tolerance(self):
        assert hermite_rank(series((1, 1e-12), (3, 1.0))) == 3

    def test_no_rank(self):
        with pytest.raises(NoRank):
            hermite_rank(series((0, 1.0), Q=4))

    def test_centering_warns(self):
        with pytest.warns(UserWarning):
            s, significant = centered(series((0, 0.5), (2, 1.0)))
        assert significant and s.coeffs[0] == 0.0


class TestShiftDerivative:
    def test_shift_examples(self):
        assert shift(series((2, 1.0)), 1) == series((1, 1.0))
        assert shift(series((2, 1.0)), 2) == series((0, 1.0))
        assert shift(series((2, 1.0), (3, 0.5)), 1) == series((1, 1.0), (2, 0.5))

    def test_shift_beyond_rank(self):
        with pytest.raises(ShiftExceedsRank):
            shift(series((2, 1.0)), 3)

    def test_derivative_examples(self):
        assert derivative(series((2, 1.0))) == series((1, 2.0))
        assert derivative(series((1, 1.0))) == series((0, 1.0))
        assert derivative(series((3, 1.0))) == series((2, 3.0))

    def test_derivative_pointwise(self):
        s = series((2, 1.0), (3, -0.5), (5, 0.1))
        x = np.linspace(-2, 2, 9)
        h = 1e-6
        num = (evaluate(s, x + h) - evaluate(s, x - h)) / (2 * h)
        assert np.allclose(evaluate(derivative(s), x), num, atol=1e-6)

    @given(coeff_vectors)
    def test_derivative_is_scaled_shift(self, c):
        c[0] = 0.0
        c[1] = 1.0  # rank 1 so shift(., 1) moves every index down
        s = HermiteSeries(c)
        d, t = derivative(s).coeffs, shift(s, 1).coeffs
        q = np.arange(c.size)
        assert np.allclose(d, (q + 1) * t, rtol=1e-15, atol=0)

    def test_abs_series(self):
        assert abs_series(series((2, -1.0))) == series((2, 1.0))
        s = series((1, 0.3), (2, 0.5))
        assert abs_series(s) == s
        assert abs_series(series((2, 0.5), (3, -0.25))) == series((2, 0.5), (3, 0.25))


class TestCrossCovariance:
    @pytest.mark.parametrize("theta", [-0.7, 0.0, 0.4, 1.0])
    def test_examples(self, theta):
        assert cross_covariance(series((1, 1.0)), series((1, 1.0)), theta) == pytest.approx(theta)
        assert cross_covariance(series((2, 1.0)), series((2, 1.0)), theta) == pytest.approx(2 * theta**2)

    def test_zero_correlation(self):
        assert cross_covariance(absx_series(), series((2, 1.0), (4, 1.0)), 0.0) == 0.0

    def test_out_of_range(self):
        with pytest.raises(CorrelationOutOfRange):
            cross_covariance(series((1, 1.0)), series((1, 1.0)), 1.01)

    @given(coeff_vectors)
    def test_norm_identity(self, c):
        s = HermiteSeries(c)
        assert cross_covariance(s, s, 1.0) == norm_sq(s)

    @given(coeff_vectors, coeff_vectors, st.floats(0, 3))
    def test_mehler(self, a, b, t):
        sa, sb = HermiteSeries(a), HermiteSeries(b)
        lhs = cross_covariance(sa, ou_apply(sb, t), 1.0)
        rhs = cross_covariance(sa, sb, math.exp(-t))
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)

    def test_monte_carlo(self):
        rng = np.random.default_rng(5)
        x, z = rng.standard_normal((2, 200_000))
        rho = 0.6
        y = rho * x + math.sqrt(1 - rho**2) * z
        a, b = absx_series(), series((2, 1.0), (3, 0.5))
        prod = evaluate(a, x) * evaluate(b, y)
        assert abs(prod.mean() - cross_covariance(a, b, rho)) < 4 * prod.std() / math.sqrt(x.size)


class TestGenerator:
    def test_ou_identity(self):
        s = absx_series()
        assert ou_apply(s, 0.0) == s

    @given(coeff_vectors)
    def test_linv_inverts_l(self, c):
        s = HermiteSeries(c)
        expected = c.copy()
        expected[0] = 0.0
        assert np.allclose(Linv_apply(L_apply(s)).coeffs, expected, rtol=1e-15, atol=0)

    def test_l_on_h3(self):
        assert L_apply(series((3, 1.0))) == series((3, -3.0))


class TestNorms:
    def test_sobolev_examples(self):
        assert sobolev_norm(series((1, 1.0)), 1, 2) == pytest.approx(math.sqrt(2), rel=1e-12)
        assert sobolev_norm(series((0, 1.0)), 1, 4) == pytest.approx(1.0, rel=1e-12)
        assert sobolev_norm(series((2, 1.0)), 0, 2) == pytest.approx(math.sqrt(2), rel=1e-12)

    def test_lp_norm_matches_norm_sq(self):
        s = series((2, 1.0), (3, 0.5))
        assert lp_norm(s, 2) ** 2 == pytest.approx(norm_sq(s), rel=1e-12)

    def test_tail_mass(self):
        assert tail_mass(series((2, 1.0), Q=40)) == 0.0
        t = tail_mass(absx_series(1.0))
        assert 0 < t < 1e-2


class TestParse:
    def test_specs(self, tmp_path):
        assert parse_series("h2") == series((2, 1.0))
        assert parse_series("h1").rank == 1
        s = parse_series("absx:p=1")
        assert s.coeffs[0] == 0.0 and s.coeffs[2] == pytest.approx(SQRT_2_PI / 2, abs=1e-10)
        f = tmp_path / "c.txt"
        f.write_text("# c_0..c_3\n0, 0\n0.5 0.25\n")
        assert parse_series(f"hermite:@{f}") == series((2, 0.5), (3, 0.25))

    @pytest.mark.parametrize("bad", ["h3", "absx:q=1", "absx:p=-1", "hermite:@/no/such", "sin"])
    def test_errors(self, bad):
        with pytest.raises(SeriesParseError):
            parse_series(bad)
