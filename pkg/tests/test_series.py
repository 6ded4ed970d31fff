import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from unicont.eigenbasis import build_interval_basis, build_rectangle_basis
from unicont.errors import InvalidArgument
from unicont.series import (APSeries, CoefficientSequence, CompactTestFunction, ap_eval, ap_eval_tested,
                            ap_eval_two_sided, bump, kahan_sum, min_parts_order, pair_direct, read_coefficients,
                            sprime_growth_check, write_coefficients)

BASIS = build_interval_basis(math.pi, 20)
X = np.linspace(0.1, 3.0, 9)


def S(n, x):
    return math.sqrt(2 / math.pi) * np.sin(n * np.asarray(x))


class TestEval:
    def test_single_mode_modulus(self):
        s = APSeries(BASIS, [1.0])
        vals = ap_eval(s, np.linspace(0, 5, 11), 1.1)
        assert np.abs(vals) == pytest.approx(np.full(11, S(1, 1.1)), abs=1e-15)

    def test_zero_series(self):
        assert ap_eval(APSeries(BASIS, np.zeros(5)), 0.7, X).tolist() == [0j] * len(X)

    def test_phase_flip(self):
        s = APSeries(BASIS, [1.0, 0.0, 0.0])
        assert ap_eval(s, math.pi, X) == pytest.approx(-S(1, X), abs=1e-15)

    def test_shapes(self):
        s = APSeries(BASIS, np.ones(4))
        assert isinstance(ap_eval(s, 0.2, 1.0), complex)
        assert ap_eval(s, 0.2, X).shape == (9,)
        assert ap_eval(s, [0.1, 0.2], 1.0).shape == (2,)
        assert ap_eval(s, [0.1, 0.2, 0.3], X).shape == (3, 9)

    def test_outside_domain(self):
        with pytest.raises(InvalidArgument):
            ap_eval(APSeries(BASIS, [1.0]), 0.0, 4.0)

    def test_too_long(self):
        with pytest.raises(InvalidArgument):
            APSeries(BASIS, np.ones(21))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31), st.floats(-3, 3), st.floats(-3, 3))
    def test_linearity(self, seed, alpha, beta):
        rng = np.random.default_rng(seed)
        a, b = rng.normal(size=(2, 10)) + 1j * rng.normal(size=(2, 10))
        lhs = ap_eval(APSeries(BASIS, alpha * a + beta * b), 0.37, X)
        rhs = alpha * ap_eval(APSeries(BASIS, a), 0.37, X) + beta * ap_eval(APSeries(BASIS, b), 0.37, X)
        assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(1.0, np.max(np.abs(lhs)))

    def test_time_shift(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=10) + 1j * rng.normal(size=10)
        s = 0.83
        shifted = APSeries(BASIS, a * np.exp(1j * BASIS.lambdas(10) * s))
        t = np.linspace(-2, 2, 7)
        assert ap_eval(APSeries(BASIS, a), t + s, X) == pytest.approx(ap_eval(shifted, t, X), abs=1e-12)

    def test_rectangle_points(self):
        b = build_rectangle_basis(math.pi, math.pi, 5)
        s = APSeries(b, [1, 0, 0, 0, 0])
        v = ap_eval(s, 0.0, [1.0, 2.0])
        assert v == pytest.approx(2 / math.pi * math.sin(1.0) * math.sin(2.0))


class TestTwoSided:
    def test_cosine_form(self):
        c = np.array([1.0, -0.5, 0.25])
        v = ap_eval_two_sided(BASIS, c / 2, c / 2, 0.9, X)
        ref = sum(c[n] * math.cos((n + 1) * 0.9) * S(n + 1, X) for n in range(3))
        assert v.real == pytest.approx(ref, abs=1e-14)
        assert np.max(np.abs(v.imag)) <= 1e-12

    def test_sine_form(self):
        c = np.array([0.3, 1.2])
        v = ap_eval_two_sided(BASIS, -c / 2j, c / 2j, 0.4, X)
        ref = sum(c[n] * math.sin((n + 1) * 0.4) * S(n + 1, X) for n in range(2))
        assert v == pytest.approx(ref, abs=1e-14)

    def test_time_zero(self):
        a, b = np.array([1, 2j]), np.array([0.5, -1])
        assert ap_eval_two_sided(BASIS, a, b, 0.0, X) == pytest.approx(
            (a[0] + b[0]) * S(1, X) + (a[1] + b[1]) * S(2, X), abs=1e-14)

    def test_length_mismatch(self):
        with pytest.raises(InvalidArgument):
            ap_eval_two_sided(BASIS, [1, 2], [1], 0.0, 1.0)

    def test_series_object_dispatch(self):
        a, b = np.array([1, 2j]), np.array([0.5, -1])
        assert ap_eval(APSeries(BASIS, a, b), 0.3, 1.0) == ap_eval_two_sided(BASIS, a, b, 0.3, 1.0)


class TestTested:
    def setup_method(self):
        rng = np.random.default_rng(4)
        self.series = APSeries(BASIS, rng.normal(size=6) + 1j * rng.normal(size=6))
        self.phi = bump(1.5)

    def test_p0_equals_direct(self):
        assert ap_eval_tested(self.series, self.phi, 0, 1.2) == pytest.approx(
            pair_direct(self.series, self.phi, 1.2), abs=1e-9)

    @pytest.mark.parametrize("p", [1, 2, 3, 4])
    def test_parts_orders_agree(self, p):
        ref = pair_direct(self.series, self.phi, 0.7)
        assert ap_eval_tested(self.series, self.phi, p, 0.7) == pytest.approx(ref, abs=1e-9)

    def test_single_mode_p2_formula(self):
        # <u, phi> = (i lam)^-2 * c S(x) * int phi'' exp(i lam xi) dxi
        s = APSeries(BASIS, [0.8 - 0.3j])
        xi = np.linspace(-1.5, 1.5, 20001)
        integral = np.trapezoid(self.phi.derivative(2)(xi) * np.exp(1j * xi), xi)
        expected = (0.8 - 0.3j) * S(1, 1.0) * integral / (1j) ** 2
        assert ap_eval_tested(s, self.phi, 2, 1.0) == pytest.approx(expected, abs=1e-8)

    def test_two_sided_pairing(self):
        rng = np.random.default_rng(5)
        s = APSeries(BASIS, rng.normal(size=4) + 0j, rng.normal(size=4) + 1j)
        for p in (0, 2, 3):
            assert ap_eval_tested(s, self.phi, p, 2.0) == pytest.approx(pair_direct(s, self.phi, 2.0), abs=1e-9)

    def test_zero_series(self):
        assert ap_eval_tested(APSeries(BASIS, np.zeros(5)), self.phi, 3, 1.0) == 0

    def test_declared_support_checked(self):
        wide = bump(2.0)
        liar = CompactTestFunction((-1.0, 1.0), wide.derivative)
        with pytest.raises(InvalidArgument):
            ap_eval_tested(self.series, liar, 2, 1.0)

    def test_negative_order(self):
        with pytest.raises(InvalidArgument):
            ap_eval_tested(self.series, self.phi, -1, 1.0)

    def test_bump_derivative(self):
        h = 1e-5
        f0, f1 = self.phi.derivative(0), self.phi.derivative(1)
        xs = np.linspace(-1.4, 1.4, 15)
        assert (f0(xs + h) - f0(xs - h)) / (2 * h) == pytest.approx(f1(xs), abs=1e-8)
        assert f0(np.array([-2.0, 1.5, 3.0])).tolist() == [0.0, 0.0, 0.0]

    def test_min_parts_order(self):
        assert min_parts_order(2, 3) == 8


class TestGrowth:
    def test_summable_constant(self):
        assert sprime_growth_check(CoefficientSequence(np.ones(2**20), q=2))

    def test_divergent(self):
        assert not sprime_growth_check(CoefficientSequence(np.arange(1, 65.0), q=0))
        assert not sprime_growth_check(CoefficientSequence(np.arange(1, 4097.0), q=0))

    def test_cubic_with_q5(self):
        n = np.arange(1, 2**20 + 1, dtype=float)
        assert sprime_growth_check(CoefficientSequence(n**3, q=5))

    def test_zero(self):
        assert sprime_growth_check(CoefficientSequence(np.zeros(10)))


def test_coefficient_validation():
    with pytest.raises(InvalidArgument):
        CoefficientSequence([])
    with pytest.raises(InvalidArgument):
        CoefficientSequence([1.0, np.nan])
    c = CoefficientSequence([1, 2])
    with pytest.raises(ValueError):
        c.values[0] = 3


def test_kahan_sum_compensates():
    terms = np.array([1.0] + [1e-16] * 10000)
    assert kahan_sum(terms) == pytest.approx(1.0 + 1e-12, rel=1e-15)


def test_coefficient_files(tmp_path):
    a = np.array([1 + 2j, -0.5j, 1 / 3])
    b = np.array([0.1, 0.2 + 0.3j, -1])
    write_coefficients(tmp_path / "c.csv", a, b)
    ra, rb = read_coefficients(tmp_path / "c.csv")
    assert np.array_equal(ra.values, a) and np.array_equal(rb.values, b)
    write_coefficients(tmp_path / "d.csv", a)
    ra, rb = read_coefficients(tmp_path / "d.csv")
    assert rb is None and np.array_equal(ra.values, a)
    (tmp_path / "bad.csv").write_text("n,re_a,im_a\n0,1\n")
    with pytest.raises(InvalidArgument):
        read_coefficients(tmp_path / "bad.csv")
