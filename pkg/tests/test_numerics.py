import math
import warnings
from fractions import Fraction

import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from qpe_sampling.numerics import (
    DEFAULT_CONTEXT,
    DegenerateBoundWarning,
    PrecisionContext,
    SuccessSet1D,
    SuccessSet2D,
    binom_tail_leq,
    binomial_coeff,
    chernoff_sample_bound,
    chernoff_tail_bound,
    guarded_le,
    p_from_angle,
    parse_pi_angle,
    rel_entropy,
    success_prob_1d,
    success_prob_2d,
)

import oracles

mp = DEFAULT_CONTEXT.mp
P_PI4 = p_from_angle(mp.pi / 4, "cos")


class TestPrecisionContext:
    def test_default_bits(self):
        assert DEFAULT_CONTEXT.bits == 256

    def test_rejects_low_precision(self):
        with pytest.raises(ValueError):
            PrecisionContext(32)

    def test_string_parsed_without_double_rounding(self):
        ctx = PrecisionContext(256)
        assert ctx.real("1e-5") == ctx.mp.mpf(1) / 100000

    def test_fraction_input(self):
        ctx = PrecisionContext(128)
        assert ctx.real(Fraction(1, 3)) * 3 == 1

    @pytest.mark.parametrize(
        "text, num, den",
        [("7/16pi", 7, 16), ("pi/8", 1, 8), ("3pi/4", 3, 4), ("pi", 1, 1), ("1/256pi", 1, 256)],
    )
    def test_pi_angles(self, text, num, den):
        assert parse_pi_angle(text) == mp.pi * num / den

    def test_plain_radians(self):
        assert parse_pi_angle("0.25") == mp.mpf("0.25")


class TestBinomialCoeff:
    def test_small(self):
        assert binomial_coeff(5, 2) == 10
        assert binomial_coeff(9, 0) == 1

    def test_against_pascal_oracle(self):
        assert binomial_coeff(21, 10) == 352716 == oracles.pascal_row(21)[10]
        row = oracles.pascal_row(60)
        assert [binomial_coeff(60, k) for k in range(61)] == row

    def test_large_exact(self):
        assert binomial_coeff(6000, 17) == math.comb(6000, 17)

    @pytest.mark.parametrize("n, k", [(5, 6), (5, -1), (100_001, 3)])
    def test_domain(self, n, k):
        with pytest.raises(ValueError):
            binomial_coeff(n, k)


class TestAngleProbabilities:
    def test_values(self):
        assert p_from_angle(0, "cos") == 1
        assert abs(p_from_angle(mp.pi / 2, "cos") - mp.mpf(1) / 2) < mp.mpf(10) ** -70
        assert abs(P_PI4 - (2 + mp.sqrt(2)) / 4) < mp.mpf(10) ** -70

    def test_sin_component(self):
        assert abs(p_from_angle(mp.pi / 2, "sin") - 1) < mp.mpf(10) ** -70

    def test_bad_component(self):
        with pytest.raises(ValueError):
            p_from_angle(0, "tan")


class TestSetProbabilities:
    def test_full_and_empty(self):
        assert abs(success_prob_1d(SuccessSet1D.interval(7, 0, 7), mp.mpf("0.3")) - 1) < mp.mpf(10) ** -70
        assert success_prob_1d(SuccessSet1D(7, ()), mp.mpf("0.3")) == 0

    def test_three_coins(self):
        assert success_prob_1d(SuccessSet1D(3, (2, 3)), mp.mpf(1) / 2) == mp.mpf(1) / 2

    def test_2d_full_square(self):
        v = success_prob_2d(SuccessSet2D.full(4), mp.mpf("0.2"), mp.mpf("0.9"))
        assert abs(v - 1) < mp.mpf(10) ** -70

    @pytest.mark.parametrize("n", [1, 3, 6])
    def test_2d_corner_at_axis(self, n):
        # the single count pair (n, 0) at p_x = 1, p_y = 1/2
        v = success_prob_2d(SuccessSet2D(n, {(n, 0)}), 1, mp.mpf(1) / 2)
        assert v == mp.mpf(2) ** -n

    def test_2d_small_against_enumeration(self):
        members = {(0, 1), (2, 2), (1, 0), (2, 0)}
        got = success_prob_2d(SuccessSet2D(2, members), mp.mpf("0.3"), mp.mpf("0.65"))
        assert float(got) == pytest.approx(oracles.enum_prob_2d(2, members, 0.3, 0.65), rel=1e-14)

    @settings(max_examples=40, deadline=None)
    @given(
        n=st.integers(1, 40),
        p=st.floats(0.0, 1.0),
        data=st.data(),
    )
    def test_complement_sums_to_one(self, n, p, data):
        members = data.draw(st.sets(st.integers(0, n)))
        s = SuccessSet1D(n, tuple(members))
        total = success_prob_1d(s, p) + success_prob_1d(s.complement(), p)
        assert abs(total - 1) < mp.mpf(2) ** -(DEFAULT_CONTEXT.bits - 10)


class TestTail:
    def test_full_tail(self):
        assert abs(binom_tail_leq(9, 9, mp.mpf("0.4")) - 1) < mp.mpf(10) ** -70

    def test_three_trials_symbolic(self):
        p = (2 + sp.sqrt(2)) / 4
        expected = oracles.sym_value(oracles.sym_tail(3, 1, p))
        got = binom_tail_leq(3, 1, P_PI4)
        assert float(got) == pytest.approx(expected, rel=1e-15)
        assert float(got) == pytest.approx(0.0580582618, abs=1e-10)

    def test_five_trials_below_budget(self):
        p = (2 + sp.sqrt(2)) / 4
        expected = oracles.sym_value(oracles.sym_tail(5, 2, p))
        got = binom_tail_leq(5, 2, P_PI4)
        assert float(got) == pytest.approx(expected, rel=1e-15)
        assert float(got) == pytest.approx(0.0249126314, abs=1e-10)
        assert got <= mp.mpf("0.025")

    def test_rational_p_exact(self):
        p = Fraction(3, 7)
        exact = oracles.exact_fraction_tail(12, 5, p)
        got = binom_tail_leq(12, 5, mp.mpf(3) / 7)
        assert abs(got - mp.mpf(exact.numerator) / exact.denominator) < mp.mpf(10) ** -70

    def test_domain(self):
        with pytest.raises(ValueError):
            binom_tail_leq(4, 5, 0.5)

    @settings(max_examples=40, deadline=None)
    @given(n=st.integers(1, 60), data=st.data(), p=st.floats(0.0, 1.0), q=st.floats(0.0, 1.0))
    def test_nonincreasing_in_p(self, n, data, p, q):
        k = data.draw(st.integers(0, n))
        lo, hi = sorted((p, q))
        assert binom_tail_leq(n, k, hi) <= binom_tail_leq(n, k, lo) + mp.mpf(10) ** -60


class TestEntropyAndChernoff:
    def test_entropy_zero_on_diagonal(self):
        assert abs(rel_entropy(mp.mpf("0.37"), mp.mpf("0.37"))) < mp.mpf(10) ** -70

    def test_entropy_half_identity(self):
        p = mp.mpf("0.81")
        assert abs(rel_entropy(mp.mpf(1) / 2, p) + mp.log(4 * p * (1 - p)) / 2) < mp.mpf(10) ** -70
        assert abs(rel_entropy(mp.mpf(1) / 2, P_PI4) - mp.log(2) / 2) < mp.mpf(10) ** -70

    @pytest.mark.parametrize("a, p", [(0, 0.5), (1, 0.5), (0.5, 0), (0.5, 1)])
    def test_entropy_domain(self, a, p):
        with pytest.raises(ValueError):
            rel_entropy(a, p)

    def test_sample_bound_formula(self):
        assert chernoff_sample_bound(0.5, 0.1) == math.ceil(8 * math.log(20)) == 24
        assert chernoff_sample_bound(0.25, 0.05) == math.ceil(32 * math.log(40)) == 119

    def test_sample_bound_degenerate(self):
        with warnings.catch_warnings(record=True) as w:
            warnings.simplefilter("always")
            assert chernoff_sample_bound(1, 2) == 0
        assert any(issubclass(x.category, DegenerateBoundWarning) for x in w)

    def test_sample_bound_domain(self):
        with pytest.raises(ValueError):
            chernoff_sample_bound(0, 0.1)

    @pytest.mark.parametrize("n", [2, 6, 10])
    def test_tail_bound_half(self, n):
        alpha = mp.pi / 5
        p = p_from_angle(alpha)
        assert abs(chernoff_tail_bound(n, n // 2, p) - mp.sin(alpha) ** n) < mp.mpf(10) ** -70

    def test_tail_bound_dominates(self):
        bound = chernoff_tail_bound(5, 2, P_PI4)
        exact = binom_tail_leq(5, 2, P_PI4)
        p = (2 + sp.sqrt(2)) / 4
        a = sp.Rational(2, 5)
        d = a * sp.log(a / p) + (1 - a) * sp.log((1 - a) / (1 - p))
        assert float(bound) == pytest.approx(oracles.sym_value(sp.exp(-5 * d)), rel=1e-14)
        # the looser a = 1/2 bound is sin^5(pi/4)
        half = chernoff_tail_bound(6, 3, P_PI4) ** (mp.mpf(5) / 6)
        assert float(half) == pytest.approx(0.1768, abs=1e-4)
        assert exact < bound < half

    def test_tail_bound_domain(self):
        with pytest.raises(ValueError):
            chernoff_tail_bound(4, 2, 0.5)

    @settings(max_examples=60, deadline=None)
    @given(n=st.integers(1, 80), data=st.data(), p=st.floats(0.01, 0.99))
    def test_tail_bound_everywhere(self, n, data, p):
        kmax = math.ceil(n * p) - 1
        if kmax < 0:
            return
        k = data.draw(st.integers(0, kmax))
        if not k < n * p:
            return
        assert binom_tail_leq(n, k, p) <= chernoff_tail_bound(n, k, p) * (1 + mp.mpf(10) ** -50)


class TestGuardedComparison:
    def test_clear_cases(self):
        assert guarded_le(lambda c: c.mp.mpf("0.1"), "0.2").holds
        assert not guarded_le(lambda c: c.mp.mpf("0.3"), "0.2").holds

    def test_exact_tie_is_flagged(self):
        d = guarded_le(lambda c: c.mp.mpf(1) / 4, Fraction(1, 4), max_bits=1024)
        assert d.holds and d.tie

    def test_doubling_resolves_near_tie(self):
        # differs from 1/3 by 2^-200: unresolved at 256 bits, settled at 512
        d = guarded_le(lambda c: c.mp.mpf(1) / 3 + c.mp.mpf(2) ** -200, Fraction(1, 3))
        assert not d.holds and d.bits == 512 and not d.tie

    def test_published_decisions_stable_under_doubling(self):
        for ctx in (PrecisionContext(256), PrecisionContext(512)):
            assert binom_tail_leq(5, 2, p_from_angle(ctx.mp.pi / 4, ctx=ctx), ctx) <= ctx.real("0.025")
