"""Bound mathematics: golden values, edge cases, and the dominance properties."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latentcert import bounds
from latentcert.bounds import (
    BoundQuery,
    EpsilonBound,
    binomial_condition_holds,
    epsilon_adjusted,
    epsilon_chernoff,
    epsilon_no_violations,
    exact_epsilon,
    pac_sample_complexity,
)

# High-precision (50+ digit) evaluations of the closed forms, frozen.
CHERNOFF_1E5_4301 = 0.046598254961403904361
ADJUSTED_1E5_4301 = 0.045367787518743837417
ADJUSTED_1E4_436 = 0.054694332576401615029
ADJUSTED_1E6_43235 = 0.043137798193921014887
NO_VIOLATION_100 = 0.045007413978564050276


class TestChernoff:
    def test_golden_value(self):
        b = epsilon_chernoff(100_000, 4301, 1e-6)
        assert b.method == "chernoff"
        assert not b.clamped
        assert b.value == pytest.approx(CHERNOFF_1E5_4301, rel=1e-14)

    def test_clamp_branch(self):
        # raw expression (10 + ln2 + sqrt(ln^2 2 + 20 ln2)) / 10 ~ 1.448
        b = epsilon_chernoff(10, 10, 0.5)
        assert b.value == 1.0
        assert b.clamped

    def test_r_zero_collapses_to_2_log_term(self):
        for n, delta in [(100, 0.01), (10_000, 1e-6), (7, 0.3)]:
            b = epsilon_chernoff(n, 0, delta)
            if not b.clamped:
                assert b.value == pytest.approx(2.0 * math.log(1.0 / delta) / n, rel=1e-14)

    def test_real_valued_r(self):
        assert epsilon_chernoff(1000, 12.75, 0.01).value > epsilon_chernoff(1000, 12.5, 0.01).value

    @pytest.mark.parametrize("bad", [-1.0, math.nan, math.inf])
    def test_invalid_r(self, bad):
        with pytest.raises(ValueError):
            epsilon_chernoff(100, bad, 0.1)

    @pytest.mark.parametrize("delta", [0.0, 1.0, -0.1, 1.5])
    def test_invalid_delta(self, delta):
        with pytest.raises(ValueError):
            epsilon_chernoff(100, 1, delta)


class TestAdjusted:
    def test_golden_values_vs_paper_rows(self):
        assert epsilon_adjusted(10_000, 436, 1e-6, 0.0275).value == pytest.approx(ADJUSTED_1E4_436, rel=1e-14)
        assert epsilon_adjusted(100_000, 4301, 1e-6, 0.0275).value == pytest.approx(ADJUSTED_1E5_4301, rel=1e-14)
        assert epsilon_adjusted(1_000_000, 43235, 1e-6, 0.0275).value == pytest.approx(ADJUSTED_1E6_43235, rel=1e-14)

    def test_beta_zero_is_chernoff_bitwise(self):
        for n, r, delta in [(100, 5, 0.01), (10_000, 123, 1e-8), (3, 1, 0.5)]:
            assert epsilon_adjusted(n, r, delta, 0.0).value == epsilon_chernoff(n, r, delta).value

    def test_discount_equals_chernoff_of_discounted_r(self):
        a = epsilon_adjusted(100_000, 4301, 1e-6, 0.0275)
        c = epsilon_chernoff(100_000, 4301 * (1.0 - 0.0275), 1e-6)
        assert a.value == c.value
        assert a.method == "adjusted"

    def test_discount_never_exceeds_plain_bound(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            n = int(rng.integers(1, 10**6))
            r = float(rng.uniform(0, n))
            delta = float(10 ** rng.uniform(-10, -0.61))
            beta = float(rng.uniform(0, 0.999))
            assert epsilon_adjusted(n, r, delta, beta).value <= epsilon_chernoff(n, r, delta).value

    def test_invalid_beta(self):
        with pytest.raises(ValueError):
            epsilon_adjusted(100, 5, 0.1, 1.0)


class TestNoViolations:
    def test_single_sample(self):
        assert epsilon_no_violations(1, 0.5).value == pytest.approx(0.5, abs=1e-15)

    def test_golden_value(self):
        assert epsilon_no_violations(100, 0.01).value == pytest.approx(NO_VIOLATION_100, rel=1e-14)

    def test_large_n_expansion(self):
        # 1 - e^(ln(delta)/N) agrees with its two-term expansion to 1e-9 relative.
        n, delta = 10**6, 1e-6
        x = math.log(1.0 / delta) / n
        expansion = x - 0.5 * x * x
        assert abs(epsilon_no_violations(n, delta).value - expansion) / expansion < 1e-9


class TestBinomialCondition:
    def test_single_bernoulli(self):
        assert binomial_condition_holds(1, 0, 1, 0.5, 0.5)

    def test_ten_samples_direct_power(self):
        # (1 - 0.1)^10 ~ 0.3487 > 0.01
        assert not binomial_condition_holds(10, 0, 1, 0.1, 0.01)
        assert binomial_condition_holds(10, 0, 1, 0.5, 0.01)  # 0.5^10 ~ 0.00098

    def test_chernoff_epsilon_satisfies_condition(self):
        eps = epsilon_chernoff(100, 5, 1e-6)
        assert not eps.clamped
        assert binomial_condition_holds(100, 5, 1, eps.value, 1e-6)

    def test_large_n_no_underflow(self):
        # Values cross-checked against a 60-digit evaluation.
        assert binomial_condition_holds(10**8, 3, 1, 1e-6, 1e-4)
        assert not binomial_condition_holds(10**8, 3, 1, 2e-8, 1e-4)

    @pytest.mark.parametrize("eps", [0.0, 1.0])
    def test_degenerate_bernoulli_rejected(self, eps):
        with pytest.raises(ValueError):
            binomial_condition_holds(10, 1, 1, eps, 0.1)

    def test_precondition_r_d_n(self):
        with pytest.raises(ValueError):
            binomial_condition_holds(5, 5, 2, 0.5, 0.1)  # r + d - 1 > N

    def test_monotone_decreasing_in_eps(self):
        grid = np.linspace(0.01, 0.99, 25)
        flags = [binomial_condition_holds(50, 3, 1, float(e), 0.05) for e in grid]
        # once true, stays true
        first = flags.index(True)
        assert all(flags[first:])


class TestExactEpsilon:
    def test_closed_form_r0(self):
        b = exact_epsilon(100, 0, 1, 0.01)
        assert b.method == "exact"
        assert abs(b.value - NO_VIOLATION_100) < 1e-10

    def test_single_sample(self):
        assert abs(exact_epsilon(1, 0, 1, 0.5).value - 0.5) < 1e-10

    def test_dominated_by_chernoff(self):
        assert exact_epsilon(100_000, 4301, 1, 1e-6).value <= CHERNOFF_1E5_4301

    def test_condition_holds_at_returned_value(self):
        b = exact_epsilon(500, 17, 1, 1e-4)
        assert binomial_condition_holds(500, 17, 1, b.value, 1e-4)
        # and fails a hair below (minimality up to tolerance)
        assert not binomial_condition_holds(500, 17, 1, b.value - 1e-9, 1e-4)

    def test_all_violations_clamps(self):
        b = exact_epsilon(2, 2, 1, 0.5)  # coefficient C(2,2)=1 > delta regardless of eps
        assert b.value == 1.0 and b.clamped

    def test_nondecreasing_in_d(self):
        vals = [exact_epsilon(1000, 10, d, 1e-4).value for d in (1, 2, 3, 5)]
        assert all(vals[i] <= vals[i + 1] for i in range(len(vals) - 1))

    def test_eq14_consistency_grid(self):
        for n in (1, 10, 10**3, 10**6):
            for delta in (0.5, 0.01, 1e-6):
                closed = -math.expm1(math.log(delta) / n)
                assert abs(exact_epsilon(n, 0, 1, delta).value - closed) < 1e-10


@settings(max_examples=60, deadline=None)
@given(
    n=st.integers(min_value=1, max_value=10_000),
    r_frac=st.floats(min_value=0.0, max_value=0.5),
    log_delta=st.floats(min_value=-10.0, max_value=math.log10(0.25)),
)
def test_property_chernoff_soundness_and_dominance(n, r_frac, log_delta):
    """Unclamped closed-form values always satisfy the exact condition, and
    the exact inversion never exceeds them."""
    r = int(r_frac * n)
    delta = 10.0**log_delta
    ch = epsilon_chernoff(n, r, delta)
    if not ch.clamped:
        assert binomial_condition_holds(n, r, 1, ch.value, delta)
    assert exact_epsilon(n, r, 1, delta).value <= ch.value + 1e-12


@settings(max_examples=100, deadline=None)
@given(
    n=st.integers(min_value=1, max_value=10**6),
    r=st.integers(min_value=0, max_value=10**5),
    log_delta=st.floats(min_value=-10.0, max_value=-0.7),
)
def test_property_chernoff_monotonicity(n, r, log_delta):
    delta = 10.0**log_delta
    base = epsilon_chernoff(n, r, delta).value
    assert epsilon_chernoff(n, r + 1, delta).value >= base
    assert epsilon_chernoff(n + 1, r, delta).value <= base
    assert epsilon_chernoff(n, r, delta / 2).value >= base


class TestPacSampleComplexity:
    def test_direct_value(self):
        assert pac_sample_complexity(0.1, 0.1, 0.0) == 24  # ceil(10 ln 10)

    def test_smallest_case(self):
        assert pac_sample_complexity(0.5, math.exp(-1.0), 0.0) == 2

    def test_halving_eps_at_least_doubles(self):
        for eps in (0.4, 0.2, 0.05):
            n1 = pac_sample_complexity(eps, 0.05, 3.0)
            n2 = pac_sample_complexity(eps / 2, 0.05, 3.0)
            assert n2 >= 2 * n1 - 1  # ceiling slack of one

    def test_hypothesis_space_term(self):
        assert pac_sample_complexity(0.1, 0.1, 10.0) > pac_sample_complexity(0.1, 0.1, 0.0)


class TestDataTypes:
    def test_epsilon_bound_validation(self):
        with pytest.raises(ValueError):
            EpsilonBound(value=0.0, method="chernoff")
        with pytest.raises(ValueError):
            EpsilonBound(value=1.5, method="chernoff")
        with pytest.raises(ValueError):
            EpsilonBound(value=0.5, method="bogus")

    def test_bound_query_validation(self):
        BoundQuery(n_samples=10, violations=3.5, delta=0.1)
        with pytest.raises(ValueError):
            BoundQuery(n_samples=10, violations=11, delta=0.1)
        with pytest.raises(ValueError):
            BoundQuery(n_samples=10, violations=1, delta=0.0)
        with pytest.raises(ValueError):
            BoundQuery(n_samples=10, violations=1, delta=0.1, beta=1.0)
        with pytest.raises(ValueError):
            BoundQuery(n_samples=0, violations=0, delta=0.1)

    def test_evaluate_includes_all_methods_for_integer_r(self):
        out = bounds.evaluate(BoundQuery(n_samples=100, violations=0, delta=0.01, beta=0.0275))
        assert set(out) == {"no_violation", "chernoff", "adjusted", "exact"}
        out = bounds.evaluate(BoundQuery(n_samples=100, violations=2.5, delta=0.01))
        assert set(out) == {"chernoff", "adjusted"}
