import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stabl.bagging import BaggedPredictor, Exact
from stabl.errors import DomainError
from stabl.learners import Dataset, ThresholdLearner
from stabl.resampling import ResamplingScheme
from stabl.stability import audit
from stabl.theory import (BoundParams, default_grid, expectation_beta, finite_b_delta, finite_b_inflation,
                          guaranteed_delta, guaranteed_epsilon, hypergeometric_pmf, lipschitz_level, lk_bound,
                          lower_bound_epsilon, phase_diagram, replace_one_level, sharp_gap_closed_form,
                          stability_threshold, stirling_approximation, subbag_params, tightness_report)

FIG = BoundParams(500, 0.5, 1 / 1996)


# ------------------------------------------------------------ threshold


def test_threshold_examples():
    # (1 + 1/499) / 2000 collapses to 1/1996
    assert math.isclose(stability_threshold(FIG), 1 / 1996, rel_tol=1e-14)
    assert abs(stability_threshold(FIG) - 5.01002e-4) < 1e-9
    assert stability_threshold(BoundParams(1000, 0.5)) == 2.5e-4
    assert math.isclose(guaranteed_epsilon(FIG, 0.05), 0.1001001, abs_tol=1e-6)
    assert math.isclose(guaranteed_delta(FIG, 0.1), stability_threshold(FIG) / 0.01, rel_tol=1e-15)


@settings(max_examples=200)
@given(st.integers(2, 10**4), st.data())
def test_simplified_form(n, data):
    m = data.draw(st.integers(1, n - 1))
    p = m / n
    q = p * (1 - p) / (n - 1)
    simplified = p / (1 - p) / (4 * (n - 1))
    assert math.isclose(stability_threshold(BoundParams(n, p, q)), simplified, rel_tol=1e-14)
    # the exact subbagging q never exceeds the extremal one
    assert stability_threshold(subbag_params(n, m)) <= simplified * (1 + 1e-14)


def test_bound_params_validation():
    for kwargs in ({"n": 1, "p": 0.5}, {"n": 5, "p": 0.0}, {"n": 5, "p": 1.0}, {"n": 5, "p": 0.5, "q": -0.1},
                   {"n": 5, "p": 0.5, "q": 0.1}, {"n": 5, "p": 0.5, "B": 0}):
        with pytest.raises(DomainError):
            BoundParams(**kwargs)
    with pytest.raises(DomainError):
        guaranteed_epsilon(FIG, 0.0)
    with pytest.raises(DomainError):
        guaranteed_delta(FIG, 0.0)


# ------------------------------------------------------------ finite B


def test_finite_b_examples():
    # sqrt((2/10^4) ln 80)
    assert math.isclose(finite_b_inflation(10**4, 0.05), 0.0296041437, abs_tol=1e-10)
    assert finite_b_inflation(math.inf, 0.05) == 0.0
    for bad in (0.0, 1.0, 1.5):
        with pytest.raises(DomainError):
            finite_b_inflation(100, bad)


@settings(max_examples=100)
@given(st.floats(1e-3, 1.0), st.floats(1e-3, 0.999))
def test_bag_count_rule(eps, delta):
    B = math.ceil(2 / eps**2 * math.log(4 / delta))
    assert finite_b_inflation(B, delta) <= eps * (1 + 1e-12)


def test_finite_b_delta():
    t = finite_b_inflation(1000, 0.05)
    assert finite_b_delta(FIG, t / 2, 1000, 0.05) == 1.0
    eps = t + 0.1
    assert math.isclose(finite_b_delta(FIG, eps, 1000, 0.05), stability_threshold(FIG) / 0.01 + 0.05, rel_tol=1e-12)


# ------------------------------------------------------------ hypergeometric


def test_hypergeometric_examples():
    assert math.isclose(hypergeometric_pmf(9, 2, 5, 1), 70 / 126, rel_tol=1e-13)
    assert hypergeometric_pmf(9, 0, 5, 0) == pytest.approx(1.0, abs=1e-15)
    assert hypergeometric_pmf(9, 2, 5, 3) == 0.0
    for args in ((9, 10, 5, 1), (9, 2, 10, 1), (9, 2.5, 5, 1), (-1, 0, 0, 0)):
        with pytest.raises(DomainError):
            hypergeometric_pmf(*args)


@pytest.mark.parametrize("N", range(0, 13))
def test_hypergeometric_against_rationals(N):
    for K in range(N + 1):
        for m in range(N + 1):
            total = 0.0
            for h in range(0, m + 1):
                exact = Fraction(math.comb(K, h) * math.comb(N - K, m - h), math.comb(N, m))
                got = hypergeometric_pmf(N, K, m, h)
                assert abs(got - float(exact)) <= 1e-13 * float(exact) + (0.0 if exact else 0.0)
                total += got
            assert abs(total - 1.0) < 1e-12


def test_hypergeometric_large_population():
    v = hypergeometric_pmf(10**4, 2000, 5000, 1000)
    assert 0.0 < v < 1.0 and math.isfinite(v)


# ------------------------------------------------------------ tightness


def test_lower_bound_example():
    assert math.isclose(lower_bound_epsilon(10, 5, 0.2), 0.7 * 0.5 * 70 / 126, rel_tol=1e-13)
    assert math.isclose(lower_bound_epsilon(10, 5, 0.2), 0.1944444444444, abs_tol=1e-12)
    for bad in ((10, 5, 0.0), (10, 5, 0.5), (10, 0, 0.2), (10, 10, 0.2)):
        with pytest.raises(DomainError):
            lower_bound_epsilon(*bad)


def test_sharp_gap_examples():
    assert math.isclose(sharp_gap_closed_form(4, 2, 0.25), 1 / 6, rel_tol=1e-14)
    assert math.isclose(sharp_gap_closed_form(10, 5, 0.2), 2 / 9, rel_tol=1e-14)


def test_decimal_delta_is_floored_exactly():
    # 10 * 0.3 is 3 as a decimal even though the float product is 3.0000000000000004 or 2.9999999999999996
    assert tightness_report(10, 5, 0.3)["floor_n_delta"] == 3
    assert tightness_report(10, 5, 0.3)["n_delta_is_integer"]
    assert not tightness_report(10, 5, 0.25)["n_delta_is_integer"]


def test_stirling_cross_check():
    exact = lower_bound_epsilon(500, 250, 0.2)
    approx = stirling_approximation(500, 0.5, 0.2)
    assert abs(exact - approx) <= 0.1 * approx


def canonical_gap(n, m, delta):
    K = tightness_report(n, m, delta)["K"]
    D = Dataset(np.array([1.0] * K + [0.0] * (n - K)), np.zeros(n))
    prof = audit(BaggedPredictor(ThresholdLearner(n, K), ResamplingScheme.subbag(n, m), Exact()), D, 0.0)
    return prof.perturbations, K


@pytest.mark.parametrize("n", range(3, 13))
def test_sharp_gap_matches_exact_audit(n):
    for delta in (0.1, 0.2, 0.3, 0.4):
        for m in range(1, n):
            L, K = canonical_gap(n, m, delta)
            gap = sharp_gap_closed_form(n, m, delta)
            assert np.all(np.abs(L[:K] - gap) <= 1e-12), (n, m, delta)


def test_canonical_ten():
    L, K = canonical_gap(10, 5, 0.2)
    assert K == 3
    np.testing.assert_allclose(L[:3], 2 / 9, atol=1e-12)


@pytest.mark.parametrize("n", [5, 10, 20, 50, 200])
def test_gap_dominates_lower_bound(n):
    for delta in np.linspace(0.01, 0.49, 25):
        for m in range(1, n, max(1, n // 10)):
            assert sharp_gap_closed_form(n, m, float(delta)) >= lower_bound_epsilon(n, m, float(delta)) - 1e-15


# ------------------------------------------------------------ expectation and l_k


def test_expectation_examples():
    assert math.isclose(expectation_beta(FIG, 10**4), 0.0474494, abs_tol=1e-6)
    assert math.isclose(math.sqrt(stability_threshold(FIG)), 0.0223831, abs_tol=1e-7)
    assert math.isclose(math.sqrt(2 * math.pi / 10**4), 0.0250663, abs_tol=1e-7)
    assert expectation_beta(FIG, math.inf) == math.sqrt(stability_threshold(FIG))
    assert expectation_beta(FIG) == math.sqrt(stability_threshold(FIG))
    P = BoundParams(500, 0.5, 1 / 1996, L=3.0)
    assert lipschitz_level(P, 10**4) == 3.0 * expectation_beta(P, 10**4)
    assert replace_one_level(P, 10**4) == 6.0 * expectation_beta(P, 10**4)


def test_lk_examples():
    C = math.sqrt(stability_threshold(FIG))
    assert lk_bound(FIG, 2) == pytest.approx(C, rel=1e-14)
    assert lk_bound(FIG, 1) == pytest.approx(C, rel=1e-14)
    assert lk_bound(FIG, 4) == pytest.approx(math.sqrt(C * 0.5), rel=1e-14)
    assert abs(lk_bound(FIG, 4) - 0.105791) < 1e-6
    assert lk_bound(FIG, math.inf) == 0.5
    with pytest.raises(DomainError):
        lk_bound(FIG, 0)


def test_lk_caps_at_p():
    # tiny n and large p push sqrt(c) above p, so C = p
    P = BoundParams(2, 0.05)
    assert lk_bound(P, 2) == 0.05 or math.sqrt(stability_threshold(P)) < 0.05


# ------------------------------------------------------------ phase diagram


def test_phase_diagram():
    guarantee, tight = phase_diagram(500, 250)
    assert len(guarantee.delta) == 200
    assert guarantee.delta[0] == pytest.approx(1e-3) and guarantee.delta[-1] == pytest.approx(0.499)
    assert np.all(np.diff(guarantee.epsilon) < 0)
    assert np.all(tight.epsilon < guarantee.epsilon)
    assert np.all(tight.epsilon > 0)
    g, _ = phase_diagram(500, 250, [0.05])
    assert abs(g.epsilon[0] - 0.1001001) < 1e-6


def test_phase_diagram_grid_errors():
    for grid in ([], [0.0, 0.1], [0.1, 0.5], [0.2, 0.1], [[0.1]]):
        with pytest.raises(DomainError):
            phase_diagram(50, 25, grid)
    assert len(default_grid()) == 200
