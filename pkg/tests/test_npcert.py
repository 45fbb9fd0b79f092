from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphcert.errors import AbstainRequired, InvalidInput, InvalidParameter
from graphcert.npcert import (certified_radius, condition_holds, exact_beta, lower_bound_yA,
                              oracle_end_to_end, oracle_greedy_bounds, oracle_region_probs,
                              random_classifier_family, region_table, run_oracle_suite,
                              upper_bound_yB)

F = Fraction


def test_worked_example_one_flip():
    t = region_table(1, 0.9)
    assert lower_bound_yA(F(99, 100), t) == F(91, 100)
    assert upper_bound_yB(F(1, 100), t) == F(9, 100)
    cert = certified_radius(0.99, 0.01, 0.9, l_max=10)
    assert cert.radius == 1
    assert cert.next_lower_yA == pytest.approx(0.19) and cert.next_upper_yB == pytest.approx(0.81)


def test_worked_example_no_flip():
    assert certified_radius(0.9, 0.1, 0.9, l_max=10).radius == 0
    assert certified_radius(0.9, 0.1, 0.9, l_max=0).radius == 0


@pytest.mark.parametrize("l, beta", [(1, 0.7), (3, 0.6), (5, 0.9), (8, 0.7)])
def test_region_table_sums_and_ratios(l, beta):
    t = region_table(l, beta)
    b = exact_beta(beta)
    assert sum(t.prob_x().values()) == 1 and sum(t.prob_y().values()) == 1
    for r in t.regions:
        assert r.e == 2 * r.agree - l
        assert r.prob_x / r.prob_y == (b / (1 - b)) ** r.e
        assert t.prob_y()[r.e] == t.prob_x()[-r.e]
    assert [r.ratio for r in t.regions] == sorted(r.ratio for r in t.regions)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 9).flatmap(lambda n: st.tuples(
    st.lists(st.integers(0, 1), min_size=n, max_size=n),
    st.lists(st.integers(0, 1), min_size=n, max_size=n).filter(any))),
    st.sampled_from([0.6, 0.7, 0.9]))
def test_regions_match_enumeration(xd, beta):
    x, d = (np.array(v, dtype=np.uint8) for v in xd)
    t = region_table(int(d.sum()), beta)
    want = {r.e: (r.prob_x, r.prob_y) for r in t.regions}
    got = oracle_region_probs(x, d, beta)
    assert {e: v for e, v in got.items() if v != (0, 0)} == want


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 7), st.sampled_from([0.6, 0.7, 0.9]),
       st.fractions(F(51, 100), F(999, 1000)), st.fractions(0, 1))
def test_greedy_matches_enumeration(l, beta, pA, share):
    pB = (1 - pA) * share
    x = np.zeros(8, dtype=np.uint8)
    d = np.zeros(8, dtype=np.uint8)
    d[:l] = 1
    t = region_table(l, beta)
    assert oracle_greedy_bounds(x, d, beta, pA, pB) == (lower_bound_yA(pA, t),
                                                         upper_bound_yB(pB, t))


@pytest.mark.parametrize("l", [1, 5, 20, 64])
@pytest.mark.parametrize("beta", [0.7, 0.99])
def test_log_mode_agrees_with_exact(l, beta):
    ex, lg = region_table(l, beta, "exact"), region_table(l, beta, "log")
    for pA in (0.6, 0.9, 0.999):
        assert float(lower_bound_yA(F(pA), ex)) == pytest.approx(lower_bound_yA(pA, lg), abs=1e-12)
        assert float(upper_bound_yB(F(1 - pA), ex)) == pytest.approx(
            upper_bound_yB(1 - pA, lg), abs=1e-12)


def test_auto_switches_to_log_above_64():
    assert region_table(64, 0.9).mode == "exact"
    assert region_table(65, 0.9).mode == "log"
    cert = certified_radius(0.9999999, 1e-7, 0.99, l_max=200)
    assert cert.numeric_mode in ("exact", "log")


def test_constant_classifier_hits_cap():
    cert = certified_radius(F(1), F(0), 0.9, l_max=6, mode="exact")
    assert cert.radius == 6
    res = oracle_end_to_end(lambda b: np.zeros(len(b), dtype=np.int64),
                            np.array([1, 0, 1, 1, 0, 0], dtype=np.uint8), 0.9)
    assert res.radius == 6 and res.ok


@settings(max_examples=30, deadline=None)
@given(st.floats(0.51, 0.999), st.floats(0.51, 0.999), st.sampled_from([0.7, 0.9]))
def test_radius_monotone_in_pA(p1, p2, beta):
    lo, hi = sorted((p1, p2))
    assert (certified_radius(lo, 1 - lo, beta, 30).radius
            <= certified_radius(hi, 1 - hi, beta, 30).radius)


def test_paranoid_scan_agrees_on_radius():
    for pA in (0.6, 0.8, 0.95, 0.999):
        fast = certified_radius(pA, 1 - pA, 0.8, 40)
        slow = certified_radius(pA, 1 - pA, 0.8, 40, paranoid=True)
        assert fast.radius == slow.radius
        assert slow.monotone
        assert slow.certified_sizes == tuple(range(1, slow.radius + 1))


def test_input_validation():
    with pytest.raises(AbstainRequired):
        certified_radius(0.5, 0.5, 0.9, 5)
    with pytest.raises(InvalidInput):
        certified_radius(0.8, 0.3, 0.9, 5)
    with pytest.raises(InvalidParameter):
        region_table(3, 0.5)
    with pytest.raises(InvalidInput):
        region_table(0, 0.9)
    with pytest.raises(InvalidInput):
        oracle_region_probs(np.zeros(13, np.uint8), np.ones(13, np.uint8), 0.9)


def test_beta_read_through_repr():
    assert exact_beta(0.7) == F(7, 10)
    assert exact_beta(F(2, 3)) == F(2, 3)


def test_condition_at_zero_is_plain_comparison():
    assert condition_holds(0.6, 0.4, 0, 0.9)[0]


def test_end_to_end_small_sample():
    rng = np.random.default_rng(7)
    for _ in range(6):
        f = random_classifier_family(rng, 6, 3)
        x = rng.integers(0, 2, size=6).astype(np.uint8)
        res = oracle_end_to_end(f, x, 0.8, num_classes=3)
        assert res.ok, res.violations[:1]


def test_oracle_suite_quick():
    report = run_oracle_suite(max_bits=8, betas=(0.7,), max_l=4, e2e_classifiers=3, e2e_bits=6)
    assert report["violations"] == []
    assert report["max_abs_error"] <= 1e-12
