import math
from fractions import Fraction
from itertools import combinations, product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from decaymap.stats import (
    fisher_exact,
    log_transform,
    mann_whitney_u,
    t_test,
    wilcoxon_signed_rank,
)

# -- oracles ------------------------------------------------------------------------


def fisher_oracle(a, b, c, d):
    """Enumerate every table with the observed margins, in exact arithmetic."""
    r1, c1, n = a + b, a + c, a + b + c + d

    def prob(x):
        return Fraction(math.comb(c1, x) * math.comb(n - c1, r1 - x), math.comb(n, r1))

    lo, hi = max(0, r1 + c1 - n), min(r1, c1)
    obs = prob(a)
    return float(sum(prob(x) for x in range(lo, hi + 1) if prob(x) <= obs))


def midranks(values):
    order = sorted(values)
    return [sum(i + 1 for i, o in enumerate(order) if o == v) / order.count(v) for v in values]


def mw_oracle(x, y):
    pooled = list(x) + list(y)
    r = midranks(pooled)
    n = len(x)
    centre = n * (len(pooled) + 1) / 2
    obs = abs(sum(r[:n]) - centre)
    hits = total = 0
    for idx in combinations(range(len(pooled)), n):
        total += 1
        hits += abs(sum(r[i] for i in idx) - centre) >= obs - 1e-9
    return hits / total


def wilcoxon_oracle(pairs):
    d = [post - pre for pre, post in pairs if post != pre]
    r = midranks([abs(v) for v in d])
    total = sum(r)
    obs = abs(2 * sum(ri for ri, v in zip(r, d) if v > 0) - total)
    hits = 0
    for signs in product((0, 1), repeat=len(d)):
        hits += abs(2 * sum(ri for ri, s in zip(r, signs) if s) - total) >= obs - 1e-9
    return hits / 2 ** len(d)


# -- Fisher -------------------------------------------------------------------------


def test_fisher_degenerate_margin():
    r = fisher_exact(0, 7, 0, 4)
    assert r.p_value == 1.0 and r.flags


def test_fisher_perfect_separation():
    assert fisher_exact(5, 0, 0, 5).p_value == pytest.approx(2 / 252, abs=1e-12)


def test_fisher_rejects_bad_counts():
    with pytest.raises(ValueError):
        fisher_exact(-1, 2, 3, 4)


@settings(max_examples=200, deadline=None)
@given(st.tuples(*[st.integers(0, 10)] * 4).filter(lambda t: sum(t) > 0))
def test_fisher_matches_enumeration(t):
    assert abs(fisher_exact(*t).p_value - fisher_oracle(*t)) < 1e-10


def test_fisher_symmetric_and_large_totals():
    assert fisher_exact(3, 9, 7, 2).p_value == pytest.approx(fisher_exact(7, 2, 3, 9).p_value, abs=1e-14)
    big = fisher_exact(120_000, 130_000, 125_000, 125_000)
    assert 0 <= big.p_value < 1e-6
    assert fisher_exact(80, 20, 72, 28).p_value == pytest.approx(sps.fisher_exact([[80, 20], [72, 28]])[1], rel=1e-9)


# -- Mann-Whitney -------------------------------------------------------------------


def test_mw_identical_multisets():
    assert mann_whitney_u([1, 2, 2, 5], [5, 2, 1, 2]).p_value == 1.0


def test_mw_full_separation():
    r = mann_whitney_u([1, 2, 3], [4, 5, 6])
    assert r.statistic == 0 and r.exact
    assert r.p_value == pytest.approx(0.1, abs=1e-12)


def test_mw_all_tied_and_empty():
    assert mann_whitney_u([3, 3], [3, 3, 3]).p_value == 1.0
    with pytest.raises(ValueError):
        mann_whitney_u([], [1])


@settings(max_examples=80, deadline=None)
@given(
    st.lists(st.integers(0, 6), min_size=1, max_size=8),
    st.lists(st.integers(0, 6), min_size=1, max_size=8),
)
def test_mw_exact_matches_enumeration(x, y):
    assert abs(mann_whitney_u(x, y).p_value - mw_oracle(x, y)) < 1e-10


@pytest.mark.parametrize("seed", [1, 5, 8, 9])  # p spans roughly 0.005 to 0.2
def test_mw_approximation_vs_permutation_oracle(seed):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(0, 1, 50), rng.normal(0.3, 1, 50)
    x[:5] = np.round(x[:5])  # a few ties
    y[:5] = np.round(y[:5])
    got = mann_whitney_u(x, y)
    assert not got.exact
    pooled = np.concatenate([x, y])
    ranks = sps.rankdata(pooled)
    centre = 50 * 101 / 2
    obs = abs(ranks[:50].sum() - centre)
    perm = np.argsort(rng.random((100_000, 100)), axis=1)[:, :50]
    sums = ranks[perm].sum(axis=1)
    oracle = np.mean(np.abs(sums - centre) >= obs - 1e-9)
    assert 0.001 < oracle < 0.5  # informative regime
    assert abs(got.p_value - oracle) < 0.005


# -- Wilcoxon -----------------------------------------------------------------------


def test_wilcoxon_no_change():
    r = wilcoxon_signed_rank([(1, 1), (2, 2), (3, 3)])
    assert r.p_value == 1.0 and r.n_zero_dropped == 3 and r.flags


def test_wilcoxon_five_improvements():
    r = wilcoxon_signed_rank([(10, 9), (8, 6), (7, 4), (9, 5), (12, 7)])
    assert r.statistic == 0 and r.p_value == pytest.approx(0.0625, abs=1e-12)


def test_wilcoxon_drops_zeros():
    r = wilcoxon_signed_rank([(1, 1), (1, 2), (3, 1)])
    assert r.n_zero_dropped == 1


@settings(max_examples=80, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), min_size=1, max_size=12))
def test_wilcoxon_exact_matches_enumeration(pairs):
    if all(a == b for a, b in pairs):
        return
    assert abs(wilcoxon_signed_rank(pairs).p_value - wilcoxon_oracle(pairs)) < 1e-10


@pytest.mark.parametrize("seed", range(3))
def test_wilcoxon_approximation_vs_sign_flip_oracle(seed):
    rng = np.random.default_rng(12 + seed)
    pre = rng.normal(10, 1, 100)
    post = pre + rng.normal(0.2, 1, 100)
    got = wilcoxon_signed_rank(list(zip(pre, post)))
    assert not got.exact
    d = post - pre
    r = sps.rankdata(np.abs(d))
    total = r.sum()
    obs = abs(2 * r[d > 0].sum() - total)
    signs = rng.random((100_000, 100)) < 0.5
    sims = np.abs(2 * (signs * r).sum(axis=1) - total)
    oracle = np.mean(sims >= obs - 1e-9)
    assert 0.001 < oracle < 0.5
    assert abs(got.p_value - oracle) < 0.005


# -- properties ---------------------------------------------------------------------


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=30), st.lists(st.floats(-5, 5), min_size=1, max_size=30))
def test_label_symmetry(x, y):
    assert mann_whitney_u(x, y).p_value == pytest.approx(mann_whitney_u(y, x).p_value, abs=1e-12)
    k = min(len(x), len(y))
    pairs = list(zip(x[:k], y[:k]))
    flipped = [(b, a) for a, b in pairs]
    assert wilcoxon_signed_rank(pairs).p_value == pytest.approx(wilcoxon_signed_rank(flipped).p_value, abs=1e-12)


def test_null_rejection_rate_is_controlled():
    rng = np.random.default_rng(2024)
    rejects = {"mw": 0, "wx": 0, "fisher": 0}
    for _ in range(1000):
        n = int(rng.integers(5, 40))
        x, y = rng.normal(size=n), rng.normal(size=n)
        rejects["mw"] += mann_whitney_u(x, y).p_value < 0.05
        rejects["wx"] += wilcoxon_signed_rank(list(zip(x, y))).p_value < 0.05
        a, c = rng.binomial(n, 0.3, 2)
        rejects["fisher"] += fisher_exact(int(a), n - int(a), int(c), n - int(c)).p_value < 0.05
    assert all(v <= 70 for v in rejects.values()), rejects


# -- t test, log ----------------------------------------------------------------------


def test_t_test_matches_scipy():
    rng = np.random.default_rng(3)
    x, y = rng.normal(0, 1, 20), rng.normal(0.5, 2, 25)
    assert t_test(x, y).p_value == pytest.approx(sps.ttest_ind(x, y, equal_var=False).pvalue, rel=1e-9)
    z = x + rng.normal(0.3, 0.5, 20)
    assert t_test(x, z, paired=True).p_value == pytest.approx(sps.ttest_rel(x, z).pvalue, rel=1e-9)
    with pytest.raises(ValueError):
        t_test([1.0], [2.0, 3.0])


def test_log_transform_examples():
    assert log_transform([1]) == [0.0]
    assert log_transform([math.e, math.e**2]) == pytest.approx([1, 2], abs=1e-15)
    with pytest.raises(ValueError, match="index 2"):
        log_transform([1, 2, 0])


def skewness(v):
    v = np.asarray(v, dtype=float)
    m = v.mean()
    return ((v - m) ** 3).mean() / ((v - m) ** 2).mean() ** 1.5


def test_log_transform_reduces_skew():
    sample = [1, 1, 2, 2, 3, 3, 4, 5, 8, 13, 40, 120]
    assert skewness(log_transform(sample)) < skewness(sample)
