"""Two-sided Fisher exact, Mann-Whitney U, Wilcoxon signed-rank and t tests.

Exact regimes use integer arithmetic on doubled midranks so ties never turn
the ``>=`` comparisons of the tail sums into floating point guesses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special
from scipy import stats as _sps

MW_EXACT_MAX_N = 20
WILCOXON_EXACT_MAX_N = 15
# relative slack when comparing hypergeometric probabilities to the observed one
_FISHER_RTOL = 1e-7


@dataclass(frozen=True)
class TestResult:
    method: str
    statistic: float
    p_value: float
    sided: str = "two_sided"
    exact: bool = True
    n_zero_dropped: int = 0
    flags: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p_value {self.p_value} outside [0, 1]")


def _clip(p: float) -> float:
    return min(1.0, max(0.0, float(p)))


def _normal_two_sided(z: float) -> float:
    return _clip(math.erfc(abs(z) / math.sqrt(2.0)))


# -- Fisher --------------------------------------------------------------------


def fisher_exact(a: int, b: int, c: int, d: int) -> TestResult:
    """Fisher's exact test on the 2x2 table ``[[a, b], [c, d]]``.

    The two-sided p-value sums the probabilities of all tables with the same
    margins that are no more likely than the observed one.  The statistic is
    the observed ``a`` cell.
    """
    for v in (a, b, c, d):
        if v < 0 or int(v) != v:
            raise ValueError("counts must be non-negative integers")
    a, b, c, d = int(a), int(b), int(c), int(d)
    n = a + b + c + d
    if n == 0:
        raise ValueError("empty table")
    r1, r2, c1, c2 = a + b, c + d, a + c, b + d
    if 0 in (r1, r2, c1, c2):
        return TestResult("fisher_exact", float(a), 1.0, flags=("degenerate_margin",))
    lo, hi = max(0, c1 - r2), min(r1, c1)
    x = np.arange(lo, hi + 1)
    logp = (
        special.gammaln(r1 + 1) - special.gammaln(x + 1) - special.gammaln(r1 - x + 1)
        + special.gammaln(r2 + 1) - special.gammaln(c1 - x + 1) - special.gammaln(r2 - c1 + x + 1)
        - special.gammaln(n + 1) + special.gammaln(c1 + 1) + special.gammaln(c2 + 1)
    )
    obs = logp[a - lo]
    keep = logp <= obs + math.log1p(_FISHER_RTOL)
    p = math.exp(special.logsumexp(logp[keep]))
    return TestResult("fisher_exact", float(a), _clip(p))


# -- ranks ---------------------------------------------------------------------


def doubled_midranks(values: Sequence[float]) -> tuple[np.ndarray, list[int]]:
    """Midranks times two (always integers) and the sizes of tie groups."""
    arr = np.asarray(values, dtype=float)
    order = np.argsort(arr, kind="mergesort")
    ranks = np.empty(len(arr), dtype=np.int64)
    ties = []
    i = 0
    while i < len(arr):
        j = i
        while j + 1 < len(arr) and arr[order[j + 1]] == arr[order[i]]:
            j += 1
        # positions i..j (0-based) share ranks i+1..j+1; doubled midrank = i+j+2
        ranks[order[i : j + 1]] = i + j + 2
        ties.append(j - i + 1)
        i = j + 1
    return ranks, ties


def _subset_sum_counts(weights: Sequence[int], k: int | None = None) -> np.ndarray:
    """ways[s] (or ways[k][s]) = number of subsets (of size k) with weight sum s."""
    total = int(sum(weights))
    if k is None:
        ways = np.zeros(total + 1, dtype=object)
        ways[0] = 1
        for w in weights:
            ways[w:] = ways[w:] + ways[: total + 1 - w].copy()
        return ways
    ways = np.zeros((k + 1, total + 1), dtype=object)
    ways[0, 0] = 1
    for w in weights:
        for j in range(k, 0, -1):
            ways[j, w:] = ways[j, w:] + ways[j - 1, : total + 1 - w]
    return ways[k]


# -- Mann-Whitney ----------------------------------------------------------------


def mann_whitney_u(x: Sequence[float], y: Sequence[float]) -> TestResult:
    """Two-sided Mann-Whitney U test; the statistic is U for ``x``.

    Exact (permutation over midranks) when ``len(x) + len(y) <= 20``,
    otherwise normal approximation with tie and continuity corrections.
    """
    n, m = len(x), len(y)
    if n == 0 or m == 0:
        raise ValueError("both samples must be non-empty")
    pooled = list(x) + list(y)
    big_n = n + m
    ranks2, ties = doubled_midranks(pooled)
    t2 = int(ranks2[:n].sum())
    u = t2 / 2.0 - n * (n + 1) / 2.0
    if len(ties) == 1:
        return TestResult("mann_whitney_u", u, 1.0, exact=big_n <= MW_EXACT_MAX_N, flags=("all_tied",))
    center2 = n * (big_n + 1)  # 2 * E[rank sum of x]
    if big_n <= MW_EXACT_MAX_N:
        ways = _subset_sum_counts([int(r) for r in ranks2], k=n)
        dev = abs(t2 - center2)
        s = np.arange(len(ways))
        hit = np.abs(s - center2) >= dev
        p = int(ways[hit].sum()) / math.comb(big_n, n)
        return TestResult("mann_whitney_u", u, _clip(p), exact=True)
    tie_term = sum(t**3 - t for t in ties) / (big_n * (big_n - 1))
    var = n * m / 12.0 * ((big_n + 1) - tie_term)
    if var <= 0:
        return TestResult("mann_whitney_u", u, 1.0, exact=False, flags=("zero_variance",))
    z = max(abs(u - n * m / 2.0) - 0.5, 0.0) / math.sqrt(var)
    return TestResult("mann_whitney_u", u, _normal_two_sided(z), exact=False)


# -- Wilcoxon signed-rank ----------------------------------------------------------


def wilcoxon_signed_rank(pairs: Sequence[tuple[float, float]]) -> TestResult:
    """Two-sided Wilcoxon signed-rank test on ``(pre, post)`` pairs.

    Zero differences are dropped and counted.  The statistic is
    ``min(W+, W-)``.  Exact enumeration for at most 15 non-zero pairs.
    """
    diffs = [float(post) - float(pre) for pre, post in pairs]
    nz = [d for d in diffs if d != 0.0]
    dropped = len(diffs) - len(nz)
    if not nz:
        return TestResult("wilcoxon_signed_rank", 0.0, 1.0, n_zero_dropped=dropped, flags=("all_zero",))
    n = len(nz)
    ranks2, ties = doubled_midranks([abs(d) for d in nz])
    w_plus2 = int(sum(r for r, d in zip(ranks2, nz) if d > 0))
    total2 = int(ranks2.sum())
    stat = min(w_plus2, total2 - w_plus2) / 2.0
    if n <= WILCOXON_EXACT_MAX_N:
        ways = _subset_sum_counts([int(r) for r in ranks2])
        # compare 2*W+ against the total: |2*s - T| >= |2*W+ - T| in doubled units
        s = np.arange(len(ways))
        hit = np.abs(2 * s - total2) >= abs(2 * w_plus2 - total2)
        p = int(ways[hit].sum()) / 2**n
        return TestResult("wilcoxon_signed_rank", stat, _clip(p), exact=True, n_zero_dropped=dropped)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - sum(t**3 - t for t in ties) / 48.0
    if var <= 0:
        return TestResult("wilcoxon_signed_rank", stat, 1.0, exact=False, n_zero_dropped=dropped, flags=("zero_variance",))
    z = max(abs(w_plus2 / 2.0 - n * (n + 1) / 4.0) - 0.5, 0.0) / math.sqrt(var)
    return TestResult("wilcoxon_signed_rank", stat, _normal_two_sided(z), exact=False, n_zero_dropped=dropped)


# -- t tests ---------------------------------------------------------------------


def t_test(x: Sequence[float], y: Sequence[float] | None = None, paired: bool = False) -> TestResult:
    """Welch two-sample t test, or paired t test on ``y - x`` when ``paired``."""
    xa = np.asarray(x, dtype=float)
    if paired:
        if y is None or len(y) != len(xa):
            raise ValueError("paired test needs equal-length samples")
        d = np.asarray(y, dtype=float) - xa
        if len(d) < 2:
            raise ValueError("need at least two pairs")
        sd = d.std(ddof=1)
        if sd == 0:
            return TestResult("t_test", 0.0, 1.0 if d.mean() == 0 else 0.0, exact=False, flags=("zero_variance",))
        t = d.mean() / (sd / math.sqrt(len(d)))
        df = len(d) - 1
    else:
        ya = np.asarray(y, dtype=float)
        if len(xa) < 2 or len(ya) < 2:
            raise ValueError("need at least two observations per sample")
        vx, vy = xa.var(ddof=1) / len(xa), ya.var(ddof=1) / len(ya)
        if vx + vy == 0:
            return TestResult("t_test", 0.0, 1.0 if xa.mean() == ya.mean() else 0.0, exact=False, flags=("zero_variance",))
        t = (ya.mean() - xa.mean()) / math.sqrt(vx + vy)
        df = (vx + vy) ** 2 / (vx**2 / (len(xa) - 1) + vy**2 / (len(ya) - 1))
    p = 2.0 * _sps.t.sf(abs(t), df)
    return TestResult("t_test", float(t), _clip(p), exact=False)


def log_transform(sample: Sequence[float]) -> list[float]:
    for i, v in enumerate(sample):
        if not v > 0:
            raise ValueError(f"non-positive value {v!r} at index {i}")
    return [math.log(v) for v in sample]
