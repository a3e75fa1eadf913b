"""Pre/post evaluation of reengineering interventions against matched controls."""

from __future__ import annotations

import bisect
import json
import statistics
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

from .code_metrics import CodeMetrics
from .ingest import CommitRecord, FileIdentityMap
from .stats import TestResult, fisher_exact, mann_whitney_u, wilcoxon_signed_rank

DAY = 86_400
ALPHA = 0.05
INTERVENTION_TYPES = ("dead_code_removal", "ccn_decomposition", "large_class_decomposition", "platformization", "custom")
# sloc bucket edges: [0,4), [4,16), [16,64), ...
DEFAULT_STRATA = tuple(4**k for k in range(1, 12))


class UnknownCommitError(KeyError):
    def __init__(self, missing: Sequence[str]):
        self.missing = sorted(missing)
        super().__init__(f"unknown commit id(s): {', '.join(self.missing)}")

    def __str__(self) -> str:
        return self.args[0]


class ZeroControlScoreError(ValueError):
    pass


@dataclass(frozen=True)
class InterventionSet:
    name: str
    type: str
    reengineering_commit_ids: frozenset[str]
    touched_identities: frozenset[str]
    t_start: int
    t_end: int
    pre_window: tuple[int, int]  # [lo, t_start)
    post_window: tuple[int, int]  # (t_end, hi]

    def in_pre(self, ts: int) -> bool:
        return self.pre_window[0] <= ts < self.pre_window[1]

    def in_post(self, ts: int) -> bool:
        return self.post_window[0] < ts <= self.post_window[1]


def resolve_intervention(
    commit_ids: Iterable[str],
    commits: Sequence[CommitRecord],
    identity_map: FileIdentityMap,
    name: str = "intervention",
    type: str = "custom",
    pre_days: float = 90,
    post_days: float = 90,
) -> InterventionSet:
    """Collect the identities touched by the reengineering commits and set the windows."""
    if type not in INTERVENTION_TYPES:
        raise ValueError(f"unknown intervention type {type!r}; expected one of {INTERVENTION_TYPES}")
    ids = set(commit_ids)
    if not ids:
        raise ValueError("intervention names no commits")
    by_id = {c.commit_id: c for c in commits}
    missing = ids - by_id.keys()
    if missing:
        raise UnknownCommitError(missing)
    touched = set()
    for cid in ids:
        touched.update(identity_map.commit_files[cid])
    ts = [by_id[c].timestamp for c in ids]
    t0, t1 = min(ts), max(ts)
    return InterventionSet(
        name=name,
        type=type,
        reengineering_commit_ids=frozenset(ids),
        touched_identities=frozenset(touched),
        t_start=t0,
        t_end=t1,
        pre_window=(t0 - int(pre_days * DAY), t0),
        post_window=(t1, t1 + int(post_days * DAY)),
    )


# -- matching -----------------------------------------------------------------------


def size_stratum(sloc: int, edges: Sequence[int] = DEFAULT_STRATA) -> int:
    return bisect.bisect_right(edges, sloc)


@dataclass(frozen=True)
class MatchedPair:
    reengineered: str
    control: str
    language: str
    size_stratum: int
    pre_centrality_distance: float


@dataclass
class Matching:
    pairs: list[MatchedPair]
    unmatched: list[str] = field(default_factory=list)


def match_controls(
    treated: InterventionSet | Iterable[str],
    candidate_pool: Iterable[str],
    pre_scores: Mapping[str, float],
    code_metrics: Mapping[str, CodeMetrics],
    strata: Sequence[int] = DEFAULT_STRATA,
) -> Matching:
    """Greedy nearest-centrality matching without replacement.

    Treated files are served in descending pre-period centrality.  Each takes
    the unused candidate of the same language and sloc stratum with the
    smallest centrality distance (ties by identity).  Treated files lacking
    metrics, a score or any eligible candidate are reported as unmatched.
    """
    if any(b <= a for a, b in zip(strata, strata[1:])):
        raise ValueError("strata edges must be strictly increasing")
    touched = set(treated.touched_identities if isinstance(treated, InterventionSet) else treated)
    pool = sorted(set(candidate_pool) - touched)
    unmatched = sorted(t for t in touched if t not in code_metrics or t not in pre_scores)
    order = sorted(
        (t for t in touched if t in code_metrics and t in pre_scores),
        key=lambda t: (-pre_scores[t], t),
    )
    buckets: dict[tuple[str, int], list[str]] = {}
    for c in pool:
        if c in code_metrics and c in pre_scores:
            cm = code_metrics[c]
            buckets.setdefault((cm.language, size_stratum(cm.sloc, strata)), []).append(c)
    used: set[str] = set()
    pairs = []
    for t in order:
        cm = code_metrics[t]
        key = (cm.language, size_stratum(cm.sloc, strata))
        options = [c for c in buckets.get(key, ()) if c not in used]
        if not options:
            unmatched.append(t)
            continue
        best = min(options, key=lambda c: (abs(pre_scores[c] - pre_scores[t]), c))
        used.add(best)
        pairs.append(MatchedPair(t, best, key[0], key[1], abs(pre_scores[best] - pre_scores[t])))
    return Matching(pairs, sorted(unmatched))


def adjusted_centrality(pair: MatchedPair, scores_pre: Mapping[str, float], scores_post: Mapping[str, float]) -> tuple[float, float]:
    """Treated-over-control centrality ratio before and after."""
    cp, cq = scores_pre.get(pair.control, 0.0), scores_post.get(pair.control, 0.0)
    if not cp or not cq:
        raise ZeroControlScoreError(f"control {pair.control} has zero centrality")
    return scores_pre.get(pair.reengineered, 0.0) / cp, scores_post.get(pair.reengineered, 0.0) / cq


class OddsRatio(NamedTuple):
    value: float
    corrected: bool


def odds_ratio(pre_trigger: float, pre_clean: float, post_trigger: float, post_clean: float) -> OddsRatio:
    """``(pre_trigger * post_clean) / (pre_clean * post_trigger)``.

    A zero in either denominator cell adds 0.5 to every cell (Haldane) and
    sets ``corrected``.
    """
    cells = (pre_trigger, pre_clean, post_trigger, post_clean)
    if any(c < 0 for c in cells):
        raise ValueError("counts must be non-negative")
    if not any(cells):
        raise ValueError("all-zero table")
    corrected = pre_clean == 0 or post_trigger == 0
    if corrected:
        pre_trigger, pre_clean, post_trigger, post_clean = (c + 0.5 for c in cells)
    return OddsRatio((pre_trigger * post_clean) / (pre_clean * post_trigger), corrected)


# -- evaluation -----------------------------------------------------------------------


@dataclass
class MetricResult:
    metric: str
    evaluable: bool
    pre: dict
    post: dict
    effect_name: str
    effect: float | None = None
    test: dict | None = None
    note: str = ""


@dataclass
class HypothesisResult:
    hypothesis: str
    metric: str
    expected: str
    direction: str | None
    significant: bool
    evaluable: bool
    p_value: float | None = None


@dataclass
class ImpactReport:
    name: str
    type: str
    t_start: int
    t_end: int
    pre_window: tuple[int, int]
    post_window: tuple[int, int]
    n_touched: int
    n_pre_diffs: int
    n_post_diffs: int
    pairs: list[MatchedPair]
    unmatched: list[str]
    excluded_pairs: int
    metrics: dict[str, MetricResult]
    hypotheses: dict[str, HypothesisResult]
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        d = asdict(self)
        d["pre_window"] = list(self.pre_window)
        d["post_window"] = list(self.post_window)
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True, allow_nan=False) + "\n"

    def table(self) -> str:
        lines = [
            f"intervention {self.name} ({self.type}): {self.n_touched} files, "
            f"{self.n_pre_diffs} pre / {self.n_post_diffs} post diffs, {len(self.pairs)} matched pairs",
            f"{'hyp':<4} {'metric':<22} {'pre':>10} {'post':>10} {'effect':>16} {'test':<22} {'p':>10}  direction",
        ]
        for key, h in self.hypotheses.items():
            m = self.metrics[h.metric]
            if not m.evaluable:
                lines.append(f"{key:<4} {m.metric:<22} {'-':>10} {'-':>10} {'-':>16} {'-':<22} {'-':>10}  not evaluable: {m.note}")
                continue
            stat = {"odds_ratio": "rate", "median_ratio": "median"}.get(m.effect_name, "mean")
            pre, post = _fmt(m.pre.get(stat)), _fmt(m.post.get(stat))
            eff = f"{m.effect_name}={_fmt(m.effect)}"
            sig = "*" if h.significant else ""
            lines.append(
                f"{key:<4} {m.metric:<22} {pre:>10} {post:>10} {eff:>16} {m.test['method']:<22} "
                f"{m.test['p_value']:>10.4g}{sig:1} {h.direction}"
            )
        for w in self.warnings:
            lines.append(f"warning: {w}")
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    return "-" if v is None else f"{v:.4g}"


def _summary(values: Sequence[float]) -> dict:
    if not values:
        return {"n": 0}
    return {
        "n": len(values),
        "median": float(statistics.median(values)),
        "mean": float(statistics.fmean(values)),
    }


def _test_dict(t: TestResult) -> dict:
    return asdict(t)


def _direction(effect_name: str, effect: float | None) -> str | None:
    """Direction of the post-period value implied by the effect size."""
    if effect is None:
        return None
    # the odds ratio is pre odds over post odds, so > 1 means fewer triggers after
    neutral = 0.0 if effect_name == "mean_relative_delta" else 1.0
    sign = (effect > neutral) - (effect < neutral)
    if effect_name == "odds_ratio":
        sign = -sign
    return {-1: "decrease", 0: "none", 1: "increase"}[sign]


def evaluate_impact(
    intervention: InterventionSet,
    commits: Sequence[CommitRecord],
    identity_map: FileIdentityMap,
    dat_minutes: Mapping[str, float],
    sessions: Mapping[str, int],
    ccn_pre: Mapping[str, int],
    ccn_post: Mapping[str, int],
    matching: Matching,
    scores_pre: Mapping[str, float],
    scores_post: Mapping[str, float],
) -> ImpactReport:
    """Compute H1-H5 for one intervention.

    H1 outage odds ratio with Fisher's test; H2 and H3 post/pre median ratio of
    authoring-time proxy and sessions with Mann-Whitney; H4 adjusted
    centrality and H5 complexity with paired Wilcoxon.  A hypothesis without
    data is marked not evaluable and the rest still run.
    """
    touched = intervention.touched_identities
    pre, post = [], []
    for rec in commits:
        if rec.commit_id in intervention.reengineering_commit_ids:
            continue
        if not touched.intersection(identity_map.commit_files[rec.commit_id]):
            continue
        if intervention.in_pre(rec.timestamp):
            pre.append(rec)
        elif intervention.in_post(rec.timestamp):
            post.append(rec)

    metrics: dict[str, MetricResult] = {}
    warnings: list[str] = []

    # H1
    pt = sum(r.outage is not None for r in pre)
    qt = sum(r.outage is not None for r in post)
    m = MetricResult(
        "outage_trigger",
        False,
        {"n": len(pre), "triggers": pt, "rate": pt / len(pre) if pre else None},
        {"n": len(post), "triggers": qt, "rate": qt / len(post) if post else None},
        "odds_ratio",
    )
    if not pre or not post:
        m.note = "empty pre or post window"
    elif pt == 0 and qt == 0:
        m.note = "no outage triggers in either window"
    else:
        orr = odds_ratio(pt, len(pre) - pt, qt, len(post) - qt)
        m.evaluable = True
        m.effect = orr.value
        m.test = _test_dict(fisher_exact(pt, len(pre) - pt, qt, len(post) - qt))
        if orr.corrected:
            m.note = "Haldane 0.5 correction applied"
            warnings.append("H1 odds ratio uses Haldane correction")
    metrics[m.metric] = m

    # H2, H3
    for name, values in (("dat_proxy_minutes", dat_minutes), ("sessions", sessions)):
        a = [float(values[r.commit_id]) for r in pre]
        b = [float(values[r.commit_id]) for r in post]
        m = MetricResult(name, False, _summary(a), _summary(b), "median_ratio")
        if not a or not b:
            m.note = "empty pre or post window"
        elif m.pre["median"] == 0:
            m.note = "pre median is zero"
        else:
            m.evaluable = True
            m.effect = m.post["median"] / m.pre["median"]
            m.test = _test_dict(mann_whitney_u(a, b))
        metrics[name] = m

    # H4
    ratios = []
    excluded = 0
    for pair in matching.pairs:
        try:
            ratios.append(adjusted_centrality(pair, scores_pre, scores_post))
        except ZeroControlScoreError:
            excluded += 1
    m = MetricResult(
        "adjusted_centrality",
        False,
        _summary([r[0] for r in ratios]),
        _summary([r[1] for r in ratios]),
        "mean_relative_delta",
    )
    if excluded:
        warnings.append(f"{excluded} matched pair(s) excluded for zero control centrality")
    usable = [(a, b) for a, b in ratios if a > 0]
    if not ratios:
        m.note = "no matched pairs"
    else:
        m.evaluable = True
        m.effect = statistics.fmean((b - a) / a for a, b in usable) if usable else None
        m.test = _test_dict(wilcoxon_signed_rank(ratios))
    metrics[m.metric] = m

    # H5
    pre_ids = sorted(t for t in touched if t in ccn_pre)
    post_ids = sorted(t for t in touched if t in ccn_post)
    a = [float(ccn_pre[t]) for t in pre_ids]
    b = [float(ccn_post[t]) for t in post_ids]
    both = [(float(ccn_pre[t]), float(ccn_post[t])) for t in pre_ids if t in ccn_post]
    m = MetricResult("cyclomatic_complexity", False, _summary(a), _summary(b), "mean_relative_delta")
    m.pre["deleted"] = len(set(pre_ids) - set(post_ids))
    m.post["created"] = len(set(post_ids) - set(pre_ids))
    if not both:
        m.note = "no file measured both before and after"
    elif m.pre["mean"] == 0:
        m.note = "pre mean is zero"
    else:
        m.evaluable = True
        m.effect = (m.post["mean"] - m.pre["mean"]) / m.pre["mean"]
        m.test = _test_dict(wilcoxon_signed_rank(both))
    metrics[m.metric] = m

    spec = (
        ("H1", "outage_trigger"),
        ("H2", "dat_proxy_minutes"),
        ("H3", "sessions"),
        ("H4", "adjusted_centrality"),
        ("H5", "cyclomatic_complexity"),
    )
    hyps = {}
    for key, metric in spec:
        m = metrics[metric]
        if not m.evaluable:
            warnings.append(f"{key} not evaluable: {m.note}")
            hyps[key] = HypothesisResult(key, metric, "decrease", None, False, False)
            continue
        p = m.test["p_value"]
        hyps[key] = HypothesisResult(
            key, metric, "decrease", _direction(m.effect_name, m.effect), p < ALPHA, True, p
        )

    return ImpactReport(
        name=intervention.name,
        type=intervention.type,
        t_start=intervention.t_start,
        t_end=intervention.t_end,
        pre_window=intervention.pre_window,
        post_window=intervention.post_window,
        n_touched=len(touched),
        n_pre_diffs=len(pre),
        n_post_diffs=len(post),
        pairs=list(matching.pairs),
        unmatched=list(matching.unmatched),
        excluded_pairs=excluded,
        metrics=metrics,
        hypotheses=hyps,
        warnings=warnings,
    )
