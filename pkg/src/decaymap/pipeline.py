"""In-memory glue between the modules; the CLI persists what these return."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from .centrality import katz_centrality, spectral_radius_bound
from .code_metrics import CodeMetrics, TreeMetrics, measure_tree
from .graph import (
    Layer,
    SupplyChainGraph,
    build_authorship_graph,
    build_cochange_graph,
    combine_networks,
    scan_imports,
)
from .impact import (
    DEFAULT_STRATA,
    ImpactReport,
    InterventionSet,
    ZeroControlScoreError,
    adjusted_centrality,
    evaluate_impact,
    match_controls,
    resolve_intervention,
)
from .ingest import CommitRecord, FileIdentityMap, build_rename_chains, sessionize_author_activity

DAY = 86_400


@dataclass
class Settings:
    window_days: float = 730
    gap_minutes: float = 120.0
    floor_minutes: float = 5.0
    alpha_frac: float = 0.5
    damping: float = 0.85
    max_files: int = 100
    cochange_threshold: float = 0.20
    strata: tuple[int, ...] = DEFAULT_STRATA
    multipliers: tuple[float, float, float] = (1.0, 1.0, 1.0)
    snapshots: int = 8
    seed: int = 0
    pre_days: float = 90
    post_days: float = 90


def resolver_at(identity_map: FileIdentityMap, ts: int | None) -> Callable[[str], str | None]:
    """Path -> identity as of ``ts`` (present-day names when None)."""
    if ts is None:
        return identity_map.resolve_current

    def resolve(path: str) -> str | None:
        try:
            return identity_map.resolve(path, ts)
        except KeyError:
            return identity_map.resolve_current(path)

    return resolve


def identity_metrics(tree: TreeMetrics, resolve: Callable[[str], str | None]) -> dict[str, CodeMetrics]:
    out = {}
    for path, m in tree.files.items():
        ident = resolve(path)
        if ident is not None:
            out[ident] = m
    return out


def dependency_layer(source_root: str | os.PathLike | None, resolve: Callable[[str], str | None]) -> Layer:
    if source_root is None:
        return Layer("dependency", directed=True)
    return scan_imports(source_root, identity_map=resolve).layer


def supply_chain(
    commits: Sequence[CommitRecord],
    identity_map: FileIdentityMap,
    dependency: Layer,
    window: tuple[int, int] | None,
    settings: Settings,
) -> SupplyChainGraph:
    cc = build_cochange_graph(commits, identity_map, window, settings.max_files)
    au = build_authorship_graph(commits, identity_map, window)
    return combine_networks(dependency, cc, au, settings.multipliers)


def katz_for(graph: SupplyChainGraph, settings: Settings):
    rho = spectral_radius_bound(graph.combined.adjacency)
    alpha = settings.alpha_frac / rho if rho > 0 else settings.alpha_frac
    return katz_centrality(graph.combined, alpha=alpha)


def file_scores(scores, files_only: bool = True) -> dict[str, float]:
    return {n.id: s for n, s in scores.scores.items() if not files_only or n.kind == "file"}


@dataclass
class Corpus:
    commits: list[CommitRecord]
    identity_map: FileIdentityMap
    dat: dict[str, float]
    sessions: dict[str, int]

    @classmethod
    def build(cls, commits: Sequence[CommitRecord], settings: Settings, identity_map: FileIdentityMap | None = None) -> "Corpus":
        commits = list(commits)
        idmap = identity_map if identity_map is not None else build_rename_chains(commits)
        sess = sessionize_author_activity(commits, settings.gap_minutes, settings.floor_minutes)
        return cls(commits, idmap, {k: v[0] for k, v in sess.items()}, {k: v[1] for k, v in sess.items()})


@dataclass
class ImpactInputs:
    source_pre: str | os.PathLike | None = None
    source_post: str | os.PathLike | None = None
    metrics_pre: TreeMetrics | None = None
    metrics_post: TreeMetrics | None = None
    notes: list[str] = field(default_factory=list)


@dataclass
class ImpactRun:
    report: ImpactReport
    intervention: InterventionSet
    samples: dict[str, tuple[list[float], list[float]]]


def window_samples(corpus: Corpus, iv: InterventionSet) -> dict[str, tuple[list[float], list[float]]]:
    """Per-diff authoring-time proxy for treated diffs in the pre and post windows."""
    pre, post = [], []
    for rec in corpus.commits:
        if rec.commit_id in iv.reengineering_commit_ids:
            continue
        if not iv.touched_identities.intersection(corpus.identity_map.commit_files[rec.commit_id]):
            continue
        if iv.in_pre(rec.timestamp):
            pre.append(corpus.dat[rec.commit_id])
        elif iv.in_post(rec.timestamp):
            post.append(corpus.dat[rec.commit_id])
    return {"dat_proxy_minutes": (pre, post)}


def run_impact(corpus: Corpus, spec: Mapping, settings: Settings, inputs: ImpactInputs) -> ImpactRun:
    """Resolve, match and evaluate one intervention spec (``name``, ``type``, ``commit_ids``)."""
    pre_days = spec.get("pre_days", settings.pre_days)
    post_days = spec.get("post_days", settings.post_days)
    iv = resolve_intervention(
        spec["commit_ids"], corpus.commits, corpus.identity_map,
        name=spec.get("name", "intervention"), type=spec.get("type", "custom"),
        pre_days=pre_days, post_days=post_days,
    )
    idmap = corpus.identity_map
    pre_res = resolver_at(idmap, iv.t_start - 1)
    post_res = resolver_at(idmap, None)
    mpre = inputs.metrics_pre
    if mpre is None and inputs.source_pre is not None:
        mpre = measure_tree(inputs.source_pre)
    mpost = inputs.metrics_post
    if mpost is None and inputs.source_post is not None:
        mpost = measure_tree(inputs.source_post)
    cm_pre = identity_metrics(mpre, pre_res) if mpre else {}
    cm_post = identity_metrics(mpost, post_res) if mpost else {}

    win = int(settings.window_days * DAY)
    pre_t = iv.t_start - 1
    post_t = iv.post_window[1]
    g_pre = supply_chain(corpus.commits, idmap, dependency_layer(inputs.source_pre, pre_res), (pre_t - win, pre_t), settings)
    g_post = supply_chain(corpus.commits, idmap, dependency_layer(inputs.source_post, post_res), (post_t - win, post_t), settings)
    s_pre = file_scores(katz_for(g_pre, settings))
    s_post = file_scores(katz_for(g_post, settings))

    # candidates: files alive just before the intervention
    live_pre = {i for i in idmap.current_path if _alive_at(idmap, i, pre_t)}
    matching = match_controls(iv, sorted(live_pre), s_pre, cm_pre, settings.strata)
    ccn_pre = {k: v.ccn for k, v in cm_pre.items()}
    ccn_post = {k: v.ccn for k, v in cm_post.items()}
    report = evaluate_impact(
        iv, corpus.commits, idmap, corpus.dat, corpus.sessions,
        ccn_pre, ccn_post, matching, s_pre, s_post,
    )
    samples = window_samples(corpus, iv)
    cadj = []
    for pair in matching.pairs:
        try:
            cadj.append(adjusted_centrality(pair, s_pre, s_post))
        except ZeroControlScoreError:
            pass
    samples["adjusted_centrality"] = ([a for a, _ in cadj], [b for _, b in cadj])
    both = sorted(t for t in iv.touched_identities if t in ccn_pre and t in ccn_post)
    samples["cyclomatic_complexity"] = ([float(ccn_pre[t]) for t in both], [float(ccn_post[t]) for t in both])
    return ImpactRun(report, iv, samples)


def _alive_at(idmap: FileIdentityMap, ident: str, ts: int) -> bool:
    for spans in idmap.occupancy.values():
        for start, end, who in spans:
            if who == ident and start <= ts and (end is None or ts < end):
                return True
    return False
