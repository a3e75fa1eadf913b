"""Command-line front end working against an on-disk workspace directory.

Every artifact the tool writes is listed in ``manifest.json`` together with
its own digest and the digests of whatever it was derived from.  Commands
check those records before reading an artifact and refuse stale or edited
inputs unless ``--force`` is given.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import hashlib
import json
import logging
import os
import sys
from pathlib import Path
from typing import Iterator, Sequence

from . import __version__
from .centrality import CentralityScores, degree_stats, katz_centrality, pagerank, spectral_radius_bound, write_degree_csv
from .classifier import Classifier, corpus_report, load_patterns, report_json
from .code_metrics import CodeMetrics, measure_tree
from .graph import (
    LAYERS,
    Layer,
    NodeRef,
    build_authorship_graph,
    build_cochange_graph,
    combine_networks,
    load_dependency_edges,
    read_edges,
    scan_imports,
    write_edges,
)
from .impact import DEFAULT_STRATA, UnknownCommitError
from .ingest import (
    CorpusError,
    FileIdentityMap,
    apply_outages,
    build_rename_chains,
    parse_commit_log,
    read_outages,
    read_roster,
    write_commit_log,
)
from .pipeline import DAY, Corpus, ImpactInputs, Settings, run_impact
from .plots import plot_classification, plot_impact, plot_rank
from .prioritizer import (
    UnknownColumnError,
    compute_file_metrics,
    export_table,
    rank_files,
    row_from_json,
    row_to_json,
    snapshot_centrality,
)
from .synthgen import ScenarioSpec, generate, write_scenario

logger = logging.getLogger("decaymap")

ENV_WORKSPACE = "DECAYMAP_WORKSPACE"
DEFAULT_WORKSPACE = "decaymap-workspace"
MANIFEST = "manifest.json"
LOCK = ".lock"

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_WARNINGS = 2

# artifact -> command that writes it
PRODUCER = {
    "corpus.jsonl": "ingest",
    "identity_map.json": "ingest",
    "ingest.json": "ingest",
    "roster.json": "ingest",
    "graph_edges.csv": "graph",
    "graph.json": "graph",
    "code_metrics.json": "graph",
    "katz.csv": "centrality",
    "pagerank.csv": "centrality",
    "degree.csv": "centrality",
    "centrality.json": "centrality",
    "metrics.json": "metrics",
    "metrics.csv": "metrics",
}


class CliError(Exception):
    code = EXIT_ERROR


class MissingPrerequisiteError(CliError):
    pass


class StaleArtifactError(CliError):
    pass


class WorkspaceLockedError(CliError):
    pass


# -- digests ------------------------------------------------------------------------


def file_digest(path: str | os.PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def tree_digest(root: str | os.PathLike) -> str:
    """Digest over relative paths and contents, independent of where the tree lives."""
    root = Path(root)
    h = hashlib.sha256()
    for p in sorted(q for q in root.rglob("*") if q.is_file()):
        h.update(p.relative_to(root).as_posix().encode())
        h.update(b"\0")
        h.update(file_digest(p).encode())
        h.update(b"\n")
    return h.hexdigest()


def input_digest(path: str | os.PathLike) -> tuple[str, str]:
    """(label, digest) for an external input; the label is the basename only."""
    p = Path(path)
    if p.is_dir():
        return f"ext:{p.name}/", tree_digest(p)
    return f"ext:{p.name}", file_digest(p)


# -- workspace ------------------------------------------------------------------------


class Workspace:
    def __init__(self, root: str | os.PathLike, force: bool = False):
        self.root = Path(root)
        self.force = force
        self._manifest: dict | None = None

    def path(self, name: str) -> Path:
        return self.root / name

    @property
    def manifest(self) -> dict:
        if self._manifest is None:
            mp = self.path(MANIFEST)
            if mp.exists():
                self._manifest = json.loads(mp.read_text(encoding="utf-8"))
            else:
                self._manifest = {"tool_version": __version__, "artifacts": {}}
        return self._manifest

    def save(self) -> None:
        self.manifest["tool_version"] = __version__
        text = json.dumps(self.manifest, indent=2, sort_keys=True) + "\n"
        self.path(MANIFEST).write_text(text, encoding="utf-8")

    @contextlib.contextmanager
    def lock(self) -> Iterator[None]:
        self.root.mkdir(parents=True, exist_ok=True)
        lp = self.path(LOCK)
        try:
            fd = os.open(lp, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise WorkspaceLockedError(
                f"workspace {self.root} is locked by another command; remove {lp} if no command is running"
            ) from None
        try:
            os.write(fd, str(os.getpid()).encode())
            os.close(fd)
            yield
        finally:
            lp.unlink(missing_ok=True)

    def record(self, name: str, inputs: dict[str, str], settings: dict | None = None) -> None:
        self.manifest["artifacts"][name] = {
            "command": PRODUCER.get(name, name.split(".")[0]),
            "sha256": file_digest(self.path(name)),
            "inputs": dict(sorted(inputs.items())),
            "settings": settings or {},
        }

    def has(self, name: str) -> bool:
        return name in self.manifest["artifacts"] and self.path(name).exists()

    def digest_of(self, name: str) -> str:
        return self.manifest["artifacts"][name]["sha256"]

    def require(self, *names: str) -> dict[str, str]:
        """Check prerequisites; returns ``{"ws:<name>": digest}`` for recording."""
        out = {}
        for name in names:
            producer = PRODUCER.get(name, name)
            if not self.has(name):
                raise MissingPrerequisiteError(f"{name} not found in {self.root}; run `decaymap {producer}` first")
            entry = self.manifest["artifacts"][name]
            current = file_digest(self.path(name))
            if current != entry["sha256"]:
                self._stale(f"{name} was modified after `decaymap {producer}` wrote it; rerun `decaymap {producer}`")
            for dep, digest in entry["inputs"].items():
                if not dep.startswith("ws:"):
                    continue
                dname = dep[3:]
                now = self.manifest["artifacts"].get(dname, {}).get("sha256")
                if now != digest:
                    self._stale(
                        f"{name} is stale: {dname} changed since `decaymap {producer}` built it; "
                        f"rerun `decaymap {producer}`"
                    )
            out[f"ws:{name}"] = current
        return out

    def _stale(self, msg: str) -> None:
        if self.force:
            logger.warning("%s (continuing because of --force)", msg)
            return
        raise StaleArtifactError(msg + " or pass --force")

    def write_text(self, name: str, text: str) -> None:
        self.path(name).parent.mkdir(parents=True, exist_ok=True)
        self.path(name).write_text(text, encoding="utf-8", newline="\n")


def resolve_workspace(arg: str | None) -> Path:
    if arg:
        return Path(arg)
    return Path(os.environ.get(ENV_WORKSPACE) or DEFAULT_WORKSPACE)


# -- shared loaders ------------------------------------------------------------------


def _settings(args) -> Settings:
    return Settings(
        window_days=args.window,
        gap_minutes=args.gap_minutes,
        floor_minutes=args.floor_minutes,
        alpha_frac=args.alpha_frac,
        damping=args.damping,
        max_files=args.max_files_per_diff,
        cochange_threshold=args.cochange_threshold,
        strata=tuple(args.strata),
        multipliers=tuple(args.multipliers),
        seed=args.seed,
    )


def _load_corpus(ws: Workspace, settings: Settings) -> Corpus:
    with open(ws.path("corpus.jsonl"), encoding="utf-8") as fh:
        records = parse_commit_log(fh).records
    idmap = FileIdentityMap.from_json(json.loads(ws.path("identity_map.json").read_text(encoding="utf-8")))
    return Corpus.build(records, settings, idmap)


def _load_scores(path: Path, method: str) -> CentralityScores:
    scores = {}
    with open(path, encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            scores[NodeRef.parse(row["node"])] = float(row["score"])
    return CentralityScores(scores, method, float("nan"), True)


def _write_json(ws: Workspace, name: str, obj) -> None:
    ws.write_text(name, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _window(commits, settings: Settings) -> tuple[int, int]:
    end = max(c.timestamp for c in commits)
    return end - int(settings.window_days * DAY) + 1, end


# -- commands ----------------------------------------------------------------------


def cmd_ingest(args, ws: Workspace) -> int:
    settings = _settings(args)
    inputs = dict([input_digest(args.log)])
    with open(args.log, encoding="utf-8") as fh:
        parsed = parse_commit_log(fh, args.max_malformed_pct)
    records = parsed.records
    if not records:
        raise CliError(f"{args.log} contains no usable commits")
    if args.outages:
        inputs.update([input_digest(args.outages)])
        with open(args.outages, encoding="utf-8") as fh:
            records = apply_outages(records, read_outages(fh))
    idmap = build_rename_chains(records)
    caveats = []
    with open(ws.path("corpus.jsonl"), "w", encoding="utf-8", newline="\n") as fh:
        write_commit_log(records, fh)
    _write_json(ws, "identity_map.json", idmap.to_json())
    written = ["corpus.jsonl", "identity_map.json"]
    if args.roster:
        inputs.update([input_digest(args.roster)])
        with open(args.roster, encoding="utf-8") as fh:
            _write_json(ws, "roster.json", read_roster(fh))
        written.append("roster.json")
    else:
        ws.path("roster.json").unlink(missing_ok=True)
        ws.manifest["artifacts"].pop("roster.json", None)
        caveats.append("no roster given: knowLost and authLeft will be reported as unavailable")
    summary = {
        "records": len(records),
        "lines": parsed.total_lines,
        "malformed": parsed.malformed,
        "malformed_pct": round(parsed.malformed_pct, 6),
        "merges_dropped": parsed.merges_dropped,
        "empty_dropped": parsed.empty_dropped,
        "identities": len(idmap.current_path),
        "deleted_identities": len(idmap.deleted),
        "renamed_identities": sum(len(h) > 1 for h in idmap.history.values()),
        "roster": bool(args.roster),
        "caveats": caveats,
        "errors": parsed.errors[:50],
    }
    _write_json(ws, "ingest.json", summary)
    written.append("ingest.json")
    cfg = {"gap_minutes": settings.gap_minutes, "floor_minutes": settings.floor_minutes}
    for name in written:
        ws.record(name, inputs, cfg)
    print(
        f"ingested {len(records)} commits ({parsed.malformed} malformed, {parsed.merges_dropped} merges, "
        f"{parsed.empty_dropped} empty skipped); {summary['identities']} file identities"
    )
    for c in caveats:
        print(f"note: {c}")
    return EXIT_OK


def cmd_graph(args, ws: Workspace) -> int:
    settings = _settings(args)
    inputs = ws.require("corpus.jsonl", "identity_map.json")
    corpus = _load_corpus(ws, settings)
    window = _window(corpus.commits, settings)
    idmap = corpus.identity_map
    dep = Layer("dependency", directed=True)
    dep_info: dict = {}
    if args.deps:
        inputs.update([input_digest(args.deps)])
        with open(args.deps, encoding="utf-8") as fh:
            loaded = load_dependency_edges(fh, idmap)
        dep = loaded.layer
        dep_info["csv"] = {"edges": len(dep), "unresolved": loaded.unresolved, "self_edges": loaded.self_edges, "duplicates": loaded.duplicates}
    code: dict = {}
    if args.source:
        inputs.update([input_digest(args.source)])
        scan = scan_imports(args.source, identity_map=idmap)
        for (u, v), w in sorted(scan.layer.weights.items()):
            if dep.weight(u, v) == 0:
                dep.add(u, v, w)
        dep_info["scan"] = {"edges": len(scan.layer), "unresolved": scan.unresolved, "unreadable": scan.unreadable, "files": scan.files_scanned}
        tree = measure_tree(args.source)
        for path, m in sorted(tree.files.items()):
            ident = idmap.resolve_current(path)
            if ident is not None:
                code[ident] = {"path": path, "sloc": m.sloc, "ccn": m.ccn, "language": m.language, "undecodable": m.undecodable}
    cc = build_cochange_graph(corpus.commits, idmap, window, settings.max_files)
    au = build_authorship_graph(corpus.commits, idmap, window)
    g = combine_networks(dep, cc, au, settings.multipliers)
    with open(ws.path("graph_edges.csv"), "w", encoding="utf-8", newline="") as fh:
        write_edges(g, fh)
    info = {
        "window": list(window),
        "multipliers": list(settings.multipliers),
        "max_files_per_diff": settings.max_files,
        "nodes": len(g.nodes),
        "layer_edges": {name: len(g.layers[name]) for name in LAYERS},
        "dependency": dep_info,
    }
    _write_json(ws, "graph.json", info)
    cfg = {"window_days": settings.window_days, "multipliers": list(settings.multipliers), "max_files": settings.max_files}
    written = ["graph_edges.csv", "graph.json"]
    if args.source:
        _write_json(ws, "code_metrics.json", code)
        written.append("code_metrics.json")
    else:
        ws.path("code_metrics.json").unlink(missing_ok=True)
        ws.manifest["artifacts"].pop("code_metrics.json", None)
    for name in written:
        ws.record(name, inputs, cfg)
    print(f"graph: {info['nodes']} nodes; " + ", ".join(f"{k} {v} edges" for k, v in info["layer_edges"].items()))
    return EXIT_OK


def _combined_from_workspace(ws: Workspace):
    with open(ws.path("graph_edges.csv"), encoding="utf-8") as fh:
        layers = read_edges(fh)
    info = json.loads(ws.path("graph.json").read_text(encoding="utf-8"))
    g = combine_networks(layers["dependency"], layers["co_change"], layers["authorship"], info["multipliers"])
    return g, layers, info


def cmd_centrality(args, ws: Workspace) -> int:
    settings = _settings(args)
    inputs = ws.require("graph_edges.csv", "graph.json")
    g, _, _ = _combined_from_workspace(ws)
    rho = spectral_radius_bound(g.combined.adjacency)
    alpha = settings.alpha_frac / rho if rho > 0 else settings.alpha_frac
    katz = katz_centrality(g.combined, alpha=alpha)
    pr = pagerank(g.combined, damping=settings.damping)
    for name, scores in (("katz.csv", katz), ("pagerank.csv", pr)):
        with open(ws.path(name), "w", encoding="utf-8", newline="") as fh:
            scores.write_csv(fh)
    with open(ws.path("degree.csv"), "w", encoding="utf-8", newline="") as fh:
        write_degree_csv(degree_stats(g.combined), fh)
    _write_json(ws, "centrality.json", {"spectral_radius_bound": rho, "alpha": alpha, "alpha_frac": settings.alpha_frac, "damping": settings.damping})
    cfg = {"alpha_frac": settings.alpha_frac, "damping": settings.damping}
    for name in ("katz.csv", "pagerank.csv", "degree.csv", "centrality.json"):
        ws.record(name, inputs, cfg)
    print(f"centrality: {len(g.nodes)} nodes, katz alpha={alpha:.6g} (rho<={rho:.6g}), pagerank damping={settings.damping}")
    return EXIT_OK


def cmd_metrics(args, ws: Workspace) -> int:
    settings = _settings(args)
    inputs = ws.require("corpus.jsonl", "identity_map.json", "graph_edges.csv", "graph.json", "katz.csv", "pagerank.csv")
    corpus = _load_corpus(ws, settings)
    _, layers, info = _combined_from_workspace(ws)
    katz = _load_scores(ws.path("katz.csv"), "katz")
    pr = _load_scores(ws.path("pagerank.csv"), "pagerank")
    roster = None
    if ws.has("roster.json"):
        inputs.update(ws.require("roster.json"))
        roster = json.loads(ws.path("roster.json").read_text(encoding="utf-8"))
    code = None
    if ws.has("code_metrics.json"):
        inputs.update(ws.require("code_metrics.json"))
        raw = json.loads(ws.path("code_metrics.json").read_text(encoding="utf-8"))
        code = {k: CodeMetrics(v["sloc"], v["ccn"], v["language"], v["undecodable"]) for k, v in raw.items()}
    window = tuple(info["window"])
    ranges = snapshot_centrality(
        corpus.commits, corpus.identity_map, layers["dependency"], window,
        snapshots=settings.snapshots, multipliers=info["multipliers"],
        alpha_frac=settings.alpha_frac, max_files=info["max_files_per_diff"],
    )
    table = compute_file_metrics(
        corpus.commits, corpus.identity_map, corpus.dat,
        katz=katz, pagerank=pr, cent_range=ranges, code_metrics=code, roster=roster,
        window_days=settings.window_days, as_of=window[1],
        cochange_threshold=settings.cochange_threshold, max_files=info["max_files_per_diff"],
    )
    if code is None:
        table.caveats.append("no source tree given to `decaymap graph`: sloc and complexity are unavailable")
    _write_json(ws, "metrics.json", {"window": list(table.window), "caveats": table.caveats, "rows": [row_to_json(r) for r in table.rows]})
    with open(ws.path("metrics.csv"), "w", encoding="utf-8", newline="") as fh:
        export_table(table.rows, fh, "csv")
    cfg = {
        "window_days": settings.window_days, "gap_minutes": settings.gap_minutes, "floor_minutes": settings.floor_minutes,
        "cochange_threshold": settings.cochange_threshold, "snapshots": settings.snapshots,
    }
    for name in ("metrics.json", "metrics.csv"):
        ws.record(name, inputs, cfg)
    print(f"metrics: {len(table.rows)} files with diffs in the window")
    for c in table.caveats:
        print(f"note: {c}")
    return EXIT_OK


def cmd_rank(args, ws: Workspace) -> int:
    inputs = ws.require("metrics.json")
    data = json.loads(ws.path("metrics.json").read_text(encoding="utf-8"))
    rows = [row_from_json(r) for r in data["rows"]]
    ranked = rank_files(rows, args.sort, args.filter or ())
    if args.top:
        ranked = ranked[: args.top]
    out = Path(args.out) if args.out else ws.path(f"rank.{args.format}")
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        export_table(ranked, fh, args.format)
    fig = out.with_suffix(".png")
    plot_rank(ranked, args.sort, fig)
    _record_if_inside(ws, out, inputs, {"sort": args.sort, "filter": list(args.filter or []), "top": args.top})
    _record_if_inside(ws, fig, inputs, {"sort": args.sort})
    print(f"rank: {len(ranked)} rows by {args.sort} -> {out}")
    for c in data.get("caveats", []):
        print(f"note: {c}")
    return EXIT_OK


def _record_if_inside(ws: Workspace, path: Path, inputs: dict, settings: dict) -> None:
    try:
        rel = path.resolve().relative_to(ws.root.resolve()).as_posix()
    except ValueError:
        return
    ws.record(rel, inputs, settings)


def cmd_classify(args, ws: Workspace) -> int:
    inputs = ws.require("corpus.jsonl")
    clf = Classifier()
    if args.patterns:
        inputs.update([input_digest(args.patterns)])
        with open(args.patterns, encoding="utf-8") as fh:
            clf = Classifier(load_patterns(fh))
    with open(ws.path("corpus.jsonl"), encoding="utf-8") as fh:
        records = parse_commit_log(fh).records
    report = corpus_report(records, clf)
    out = Path(args.out) if args.out else ws.path("classify.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report_json(report), encoding="utf-8")
    txt = out.with_suffix(".txt")
    txt.write_text(report.table(), encoding="utf-8")
    fig = out.with_suffix(".png")
    plot_classification(report, fig)
    for p in (out, txt, fig):
        _record_if_inside(ws, p, inputs, {})
    sys.stdout.write(report.table())
    return EXIT_OK


def cmd_impact(args, ws: Workspace) -> int:
    settings = _settings(args)
    inputs = ws.require("corpus.jsonl", "identity_map.json")
    inputs.update([input_digest(args.spec)])
    spec = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    if "commit_ids" not in spec:
        raise CliError(f"{args.spec} has no commit_ids")
    if args.pre_days is not None:
        spec["pre_days"] = args.pre_days
    if args.post_days is not None:
        spec["post_days"] = args.post_days
    for src in (args.source_pre, args.source_post):
        if src:
            inputs.update([input_digest(src)])
    corpus = _load_corpus(ws, settings)
    run = run_impact(corpus, spec, settings, ImpactInputs(args.source_pre, args.source_post))
    report = run.report
    name = spec.get("name", "intervention")
    out = Path(args.out) if args.out else ws.path(f"impact-{name}.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report.dumps(), encoding="utf-8")
    txt = out.with_suffix(".txt")
    txt.write_text(report.table(), encoding="utf-8")
    fig = out.with_suffix(".png")
    plot_impact(report, run.samples, fig)
    cfg = {
        "window_days": settings.window_days, "gap_minutes": settings.gap_minutes, "floor_minutes": settings.floor_minutes,
        "alpha_frac": settings.alpha_frac, "strata": list(settings.strata), "multipliers": list(settings.multipliers),
    }
    for p in (out, txt, fig):
        _record_if_inside(ws, p, inputs, cfg)
    sys.stdout.write(report.table())
    return EXIT_WARNINGS if report.warnings else EXIT_OK


def cmd_demo_gen(args) -> int:
    obj = {}
    if args.spec:
        obj = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    if args.seed_given:
        obj["seed"] = args.seed
    spec = ScenarioSpec.from_json(obj) if obj else ScenarioSpec()
    scn = generate(spec)
    written = write_scenario(scn, args.out)
    print(f"demo corpus: {len(scn.commits)} commits, seed {spec.seed} -> {args.out}")
    for k, v in written.items():
        print(f"  {k}: {v}")
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------------


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise argparse.ArgumentTypeError("strata edges must be strictly increasing")
    return vals


def _multipliers(text: str) -> list[float]:
    vals = _float_list(text)
    if len(vals) != 3:
        raise argparse.ArgumentTypeError("need three multipliers: dependency,co_change,authorship")
    return vals


class _SeedAction(argparse.Action):
    def __call__(self, parser, namespace, values, option_string=None):
        setattr(namespace, self.dest, values)
        namespace.seed_given = True


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("shared options")
    g.add_argument("--workspace", help=f"workspace directory (else ${ENV_WORKSPACE}, else ./{DEFAULT_WORKSPACE})")
    g.add_argument("--window", type=float, default=730, help="metrics window in days (default 730)")
    g.add_argument("--gap-minutes", type=float, default=120.0, help="session gap cap in minutes (default 120)")
    g.add_argument("--floor-minutes", type=float, default=5.0, help="per-diff authoring floor in minutes (default 5)")
    g.add_argument("--alpha-frac", type=float, default=0.5, help="Katz alpha as a fraction of 1/rho (default 0.5)")
    g.add_argument("--damping", type=float, default=0.85, help="PageRank damping (default 0.85)")
    g.add_argument("--max-files-per-diff", type=int, default=100, help="skip larger diffs in co-change (default 100)")
    g.add_argument("--cochange-threshold", type=float, default=0.20, help="topCochanged fraction cutoff (default 0.20)")
    g.add_argument("--strata", type=_int_list, default=list(DEFAULT_STRATA), help="sloc stratum edges, comma separated")
    g.add_argument("--multipliers", type=_multipliers, default=[1.0, 1.0, 1.0], help="layer weights dependency,co_change,authorship")
    g.add_argument("--seed", type=int, default=0, action=_SeedAction, help="random seed (recorded in the manifest)")
    g.add_argument("--force", action="store_true", help="use stale artifacts anyway")
    g.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="decaymap", description="Rank files for code-improvement work and evaluate past improvements.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", parents=[common], help="parse a commit log into the workspace")
    s.add_argument("log", help="JSON-lines commit log")
    s.add_argument("--roster", help="CSV author,departed_ts")
    s.add_argument("--outages", help="CSV commit_id,level overlay")
    s.add_argument("--max-malformed-pct", type=float, default=None, help="fail if more than this percent of lines are malformed")

    s = sub.add_parser("graph", parents=[common], help="build dependency, co-change and authorship layers")
    s.add_argument("--source", help="source tree to scan for imports and code metrics")
    s.add_argument("--deps", help="CSV src,dst of dependency edges")

    sub.add_parser("centrality", parents=[common], help="Katz, PageRank and degree scores")
    sub.add_parser("metrics", parents=[common], help="per-file metric table")

    s = sub.add_parser("rank", parents=[common], help="sort and filter the metric table")
    s.add_argument("--sort", default="katz", help="column to sort by (default katz)")
    s.add_argument("--filter", action="append", help="e.g. nDiff2Y>=5 (repeatable)")
    s.add_argument("--top", type=int, default=None)
    s.add_argument("--format", choices=("csv", "json"), default="csv")
    s.add_argument("--out", help="output file (default <workspace>/rank.<format>)")

    s = sub.add_parser("classify", parents=[common], help="improvement-label shares over the corpus")
    s.add_argument("--patterns", help="CSV category,pattern,polarity[,case]")
    s.add_argument("--out", help="report path (default <workspace>/classify.json)")

    s = sub.add_parser("impact", parents=[common], help="evaluate one past intervention")
    s.add_argument("--spec", required=True, help="JSON with name, type and commit_ids")
    s.add_argument("--source-pre", help="source tree before the intervention")
    s.add_argument("--source-post", help="source tree after the intervention")
    s.add_argument("--pre-days", type=float, default=None)
    s.add_argument("--post-days", type=float, default=None)
    s.add_argument("--out", help="report path (default <workspace>/impact-<name>.json)")

    s = sub.add_parser("demo-gen", parents=[common], help="write a synthetic demo corpus")
    s.add_argument("--spec", help="scenario JSON (defaults used for missing fields)")
    s.add_argument("--out", required=True, help="output directory")
    p.set_defaults(seed_given=False)
    return p


COMMANDS = {
    "ingest": cmd_ingest,
    "graph": cmd_graph,
    "centrality": cmd_centrality,
    "metrics": cmd_metrics,
    "rank": cmd_rank,
    "classify": cmd_classify,
    "impact": cmd_impact,
}


def _record_seed(ws: Workspace, args) -> None:
    ws.manifest["seed"] = args.seed


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        if args.command == "demo-gen":
            return cmd_demo_gen(args)
        ws = Workspace(resolve_workspace(args.workspace), force=args.force)
        with ws.lock():
            _record_seed(ws, args)
            code = COMMANDS[args.command](args, ws)
            ws.save()
            return code
    except UnknownCommitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except UnknownColumnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (CliError, CorpusError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
