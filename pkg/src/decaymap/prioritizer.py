"""Per-file prioritization table: effort, activity, outages, centrality, knowledge loss."""

from __future__ import annotations

import csv
import json
import math
import operator
import re
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from typing import IO, Any, Iterable, Mapping, Sequence

from .centrality import katz_centrality, spectral_radius_bound
from .code_metrics import CodeMetrics
from .graph import Layer, author_node, build_authorship_graph, build_cochange_graph, combine_networks, file_node
from .ingest import CommitRecord, FileIdentityMap

DAY = 86_400


@dataclass
class FileMetricsRow:
    identity_id: str
    current_path: str
    totDAT: float
    avgDAT: float
    totNormDAT: float
    avgNormDAT: float
    nDiff2Y: int
    nOutages: int
    outage_level: int | None
    nAuthor: int
    nDiffs: int
    nMnth: int
    diffsPerMonth: float
    fr: int
    to: int
    min_cent: float | None
    max_cent: float | None
    avgdc: float | None
    pagerank: float | None
    katz: float | None
    knowLost: float
    authLeft: float
    sloc: int | None
    complexity: int | None
    nFilePerDiff: float
    nTotAuth: int
    topCochanged: list[tuple[str, float]] = field(default_factory=list)


COLUMNS = [f.name for f in fields(FileMetricsRow)]
_INT_COLS = {"nDiff2Y", "nOutages", "outage_level", "nAuthor", "nDiffs", "nMnth", "fr", "to", "sloc", "complexity", "nTotAuth"}
_STR_COLS = {"identity_id", "current_path"}
ASCENDING = {"fr", "to"}


@dataclass
class MetricsTable:
    rows: list[FileMetricsRow]
    window: tuple[int, int]
    caveats: list[str] = field(default_factory=list)


def geometric_mean(values: Iterable[float]) -> float:
    vals = list(values)
    return math.exp(math.fsum(math.log(v) for v in vals) / len(vals))


def _month(ts: int) -> tuple[int, int]:
    d = datetime.fromtimestamp(ts, tz=timezone.utc)
    return d.year, d.month


def _score(scores, node):
    if scores is None:
        return None
    v = scores.get(node)
    return None if v is None else float(v)


def compute_file_metrics(
    commits: Sequence[CommitRecord],
    identity_map: FileIdentityMap,
    dat_minutes: Mapping[str, float],
    *,
    katz=None,
    pagerank=None,
    cent_range: Mapping[str, tuple[float, float]] | None = None,
    code_metrics: Mapping[str, CodeMetrics] | None = None,
    roster: Mapping[str, int | None] | None = None,
    window_days: float = 730,
    as_of: int | None = None,
    cochange_threshold: float = 0.20,
    max_files: int = 100,
) -> MetricsTable:
    """One row per file identity with at least one diff in the window.

    The window is ``(as_of - window_days, as_of]`` with ``as_of`` defaulting to
    the newest commit.  ``katz`` and ``pagerank`` map graph nodes to scores;
    ``cent_range`` maps identities to (min, max) snapshot centrality;
    ``code_metrics`` and ``roster`` map identities and authors respectively.
    """
    if not commits:
        raise ValueError("no commits")
    end = as_of if as_of is not None else max(c.timestamp for c in commits)
    start = end - int(window_days * DAY)
    window = (start + 1, end)
    caveats = []
    if roster is None:
        caveats.append("no roster: knowLost and authLeft are unavailable and reported as 0")

    def departed(author: str) -> bool:
        if roster is None:
            return False
        ts = roster.get(author)
        return ts is not None and ts <= end

    all_authors: dict[str, set] = defaultdict(set)
    all_diffs: Counter = Counter()
    in_win: dict[str, list[CommitRecord]] = defaultdict(list)
    for rec in commits:
        files = identity_map.commit_files[rec.commit_id]
        for f in files:
            all_authors[f].add(rec.author_id)
            all_diffs[f] += 1
            if window[0] <= rec.timestamp <= window[1]:
                in_win[f].append(rec)
    if not in_win:
        raise ValueError("no diffs inside the metrics window")

    rows = []
    for ident in sorted(in_win):
        recs = in_win[ident]
        dats = [dat_minutes[r.commit_id] for r in recs]
        nfiles = [len(identity_map.commit_files[r.commit_id]) for r in recs]
        norm = [d / k for d, k in zip(dats, nfiles)]
        outages = [r.outage.severity_level for r in recs if r.outage is not None]
        months = {_month(r.timestamp) for r in recs}
        authors = [r.author_id for r in recs]
        distinct = set(authors)

        co: Counter = Counter()
        for r in recs:
            others = identity_map.commit_files[r.commit_id]
            if len(others) > max_files:
                continue
            co.update(o for o in set(others) if o != ident)
        top = sorted(
            ((identity_map.current_path[o], n / len(recs)) for o, n in co.items() if n / len(recs) >= cochange_threshold),
            key=lambda t: (-t[1], t[0]),
        )

        fk = _score(katz, file_node(ident))
        avgdc = None
        if fk is not None:
            diffs = [fk - (_score(katz, author_node(a)) or 0.0) for a in authors]
            avgdc = math.fsum(diffs) / len(diffs)
        lo_hi = cent_range.get(ident) if cent_range else None
        cm = code_metrics.get(ident) if code_metrics else None
        rows.append(
            FileMetricsRow(
                identity_id=ident,
                current_path=identity_map.current_path[ident],
                totDAT=math.fsum(dats),
                avgDAT=geometric_mean(dats),
                totNormDAT=math.fsum(norm),
                avgNormDAT=geometric_mean(norm),
                nDiff2Y=len(recs),
                nOutages=len(outages),
                outage_level=min(outages) if outages else None,
                nAuthor=len(all_authors[ident]),
                nDiffs=all_diffs[ident],
                nMnth=len(months),
                diffsPerMonth=len(recs) / len(months),
                fr=min(r.timestamp for r in recs),
                to=max(r.timestamp for r in recs),
                min_cent=lo_hi[0] if lo_hi else None,
                max_cent=lo_hi[1] if lo_hi else None,
                avgdc=avgdc,
                pagerank=_score(pagerank, file_node(ident)),
                katz=fk,
                knowLost=100.0 * sum(departed(a) for a in authors) / len(authors),
                authLeft=100.0 * sum(departed(a) for a in distinct) / len(distinct),
                sloc=cm.sloc if cm else None,
                complexity=cm.ccn if cm else None,
                nFilePerDiff=sum(nfiles) / len(nfiles),
                nTotAuth=len(distinct),
                topCochanged=top,
            )
        )
    return MetricsTable(rows, window, caveats)


def snapshot_centrality(
    commits: Sequence[CommitRecord],
    identity_map: FileIdentityMap,
    dependency: Layer,
    window: tuple[int, int],
    snapshots: int = 8,
    multipliers: Sequence[float] = (1.0, 1.0, 1.0),
    alpha_frac: float = 0.5,
    max_files: int = 100,
) -> dict[str, tuple[float, float]]:
    """Lowest and highest normalized Katz score per file over cumulative snapshots.

    Snapshot k covers window start through ``start + k * span / snapshots``;
    a file enters the range once it has a commit inside that snapshot.
    """
    start, end = window
    span = end - start
    out: dict[str, list[float]] = {}
    for k in range(1, snapshots + 1):
        cut = start + (span * k) // snapshots
        sw = (start, cut)
        cc = build_cochange_graph(commits, identity_map, sw, max_files)
        au = build_authorship_graph(commits, identity_map, sw)
        present = {n for n in au.nodes if n.kind == "file"}
        if not present:
            continue
        g = combine_networks(dependency, cc, au, multipliers, extra_nodes=present).combined
        rho = spectral_radius_bound(g.adjacency)
        scores = katz_centrality(g, alpha=alpha_frac / rho if rho > 0 else alpha_frac)
        for node in present:
            out.setdefault(node.id, []).append(scores[node])
    return {k: (min(v), max(v)) for k, v in out.items()}


# -- ranking -----------------------------------------------------------------------

_OPS = {">=": operator.ge, "<=": operator.le, ">": operator.gt, "<": operator.lt, "==": operator.eq, "!=": operator.ne}
_FILTER_RX = re.compile(r"^\s*(\w+)\s*(>=|<=|==|!=|>|<)\s*(.+?)\s*$")


class UnknownColumnError(KeyError):
    def __init__(self, name: str):
        super().__init__(f"unknown column {name!r}; valid columns: {', '.join(COLUMNS)}")
        self.name = name

    def __str__(self) -> str:
        return self.args[0]


def parse_filter(text: str) -> tuple[str, str, Any]:
    m = _FILTER_RX.match(text)
    if not m:
        raise ValueError(f"bad filter {text!r}; expected e.g. nDiff2Y>=5")
    col, op, raw = m.groups()
    if col not in COLUMNS:
        raise UnknownColumnError(col)
    value: Any = raw if col in _STR_COLS else float(raw)
    return col, op, value


def _sort_value(row: FileMetricsRow, key: str):
    v = getattr(row, key)
    if key == "topCochanged":
        return len(v)
    return v


def rank_files(
    rows: Iterable[FileMetricsRow],
    sort_key: str = "katz",
    filters: Iterable[str | tuple[str, str, Any]] = (),
) -> list[FileMetricsRow]:
    """Filter, then sort descending by ``sort_key`` (ascending for ``fr``/``to``).

    Missing values sort last; ties fall back to identity_id.
    """
    if sort_key not in COLUMNS:
        raise UnknownColumnError(sort_key)
    preds = [parse_filter(f) if isinstance(f, str) else f for f in filters]
    for col, _, _ in preds:
        if col not in COLUMNS:
            raise UnknownColumnError(col)
    kept = [
        r for r in rows
        if all(getattr(r, c) is not None and _OPS[op](getattr(r, c), v) for c, op, v in preds)
    ]
    kept.sort(key=lambda r: r.identity_id)
    present = [r for r in kept if getattr(r, sort_key) is not None]
    missing = [r for r in kept if getattr(r, sort_key) is None]
    present.sort(key=lambda r: _sort_value(r, sort_key), reverse=sort_key not in ASCENDING)
    return present + missing


# -- export ----------------------------------------------------------------------


def _cell(name: str, value) -> str:
    if value is None:
        return ""
    if name == "topCochanged":
        return ";".join(f"{p}:{f!r}" for p, f in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_cell(name: str, text: str):
    if name in _STR_COLS:
        return text
    if text == "":
        return [] if name == "topCochanged" else None
    if name == "topCochanged":
        out = []
        for item in text.split(";"):
            path, _, frac = item.rpartition(":")
            out.append((path, float(frac)))
        return out
    if name in _INT_COLS:
        return int(text)
    return float(text)


def row_to_json(row: FileMetricsRow) -> dict:
    d = asdict(row)
    d["topCochanged"] = [[p, f] for p, f in row.topCochanged]
    return d


def row_from_json(obj: Mapping) -> FileMetricsRow:
    d = dict(obj)
    d["topCochanged"] = [(p, float(f)) for p, f in d.get("topCochanged", [])]
    return FileMetricsRow(**d)


def export_table(rows: Sequence[FileMetricsRow], fh: IO[str], fmt: str = "csv") -> None:
    if fmt == "csv":
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in rows:
            w.writerow([_cell(c, getattr(r, c)) for c in COLUMNS])
    elif fmt == "json":
        json.dump([row_to_json(r) for r in rows], fh, indent=1, sort_keys=False)
        fh.write("\n")
    else:
        raise ValueError(f"unknown format {fmt!r}; use csv or json")


def read_table(fh: IO[str], fmt: str = "csv") -> list[FileMetricsRow]:
    if fmt == "json":
        return [row_from_json(o) for o in json.load(fh)]
    reader = csv.DictReader(fh)
    if reader.fieldnames is not None and list(reader.fieldnames) != COLUMNS:
        raise ValueError("unexpected CSV header")
    return [FileMetricsRow(**{c: _parse_cell(c, row[c]) for c in COLUMNS}) for row in reader]
