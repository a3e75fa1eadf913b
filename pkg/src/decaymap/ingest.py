"""Commit-log parsing, rename tracking and author sessionization.

The commit log is JSON lines, one object per commit::

    {"id": "c1", "author": "alice", "ts": 1700000000, "title": "...",
     "tags": ["..."], "files": [{"before": null, "after": "a.c",
     "add": 10, "del": 0, "kind": "add"}], "outage_level": 2}

``outage_level`` is optional.  Records carrying ``"merge": true`` are dropped.
"""

from __future__ import annotations

import csv
import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import IO, Iterable, Mapping, Sequence

logger = logging.getLogger(__name__)

KINDS = ("modify", "add", "delete", "rename")


class CorpusError(Exception):
    """Raised when a commit corpus cannot be used at all."""


class RenameConflictError(CorpusError):
    def __init__(self, commit_id: str, detail: str):
        super().__init__(f"conflicting renames in commit {commit_id}: {detail}")
        self.commit_id = commit_id


@dataclass(frozen=True)
class FileChange:
    path_before: str | None
    path_after: str | None
    lines_added: int
    lines_deleted: int
    kind: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown change kind {self.kind!r}")
        if self.lines_added < 0 or self.lines_deleted < 0:
            raise ValueError("line counts must be non-negative")
        if self.kind == "add" and (self.path_before is not None or not self.path_after):
            raise ValueError("add needs path_after only")
        if self.kind == "delete" and (self.path_after is not None or not self.path_before):
            raise ValueError("delete needs path_before only")
        if self.kind == "rename":
            if not self.path_before or not self.path_after:
                raise ValueError("rename needs both paths")
            if self.path_before == self.path_after:
                raise ValueError("rename source equals target")
        if self.kind == "modify":
            if not (self.path_before or self.path_after):
                raise ValueError("modify needs a path")
            if self.path_before and self.path_after and self.path_before != self.path_after:
                raise ValueError("modify with two different paths; use kind=rename")

    @property
    def path(self) -> str:
        """The path the file has after the change (or before, for deletes)."""
        return self.path_after or self.path_before  # type: ignore[return-value]


@dataclass(frozen=True)
class OutageAnnotation:
    severity_level: int

    def __post_init__(self):
        if self.severity_level < 1:
            raise ValueError("severity_level must be >= 1")


@dataclass(frozen=True)
class CommitRecord:
    commit_id: str
    author_id: str
    timestamp: int
    message_title: str
    message_tags: tuple[str, ...]
    file_changes: tuple[FileChange, ...]
    outage: OutageAnnotation | None = None

    def __post_init__(self):
        if self.timestamp <= 0:
            raise ValueError("timestamp must be positive")


@dataclass
class ParseResult:
    records: list[CommitRecord]
    malformed: int = 0
    merges_dropped: int = 0
    empty_dropped: int = 0
    total_lines: int = 0
    errors: list[str] = field(default_factory=list)

    @property
    def malformed_pct(self) -> float:
        return 100.0 * self.malformed / self.total_lines if self.total_lines else 0.0


def _as_int(value, name: str) -> int:
    # bool is an int subclass; reject it explicitly
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError(f"{name} must be an integer")
    return value


def _as_opt_str(value, name: str) -> str | None:
    if value is None:
        return None
    if not isinstance(value, str) or not value:
        raise ValueError(f"{name} must be a non-empty string or null")
    return value


def record_from_json(obj: Mapping) -> CommitRecord:
    """Build a CommitRecord from one decoded log object, raising ValueError on schema errors."""
    if not isinstance(obj, Mapping):
        raise ValueError("record is not an object")
    try:
        cid, author, ts = obj["id"], obj["author"], obj["ts"]
        title, tags, files = obj["title"], obj["tags"], obj["files"]
    except KeyError as exc:
        raise ValueError(f"missing field {exc.args[0]}") from None
    if not isinstance(cid, str) or not cid:
        raise ValueError("id must be a non-empty string")
    if not isinstance(author, str) or not author:
        raise ValueError("author must be a non-empty string")
    ts = _as_int(ts, "ts")
    if not isinstance(title, str):
        raise ValueError("title must be a string")
    if not isinstance(tags, list) or not all(isinstance(t, str) for t in tags):
        raise ValueError("tags must be an array of strings")
    if not isinstance(files, list):
        raise ValueError("files must be an array")
    changes = []
    for f in files:
        if not isinstance(f, Mapping):
            raise ValueError("file entry is not an object")
        try:
            changes.append(
                FileChange(
                    path_before=_as_opt_str(f.get("before"), "before"),
                    path_after=_as_opt_str(f.get("after"), "after"),
                    lines_added=_as_int(f["add"], "add"),
                    lines_deleted=_as_int(f["del"], "del"),
                    kind=f["kind"],
                )
            )
        except KeyError as exc:
            raise ValueError(f"file entry missing {exc.args[0]}") from None
    outage = None
    if obj.get("outage_level") is not None:
        outage = OutageAnnotation(_as_int(obj["outage_level"], "outage_level"))
    return CommitRecord(cid, author, ts, title, tuple(tags), tuple(changes), outage)


def record_to_json(rec: CommitRecord) -> dict:
    obj = {
        "id": rec.commit_id,
        "author": rec.author_id,
        "ts": rec.timestamp,
        "title": rec.message_title,
        "tags": list(rec.message_tags),
        "files": [
            {
                "before": fc.path_before,
                "after": fc.path_after,
                "add": fc.lines_added,
                "del": fc.lines_deleted,
                "kind": fc.kind,
            }
            for fc in rec.file_changes
        ],
    }
    if rec.outage is not None:
        obj["outage_level"] = rec.outage.severity_level
    return obj


def parse_commit_log(stream: Iterable[str], max_malformed_pct: float | None = None) -> ParseResult:
    """Parse a JSON-lines commit log.

    Malformed lines (bad JSON, schema violations, duplicate ids) are skipped
    and counted.  Blank lines are ignored.  If ``max_malformed_pct`` is given
    and the malformed share of non-blank lines exceeds it, CorpusError is
    raised.  Records come back sorted by timestamp (stable on input order).
    """
    result = ParseResult(records=[])
    seen: set[str] = set()
    for lineno, line in enumerate(stream, 1):
        if not line.strip():
            continue
        result.total_lines += 1
        try:
            obj = json.loads(line)
            if isinstance(obj, Mapping) and obj.get("merge") is True:
                result.merges_dropped += 1
                continue
            rec = record_from_json(obj)
            if rec.commit_id in seen:
                raise ValueError(f"duplicate commit id {rec.commit_id}")
        except ValueError as exc:  # JSONDecodeError is a ValueError
            result.malformed += 1
            result.errors.append(f"line {lineno}: {exc}")
            continue
        seen.add(rec.commit_id)
        if not rec.file_changes:
            result.empty_dropped += 1
            continue
        result.records.append(rec)
    if result.malformed:
        logger.warning("skipped %d malformed line(s)", result.malformed)
    if max_malformed_pct is not None and result.malformed_pct > max_malformed_pct:
        raise CorpusError(
            f"{result.malformed} of {result.total_lines} lines malformed "
            f"({result.malformed_pct:.1f}%), above --max-malformed-pct={max_malformed_pct}"
        )
    result.records.sort(key=lambda r: r.timestamp)
    return result


def write_commit_log(records: Iterable[CommitRecord], fh: IO[str]) -> None:
    for rec in records:
        fh.write(json.dumps(record_to_json(rec), sort_keys=True, ensure_ascii=False))
        fh.write("\n")


def read_roster(fh: IO[str]) -> dict[str, int | None]:
    """Read ``author,departed_ts``; an empty departed_ts means still present."""
    roster: dict[str, int | None] = {}
    for row in csv.DictReader(fh):
        author = (row.get("author") or "").strip()
        if not author:
            continue
        departed = (row.get("departed_ts") or "").strip()
        roster[author] = int(departed) if departed else None
    return roster


def read_outages(fh: IO[str]) -> dict[str, int]:
    """Read an outage overlay CSV ``commit_id,level``."""
    out = {}
    for row in csv.DictReader(fh):
        out[row["commit_id"].strip()] = int(row["level"])
    return out


def apply_outages(records: Sequence[CommitRecord], levels: Mapping[str, int]) -> list[CommitRecord]:
    return [
        replace(r, outage=OutageAnnotation(levels[r.commit_id])) if r.commit_id in levels else r
        for r in records
    ]


# -- rename chains ------------------------------------------------------------


@dataclass
class FileIdentityMap:
    """Stable file identities across renames.

    ``commit_files`` maps each commit to the identities it touched, in first
    occurrence order.  ``occupancy`` lists, per path, the ``(start_ts, end_ts,
    identity)`` spans during which that path named the identity; ``end_ts`` is
    None while the span is open.
    """

    current_path: dict[str, str] = field(default_factory=dict)
    deleted: set[str] = field(default_factory=set)
    commit_files: dict[str, tuple[str, ...]] = field(default_factory=dict)
    occupancy: dict[str, list[list]] = field(default_factory=dict)
    history: dict[str, list[str]] = field(default_factory=dict)

    def resolve(self, path: str, timestamp: int | None = None) -> str:
        """Identity that carried ``path`` at ``timestamp`` (latest span if None)."""
        spans = self.occupancy.get(path)
        if not spans:
            raise KeyError(path)
        if timestamp is None:
            return spans[-1][2]
        hit = None
        for start, end, ident in spans:
            if start <= timestamp and (end is None or timestamp <= end):
                hit = ident
        if hit is None:
            raise KeyError(f"{path}@{timestamp}")
        return hit

    def resolve_current(self, path: str) -> str | None:
        """Identity whose present-day path is ``path``, falling back to history."""
        spans = self.occupancy.get(path)
        if not spans:
            return None
        for start, end, ident in reversed(spans):
            if end is None:
                return ident
        return spans[-1][2]

    @property
    def identities(self) -> list[str]:
        return sorted(self.current_path)

    def live_paths(self) -> dict[str, str]:
        return {p: i for i, p in self.current_path.items() if i not in self.deleted}

    def to_json(self) -> dict:
        return {
            "current_path": dict(sorted(self.current_path.items())),
            "deleted": sorted(self.deleted),
            "history": {k: v for k, v in sorted(self.history.items())},
            "commit_files": {k: list(v) for k, v in self.commit_files.items()},
            "occupancy": {k: v for k, v in sorted(self.occupancy.items())},
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "FileIdentityMap":
        return cls(
            current_path=dict(obj["current_path"]),
            deleted=set(obj["deleted"]),
            commit_files={k: tuple(v) for k, v in obj["commit_files"].items()},
            occupancy={k: [list(s) for s in v] for k, v in obj["occupancy"].items()},
            history={k: list(v) for k, v in obj["history"].items()},
        )


class _Replayer:
    def __init__(self):
        self.map = FileIdentityMap()
        self.live: dict[str, str] = {}
        self._next = 0

    def _new(self, path: str, ts: int) -> str:
        self._next += 1
        ident = f"F{self._next:06d}"
        self.map.current_path[ident] = path
        self.map.history[ident] = [path]
        self._open(path, ident, ts)
        return ident

    def _open(self, path: str, ident: str, ts: int) -> None:
        self.live[path] = ident
        self.map.occupancy.setdefault(path, []).append([ts, None, ident])

    def _close(self, path: str, ts: int) -> str:
        ident = self.live.pop(path)
        for span in reversed(self.map.occupancy[path]):
            if span[2] == ident and span[1] is None:
                span[1] = ts
                break
        return ident

    def _touch(self, path: str, ts: int) -> str:
        ident = self.live.get(path)
        if ident is None:
            ident = self._new(path, ts)
        return ident

    def apply(self, rec: CommitRecord) -> tuple[str, ...]:
        ts = rec.timestamp
        written: dict[str, int] = defaultdict(int)
        sources: dict[str, list[str]] = defaultdict(list)
        deletes = []
        for fc in rec.file_changes:
            if fc.path_after is not None:
                written[fc.path_after] += 1
            if fc.kind == "rename":
                sources[fc.path_before].append(fc.path_after)  # type: ignore[index,arg-type]
            elif fc.kind == "delete":
                deletes.append(fc.path_before)
        dup = sorted(p for p, n in written.items() if n > 1)
        if dup:
            raise RenameConflictError(rec.commit_id, f"path {dup[0]} written twice")
        both = sorted(set(deletes) & set(sources))
        if both:
            raise RenameConflictError(rec.commit_id, f"path {both[0]} renamed and deleted")

        touched: list[str] = []
        # resolve all sources first so swaps (a->b, b->a) see pre-commit state
        src_ident = {src: self._touch(src, ts) for src in sources}
        survivors = {
            fc.path for fc in rec.file_changes if fc.kind == "modify" and fc.path in sources
        }
        late_adds = []
        for fc in rec.file_changes:
            if fc.kind == "rename":
                continue
            if fc.path in sources:
                if fc.kind == "modify":
                    touched.append(src_ident[fc.path])
                else:
                    late_adds.append(fc.path)
                continue
            ident = self._touch(fc.path, ts)
            touched.append(ident)
            if fc.kind == "delete":
                self._close(fc.path, ts)
                self.map.deleted.add(ident)

        moves = []
        for src, dsts in sources.items():
            for i, dst in enumerate(dsts):
                inherit = i == 0 and src not in survivors
                moves.append((src_ident[src] if inherit else None, src, dst))
                if inherit:
                    self._close(src, ts)
        for ident, _src, dst in moves:
            if dst in self.live:
                # overwrite of an unrelated file
                self.map.deleted.add(self._close(dst, ts))
            if ident is None:
                ident = self._new(dst, ts)
            else:
                self._open(dst, ident, ts)
                self.map.current_path[ident] = dst
                self.map.history[ident].append(dst)
            touched.append(ident)
        for path in late_adds:
            touched.append(self._touch(path, ts))
        return tuple(dict.fromkeys(touched))


def build_rename_chains(commits: Sequence[CommitRecord]) -> FileIdentityMap:
    """Replay commits in time order and assign one identity per file lineage.

    Renames chain (a->b->c is one identity whose current path is c).  When a
    rename source also appears as a modify in the same commit, or the same
    source is renamed to several targets, every target after the first
    inheriting one is treated as a copy and gets a new identity.  A path
    written twice, or renamed and deleted, in one commit raises
    RenameConflictError.
    """
    rep = _Replayer()
    last = None
    for rec in commits:
        if last is not None and rec.timestamp < last:
            raise CorpusError("commits must be timestamp-ordered")
        last = rec.timestamp
        rep.map.commit_files[rec.commit_id] = rep.apply(rec)
    return rep.map


# -- sessionization -------------------------------------------------------------


def sessionize_author_activity(
    commits: Sequence[CommitRecord], gap_minutes: float = 120.0, floor_minutes: float = 5.0
) -> dict[str, tuple[float, int]]:
    """Commit-gap proxy for authoring time.

    Per author, ``dat = min(gap to previous commit, gap_minutes) + floor_minutes``
    with the author's first commit getting ``floor_minutes``.  The session
    count per commit is fixed at 1.
    """
    if not gap_minutes > floor_minutes > 0:
        raise ValueError("need gap_minutes > floor_minutes > 0")
    out: dict[str, tuple[float, int]] = {}
    for author_commits in _by_author(commits).values():
        prev = None
        for rec in author_commits:
            if prev is None:
                dat = floor_minutes
            else:
                gap = (rec.timestamp - prev) / 60.0
                dat = min(gap, gap_minutes) + floor_minutes
            out[rec.commit_id] = (dat, 1)
            prev = rec.timestamp
    return out


def author_sessions(commits: Sequence[CommitRecord], gap_minutes: float = 120.0) -> dict[str, list[list[str]]]:
    """Group each author's commits into maximal runs with gaps <= gap_minutes."""
    out = {}
    for author, author_commits in _by_author(commits).items():
        sessions: list[list[str]] = []
        prev = None
        for rec in author_commits:
            if prev is None or (rec.timestamp - prev) / 60.0 > gap_minutes:
                sessions.append([])
            sessions[-1].append(rec.commit_id)
            prev = rec.timestamp
        out[author] = sessions
    return out


def _by_author(commits: Iterable[CommitRecord]) -> dict[str, list[CommitRecord]]:
    groups: dict[str, list[CommitRecord]] = defaultdict(list)
    for rec in commits:
        groups[rec.author_id].append(rec)
    for recs in groups.values():
        recs.sort(key=lambda r: (r.timestamp, r.commit_id))
    return dict(groups)
