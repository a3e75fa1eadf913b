"""Small constructors for hand-built corpora."""

from __future__ import annotations

import json
from pathlib import Path

from decaymap.ingest import CommitRecord, FileChange, OutageAnnotation


def change(op: str, *paths: str, add: int = 1, dele: int = 0) -> FileChange:
    """``m x`` modify, ``a x`` add, ``d x`` delete, ``r x y`` rename."""
    if op == "m":
        return FileChange(paths[0], paths[0], add, dele, "modify")
    if op == "a":
        return FileChange(None, paths[0], add, 0, "add")
    if op == "d":
        return FileChange(paths[0], None, 0, dele, "delete")
    if op == "r":
        return FileChange(paths[0], paths[1], add, dele, "rename")
    raise ValueError(op)


def commit(cid: str, ts: int, *changes, author: str = "alice", title: str = "change", tags=(), outage: int | None = None) -> CommitRecord:
    fcs = tuple(c if isinstance(c, FileChange) else change(*c) for c in changes)
    return CommitRecord(cid, author, ts, title, tuple(tags), fcs, OutageAnnotation(outage) if outage else None)


def touching(cid: str, ts: int, paths, author: str = "alice", **kw) -> CommitRecord:
    return commit(cid, ts, *[("m", p) for p in paths], author=author, **kw)


def jsonl(objs) -> list[str]:
    return [json.dumps(o) + "\n" for o in objs]


def line(cid="c1", ts=100, author="alice", files=None, **extra) -> dict:
    files = files if files is not None else [{"before": "a.c", "after": "a.c", "add": 1, "del": 0, "kind": "modify"}]
    obj = {"id": cid, "author": author, "ts": ts, "title": "t", "tags": [], "files": files}
    obj.update(extra)
    return obj


DEMO_SPEC = Path(__file__).resolve().parent.parent / "demo" / "scenario.json"


def run_demo_pipeline(root: Path, main) -> dict[str, int]:
    """Generate the demo corpus under ``root`` and run every command on it."""
    data, ws = root / "demo", root / "ws"
    w = ["--workspace", str(ws)]
    steps = {
        "demo-gen": ["demo-gen", "--spec", str(DEMO_SPEC), "--out", str(data)],
        "ingest": ["ingest", str(data / "commits.jsonl"), "--roster", str(data / "roster.csv"), *w],
        "graph": ["graph", "--source", str(data / "source"), *w],
        "centrality": ["centrality", *w],
        "metrics": ["metrics", *w],
        "rank": ["rank", "--sort", "katz", "--top", "20", *w],
        "classify": ["classify", *w],
        "impact": [
            "impact", "--spec", str(data / "intervention.json"),
            "--source-pre", str(data / "source_pre"), "--source-post", str(data / "source"), *w,
        ],
    }
    return {name: main(argv) for name, argv in steps.items()}
