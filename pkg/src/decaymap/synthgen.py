"""Deterministic synthetic repositories with plantable labels and effects.

Authors work in sessions.  The first commit of a session only touches
background files; every later commit follows the previous one by
``dat - floor`` minutes, so the commit-gap authoring-time proxy of those
commits equals the drawn ``dat``.  That makes planted multipliers on the
proxy observable exactly rather than approximately.
"""

from __future__ import annotations

import csv
import json
import math
import os
import random
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Mapping

from .ingest import CommitRecord, FileChange, OutageAnnotation, record_to_json

DAY = 86_400

BACKGROUND_VERBS = ("Add", "Update", "Implement", "Fix", "Adjust", "Improve", "Tune", "Support", "Enable", "Extend")
NOUNS = ("handler", "parser", "cache", "logging", "config loader", "metrics", "API client", "retry logic", "tests", "docs")
PLANT_TEMPLATES = {
    "removal": ("Remove {noun}", "Delete stale {noun}", "Drop unneeded {noun}"),
    "better_engineering": ("Better engineering: tidy {noun}", "BE: simplify {noun}"),
    "cleanup": ("Clean {noun}", "Cleanup {noun} module"),
    "refactor": ("Refactor {noun}", "Rework {noun}"),
    "dead_code": ("Purge dead {noun} paths",),
}


@dataclass
class PlantedIntervention:
    name: str = "planted"
    type: str = "ccn_decomposition"
    n_files: int = 8
    at_day: int = 360
    duration_days: int = 7
    n_commits: int = 6
    dat_multiplier: float = 1.0
    outage_multiplier: float = 1.0
    ccn_multiplier: float = 1.0
    create_files: int = 0
    delete_files: int = 0


@dataclass
class ScenarioSpec:
    seed: int = 0
    n_files: int = 60
    n_authors: int = 8
    start_ts: int = 1_600_000_000
    days: int = 540
    sessions_per_week: float = 3.0
    commits_per_session: float = 4.0
    files_per_commit: float = 2.0
    dat_median_minutes: float = 50.0
    dat_sigma: float = 0.25
    gap_minutes: float = 120.0
    floor_minutes: float = 5.0
    rename_probability: float = 0.05
    python_fraction: float = 0.3
    outage_rate: float = 0.04
    departed_fraction: float = 0.25
    satd_probability: float = 0.2
    planted_labels: dict[str, float] = field(default_factory=lambda: {"removal": 0.05, "cleanup": 0.03, "refactor": 0.02})
    intervention: PlantedIntervention | None = field(default_factory=PlantedIntervention)

    def __post_init__(self):
        probs = [self.rename_probability, self.python_fraction, self.outage_rate, self.departed_fraction, self.satd_probability]
        probs += list(self.planted_labels.values())
        if any(not 0.0 <= p <= 1.0 for p in probs):
            raise ValueError("probabilities must lie in [0, 1]")
        if sum(self.planted_labels.values()) > 1.0:
            raise ValueError("planted label rates sum above 1")
        iv = self.intervention
        if iv is not None:
            if min(iv.dat_multiplier, iv.outage_multiplier, iv.ccn_multiplier) <= 0:
                raise ValueError("multipliers must be positive")
            if not 0 < iv.at_day < self.days:
                raise ValueError("intervention must fall inside the history")

    @classmethod
    def from_json(cls, obj: Mapping) -> "ScenarioSpec":
        d = dict(obj)
        iv = d.pop("intervention", {})
        spec = cls(**d, intervention=None)
        if iv is not None:
            spec.intervention = PlantedIntervention(**iv)
            spec.__post_init__()
        return spec

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class SourceFile:
    """Renderable description of one file; content depends on names only via includes."""

    key: int
    language: str
    functions: list[int]  # branch count per function
    imports: list[int]
    satd: int = 0


@dataclass
class Scenario:
    spec: ScenarioSpec
    commits: list[CommitRecord]
    roster: dict[str, int | None]
    files_pre: dict[int, SourceFile]
    files_post: dict[int, SourceFile]
    paths_pre: dict[int, str]
    paths_post: dict[int, str]
    intervention: dict | None
    ground_truth: dict

    def tree(self, which: str = "post") -> dict[str, str]:
        files = self.files_post if which == "post" else self.files_pre
        paths = self.paths_post if which == "post" else self.paths_pre
        return {paths[k]: render(f, paths) for k, f in sorted(files.items())}


def render(f: SourceFile, paths: Mapping[int, str]) -> str:
    name = f"unit{f.key:03d}"
    lines = []
    if f.language == "c":
        lines += [f'#include "{paths[i]}"' for i in f.imports if i in paths]
        lines.append(f"/* {name}: generated */")
        for s in range(f.satd):
            lines.append(f"// TODO: revisit {name} part {s}")
        for j, nb in enumerate(f.functions):
            lines.append(f"int {name}_f{j}(int x) {{")
            for b in range(nb):
                lines.append(f"    if (x > {b}) {{ x -= {b + 1}; }}")
            lines += ["    return x;", "}", ""]
    else:
        for i in f.imports:
            if i in paths:
                lines.append("import " + paths[i][: -len(".py")].replace("/", "."))
        lines.append(f"# {name}: generated")
        for s in range(f.satd):
            lines.append(f"# FIXME revisit {name} part {s}")
        for j, nb in enumerate(f.functions):
            lines.append(f"def {name}_f{j}(x):")
            for b in range(nb):
                lines += [f"    if x > {b}:", f"        x -= {b + 1}"]
            lines += ["    return x", ""]
    return "\n".join(lines) + "\n"


def _path(key: int, language: str, renamed: bool = False) -> str:
    ext = ".c" if language == "c" else ".py"
    stem = f"moved{key:03d}" if renamed else f"unit{key:03d}"
    return f"src/mod{key % 5}/{stem}{ext}"


def generate(spec: ScenarioSpec) -> Scenario:
    """Build the commit history, roster, source snapshots and ground truth."""
    rng = random.Random(spec.seed)
    iv = spec.intervention
    t0 = spec.start_ts
    t_end_hist = t0 + spec.days * DAY
    floor = spec.floor_minutes
    cap = spec.gap_minutes

    keys = list(range(spec.n_files))
    language = {k: ("python" if rng.random() < spec.python_fraction else "c") for k in keys}
    weight = {k: 1.0 / (k + 1) ** 0.8 for k in keys}
    files = {
        k: SourceFile(
            k,
            language[k],
            [rng.randint(0, 4) for _ in range(rng.randint(1, 6))],
            sorted(rng.sample([j for j in keys if j != k and language[j] == language[k]], k=min(2, sum(language[j] == language[k] for j in keys) - 1))),
            satd=1 if rng.random() < spec.satd_probability else 0,
        )
        for k in keys
    }

    treated: list[int] = []
    iv_start = iv_end = None
    if iv is not None:
        iv_start = t0 + iv.at_day * DAY
        iv_end = iv_start + iv.duration_days * DAY
        treated = sorted(keys[: iv.n_files])
    treated_set = set(treated)
    background = [k for k in keys if k not in treated_set]

    # renames: (time, key) pairs, applied by the first later commit touching the file
    renames = {k: t0 + rng.randint(2, spec.days - 1) * DAY for k in keys if rng.random() < spec.rename_probability}

    authors = [f"dev{a:02d}" for a in range(spec.n_authors)]
    departed = {}
    for a in authors[1:]:
        if rng.random() < spec.departed_fraction:
            departed[a] = t0 + rng.randint(spec.days // 4, spec.days - 30) * DAY

    raw: list[dict] = []

    # initial import in batches of five files, one batch per hour on day 0
    for b in range(0, len(keys), 5):
        raw.append({"ts": t0 + 3600 * (b // 5 + 1), "author": authors[0], "files": [(k, "add") for k in keys[b : b + 5]], "title": "Import initial sources", "kind": "import"})

    def draw_dat() -> float:
        d = spec.dat_median_minutes * math.exp(rng.gauss(0.0, spec.dat_sigma))
        return min(max(d, floor + 1.0), cap + floor - 1.0)

    def pick_files(pool: list[int]) -> list[int]:
        n = 1
        while n < 6 and rng.random() < 1.0 - 1.0 / spec.files_per_commit:
            n += 1
        chosen: list[int] = []
        cand = list(pool)
        while cand and len(chosen) < n:
            k = rng.choices(cand, weights=[weight[c] for c in cand])[0]
            chosen.append(k)
            cand.remove(k)
        return sorted(chosen)

    mean_session_gap = 7.0 / spec.sessions_per_week * DAY
    for a in authors:
        stop = departed.get(a, t_end_hist)
        t = t0 + DAY + rng.randint(0, int(mean_session_gap))
        while t < stop:
            n = 1 + max(1, int(round(rng.expovariate(1.0 / max(spec.commits_per_session - 1, 1e-9)))))
            prev = t
            raw.append({"ts": t, "author": a, "files": [(k, "modify") for k in pick_files(background)], "kind": "warmup"})
            for _ in range(n - 1):
                chosen = pick_files(keys)
                dat = draw_dat()
                base = dat
                post = iv is not None and iv_end < prev <= iv_end + 90 * DAY
                hits = treated_set.intersection(chosen)
                if post and hits:
                    dat = dat * iv.dat_multiplier
                    dat = min(max(dat, floor + 1.0), cap + floor - 1.0)
                ts = prev + int(round((dat - floor) * 60))
                if ts >= stop or (iv is not None and prev <= iv_end < ts) or (iv is not None and prev < iv_start <= ts):
                    break
                raw.append({"ts": ts, "author": a, "files": [(k, "modify") for k in chosen], "kind": "work", "dat": dat, "base_dat": base, "post": post and bool(hits)})
                prev = ts
            t = prev + int(cap * 60) + 3600 + int(rng.expovariate(1.0 / mean_session_gap))

    created: list[int] = []
    deleted: list[int] = []
    if iv is not None:
        nxt = len(keys)
        for c in range(iv.create_files):
            k = nxt + c
            language[k] = language[treated[c % len(treated)]]
            files[k] = SourceFile(k, language[k], [rng.randint(0, 3) for _ in range(rng.randint(1, 3))], [])
            created.append(k)
        deleted = treated[len(treated) - iv.delete_files :] if iv.delete_files else []
        per = [treated[i :: iv.n_commits] for i in range(iv.n_commits)]
        for c in created:
            per[c % iv.n_commits].append(c)
        for i, group in enumerate(per):
            ts = iv_start + (iv_end - iv_start) * i // max(iv.n_commits - 1, 1)
            if i == iv.n_commits - 1:
                ts = iv_end
            changes = []
            for k in sorted(group):
                kind = "add" if k in created else ("delete" if k in deleted else "modify")
                changes.append((k, kind))
            if not changes:
                changes = [(treated[0], "modify")]
            raw.append({"ts": ts, "author": rng.choice(authors[: max(1, len(authors) - len(departed))]), "files": changes, "title": f"Restructure {rng.choice(NOUNS)}", "kind": "reengineering"})

    # deterministic order: time, then author, then insertion
    order = sorted(range(len(raw)), key=lambda i: (raw[i]["ts"], raw[i]["author"], i))
    raw = [raw[i] for i in order]
    if deleted:
        # deleted files stop being touched once their delete commit lands
        gone: set[int] = set()
        for r in raw:
            if r["kind"] == "reengineering":
                gone.update(k for k, kind in r["files"] if kind == "delete")
            elif gone:
                r["files"] = [(k, kind) for k, kind in r["files"] if k not in gone]
        raw = [r for r in raw if r["files"]]

    # planted labels: exact counts over all non-reengineering commits
    labelable = [i for i, r in enumerate(raw) if r["kind"] in ("warmup", "work")]
    plant: dict[int, str] = {}
    remaining = list(labelable)
    rng.shuffle(remaining)
    total = len(raw)
    for cat, rate in sorted(spec.planted_labels.items()):
        k = int(round(rate * total))
        for i in remaining[:k]:
            plant[i] = cat
        remaining = remaining[k:]

    paths: dict[int, str] = {k: _path(k, language[k]) for k in keys}
    for k in created:
        paths[k] = _path(k, language[k])
    renamed_done: set[int] = set()
    paths_pre: dict[int, str] | None = None
    commits: list[CommitRecord] = []
    labels_truth: dict[str, list[str]] = {c: [] for c in spec.planted_labels}
    for n, r in enumerate(raw):
        if iv is not None and paths_pre is None and r["ts"] >= iv_start:
            paths_pre = {k: paths[k] for k in keys}
        cid = f"c{n:06d}"
        changes = []
        for k, kind in r["files"]:
            adds, dels = rng.randint(1, 40), rng.randint(0, 20)
            if kind == "add":
                changes.append(FileChange(None, paths[k], adds, 0, "add"))
            elif kind == "delete":
                changes.append(FileChange(paths[k], None, 0, dels, "delete"))
            elif k in renames and k not in renamed_done and r["ts"] >= renames[k] and r["kind"] != "import":
                new = _path(k, language[k], renamed=True)
                changes.append(FileChange(paths[k], new, adds, dels, "rename"))
                paths[k] = new
                renamed_done.add(k)
            else:
                changes.append(FileChange(paths[k], paths[k], adds, dels, "modify"))
        if n in plant:
            cat = plant[n]
            title = rng.choice(PLANT_TEMPLATES[cat]).format(noun=rng.choice(NOUNS))
            labels_truth[cat].append(cid)
        elif "title" in r:
            title = r["title"]
        else:
            title = f"{rng.choice(BACKGROUND_VERBS)} {rng.choice(NOUNS)} in mod{r['files'][0][0] % 5}"
        rate = spec.outage_rate
        touched_treated = iv is not None and treated_set.intersection(k for k, _ in r["files"])
        in_post = iv is not None and iv_end < r["ts"] <= iv_end + 90 * DAY
        if in_post and touched_treated:
            rate = min(1.0, rate * iv.outage_multiplier)
        outage = None
        if r["kind"] == "work" and rng.random() < rate:
            outage = OutageAnnotation(rng.randint(1, 4))
        commits.append(CommitRecord(cid, r["author"], r["ts"], title, ("reengineering",) if r["kind"] == "reengineering" else (), tuple(changes), outage))

    if paths_pre is None:
        paths_pre = {k: paths[k] for k in keys}
    files_pre = {k: files[k] for k in keys}
    files_post = {}
    for k, f in files.items():
        if k in deleted:
            continue
        if k in treated_set and iv is not None and iv.ccn_multiplier != 1.0:
            f = replace(f, functions=[max(0, int(round(b * iv.ccn_multiplier))) for b in f.functions])
        files_post[k] = f
    paths_post = {k: paths[k] for k in files_post}

    intervention = None
    if iv is not None:
        re_ids = [c.commit_id for c in commits if "reengineering" in c.message_tags]
        intervention = {"name": iv.name, "type": iv.type, "commit_ids": re_ids}

    work = [r for r in raw if r.get("kind") == "work"]
    truth = {
        "seed": spec.seed,
        "n_commits": len(commits),
        "planted_labels": {c: sorted(v) for c, v in labels_truth.items()},
        "planted_label_fraction": {c: len(v) / len(commits) for c, v in labels_truth.items()},
        "renamed_files": len(renamed_done),
        "departed_authors": dict(sorted(departed.items())),
        "treated_paths": sorted(paths[k] for k in treated),
        "created_paths": sorted(paths[k] for k in created),
        "deleted_paths": sorted(paths[k] for k in deleted),
        "dat_multiplier": iv.dat_multiplier if iv else None,
        "outage_multiplier": iv.outage_multiplier if iv else None,
        "ccn_multiplier": iv.ccn_multiplier if iv else None,
        "planted_post_diffs": sum(1 for r in work if r.get("post")),
        "satd_per_file": {paths_post[k]: f.satd for k, f in sorted(files_post.items())},
    }
    roster = {a: departed.get(a) for a in authors}
    return Scenario(spec, commits, roster, files_pre, files_post, paths_pre, paths_post, intervention, truth)


def flatten_renames(scn: Scenario) -> Scenario:
    """Same history with every file carrying its final name from the start."""
    # follow rename chains forward in time
    lineage: dict[str, str] = {}
    for rec in scn.commits:
        for fc in rec.file_changes:
            if fc.kind == "rename":
                lineage[fc.path_before] = fc.path_after  # type: ignore[index]

    def last(p: str) -> str:
        seen = set()
        while p in lineage and p not in seen:
            seen.add(p)
            p = lineage[p]
        return p

    commits = []
    for rec in scn.commits:
        changes = []
        for fc in rec.file_changes:
            if fc.kind == "rename":
                p = last(fc.path_after)  # type: ignore[arg-type]
                changes.append(FileChange(p, p, fc.lines_added, fc.lines_deleted, "modify"))
            else:
                changes.append(
                    FileChange(
                        last(fc.path_before) if fc.path_before else None,
                        last(fc.path_after) if fc.path_after else None,
                        fc.lines_added,
                        fc.lines_deleted,
                        fc.kind,
                    )
                )
        commits.append(replace(rec, file_changes=tuple(changes)))
    final = {k: last(p) for k, p in scn.paths_pre.items()}
    return replace(scn, commits=commits, paths_pre=final, paths_post={k: last(p) for k, p in scn.paths_post.items()})


def write_scenario(scn: Scenario, out_dir: str | os.PathLike) -> dict[str, str]:
    """Write the scenario in the ingest formats; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = {}
    p = out / "commits.jsonl"
    with open(p, "w", encoding="utf-8", newline="\n") as fh:
        for rec in scn.commits:
            fh.write(json.dumps(record_to_json(rec), sort_keys=True) + "\n")
    written["commits"] = str(p)
    p = out / "roster.csv"
    with open(p, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["author", "departed_ts"])
        for a, ts in sorted(scn.roster.items()):
            w.writerow([a, "" if ts is None else ts])
    written["roster"] = str(p)
    for which, name in (("post", "source"), ("pre", "source_pre")):
        root = out / name
        for rel, text in scn.tree(which).items():
            f = root / rel
            f.parent.mkdir(parents=True, exist_ok=True)
            f.write_text(text, encoding="utf-8", newline="\n")
        written[name] = str(root)
    if scn.intervention is not None:
        p = out / "intervention.json"
        p.write_text(json.dumps(scn.intervention, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        written["intervention"] = str(p)
    p = out / "ground_truth.json"
    p.write_text(json.dumps(scn.ground_truth, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    written["ground_truth"] = str(p)
    p = out / "scenario.json"
    p.write_text(json.dumps(scn.spec.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    written["scenario"] = str(p)
    return written
