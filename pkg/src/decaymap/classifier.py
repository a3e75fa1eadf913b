"""Keyword labelling of improvement commits and SATD comment scanning."""

from __future__ import annotations

import csv
import io
import json
import os
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence

from .code_metrics import LanguageConfig, language_for, scan
from .ingest import CommitRecord

CATEGORIES = ("removal", "better_engineering", "cleanup", "refactor", "dead_code")

# category,pattern,polarity[,case]
DEFAULT_PATTERNS_CSV = """\
category,pattern,polarity,case
removal,remove,positive,
removal,delete,positive,
removal,unneeded,positive,
removal,add deleted code,negative,
better_engineering,better engineering,positive,
better_engineering,BE,positive,sensitive
cleanup,clean,positive,
refactor,refactor,positive,
refactor,rework,positive,
dead_code,dead,positive,
"""

SATD_PATTERNS = ("hack", "fixme", "todo", "workaround", "kludge", "temporary fix")

_SUFFIXES = r"(?:s|es|d|ed|ing|ings|up|ups|er|ers)?"


def _word_regex(word: str, inflect: bool) -> str:
    w = re.escape(word)
    if not inflect:
        return w
    alts = [w + _SUFFIXES]
    if word.endswith("e") and len(word) > 2:
        # remove -> removal/removing, delete -> deletion
        alts.append(re.escape(word[:-1]) + r"(?:ing|al|ion|ions)")
    return "(?:" + "|".join(alts) + ")"


def compile_pattern(pattern: str, case_sensitive: bool = False) -> re.Pattern:
    """Whole-word match; words may carry common inflections unless case-sensitive.

    Case-sensitive patterns are meant for acronyms and match verbatim.
    """
    words = pattern.split()
    body = r"[\s\-_]+".join(_word_regex(w, not case_sensitive) for w in words)
    return re.compile(rf"(?<![\w]){body}(?![\w])", 0 if case_sensitive else re.IGNORECASE)


@dataclass(frozen=True)
class Pattern:
    category: str
    pattern: str
    polarity: str
    case_sensitive: bool = False

    @property
    def regex(self) -> re.Pattern:
        return compile_pattern(self.pattern, self.case_sensitive)


@dataclass(frozen=True)
class ImprovementLabel:
    category: str
    matched_pattern: str
    source: str  # "title" or "tag"


def load_patterns(fh: IO[str]) -> list[Pattern]:
    out = []
    for row in csv.DictReader(fh):
        polarity = row["polarity"].strip().lower()
        if polarity not in ("positive", "negative"):
            raise ValueError(f"bad polarity {polarity!r}")
        out.append(
            Pattern(
                row["category"].strip(),
                row["pattern"].strip(),
                polarity,
                (row.get("case") or "").strip().lower() == "sensitive",
            )
        )
    return out


DEFAULT_PATTERNS = load_patterns(io.StringIO(DEFAULT_PATTERNS_CSV))


class Classifier:
    def __init__(self, patterns: Sequence[Pattern] = DEFAULT_PATTERNS):
        self.patterns = list(patterns)
        self.categories = list(dict.fromkeys(p.category for p in self.patterns))
        self._pos = {c: [(p, p.regex) for p in self.patterns if p.category == c and p.polarity == "positive"] for c in self.categories}
        self._neg = {c: [p.regex for p in self.patterns if p.category == c and p.polarity == "negative"] for c in self.categories}

    def _match(self, category: str, text: str) -> str | None:
        for rx in self._neg[category]:
            # mask negative hits so their words cannot count as positives
            text = rx.sub(lambda m: " " * len(m.group(0)), text)
        for pat, rx in self._pos[category]:
            if rx.search(text):
                return pat.pattern
        return None

    def classify(self, title: str, tags: Iterable[str] = ()) -> frozenset[ImprovementLabel]:
        """All categories whose patterns hit the title or a tag, one label each."""
        tags = list(tags)
        labels = set()
        for cat in self.categories:
            hit = self._match(cat, title)
            if hit is not None:
                labels.add(ImprovementLabel(cat, hit, "title"))
                continue
            for tag in tags:
                hit = self._match(cat, tag)
                if hit is not None:
                    labels.add(ImprovementLabel(cat, hit, "tag"))
                    break
        return frozenset(labels)


_DEFAULT = Classifier()


def classify_message(title: str, tags: Iterable[str] = (), classifier: Classifier | None = None) -> frozenset[ImprovementLabel]:
    return (classifier or _DEFAULT).classify(title, tags)


@dataclass
class CorpusReport:
    total: int
    counts: dict[str, int]
    union_count: int
    categories: list[str] = field(default_factory=list)

    def pct(self, n: int) -> float:
        return 100.0 * n / self.total

    @property
    def percentages(self) -> dict[str, float]:
        return {c: self.pct(self.counts[c]) for c in self.categories}

    @property
    def union_pct(self) -> float:
        return self.pct(self.union_count)

    @property
    def sum_pct(self) -> float:
        return sum(self.percentages.values())

    @property
    def overlap_note(self) -> str:
        extra = sum(self.counts.values()) - self.union_count
        if extra == 0:
            return "categories are disjoint on this corpus"
        return (
            f"per-category shares sum to {self.sum_pct:.2f}% while {self.union_pct:.2f}% of "
            f"diffs match any category ({extra} extra label(s) from multi-labelled diffs)"
        )

    def to_json(self) -> dict:
        return {
            "total_diffs": self.total,
            "counts": {c: self.counts[c] for c in self.categories},
            "percent": {c: round(v, 6) for c, v in self.percentages.items()},
            "union_count": self.union_count,
            "union_percent": round(self.union_pct, 6),
            "sum_percent": round(self.sum_pct, 6),
            "overlap_note": self.overlap_note,
        }

    def table(self) -> str:
        lines = [f"{'category':<20} {'diffs':>7} {'% of diffs':>11}"]
        for c in self.categories:
            lines.append(f"{c:<20} {self.counts[c]:>7} {self.percentages[c]:>10.2f}%")
        lines.append(f"{'any category':<20} {self.union_count:>7} {self.union_pct:>10.2f}%")
        lines.append(self.overlap_note)
        return "\n".join(lines) + "\n"


def corpus_report(commits: Sequence[CommitRecord], classifier: Classifier | None = None) -> CorpusReport:
    """Share of diffs per category and for the union of categories."""
    if not commits:
        raise ValueError("corpus is empty")
    clf = classifier or _DEFAULT
    counts: Counter = Counter()
    union = 0
    for rec in commits:
        cats = {lab.category for lab in clf.classify(rec.message_title, rec.message_tags)}
        counts.update(cats)
        union += bool(cats)
    return CorpusReport(len(commits), {c: counts.get(c, 0) for c in clf.categories}, union, list(clf.categories))


def report_json(report: CorpusReport) -> str:
    return json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n"


# -- self-admitted technical debt ---------------------------------------------------


@dataclass
class SatdScan:
    counts: dict[str, int] = field(default_factory=dict)
    unreadable: int = 0


def _satd_regex(patterns: Sequence[str]) -> re.Pattern:
    alts = [r"[\s\-_]+".join(re.escape(w) for w in p.split()) for p in patterns]
    return re.compile(r"(?<!\w)(?:" + "|".join(alts) + r")(?!\w)", re.IGNORECASE)


def count_satd(text: str, language: LanguageConfig, patterns: Sequence[str] = SATD_PATTERNS) -> int:
    rx = _satd_regex(patterns)
    return sum(1 for _, body in scan(text, language).comments if rx.search(body))


def satd_scan(
    source_root: str | os.PathLike,
    language_config: Mapping[str, LanguageConfig] | None = None,
    patterns: Sequence[str] = SATD_PATTERNS,
) -> SatdScan:
    """Per-file count of comments containing an SATD keyword."""
    root = Path(source_root)
    out = SatdScan()
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        lang = language_for(path, language_config)
        if lang is None:
            continue
        rel = path.relative_to(root).as_posix()
        try:
            text = path.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError):
            out.unreadable += 1
            continue
        out.counts[rel] = count_satd(text, lang, patterns)
    return out
