"""Size and cyclomatic complexity by lightweight token scanning.

No parsing: comments and string literals are located with one alternation
regex per language, then branch tokens and function-start patterns are
counted on what remains.
"""

from __future__ import annotations

import csv
import logging
import os
import re
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import IO, Mapping

logger = logging.getLogger(__name__)

# identifier(...) [qualifiers] {  -- but not control keywords
C_FUNCTION = re.compile(
    r"\b(?!(?:if|for|while|switch|catch|return|sizeof|else|do|new|delete|throw|elif|foreach)\b)"
    r"[A-Za-z_~][\w:~]*\s*\([^;{}()]*(?:\([^;{}()]*\)[^;{}()]*)*\)\s*"
    r"(?:const\b\s*)?(?:noexcept\b\s*)?(?:override\b\s*)?(?:throws\s+[\w.,\s]+?)?"
    r"(?:->\s*[^{;()]+?)?\s*\{"
)
PY_FUNCTION = re.compile(r"^[ \t]*(?:async[ \t]+)?def[ \t]+\w+", re.MULTILINE)
GO_FUNCTION = re.compile(r"\bfunc\b")
RS_FUNCTION = re.compile(r"\bfn\s+\w+")

C_BRANCHES = ("if", "for", "while", "case", "catch", "&&", "||", "?")


@dataclass(frozen=True)
class LanguageConfig:
    name: str
    comment_line: tuple[str, ...] = ("//",)
    comment_open: str | None = "/*"
    comment_close: str | None = "*/"
    branch_tokens: tuple[str, ...] = C_BRANCHES
    function_patterns: tuple[re.Pattern, ...] = (C_FUNCTION,)
    string_delims: tuple[str, ...] = ('"', "'")
    triple_quotes: bool = False

    @cached_property
    def lexer(self) -> re.Pattern:
        alts = []
        if self.triple_quotes:
            alts += [r'(?P<s3>"""[\s\S]*?(?:"""|\Z)|' r"'''[\s\S]*?(?:'''|\Z))"]
        if self.comment_open and self.comment_close:
            alts.append(
                rf"(?P<block>{re.escape(self.comment_open)}[\s\S]*?(?:{re.escape(self.comment_close)}|\Z))"
            )
        if self.comment_line:
            starts = "|".join(re.escape(c) for c in self.comment_line)
            alts.append(rf"(?P<line>(?:{starts})[^\n]*)")
        for i, d in enumerate(self.string_delims):
            q = re.escape(d)
            alts.append(rf"(?P<s{i}>{q}(?:\\.|[^\\\n{q}])*(?:{q}|$))")
        return re.compile("|".join(alts), re.MULTILINE)

    @cached_property
    def branch_regex(self) -> re.Pattern | None:
        parts = []
        for tok in sorted(self.branch_tokens, key=len, reverse=True):
            if re.fullmatch(r"\w+", tok):
                parts.append(rf"\b{re.escape(tok)}\b")
            else:
                parts.append(re.escape(tok))
        return re.compile("|".join(parts)) if parts else None


_C = LanguageConfig("c")
PYTHON = LanguageConfig(
    "python",
    comment_line=("#",),
    comment_open=None,
    comment_close=None,
    branch_tokens=("if", "elif", "for", "while", "except", "case", "and", "or"),
    function_patterns=(PY_FUNCTION,),
    triple_quotes=True,
)

DEFAULT_LANGUAGES: dict[str, LanguageConfig] = {
    **{ext: replace(_C, name="c") for ext in (".c", ".h")},
    **{ext: replace(_C, name="cpp") for ext in (".cc", ".cpp", ".cxx", ".hh", ".hpp", ".hxx")},
    ".java": replace(_C, name="java"),
    ".cs": replace(_C, name="csharp"),
    ".js": replace(_C, name="javascript"),
    ".ts": replace(_C, name="typescript"),
    ".php": replace(_C, name="php", comment_line=("//", "#")),
    ".kt": replace(_C, name="kotlin", branch_tokens=("if", "for", "while", "when", "catch", "&&", "||")),
    ".swift": replace(_C, name="swift"),
    ".go": replace(
        _C,
        name="go",
        branch_tokens=("if", "for", "case", "&&", "||"),
        function_patterns=(GO_FUNCTION,),
        string_delims=('"', "'", "`"),
    ),
    ".rs": replace(
        _C,
        name="rust",
        branch_tokens=("if", "for", "while", "loop", "match", "&&", "||"),
        function_patterns=(RS_FUNCTION,),
        string_delims=('"',),
    ),
    ".py": PYTHON,
}


def language_for(path: str | os.PathLike, languages: Mapping[str, LanguageConfig] | None = None):
    languages = DEFAULT_LANGUAGES if languages is None else languages
    return languages.get(os.path.splitext(str(path))[1].lower())


def load_language_config(fh: IO[str], base: Mapping[str, LanguageConfig] | None = None) -> dict[str, LanguageConfig]:
    """Read ``ext,comment_line,comment_open,comment_close,branch_tokens`` rows.

    ``branch_tokens`` is ``|``-separated.  Rows override (or extend) ``base``;
    an unknown extension gets the C-style function heuristic.
    """
    out = dict(DEFAULT_LANGUAGES if base is None else base)
    for row in csv.DictReader(fh):
        ext = row["ext"].strip().lower()
        if not ext.startswith("."):
            ext = "." + ext
        proto = out.get(ext, _C)
        line = (row.get("comment_line") or "").strip()
        out[ext] = replace(
            proto,
            name=proto.name if ext in out else ext.lstrip("."),
            comment_line=(line,) if line else (),
            comment_open=(row.get("comment_open") or "").strip() or None,
            comment_close=(row.get("comment_close") or "").strip() or None,
            branch_tokens=tuple(t for t in (row.get("branch_tokens") or "").split("|") if t),
        )
    return out


@dataclass
class Scan:
    """Source split into comment-free text, code-only text and comments."""

    without_comments: str
    code: str
    comments: list[tuple[int, str]] = field(default_factory=list)


def scan(text: str, lang: LanguageConfig) -> Scan:
    no_comment: list[str] = []
    code: list[str] = []
    comments: list[tuple[int, str]] = []
    pos = 0
    for m in lang.lexer.finditer(text):
        chunk = m.group(0)
        no_comment.append(text[pos : m.start()])
        code.append(text[pos : m.start()])
        blank = re.sub(r"[^\n]", " ", chunk)
        if m.lastgroup in ("block", "line"):
            comments.append((text.count("\n", 0, m.start()) + 1, chunk))
            no_comment.append(blank)
            code.append(blank)
        else:
            no_comment.append(chunk)
            # keep the delimiters so `"" ` still reads as code
            code.append(chunk[0] + blank[1:-1] + chunk[-1] if len(chunk) > 1 else chunk)
        pos = m.end()
    no_comment.append(text[pos:])
    code.append(text[pos:])
    return Scan("".join(no_comment), "".join(code), comments)


def _decode(data: str | bytes) -> tuple[str, bool]:
    if isinstance(data, str):
        return data, False
    try:
        return data.decode("utf-8"), False
    except UnicodeDecodeError:
        return data.decode("utf-8", errors="replace"), True


def count_sloc(file_text: str | bytes, language: LanguageConfig) -> int:
    """Lines that are neither blank nor comment-only."""
    text, _ = _decode(file_text)
    return sum(1 for line in scan(text, language).without_comments.splitlines() if line.strip())


def count_functions(code: str, language: LanguageConfig) -> int:
    return sum(len(p.findall(code)) for p in language.function_patterns)


def count_branches(code: str, language: LanguageConfig) -> int:
    rx = language.branch_regex
    return len(rx.findall(code)) if rx else 0


def cyclomatic(file_text: str | bytes, language: LanguageConfig) -> int:
    """Detected functions plus branch tokens outside comments and strings.

    A file without detected functions gets a base of 1 if it has any code
    and 0 if it has none.
    """
    text, _ = _decode(file_text)
    s = scan(text, language)
    if not s.without_comments.strip():
        return 0
    funcs = count_functions(s.code, language)
    return max(funcs, 1) + count_branches(s.code, language)


@dataclass(frozen=True)
class CodeMetrics:
    sloc: int
    ccn: int
    language: str
    undecodable: bool = False


def measure(data: str | bytes, language: LanguageConfig) -> CodeMetrics:
    text, bad = _decode(data)
    s = scan(text, language)
    sloc = sum(1 for line in s.without_comments.splitlines() if line.strip())
    if sloc == 0:
        ccn = 0
    else:
        ccn = max(count_functions(s.code, language), 1) + count_branches(s.code, language)
    return CodeMetrics(sloc, ccn, language.name, bad)


@dataclass
class TreeMetrics:
    files: dict[str, CodeMetrics] = field(default_factory=dict)
    unreadable: int = 0
    flagged: list[str] = field(default_factory=list)


def measure_tree(source_root: str | os.PathLike, languages: Mapping[str, LanguageConfig] | None = None) -> TreeMetrics:
    """Metrics for every recognised source file, keyed by root-relative POSIX path."""
    root = Path(source_root)
    out = TreeMetrics()
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        lang = language_for(path, languages)
        if lang is None:
            continue
        rel = path.relative_to(root).as_posix()
        try:
            data = path.read_bytes()
        except OSError:
            out.unreadable += 1
            continue
        m = measure(data, lang)
        if m.undecodable:
            out.flagged.append(rel)
        out.files[rel] = m
    return out
