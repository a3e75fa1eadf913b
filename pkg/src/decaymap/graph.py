"""Dependency, co-change and authorship layers, and their combined view."""

from __future__ import annotations

import csv
import logging
import os
import re
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import IO, Callable, Iterable, Mapping, NamedTuple, Sequence

import numpy as np
from scipy import sparse

from .ingest import CommitRecord, FileIdentityMap

logger = logging.getLogger(__name__)

LAYERS = ("dependency", "co_change", "authorship")


class NodeRef(NamedTuple):
    kind: str  # "file" or "author"
    id: str

    def __str__(self) -> str:
        return f"{self.kind}:{self.id}"

    @classmethod
    def parse(cls, text: str) -> "NodeRef":
        kind, _, ident = text.partition(":")
        if kind not in ("file", "author") or not ident:
            raise ValueError(f"bad node reference {text!r}")
        return cls(kind, ident)


def file_node(identity: str) -> NodeRef:
    return NodeRef("file", identity)


def author_node(author: str) -> NodeRef:
    return NodeRef("author", author)


@dataclass
class Layer:
    """One weighted edge set.  Undirected layers store each pair once, ordered."""

    name: str
    directed: bool
    weights: dict[tuple[NodeRef, NodeRef], float] = field(default_factory=dict)
    nodes: set[NodeRef] = field(default_factory=set)

    def add(self, u: NodeRef, v: NodeRef, w: float = 1.0) -> None:
        if u == v:
            raise ValueError("self-edges are not allowed")
        key = (u, v) if self.directed or u <= v else (v, u)
        self.weights[key] = self.weights.get(key, 0.0) + w
        self.nodes.update(key)

    def weight(self, u: NodeRef, v: NodeRef) -> float:
        key = (u, v) if self.directed or u <= v else (v, u)
        return self.weights.get(key, 0.0)

    def __len__(self) -> int:
        return len(self.weights)


@dataclass
class Graph:
    """Sparse weighted graph; ``adjacency[i, j]`` is the weight of edge i -> j."""

    nodes: tuple
    adjacency: sparse.csr_matrix
    directed: bool = True

    def __post_init__(self):
        self.index = {n: i for i, n in enumerate(self.nodes)}

    @classmethod
    def from_edges(cls, nodes: Iterable, edges: Iterable[tuple], directed: bool = True) -> "Graph":
        nodes = tuple(nodes)
        index = {n: i for i, n in enumerate(nodes)}
        rows, cols, vals = [], [], []
        for u, v, w in edges:
            rows.append(index[u])
            cols.append(index[v])
            vals.append(float(w))
            if not directed:
                rows.append(index[v])
                cols.append(index[u])
                vals.append(float(w))
        n = len(nodes)
        adj = sparse.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
        adj.sum_duplicates()
        return cls(nodes, adj, directed)

    def __len__(self) -> int:
        return len(self.nodes)


@dataclass
class SupplyChainGraph:
    layers: dict[str, Layer]
    multipliers: tuple[float, float, float]
    normalized: bool
    combined: Graph

    @property
    def nodes(self) -> tuple:
        return self.combined.nodes

    def file_nodes(self) -> list[NodeRef]:
        return [n for n in self.combined.nodes if n.kind == "file"]


def _in_window(ts: int, window: tuple[int, int] | None) -> bool:
    return window is None or window[0] <= ts <= window[1]


def build_cochange_graph(
    commits: Iterable[CommitRecord],
    identity_map: FileIdentityMap,
    window: tuple[int, int] | None = None,
    max_files: int = 100,
) -> Layer:
    """Count, for every file pair, the commits in ``window`` modifying both.

    Commits touching more than ``max_files`` distinct files are skipped.
    """
    if max_files < 2:
        raise ValueError("max_files must be >= 2")
    layer = Layer("co_change", directed=False)
    for rec in commits:
        if not _in_window(rec.timestamp, window):
            continue
        files = sorted(set(identity_map.commit_files[rec.commit_id]))
        if len(files) > max_files:
            continue
        for f in files:
            layer.nodes.add(file_node(f))
        for a, b in combinations(files, 2):
            layer.add(file_node(a), file_node(b))
    return layer


def build_authorship_graph(
    commits: Iterable[CommitRecord],
    identity_map: FileIdentityMap,
    window: tuple[int, int] | None = None,
) -> Layer:
    """Weight each (author, file) pair by the number of commits linking them."""
    layer = Layer("authorship", directed=False)
    for rec in commits:
        if not _in_window(rec.timestamp, window):
            continue
        a = author_node(rec.author_id)
        for f in set(identity_map.commit_files[rec.commit_id]):
            layer.add(a, file_node(f))
    return layer


@dataclass
class DependencyLoad:
    layer: Layer
    unresolved: int = 0
    self_edges: int = 0
    duplicates: int = 0
    unresolved_paths: list[str] = field(default_factory=list)


def _resolver(identity_map):
    """Path -> node id: identity map, plain callable, or identity function."""
    if identity_map is None:
        return lambda p: p
    if callable(identity_map):
        return identity_map
    return identity_map.resolve_current


def load_dependency_edges(fh: IO[str], identity_map: FileIdentityMap | None = None) -> DependencyLoad:
    """Read a ``src,dst`` CSV into a directed, deduplicated layer.

    Paths are mapped to identities through ``identity_map`` (current names
    first, then historical ones); rows naming unknown paths are counted.
    """
    resolve = _resolver(identity_map)
    out = DependencyLoad(Layer("dependency", directed=True))
    seen = set()
    for row in csv.DictReader(fh):
        src, dst = (row.get("src") or "").strip(), (row.get("dst") or "").strip()
        u, v = resolve(src), resolve(dst)
        if u is None or v is None:
            out.unresolved += 1
            out.unresolved_paths.extend(p for p, r in ((src, u), (dst, v)) if r is None)
            continue
        if u == v:
            out.self_edges += 1
            continue
        if (u, v) in seen:
            out.duplicates += 1
            continue
        seen.add((u, v))
        out.layer.add(file_node(u), file_node(v))
    return out


# -- import scanning --------------------------------------------------------------

_C_INCLUDE = re.compile(r'^\s*#\s*include\s*"([^"]+)"')
_GENERIC_IMPORT = re.compile(
    r"^\s*(?:from\s+([\w.]+)\s+import\b|import\s+([\w.]+)|use\s+([\w:]+))"
)

DEFAULT_IMPORT_PATTERNS: dict[str, list[re.Pattern]] = {
    **{ext: [_C_INCLUDE] for ext in (".c", ".h", ".cc", ".cpp", ".cxx", ".hh", ".hpp", ".hxx")},
    **{ext: [_GENERIC_IMPORT] for ext in (".py", ".java", ".kt", ".scala", ".rs", ".go", ".php")},
}


# a target ending in one of these is a file name, otherwise a dotted module name
_SOURCE_EXTS = frozenset(DEFAULT_IMPORT_PATTERNS) | {".js", ".ts", ".inc", ".inl"}


@dataclass
class ImportScan:
    layer: Layer
    unresolved: int = 0
    unreadable: int = 0
    files_scanned: int = 0


def _candidates(target: str, importer: Path, root: Path, ext: str, file_exts=_SOURCE_EXTS) -> list[Path]:
    if "/" in target or os.path.splitext(target)[1] in file_exts:
        return [importer.parent / target, root / target]
    # dotted module names: a.b.c -> a/b/c<ext>
    parts = [p for p in re.split(r"\.|::", target) if p and p not in ("crate", "self", "super")]
    if not parts:
        return []
    rel = Path(*parts)
    return [
        importer.parent / rel.with_suffix(ext),
        root / rel.with_suffix(ext),
        root / rel / f"__init__{ext}",
    ]


def scan_imports(
    source_root: str | os.PathLike,
    language_config: Mapping[str, Sequence[re.Pattern]] | None = None,
    identity_map: FileIdentityMap | Callable[[str], str | None] | None = None,
) -> ImportScan:
    """Coarse dependency layer from include/import lines under ``source_root``.

    Each pattern's first non-empty group is the import target.  Targets are
    resolved relative to the importing file, then to the root.  Node ids are
    root-relative POSIX paths, or identities if ``identity_map`` is given.
    """
    patterns = DEFAULT_IMPORT_PATTERNS if language_config is None else language_config
    root = Path(source_root)
    out = ImportScan(Layer("dependency", directed=True))
    resolve = _resolver(identity_map)
    file_exts = _SOURCE_EXTS | set(patterns)
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        ext = path.suffix
        if ext not in patterns:
            continue
        out.files_scanned += 1
        try:
            text = path.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError):
            out.unreadable += 1
            continue
        src = resolve(path.relative_to(root).as_posix())
        for line in text.splitlines():
            for pat in patterns[ext]:
                m = pat.match(line)
                if not m:
                    continue
                target = next(g for g in m.groups() if g)
                hit = next((c for c in _candidates(target, path, root, ext, file_exts) if c.is_file()), None)
                dst = None
                if hit is not None:
                    try:
                        rel = hit.resolve().relative_to(root.resolve()).as_posix()
                        dst = resolve(rel)
                    except ValueError:
                        dst = None
                if dst is None or src is None:
                    out.unresolved += 1
                elif dst != src and out.layer.weight(file_node(src), file_node(dst)) == 0:
                    out.layer.add(file_node(src), file_node(dst))
    return out


# -- combination ----------------------------------------------------------------


def combine_networks(
    dep: Layer,
    cochange: Layer,
    authorship: Layer,
    multipliers: Sequence[float] = (1.0, 1.0, 1.0),
    normalize: bool = True,
    extra_nodes: Iterable[NodeRef] = (),
) -> SupplyChainGraph:
    """Sum the layers into one symmetric weighted graph.

    With ``normalize`` each layer is first divided by its largest weight.
    Directed layers contribute ``A + A^T``.
    """
    mult = tuple(float(m) for m in multipliers)
    if len(mult) != 3 or any(m < 0 for m in mult):
        raise ValueError("need three non-negative multipliers")
    if not any(mult):
        raise ValueError("all layer multipliers are zero")
    layers = {"dependency": dep, "co_change": cochange, "authorship": authorship}
    nodes = set(extra_nodes)
    for layer in layers.values():
        nodes |= layer.nodes
    ordered = tuple(sorted(nodes))
    edges = []
    for layer, m in zip(layers.values(), mult):
        if m == 0 or not layer.weights:
            continue
        scale = m / max(layer.weights.values()) if normalize else m
        # undirected layers and directed+transpose both become symmetric entries
        edges.extend((u, v, w * scale) for (u, v), w in layer.weights.items())
    combined = Graph.from_edges(ordered, edges, directed=False)
    return SupplyChainGraph(layers, mult, normalize, combined)


def write_edges(graph: SupplyChainGraph, fh: IO[str]) -> None:
    """Edge list ``layer,src,dst,weight`` (raw, unscaled layer weights)."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["layer", "src", "dst", "weight"])
    for name in LAYERS:
        layer = graph.layers[name]
        for (u, v), weight in sorted(layer.weights.items()):
            w.writerow([name, str(u), str(v), repr(float(weight))])


def read_edges(fh: IO[str]) -> dict[str, Layer]:
    layers = {
        "dependency": Layer("dependency", True),
        "co_change": Layer("co_change", False),
        "authorship": Layer("authorship", False),
    }
    for row in csv.DictReader(fh):
        layers[row["layer"]].add(NodeRef.parse(row["src"]), NodeRef.parse(row["dst"]), float(row["weight"]))
    return layers


def dense(graph: Graph) -> np.ndarray:
    return graph.adjacency.toarray()
