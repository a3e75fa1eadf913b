"""Katz centrality, PageRank and degree statistics on sparse weighted graphs."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import IO, Mapping

import numpy as np
from scipy import sparse

from .graph import Graph


class ConvergenceError(RuntimeError):
    def __init__(self, method: str, residual: float, iterations: int):
        super().__init__(f"{method} did not converge in {iterations} iterations (residual {residual:.3e})")
        self.residual = residual
        self.iterations = iterations


class AlphaTooLargeError(ValueError):
    pass


@dataclass
class CentralityScores:
    scores: dict
    method: str
    alpha_or_damping: float
    normalized: bool

    def __getitem__(self, node):
        return self.scores[node]

    def get(self, node, default=None):
        return self.scores.get(node, default)

    def write_csv(self, fh: IO[str]) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node", "score"])
        for node, score in self.scores.items():
            w.writerow([str(node), repr(float(score))])


def spectral_radius_bound(adjacency: sparse.spmatrix, steps: int = 100) -> float:
    """Upper estimate of the spectral radius of a non-negative matrix.

    Runs power iteration on ``A + I`` (whose dominant eigenvalue is
    ``rho + 1`` for non-negative A) and returns the Collatz-Wielandt bound
    ``max_i ((A+I)x)_i / x_i - 1``, which never underestimates rho for x > 0.
    """
    n = adjacency.shape[0]
    if n == 0 or adjacency.nnz == 0:
        return 0.0
    a = abs(adjacency).tocsr()
    x = np.ones(n)
    for _ in range(steps):
        y = a @ x + x
        x = y / y.max()
    y = a @ x + x
    return float(max(np.max(y / x) - 1.0, 0.0))


def default_alpha(graph: Graph, fraction: float = 0.5) -> float:
    rho = spectral_radius_bound(graph.adjacency)
    # nilpotent (acyclic) graphs: any alpha converges; keep walk weights bounded
    return fraction / rho if rho > 0 else fraction


def katz_centrality(
    graph: Graph,
    alpha: float | None = None,
    beta: float = 1.0,
    tol: float = 1e-10,
    max_iter: int = 10_000,
    normalized: bool = True,
) -> CentralityScores:
    """Iterate ``x <- alpha * A^T x + beta`` to a fixed point.

    Convergence is declared when the max-norm step falls below
    ``tol * max(1, max|x|)``.  The result is divided by its largest entry.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    a = graph.adjacency
    rho = spectral_radius_bound(a)
    if alpha is None:
        alpha = 0.5 / rho if rho > 0 else 0.5
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if rho > 0 and alpha >= 1.0 / rho:
        raise AlphaTooLargeError(
            f"alpha={alpha:g} is at or above 1/rho ~ {1.0 / rho:g}; use a smaller alpha"
        )
    n = len(graph)
    if n == 0:
        return CentralityScores({}, "katz", alpha, normalized)
    at = a.T.tocsr()
    x = np.full(n, beta, dtype=float)
    residual = np.inf
    for it in range(1, max_iter + 1):
        x_new = alpha * (at @ x) + beta
        residual = float(np.max(np.abs(x_new - x)))
        x = x_new
        if residual <= tol * max(1.0, float(np.max(np.abs(x)))):
            break
    else:
        raise ConvergenceError("katz", residual, max_iter)
    if normalized:
        x = x / x.max()
    return CentralityScores(dict(zip(graph.nodes, x.tolist())), "katz", alpha, normalized)


def pagerank(
    graph: Graph,
    damping: float = 0.85,
    tol: float = 1e-10,
    max_iter: int = 10_000,
    normalized: bool = False,
) -> CentralityScores:
    """Weighted PageRank with uniform teleport; dangling mass spreads uniformly.

    Iterates until the L1 distance to the fixed point, bounded by
    ``step * d / (1 - d)``, is below ``tol``.  Scores sum to 1 unless
    ``normalized`` asks for division by the maximum.
    """
    if not 0 < damping < 1:
        raise ValueError("damping must lie in (0, 1)")
    n = len(graph)
    if n == 0:
        return CentralityScores({}, "pagerank", damping, normalized)
    a = graph.adjacency.tocsr()
    out_w = np.asarray(a.sum(axis=1)).ravel()
    dangling = out_w == 0
    inv = np.where(dangling, 0.0, 1.0 / np.where(dangling, 1.0, out_w))
    # column-stochastic transition: P^T v distributes v_i along i's out-edges
    pt = (sparse.diags(inv) @ a).T.tocsr()
    v = np.full(n, 1.0 / n)
    residual = np.inf
    for _ in range(max_iter):
        v_new = damping * (pt @ v) + (damping * v[dangling].sum() + 1.0 - damping) / n
        v_new /= v_new.sum()
        residual = float(np.abs(v_new - v).sum())
        v = v_new
        if residual * damping / (1.0 - damping) < tol:
            break
    else:
        raise ConvergenceError("pagerank", residual, max_iter)
    if normalized:
        v = v / v.max()
    return CentralityScores(dict(zip(graph.nodes, v.tolist())), "pagerank", damping, normalized)


@dataclass(frozen=True)
class DegreeStats:
    in_degree: int
    out_degree: int
    weighted_degree: float


def degree_stats(graph: Graph) -> dict:
    """Per-node neighbour counts and weight sums.

    For undirected graphs in and out degree coincide and the weighted degree
    is the incident weight sum; for directed graphs the weighted degree sums
    in- and out-weights.
    """
    a = graph.adjacency.tocsr()
    a.eliminate_zeros()
    out_deg = np.diff(a.indptr)
    in_deg = np.diff(a.tocsc().indptr)
    out_w = np.asarray(a.sum(axis=1)).ravel()
    in_w = np.asarray(a.sum(axis=0)).ravel()
    wdeg = out_w if not graph.directed else out_w + in_w
    return {
        node: DegreeStats(int(in_deg[i]), int(out_deg[i]), float(wdeg[i]))
        for i, node in enumerate(graph.nodes)
    }


def write_degree_csv(stats: Mapping, fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["node", "in_degree", "out_degree", "weighted_degree"])
    for node, s in stats.items():
        w.writerow([str(node), s.in_degree, s.out_degree, repr(s.weighted_degree)])
