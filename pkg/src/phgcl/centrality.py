"""PageRank centrality and unweighted all-pairs shortest paths."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from phgcl.errors import ParameterError, StructuralError
from phgcl.graph import Graph

DEFAULT_DAMPING = 0.85
UNREACHABLE = -1


@dataclass(frozen=True, eq=False)
class CentralityScores:
    scores: np.ndarray
    damping: float
    iterations: int
    residual: float
    converged: bool

    def __len__(self) -> int:
        return self.scores.size

    def top_k(self, k: int) -> list[int]:
        """Node ids of the ``k`` highest scores (ties by lower id)."""
        order = np.lexsort((np.arange(self.scores.size), -self.scores))
        return [int(i) for i in order[:k]]


def pagerank(g: Graph, d: float = DEFAULT_DAMPING, tol: float = 1e-10, max_iter: int = 200) -> CentralityScores:
    """Power iteration for PR(v) = (1-d)/N + d * sum_{u ~ v} PR(u)/deg(u).

    The undirected edge set supplies the neighbourhoods. Isolated nodes
    spread their rank uniformly over all nodes, so the scores stay a
    probability vector. Iteration stops once the L1 change drops below
    ``tol``; hitting ``max_iter`` first leaves ``converged`` False.
    """
    n = g.n_nodes
    if n < 1:
        raise StructuralError("pagerank needs at least one node")
    if not (0.0 < d < 1.0):
        raise ParameterError(f"damping must lie in (0, 1), got {d}")
    adj = g.adjacency()
    deg = adj.sum(axis=0)
    dangling = deg == 0
    # column-stochastic walk matrix; dangling columns jump uniformly
    walk = adj / np.where(dangling, 1.0, deg)[None, :]
    walk[:, dangling] = 1.0 / n
    walk *= d
    teleport = (1.0 - d) / n
    pr = np.full(n, 1.0 / n)
    residual = np.inf
    it = 0
    while it < max_iter:
        it += 1
        new = walk @ pr + teleport
        new /= new.sum()
        residual = float(np.abs(new - pr).sum())
        pr = new
        if residual < tol:
            break
    pr.setflags(write=False)
    return CentralityScores(pr, d, it, residual, residual < tol)


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    """Hop counts with :data:`UNREACHABLE` (-1) marking disconnected pairs."""

    psi: np.ndarray
    mean: float
    std: float

    @property
    def reachable(self) -> np.ndarray:
        return self.psi != UNREACHABLE

    def __len__(self) -> int:
        return self.psi.shape[0]


def shortest_paths(g: Graph) -> DistanceMatrix:
    """BFS distances on the unweighted graph, with mean and std over finite off-diagonal pairs."""
    n = g.n_nodes
    if n == 0:
        return DistanceMatrix(np.zeros((0, 0), dtype=np.int64), 0.0, 0.0)
    adj = g.adjacency() > 0
    psi = np.full((n, n), UNREACHABLE, dtype=np.int64)
    np.fill_diagonal(psi, 0)
    visited = np.eye(n, dtype=bool)
    frontier = visited.copy()
    hops = 0
    # breadth-first search from every source at once, one level per pass
    while frontier.any():
        hops += 1
        frontier = ((frontier.astype(np.float64) @ adj) > 0) & ~visited
        psi[frontier] = hops
        visited |= frontier
    off = visited & ~np.eye(n, dtype=bool)
    vals = psi[off].astype(np.float64)
    mu = float(vals.mean()) if vals.size else 0.0
    sd = float(vals.std()) if vals.size else 0.0
    psi.setflags(write=False)
    return DistanceMatrix(psi, mu, sd)
