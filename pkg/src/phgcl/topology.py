"""Zero-dimensional persistent homology of graphs under a lower-star filtration."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from phgcl.centrality import CentralityScores, pagerank
from phgcl.graph import Graph

DEFAULT_K = 32


class Simplex(NamedTuple):
    value: float
    dim: int
    id: int
    vertices: tuple[int, ...]


def lower_star_filtration(g: Graph, f) -> list[Simplex]:
    """Nodes enter at ``f(v)``, edges at ``max(f(u), f(v))``.

    The stream is sorted by (value, dimension, id); an edge's id is its
    index in ``g.edges``.
    """
    f = np.asarray(f, dtype=np.float64)
    stream = [Simplex(float(f[v]), 0, v, (v,)) for v in range(g.n_nodes)]
    for k, (u, v) in enumerate(g.edges):
        stream.append(Simplex(float(max(f[u], f[v])), 1, k, (int(u), int(v))))
    stream.sort(key=lambda s: (s.value, s.dim, s.id))
    return stream


@dataclass(frozen=True, eq=False)
class PersistenceDiagram:
    pairs: np.ndarray  # (k, 2) birth/death rows
    essential: np.ndarray  # births of classes that never die
    max_value: float
    cycle_rank: int = 0
    dimension: int = 0

    def persistence(self) -> np.ndarray:
        return self.pairs[:, 1] - self.pairs[:, 0]

    def finitized(self) -> np.ndarray:
        """All pairs with essential classes closed at the maximum filtration value."""
        ess = np.stack([self.essential, np.full(self.essential.size, self.max_value)], axis=1)
        return np.concatenate([self.pairs, ess.reshape(-1, 2)], axis=0)

    def total_persistence(self) -> float:
        fin = self.finitized()
        return float((fin[:, 1] - fin[:, 0]).sum())


def persistence_h0(stream: list[Simplex]) -> PersistenceDiagram:
    """Union-find sweep with the elder rule.

    Each component is represented by its oldest vertex (smallest birth,
    then smallest id). When an edge joins two components the younger one
    dies at the edge's value. Edges inside a single component add one to
    the cycle rank.
    """
    parent: dict[int, int] = {}
    birth: dict[int, float] = {}
    pairs: list[tuple[float, float]] = []
    cycles = 0
    max_value = -np.inf

    def find(x: int) -> int:
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    for s in stream:
        max_value = max(max_value, s.value)
        if s.dim == 0:
            v = s.vertices[0]
            parent[v] = v
            birth[v] = s.value
            continue
        ra, rb = find(s.vertices[0]), find(s.vertices[1])
        if ra == rb:
            cycles += 1
            continue
        young, old = (ra, rb) if (birth[ra], ra) > (birth[rb], rb) else (rb, ra)
        pairs.append((birth[young], s.value))
        parent[young] = old

    roots = sorted({find(v) for v in parent}, key=lambda r: (birth[r], r))
    essential = np.array([birth[r] for r in roots], dtype=np.float64)
    pair_arr = np.array(pairs, dtype=np.float64).reshape(-1, 2)
    return PersistenceDiagram(pair_arr, essential, float(max_value) if parent else 0.0, cycles)


@dataclass(frozen=True, eq=False)
class TopoVector:
    """Top-K persistences (descending, zero padded) then total persistence,
    finite pair count and cycle rank."""

    values: np.ndarray
    k: int

    @property
    def persistences(self) -> np.ndarray:
        return self.values[: self.k]

    @property
    def total_persistence(self) -> float:
        return float(self.values[self.k])

    @property
    def n_finite(self) -> int:
        return int(self.values[self.k + 1])

    @property
    def cycle_rank(self) -> int:
        return int(self.values[self.k + 2])


def vectorize(diagram: PersistenceDiagram, k: int = DEFAULT_K) -> TopoVector:
    fin = diagram.finitized()
    pers = np.sort(fin[:, 1] - fin[:, 0])[::-1]
    head = np.zeros(k)
    m = min(k, pers.size)
    head[:m] = pers[:m]
    tail = [pers.sum() if pers.size else 0.0, float(diagram.pairs.shape[0]), float(diagram.cycle_rank)]
    return TopoVector(np.concatenate([head, tail]), k)


def topo_descriptor(g: Graph, phi: CentralityScores | None = None, k: int = DEFAULT_K) -> TopoVector:
    """Vectorised H0 diagram of ``g`` filtered by its own PageRank."""
    if g.n_nodes == 0:
        return TopoVector(np.zeros(k + 3), k)
    if phi is None:
        phi = pagerank(g)
    diagram = persistence_h0(lower_star_filtration(g, phi.scores))
    return vectorize(diagram, k)


def diagram_of(g: Graph, phi: CentralityScores | None = None) -> PersistenceDiagram:
    if g.n_nodes == 0:
        return PersistenceDiagram(np.zeros((0, 2)), np.zeros(0), 0.0, 0)
    if phi is None:
        phi = pagerank(g)
    return persistence_h0(lower_star_filtration(g, phi.scores))
