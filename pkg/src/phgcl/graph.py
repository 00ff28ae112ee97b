"""Graph data model, correlation sparsification, dataset I/O and synthetic data."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from phgcl.errors import ParameterError, ParseError, StructuralError


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple graph with node features and an optional binary label.

    ``edges`` is an ``(m, 2)`` integer array with ``u < v`` on every row, kept
    in lexicographic order; ``weights`` holds the matching edge weights.
    """

    n_nodes: int
    edges: np.ndarray
    weights: np.ndarray
    features: np.ndarray
    label: int | None = None

    def __post_init__(self):
        n = int(self.n_nodes)
        if n < 0:
            raise StructuralError(f"n_nodes must be non-negative, got {n}")
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if weights.shape[0] != edges.shape[0]:
            raise StructuralError(f"{edges.shape[0]} edges but {weights.shape[0]} weights")
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim == 1 and n == 0:
            feats = feats.reshape(0, 0)
        if feats.ndim != 2 or feats.shape[0] != n:
            raise StructuralError(f"features must have shape ({n}, d_F), got {feats.shape}")
        if edges.size:
            u, v = edges[:, 0], edges[:, 1]
            if (u == v).any():
                raise StructuralError("self-loops are not allowed")
            if (u < 0).any() or (v >= n).any() or (v < 0).any() or (u >= n).any():
                raise StructuralError(f"node id out of range [0, {n})")
            if (u > v).any():
                raise StructuralError("edges must satisfy u < v")
            order = np.lexsort((v, u))
            edges, weights = edges[order], weights[order]
            if ((np.diff(edges[:, 0]) == 0) & (np.diff(edges[:, 1]) == 0)).any():
                raise StructuralError("duplicate edge")
        if self.label not in (None, 0, 1):
            raise StructuralError(f"label must be 0, 1 or None, got {self.label!r}")
        object.__setattr__(self, "n_nodes", n)
        object.__setattr__(self, "edges", _frozen(edges.copy()))
        object.__setattr__(self, "weights", _frozen(weights.copy()))
        object.__setattr__(self, "features", _frozen(feats.copy()))
        object.__setattr__(self, "label", None if self.label is None else int(self.label))

    @classmethod
    def from_edge_list(cls, n_nodes: int, edges: Iterable[Sequence], features, label=None) -> Graph:
        """Build from ``(u, v)`` or ``(u, v, w)`` tuples in any orientation."""
        rows, ws = [], []
        for e in edges:
            u, v = int(e[0]), int(e[1])
            rows.append((min(u, v), max(u, v)))
            ws.append(float(e[2]) if len(e) > 2 else 1.0)
        return cls(n_nodes, np.array(rows, dtype=np.int64).reshape(-1, 2), np.array(ws), features, label)

    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])

    @property
    def d_f(self) -> int:
        return int(self.features.shape[1])

    def adjacency(self, weighted: bool = False) -> np.ndarray:
        a = np.zeros((self.n_nodes, self.n_nodes))
        if self.n_edges:
            w = self.weights if weighted else 1.0
            a[self.edges[:, 0], self.edges[:, 1]] = w
            a[self.edges[:, 1], self.edges[:, 0]] = w
        return a

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.reshape(-1), minlength=self.n_nodes).astype(np.float64)

    def with_edges(self, edges: np.ndarray, weights: np.ndarray) -> Graph:
        return Graph(self.n_nodes, edges, weights, self.features, self.label)

    def with_features(self, features: np.ndarray) -> Graph:
        return Graph(self.n_nodes, self.edges, self.weights, features, self.label)

    def permuted(self, perm: Sequence[int]) -> Graph:
        """Relabel node ``i`` as ``perm[i]``."""
        perm = np.asarray(perm, dtype=np.int64)
        feats = np.empty_like(self.features)
        feats[perm] = self.features
        e = perm[self.edges] if self.n_edges else self.edges
        e = np.sort(e, axis=1)
        return Graph(self.n_nodes, e, self.weights, feats, self.label)

    def edge_set(self) -> set[tuple[int, int]]:
        return {(int(u), int(v)) for u, v in self.edges}

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.n_nodes == other.n_nodes
            and self.label == other.label
            and np.array_equal(self.edges, other.edges)
            and np.array_equal(self.weights, other.weights)
            and self.features.shape == other.features.shape
            and np.array_equal(self.features, other.features)
        )

    __hash__ = None


@dataclass(frozen=True)
class Dataset:
    graphs: tuple[Graph, ...]
    d_f: int
    name: str = "dataset"
    seed: int | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        graphs = tuple(self.graphs)
        object.__setattr__(self, "graphs", graphs)
        for i, g in enumerate(graphs):
            if g.d_f != self.d_f:
                raise StructuralError(f"graph {i} has d_F={g.d_f}, dataset d_F={self.d_f}")
        labelled = [g.label is not None for g in graphs]
        if any(labelled) and not all(labelled):
            raise StructuralError("labels must be present for all graphs or none")

    def __len__(self) -> int:
        return len(self.graphs)

    def __getitem__(self, i):
        return self.graphs[i]

    def __iter__(self):
        return iter(self.graphs)

    @property
    def labels(self) -> np.ndarray:
        return np.array([-1 if g.label is None else g.label for g in self.graphs], dtype=np.int64)

    def subset(self, index: Sequence[int]) -> Dataset:
        return Dataset(tuple(self.graphs[i] for i in index), self.d_f, self.name, self.seed)


# ---------------------------------------------------------------- sparsify


def sparsify(corr, rho: float, features=None, label=None) -> Graph:
    """Keep the top ``ceil(rho * n(n-1)/2)`` pairs by ``|corr|`` as unit-weight edges.

    Ties are broken by ``(|corr| desc, u asc, v asc)``. Node features default
    to the correlation matrix itself, the usual choice for connectomes.
    """
    corr = np.asarray(corr, dtype=np.float64)
    if corr.ndim != 2 or corr.shape[0] != corr.shape[1]:
        raise StructuralError(f"correlation matrix must be square, got shape {corr.shape}")
    if not np.allclose(corr, corr.T, rtol=0.0, atol=1e-10, equal_nan=False):
        raise StructuralError("correlation matrix must be symmetric")
    if not (0.0 < rho <= 1.0):
        raise ParameterError(f"rho must lie in (0, 1], got {rho}")
    n = corr.shape[0]
    iu, iv = np.triu_indices(n, k=1)
    total = iu.size
    # subtract a hair so that e.g. 0.7 * 10 does not round up to 8
    k = min(total, math.ceil(rho * total - 1e-9))
    strength = np.abs(corr[iu, iv])
    order = np.lexsort((iv, iu, -strength))[:k]
    edges = np.stack([iu[order], iv[order]], axis=1)
    return Graph(n, edges, np.ones(k), corr if features is None else features, label)


# ---------------------------------------------------------------- file I/O


def graph_record(g: Graph) -> dict:
    return {
        "n_nodes": g.n_nodes,
        "edges": [[int(u), int(v), float(w)] for (u, v), w in zip(g.edges, g.weights)],
        "features": g.features.tolist(),
        "label": g.label,
    }


def save_dataset(ds: Dataset, path) -> None:
    """Write one JSON object per line; the first line carries dataset metadata."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"meta": {"name": ds.name, "seed": ds.seed, "d_F": ds.d_f, **ds.meta}}))
        fh.write("\n")
        for g in ds.graphs:
            fh.write(json.dumps(graph_record(g)))
            fh.write("\n")


def _parse_graph(rec, index: int, d_f: int | None) -> Graph:
    if not isinstance(rec, dict):
        raise ParseError("record is not an object", index)
    missing = {"n_nodes", "edges", "features"} - rec.keys()
    if missing:
        raise ParseError(f"missing field(s) {sorted(missing)}", index)
    try:
        n = int(rec["n_nodes"])
        feats = np.asarray(rec["features"], dtype=np.float64)
        if n == 0 and feats.size == 0:
            feats = feats.reshape(0, d_f or 0)
        edges = rec["edges"]
        if any(len(e) != 3 for e in edges):
            raise ParseError("each edge must be [u, v, w]", index)
        arr = np.asarray(edges, dtype=np.float64).reshape(-1, 3)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"malformed field ({exc})", index) from None
    if arr.size and (np.any(arr[:, :2] != np.round(arr[:, :2]))):
        raise ParseError("node ids must be integers", index)
    ids = arr[:, :2].astype(np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= n):
        raise ParseError(f"node id out of range [0, {n})", index)
    if d_f is not None and (feats.ndim != 2 or feats.shape[1] != d_f):
        raise ParseError(f"inconsistent d_F: expected {d_f}, got shape {feats.shape}", index)
    label = rec.get("label")
    try:
        return Graph(n, np.sort(ids, axis=1), arr[:, 2], feats, label)
    except StructuralError as exc:
        raise ParseError(str(exc), index) from None


def load_dataset(path) -> Dataset:
    """Read a dataset written by :func:`save_dataset`.

    The metadata line is optional; without it ``d_F`` is taken from the first
    graph. Parse errors name the zero-based graph record index.
    """
    graphs: list[Graph] = []
    meta: dict = {}
    d_f = None
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    index = 0
    for lineno, line in enumerate(lines):
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON ({exc.msg})", index) from None
        if lineno == 0 and isinstance(rec, dict) and "meta" in rec:
            meta = dict(rec["meta"])
            d_f = meta.get("d_F")
            continue
        g = _parse_graph(rec, index, d_f)
        if d_f is None:
            d_f = g.d_f
        graphs.append(g)
        index += 1
    name = meta.pop("name", Path(path).stem)
    seed = meta.pop("seed", None)
    meta.pop("d_F", None)
    try:
        return Dataset(tuple(graphs), int(d_f or 0), name, seed, meta)
    except StructuralError as exc:
        raise ParseError(str(exc)) from None


# ---------------------------------------------------------------- synthetic data

P_IN_BASE = 0.3
P_OUT = 0.1
NOISE_SIGMA = 0.1


def _check_probs(class_gap: float) -> tuple[float, float]:
    if class_gap < 0:
        raise ParameterError(f"class_gap must be non-negative, got {class_gap}")
    p0, p1 = P_IN_BASE + class_gap, P_IN_BASE - class_gap
    if not (0.0 <= p1 and p0 <= 1.0):
        raise ParameterError(f"class_gap={class_gap} pushes block probabilities outside [0, 1]")
    return p0, p1


def _balanced_labels(n_graphs: int) -> np.ndarray:
    if n_graphs < 0 or n_graphs % 2:
        raise ParameterError(f"n_graphs must be even for balanced classes, got {n_graphs}")
    return np.tile([0, 1], n_graphs // 2)


def _sbm_edges(rng: np.random.Generator, blocks: np.ndarray, p_in: float, p_out: float) -> np.ndarray:
    n = blocks.size
    iu, iv = np.triu_indices(n, k=1)
    p = np.where(blocks[iu] == blocks[iv], p_in, p_out)
    keep = rng.random(iu.size) < p
    return np.stack([iu[keep], iv[keep]], axis=1)


def generate_synthetic(n_graphs: int, n_nodes: int, d_f: int, class_gap: float, seed: int) -> Dataset:
    """Two-class dataset of 2-block SBM graphs.

    Class 0 uses intra-block probability ``0.3 + class_gap`` and class 1
    ``0.3 - class_gap``; the inter-block probability is 0.1 for both.
    Features are the one-hot block id plus N(0, 0.1^2) noise, and class 1
    nodes have ``class_gap`` added to the first feature.
    """
    p_in = _check_probs(class_gap)
    labels = _balanced_labels(n_graphs)
    if d_f < 2:
        raise ParameterError(f"d_F must be at least 2 to hold the block one-hot, got {d_f}")
    if n_nodes < 2:
        raise ParameterError(f"n_nodes must be at least 2, got {n_nodes}")
    rng = np.random.default_rng(seed)
    blocks = (np.arange(n_nodes) >= n_nodes // 2).astype(np.int64)
    graphs = []
    for y in labels:
        edges = _sbm_edges(rng, blocks, p_in[y], P_OUT)
        x = rng.normal(0.0, NOISE_SIGMA, size=(n_nodes, d_f))
        x[np.arange(n_nodes), blocks] += 1.0
        x[:, 0] += class_gap * y
        graphs.append(Graph(n_nodes, edges, np.ones(len(edges)), x, int(y)))
    return Dataset(tuple(graphs), d_f, "synthetic", seed,
                   {"generator": "sbm", "class_gap": class_gap, "n_nodes": n_nodes})


def generate_synthetic_connectome(n_graphs: int, n_nodes: int, class_gap: float, rho: float,
                                  seed: int) -> Dataset:
    """Connectome-style dataset whose node features are correlation rows.

    Each graph starts from a 2-block correlation template (within-block
    ``0.3 +/- class_gap`` by class, across-block 0.1, unit diagonal) with
    symmetric N(0, 0.1^2) noise, and is binarised with :func:`sparsify`.
    Because the features keep the full matrix, the dataset can be
    re-sparsified at any ratio.
    """
    c_in = _check_probs(class_gap)
    labels = _balanced_labels(n_graphs)
    rng = np.random.default_rng(seed)
    blocks = (np.arange(n_nodes) >= n_nodes // 2).astype(np.int64)
    same = blocks[:, None] == blocks[None, :]
    graphs = []
    for y in labels:
        noise = rng.normal(0.0, NOISE_SIGMA, size=(n_nodes, n_nodes))
        noise = np.triu(noise, 1)
        noise = noise + noise.T
        corr = np.where(same, c_in[y], P_OUT) + noise
        np.fill_diagonal(corr, 1.0)
        graphs.append(sparsify(corr, rho, label=int(y)))
    return Dataset(tuple(graphs), n_nodes, "synthetic-connectome", seed,
                   {"generator": "connectome", "class_gap": class_gap, "rho": rho})


def resparsify(ds: Dataset, rho: float) -> Dataset:
    """Rebuild every graph's edges from its (square, symmetric) feature matrix."""
    out = []
    for i, g in enumerate(ds.graphs):
        f = g.features
        if f.shape != (g.n_nodes, g.n_nodes) or not np.allclose(f, f.T, atol=1e-10):
            raise StructuralError(f"graph {i}: features are not a correlation matrix; cannot re-sparsify")
        out.append(sparsify(f, rho, label=g.label))
    return Dataset(tuple(out), ds.d_f, ds.name, ds.seed, {**ds.meta, "rho": rho})
