"""Dual-domain graph encoder, classifier head and the joint training loss.

Graphs in a batch are zero-padded to a common node count and processed as
3-D tensors ``[B, N, d]``. Padding never leaks into real nodes: padded
columns are excluded from attention and carry zero weight in the pooling
matrix used for readout and for the fusion gate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from phgcl import autodiff as ad
from phgcl.autodiff import Tensor
from phgcl.centrality import DistanceMatrix, shortest_paths
from phgcl.errors import ConfigError, StructuralError
from phgcl.graph import Graph

CLAMP = 1e-12
SIGMA_FLOOR = 1e-6


@dataclass(frozen=True)
class ModelConfig:
    d_f: int
    d_h: int = 32
    heads: int = 4
    layers: int = 2
    use_ddformer: bool = True
    readout: str = "mean"

    def __post_init__(self):
        if self.layers < 1:
            raise ConfigError(f"layers must be >= 1, got {self.layers}")
        if self.d_h % self.heads:
            raise ConfigError(f"d_h={self.d_h} is not divisible by heads={self.heads}")
        if self.readout not in ("mean", "attention"):
            raise ConfigError(f"readout must be 'mean' or 'attention', got {self.readout!r}")


@dataclass(frozen=True)
class LossConfig:
    tau: float = 0.5
    lambda1: float = 0.1
    lambda2: float = 0.01
    use_gcl: bool = True
    use_topo: bool = True
    # Optional NT-Xent style symmetric contrast instead of the default one-sided form.
    symmetric: bool = False
    # "original": CE on the unaugmented graph; "views": CE averaged over both views.
    ce_source: str = "original"

    def __post_init__(self):
        if self.tau <= 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")
        if self.ce_source not in ("original", "views"):
            raise ConfigError(f"ce_source must be 'original' or 'views', got {self.ce_source!r}")


# ---------------------------------------------------------------- constant graph inputs


def normalized_adjacency(g: Graph) -> np.ndarray:
    """D^-1/2 (A + I) D^-1/2 on the binarised edge set."""
    a = g.adjacency() + np.eye(g.n_nodes)
    dinv = 1.0 / np.sqrt(a.sum(axis=1))
    return a * dinv[:, None] * dinv[None, :]


def gaussian_mask(dist: DistanceMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian weights of hop distance around its mean, plus the exclusion mask.

    Returns ``(M, exclude)``. Reachable pairs get
    ``exp(-(psi - mu)^2 / (2 sigma^2))``, or 1 when sigma is (near) zero.
    Unreachable pairs are flagged in ``exclude`` and carry M = 0.
    """
    reach = dist.reachable
    psi = dist.psi.astype(np.float64)
    if dist.std < SIGMA_FLOOR:
        m = np.ones_like(psi)
    else:
        m = np.exp(-((psi - dist.mean) ** 2) / (2.0 * dist.std ** 2))
    m = np.where(reach, m, 0.0)
    return m, ~reach


@dataclass(frozen=True, eq=False)
class GraphArrays:
    """Per-graph constants the encoder needs."""

    x: np.ndarray
    a_norm: np.ndarray
    mask: np.ndarray
    exclude: np.ndarray

    @property
    def n(self) -> int:
        return self.x.shape[0]


def prepare(g: Graph, dist: DistanceMatrix | None = None, features: np.ndarray | None = None) -> GraphArrays:
    if dist is None:
        dist = shortest_paths(g)
    m, excl = gaussian_mask(dist)
    x = g.features if features is None else features
    return GraphArrays(np.asarray(x, dtype=np.float64), normalized_adjacency(g), m, excl)


@dataclass(frozen=True, eq=False)
class GraphBatch:
    x: np.ndarray  # [B, N, d_F]
    a_norm: np.ndarray  # [B, N, N]
    mask: np.ndarray  # [B, N, N]
    exclude: np.ndarray  # [B, N, N] bool
    pool: np.ndarray  # [B, 1, N], 1/n_i on real nodes
    node_pad: np.ndarray  # [B, 1, N] bool, True on padding
    sizes: tuple[int, ...]

    def __len__(self) -> int:
        return self.x.shape[0]


def collate(items: Sequence[GraphArrays]) -> GraphBatch:
    if not items:
        raise StructuralError("cannot collate an empty batch")
    b = len(items)
    nmax = max(1, max(it.n for it in items))
    d_f = items[0].x.shape[1]
    x = np.zeros((b, nmax, d_f))
    a = np.zeros((b, nmax, nmax))
    m = np.zeros((b, nmax, nmax))
    excl = np.ones((b, nmax, nmax), dtype=bool)
    pool = np.zeros((b, 1, nmax))
    pad = np.ones((b, 1, nmax), dtype=bool)
    diag = np.arange(nmax)
    for i, it in enumerate(items):
        n = it.n
        if it.x.shape[1] != d_f:
            raise StructuralError(f"batch item {i} has d_F={it.x.shape[1]}, expected {d_f}")
        x[i, :n] = it.x
        a[i, :n, :n] = it.a_norm
        m[i, :n, :n] = it.mask
        excl[i, :n, :n] = it.exclude
        # padded rows attend only to themselves
        excl[i, diag[n:], diag[n:]] = False
        if n:
            pool[i, 0, :n] = 1.0 / n
        pad[i, 0, :n] = False
    return GraphBatch(x, a, m, excl, pool, pad, tuple(it.n for it in items))


def batch_graphs(graphs: Sequence[Graph]) -> GraphBatch:
    return collate([prepare(g) for g in graphs])


# ---------------------------------------------------------------- parameters


def init_params(cfg: ModelConfig, seed: int = 0) -> dict[str, Tensor]:
    """Xavier-uniform weights, zero biases, unit layer-norm gain."""
    shapes: dict[str, tuple[int, int]] = {}
    d, dk = cfg.d_h, cfg.d_h // cfg.heads

    def ffn(prefix: str) -> None:
        shapes[f"{prefix}.ffn.W1"] = (d, 2 * d)
        shapes[f"{prefix}.ffn.b1"] = (1, 2 * d)
        shapes[f"{prefix}.ffn.W2"] = (2 * d, d)
        shapes[f"{prefix}.ffn.b2"] = (1, d)

    shapes["in.W"] = (cfg.d_f, d)
    shapes["in.b"] = (1, d)
    shapes["in.gamma"] = (1, d)
    shapes["in.beta"] = (1, d)
    for layer in range(cfg.layers):
        p = f"l{layer}"
        shapes[f"{p}.gcn.W"] = (d, d)
        ffn(f"{p}.gcn")
        if cfg.use_ddformer:
            for h in range(cfg.heads):
                shapes[f"{p}.att.Wq{h}"] = (d, dk)
                shapes[f"{p}.att.Wk{h}"] = (d, dk)
                shapes[f"{p}.att.Wv{h}"] = (d, dk)
            ffn(f"{p}.att")
            shapes[f"{p}.gate.W"] = (d, d)
            shapes[f"{p}.gate.b"] = (1, d)
    if cfg.readout == "attention":
        shapes["readout.w"] = (d, 1)
    shapes["cls.W"] = (d, 1)
    shapes["cls.b"] = (1, 1)

    params: dict[str, Tensor] = {}
    for idx, (name, shape) in enumerate(shapes.items()):
        leaf = name.rsplit(".", 1)[-1]
        if leaf == "gamma":
            params[name] = Tensor(np.ones(shape), requires_grad=True, name=name)
        elif leaf.startswith("b") and shape[0] == 1:
            params[name] = Tensor(np.zeros(shape), requires_grad=True, name=name)
        else:
            params[name] = ad.xavier_init(shape, [seed, idx], name=name)
    return params


def param_count(params: dict[str, Tensor]) -> int:
    return int(sum(p.data.size for p in params.values()))


# ---------------------------------------------------------------- encoder blocks


def ffn(h: Tensor, params: dict[str, Tensor], prefix: str) -> Tensor:
    z = ad.relu(h @ params[f"{prefix}.ffn.W1"] + params[f"{prefix}.ffn.b1"])
    return z @ params[f"{prefix}.ffn.W2"] + params[f"{prefix}.ffn.b2"]


def gcn_branch(h: Tensor, a_norm, params: dict[str, Tensor], prefix: str) -> Tensor:
    """FFN(ReLU(Â H W)) with Â the symmetrically normalised self-looped adjacency."""
    return ffn(ad.relu(ad.matmul(Tensor(a_norm), h @ params[f"{prefix}.gcn.W"])), params, f"{prefix}.gcn")


def attention_weights(h: Tensor, params: dict[str, Tensor], prefix: str, head: int, mask, exclude) -> Tensor:
    q = h @ params[f"{prefix}.att.Wq{head}"]
    k = h @ params[f"{prefix}.att.Wk{head}"]
    s = ad.scale(q @ ad.transpose(k), 1.0 / math.sqrt(q.shape[-1]))
    return ad.masked_softmax(s, mask, exclude)


def gmha_branch(h: Tensor, mask, exclude, params: dict[str, Tensor], prefix: str, heads: int) -> Tensor:
    """Multi-head attention with logits scaled by ``mask`` and ``exclude`` pairs removed."""
    outs = []
    for head in range(heads):
        weights = attention_weights(h, params, prefix, head, mask, exclude)
        outs.append(weights @ (h @ params[f"{prefix}.att.Wv{head}"]))
    merged = outs[0] if heads == 1 else ad.concat(outs, axis=-1)
    return ffn(merged, params, f"{prefix}.att")


def fusion_gate(h_prev: Tensor, pool, params: dict[str, Tensor], prefix: str) -> Tensor:
    """Per-graph gate α = sigmoid(W · mean(H) + b), shape [B, 1, d_h]."""
    return ad.sigmoid(ad.matmul(Tensor(pool), h_prev) @ params[f"{prefix}.gate.W"] + params[f"{prefix}.gate.b"])


def fuse(h_gcn: Tensor, h_gt: Tensor, alpha: Tensor) -> Tensor:
    """α ⊙ H_gcn + (1 - α) ⊙ H_gt."""
    return h_gt + alpha * (h_gcn - h_gt)


@dataclass(eq=False)
class GraphEmbedding:
    h_g: Tensor  # [B, d_h]
    nodes: Tensor  # [B, N, d_h]
    scores: np.ndarray | None = None  # [B, N] attention readout weights
    gates: list[np.ndarray] = field(default_factory=list)


def encode(batch: GraphBatch, params: dict[str, Tensor], cfg: ModelConfig) -> GraphEmbedding:
    x = Tensor(batch.x)
    h = ad.layer_norm(x @ params["in.W"] + params["in.b"]) * params["in.gamma"] + params["in.beta"]
    gates = []
    for layer in range(cfg.layers):
        p = f"l{layer}"
        h_gcn = gcn_branch(h, batch.a_norm, params, p)
        if not cfg.use_ddformer:
            h = h_gcn
            continue
        h_gt = gmha_branch(h, batch.mask, batch.exclude, params, p, cfg.heads)
        alpha = fusion_gate(h, batch.pool, params, p)
        gates.append(alpha.data)
        h = fuse(h_gcn, h_gt, alpha)
    b, _, d = h.shape
    scores = None
    if cfg.readout == "attention":
        logits = ad.transpose(h @ params["readout.w"])  # [B, 1, N]
        weights = ad.masked_softmax(logits, None, batch.node_pad)
        pooled = weights @ h
        scores = weights.data[:, 0, :]
    else:
        pooled = ad.matmul(Tensor(batch.pool), h)
    return GraphEmbedding(ad.reshape(pooled, (b, d)), h, scores, gates)


def classify(emb: GraphEmbedding, params: dict[str, Tensor]) -> Tensor:
    """Logits of the positive class, shape [B]."""
    z = emb.h_g @ params["cls.W"] + params["cls.b"]
    return ad.reshape(z, (z.shape[0],))


def predict_proba(batch: GraphBatch, params: dict[str, Tensor], cfg: ModelConfig) -> np.ndarray:
    with ad.no_grad():
        z = classify(encode(batch, params, cfg), params)
        return ad.sigmoid(z).data.copy()


# ---------------------------------------------------------------- losses


def _offdiag(t: int) -> np.ndarray:
    return ~np.eye(t, dtype=bool)


def info_nce(anchors, positives, tau: float, symmetric: bool = False) -> Tensor:
    """-(1/T) Σ_i log[ exp(s(a_i, p_i)/τ) / Σ_{k≠i} exp(s(p_i, p_k)/τ) ], s = cosine.

    ``anchors`` are the edge-perturbed embeddings and ``positives`` the
    feature-masked ones; the denominator only contrasts the masked view
    against the other graphs' masked views. ``symmetric=True`` switches to
    the NT-Xent form instead.
    """
    a = ad.as_tensor(anchors)
    p = ad.as_tensor(positives)
    if a.ndim != 2 or a.shape != p.shape:
        raise StructuralError(f"info_nce: anchors {a.shape} and positives {p.shape} must be equal 2-D shapes")
    t = a.shape[0]
    if t < 2:
        raise ConfigError(f"info_nce needs a batch of at least 2 graphs, got {t}")
    if tau <= 0:
        raise ConfigError(f"tau must be positive, got {tau}")
    if symmetric:
        return _nt_xent(a, p, tau)
    ea, ep = ad.l2_normalize(a), ad.l2_normalize(p)
    pos = ad.sum(ea * ep, axis=-1)
    # cosine <= 1, so shifting by 1/τ keeps every exponent non-positive
    shift = 1.0 / tau
    sims = ad.scale(ep @ ad.transpose(ep), 1.0 / tau) - shift
    denom = ad.sum(ad.exp(sims) * _offdiag(t).astype(np.float64), axis=-1)
    lse = ad.log(denom) + shift
    return ad.mean(lse - ad.scale(pos, 1.0 / tau))


def _nt_xent(a: Tensor, p: Tensor, tau: float) -> Tensor:
    t = a.shape[0]
    z = ad.l2_normalize(ad.concat([a, p], axis=0))
    shift = 1.0 / tau
    sims = ad.scale(z @ ad.transpose(z), 1.0 / tau) - shift
    keep = _offdiag(2 * t).astype(np.float64)
    lse = ad.log(ad.sum(ad.exp(sims) * keep, axis=-1)) + shift
    partner = np.concatenate([np.arange(t, 2 * t), np.arange(t)])
    onehot = np.zeros((2 * t, 2 * t))
    onehot[np.arange(2 * t), partner] = 1.0
    pos = ad.sum(sims * onehot, axis=-1) + shift
    return ad.mean(lse - pos)


def topo_nce(to_e, to_f, tau: float, symmetric: bool = False) -> Tensor:
    """The contrastive loss over topological descriptors; carries no gradient."""
    a = np.stack([getattr(v, "values", v) for v in to_e])
    p = np.stack([getattr(v, "values", v) for v in to_f])
    with ad.no_grad():
        return info_nce(Tensor(a), Tensor(p), tau, symmetric)


def binary_cross_entropy(logits: Tensor, labels) -> Tensor:
    y = np.asarray(labels, dtype=np.float64)
    yhat = ad.clip(ad.sigmoid(logits), CLAMP, 1.0 - CLAMP)
    ll = ad.log(yhat) * y + ad.log(1.0 - yhat) * (1.0 - y)
    return ad.neg(ad.mean(ll))


@dataclass(eq=False)
class TrainBatch:
    original: GraphBatch
    labels: np.ndarray
    view_e: GraphBatch | None = None
    view_f: GraphBatch | None = None
    topo_e: np.ndarray | None = None  # [T, K+3]
    topo_f: np.ndarray | None = None


def total_loss(batch: TrainBatch, params: dict[str, Tensor], mcfg: ModelConfig,
               lcfg: LossConfig) -> tuple[Tensor, dict[str, float]]:
    """L_CE + λ1 L_G + λ2 L_Topo for one labelled batch."""
    parts: dict[str, float] = {}
    emb_e = emb_f = None
    if batch.view_e is not None and (lcfg.use_gcl or lcfg.ce_source == "views"):
        emb_e = encode(batch.view_e, params, mcfg)
        emb_f = encode(batch.view_f, params, mcfg)
    if lcfg.ce_source == "views" and emb_e is not None:
        ce = ad.scale(binary_cross_entropy(classify(emb_e, params), batch.labels)
                      + binary_cross_entropy(classify(emb_f, params), batch.labels), 0.5)
    else:
        ce = binary_cross_entropy(classify(encode(batch.original, params, mcfg), params), batch.labels)
    parts["ce"] = float(ce.data)
    loss = ce
    t = len(batch.labels)
    if lcfg.use_gcl and emb_e is not None and t >= 2 and lcfg.lambda1 > 0:
        lg = info_nce(emb_e.h_g, emb_f.h_g, lcfg.tau, lcfg.symmetric)
        parts["gcl"] = float(lg.data)
        loss = loss + ad.scale(lg, lcfg.lambda1)
    if lcfg.use_topo and batch.topo_e is not None and t >= 2 and lcfg.lambda2 > 0:
        lt = topo_nce(batch.topo_e, batch.topo_f, lcfg.tau, lcfg.symmetric)
        parts["topo"] = float(lt.data)
        loss = loss + ad.scale(lt, lcfg.lambda2)
    parts["total"] = float(loss.data)
    return loss, parts
