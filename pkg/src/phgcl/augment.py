"""Centrality-guided edge perturbation and feature-column masking."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from phgcl.centrality import CentralityScores, pagerank
from phgcl.errors import ParameterError
from phgcl.graph import Graph


@dataclass(frozen=True)
class AugmentConfig:
    p_e: float = 0.3
    p_f: float = 0.3
    p_tau: float = 0.3
    seed: int = 0

    def __post_init__(self):
        for name in ("p_e", "p_f", "p_tau"):
            val = getattr(self, name)
            if not (0.0 <= val <= 1.0):
                raise ParameterError(f"{name} must lie in [0, 1], got {val}")
        if self.p_e > self.p_tau or self.p_f > self.p_tau:
            raise ParameterError(f"p_e={self.p_e} and p_f={self.p_f} must not exceed p_tau={self.p_tau}")


@dataclass(frozen=True, eq=False)
class AugmentedPair:
    view_e: Graph
    view_f: Graph
    edge_probs: np.ndarray
    feat_probs: np.ndarray
    mask: np.ndarray


def edge_centrality(g: Graph, phi: CentralityScores) -> np.ndarray:
    """Mean endpoint PageRank of every edge."""
    s = phi.scores
    return 0.5 * (s[g.edges[:, 0]] + s[g.edges[:, 1]])


def feature_weights(g: Graph, phi: CentralityScores) -> np.ndarray:
    """Centrality-weighted absolute mass of each feature column."""
    return np.abs(g.features).T @ phi.scores


def importance_probs(log_scores: np.ndarray, base: float, cap: float) -> np.ndarray:
    """min((s_max - s) / (s_max - mean(s)) * base, cap), elementwise.

    When every score is equal the ratio is 0/0; all entries then get ``base``.
    """
    s = np.asarray(log_scores, dtype=np.float64)
    if s.size == 0:
        return np.zeros(0)
    s_max = s.max()
    spread = s_max - s.mean()
    if spread <= 1e-12 * max(1.0, abs(s_max)):
        return np.full(s.shape, min(base, cap))
    return np.minimum((s_max - s) / spread * base, cap)


def edge_removal_probs(w: np.ndarray, p_e: float, p_tau: float) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if (w <= 0).any():
        raise ParameterError("edge weights must be positive to take logs")
    return importance_probs(np.log(w), p_e, p_tau)


def _log_feature_scores(w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    pos = w > 0
    if pos.all():
        return np.log(w)
    if not pos.any():
        return np.zeros_like(w)
    s = np.empty_like(w)
    s[pos] = np.log(w[pos])
    # zero-weight columns rank below every informative one
    s[~pos] = s[pos].min() - 1.0
    return s


def feature_mask_probs(w: np.ndarray, p_f: float, p_tau: float) -> np.ndarray:
    return importance_probs(_log_feature_scores(w), p_f, p_tau)


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def perturb_edges(g: Graph, probs: np.ndarray, seed) -> Graph:
    """Keep each edge independently with probability ``1 - probs[k]``."""
    keep = _rng(seed).random(g.n_edges) >= probs
    return g.with_edges(g.edges[keep], g.weights[keep])


def sample_mask(feat_probs: np.ndarray, seed) -> np.ndarray:
    return (_rng(seed).random(feat_probs.size) >= feat_probs).astype(np.float64)


def mask_features(g: Graph, feat_probs: np.ndarray, seed) -> Graph:
    """Zero whole feature columns using one shared Bernoulli mask."""
    return g.with_features(g.features * sample_mask(feat_probs, seed))


def make_views(g: Graph, phi: CentralityScores | None, cfg: AugmentConfig, seed=None) -> AugmentedPair:
    """Edge-perturbed and feature-masked views of ``g``.

    ``seed`` overrides ``cfg.seed``; it may be anything accepted by
    :func:`numpy.random.default_rng`, including a list used as a seed path.
    """
    if phi is None:
        phi = pagerank(g)
    rng = _rng(cfg.seed if seed is None else seed)
    edge_probs = edge_removal_probs(edge_centrality(g, phi), cfg.p_e, cfg.p_tau)
    feat_probs = feature_mask_probs(feature_weights(g, phi), cfg.p_f, cfg.p_tau)
    view_e = perturb_edges(g, edge_probs, rng)
    mask = sample_mask(feat_probs, rng)
    view_f = g.with_features(g.features * mask)
    return AugmentedPair(view_e, view_f, edge_probs, feat_probs, mask)
