import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phgcl import autodiff as ad
from phgcl import model as M
from phgcl.autodiff import Tensor
from phgcl.augment import AugmentConfig, make_views
from phgcl.centrality import DistanceMatrix, pagerank, shortest_paths
from phgcl.errors import ConfigError
from phgcl.graph import Graph
from phgcl.topology import topo_descriptor

from oracles import numeric_grad, random_graph, reference_attention, rel_error


def _graphs(seed, count, n=(3, 9), d_f=4):
    rng = np.random.default_rng(seed)
    return [random_graph(rng, int(rng.integers(*n)), 0.4, d_f=d_f, label=i % 2) for i in range(count)]


def test_normalized_adjacency_oracle():
    g = Graph.from_edge_list(3, [(0, 1), (1, 2)], np.zeros((3, 1)))
    a = M.normalized_adjacency(g)
    deg = np.array([2.0, 3.0, 2.0])
    expected = (g.adjacency() + np.eye(3)) / np.sqrt(np.outer(deg, deg))
    np.testing.assert_allclose(a, expected, atol=1e-15)


def test_gaussian_mask_values():
    psi = np.array([[0, 1, -1], [1, 0, -1], [-1, -1, 0]])
    dist = DistanceMatrix(psi, 1.0, 0.5)
    m, excl = M.gaussian_mask(dist)
    assert m[0, 1] == 1.0
    assert m[0, 0] == pytest.approx(math.exp(-2.0))
    assert m[0, 2] == 0.0 and excl[0, 2] and not excl[0, 1]
    flat, _ = M.gaussian_mask(DistanceMatrix(psi, 1.0, 0.0))
    assert flat[0, 0] == 1.0 and flat[0, 1] == 1.0


def test_gcn_branch_matches_dense_oracle():
    g = _graphs(0, 1)[0]
    cfg = M.ModelConfig(d_f=4, d_h=8, heads=2, layers=1)
    params = M.init_params(cfg, seed=1)
    h = np.random.default_rng(2).normal(size=(1, g.n_nodes, 8))
    out = M.gcn_branch(Tensor(h), M.normalized_adjacency(g)[None], params, "l0").data[0]
    p = {k: v.data for k, v in params.items()}
    z = np.maximum(M.normalized_adjacency(g) @ h[0] @ p["l0.gcn.W"], 0)
    ref = np.maximum(z @ p["l0.gcn.ffn.W1"] + p["l0.gcn.ffn.b1"], 0) @ p["l0.gcn.ffn.W2"] + p["l0.gcn.ffn.b2"]
    np.testing.assert_allclose(out, ref, atol=1e-12)


def test_gmha_with_unit_mask_is_plain_attention():
    cfg = M.ModelConfig(d_f=4, d_h=8, heads=2, layers=1)
    params = M.init_params(cfg, seed=3)
    x = np.random.default_rng(4).normal(size=(2, 5, 8))
    ones = np.ones((2, 5, 5))
    none = np.zeros((2, 5, 5), dtype=bool)
    for head in range(2):
        w = M.attention_weights(Tensor(x), params, "l0", head, ones, none)
        out = (w @ (Tensor(x) @ params[f"l0.att.Wv{head}"])).data
        ref = reference_attention(x, *(params[f"l0.att.W{c}{head}"].data for c in "qkv"))
        assert np.max(np.abs(out - ref)) < 1e-12


def test_fusion_is_convex_combination():
    rng = np.random.default_rng(5)
    a, b = rng.normal(size=(2, 4, 3)), rng.normal(size=(2, 4, 3))
    alpha = rng.random((2, 1, 3))
    out = M.fuse(Tensor(a), Tensor(b), Tensor(alpha)).data
    np.testing.assert_allclose(out, alpha * a + (1 - alpha) * b, atol=1e-15)
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    assert np.all(out >= lo - 1e-12) and np.all(out <= hi + 1e-12)


@pytest.mark.parametrize("readout", ["mean", "attention"])
@pytest.mark.parametrize("ddformer", [True, False])
def test_encoder_is_permutation_invariant(readout, ddformer):
    cfg = M.ModelConfig(d_f=4, d_h=8, heads=2, layers=2, use_ddformer=ddformer, readout=readout)
    params = M.init_params(cfg, seed=0)
    g = _graphs(6, 1, n=(7, 8))[0]
    perm = np.random.default_rng(0).permutation(g.n_nodes)
    a = M.encode(M.batch_graphs([g]), params, cfg).h_g.data
    b = M.encode(M.batch_graphs([g.permuted(perm)]), params, cfg).h_g.data
    np.testing.assert_allclose(a, b, atol=1e-10)


def test_padding_does_not_leak():
    cfg = M.ModelConfig(d_f=4, d_h=8, heads=2, readout="attention")
    params = M.init_params(cfg, seed=0)
    gs = _graphs(7, 3, n=(2, 10))
    batched = M.encode(M.batch_graphs(gs), params, cfg)
    for i, g in enumerate(gs):
        alone = M.encode(M.batch_graphs([g]), params, cfg)
        np.testing.assert_allclose(batched.h_g.data[i], alone.h_g.data[0], atol=1e-10)
        assert np.all(batched.scores[i, g.n_nodes:] == 0)
        assert batched.scores[i].sum() == pytest.approx(1.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 100_000), st.floats(1e-3, 1e3))
def test_forward_is_finite(seed, scale):
    rng = np.random.default_rng(seed)
    gs = [random_graph(rng, int(rng.integers(1, 8)), float(rng.random()), d_f=3, label=i % 2) for i in range(3)]
    gs = [g.with_features(g.features * scale) for g in gs]
    cfg = M.ModelConfig(d_f=3, d_h=8, heads=2)
    p = M.predict_proba(M.batch_graphs(gs), M.init_params(cfg, seed), cfg)
    assert np.all(np.isfinite(p)) and np.all((p >= 0) & (p <= 1))


@pytest.mark.parametrize("t", [2, 8, 32])
def test_info_nce_identical_embeddings(t):
    z = np.tile(np.random.default_rng(t).normal(size=(1, 6)), (t, 1))
    assert M.info_nce(z, z, 0.5).item() == pytest.approx(math.log(t - 1), abs=1e-9)


def test_info_nce_matches_direct_formula():
    rng = np.random.default_rng(9)
    a, p = rng.normal(size=(5, 4)), rng.normal(size=(5, 4))
    tau = 0.3
    an = a / np.linalg.norm(a, axis=1, keepdims=True)
    pn = p / np.linalg.norm(p, axis=1, keepdims=True)
    sims = np.exp(pn @ pn.T / tau)
    terms = [np.log(np.exp(an[i] @ pn[i] / tau) / (sims[i].sum() - sims[i, i])) for i in range(5)]
    assert M.info_nce(a, p, tau).item() == pytest.approx(-np.mean(terms), abs=1e-12)


def test_info_nce_survives_small_tau():
    rng = np.random.default_rng(1)
    z = rng.normal(size=(4, 3))
    assert np.isfinite(M.info_nce(z, z + 0.01, 1e-3).item())


def test_info_nce_rejects():
    with pytest.raises(ConfigError):
        M.info_nce(np.ones((1, 3)), np.ones((1, 3)), 0.5)
    with pytest.raises(ConfigError):
        M.info_nce(np.ones((2, 3)), np.ones((2, 3)), 0.0)


@given(st.floats(0.01, 100.0))
def test_topo_loss_scale_invariant(c):
    rng = np.random.default_rng(0)
    a, b = rng.random((4, 7)), rng.random((4, 7))
    assert M.topo_nce(a * c, b * c, 0.5).item() == pytest.approx(M.topo_nce(a, b, 0.5).item(), abs=1e-12)


def test_bce_clamps():
    z = Tensor(np.array([-1e4, 1e4]))
    loss = M.binary_cross_entropy(z, [1, 0]).item()
    # the upper clamp is 1 - 1e-12 as a float, so 1 - y_hat is not exactly 1e-12
    expected = -(math.log(1e-12) + math.log(1.0 - (1.0 - 1e-12))) / 2
    assert loss == pytest.approx(expected, rel=1e-12)


def test_symmetric_option_differs():
    rng = np.random.default_rng(2)
    a, p = rng.normal(size=(4, 3)), rng.normal(size=(4, 3))
    assert M.info_nce(a, p, 0.5, symmetric=True).item() != pytest.approx(M.info_nce(a, p, 0.5).item())


def make_train_batch(seed, t=2, n=5, d_f=3):
    """A fixed batch with views and topological descriptors for gradient checks."""
    gs = _graphs(seed, t, n=(n, n + 1), d_f=d_f)
    views = [make_views(g, pagerank(g), AugmentConfig(), seed=[seed, i]) for i, g in enumerate(gs)]
    return M.TrainBatch(
        M.batch_graphs(gs),
        np.array([g.label for g in gs], dtype=float),
        M.batch_graphs([v.view_e for v in views]),
        M.collate([M.prepare(g, shortest_paths(g), v.view_f.features) for g, v in zip(gs, views)]),
        np.stack([topo_descriptor(v.view_e).values for v in views]),
        np.stack([topo_descriptor(g).values for g in gs]),
    )


def loss_gradient_error(batch, mcfg, lcfg, seed=0) -> float:
    params = M.init_params(mcfg, seed)
    loss, _ = M.total_loss(batch, params, mcfg, lcfg)
    loss.backward()
    worst = 0.0
    for name, p in params.items():
        def f():
            with ad.no_grad():
                return M.total_loss(batch, params, mcfg, lcfg)[0].item()
        num = numeric_grad(f, p.data)
        worst = max(worst, rel_error(p.grad, num))
    return worst


def test_total_loss_gradient():
    mcfg = M.ModelConfig(d_f=3, d_h=8, heads=2, layers=2)
    assert loss_gradient_error(make_train_batch(0), mcfg, M.LossConfig(lambda1=0.5, lambda2=0.3)) < 1e-3


def test_total_loss_parts():
    batch = make_train_batch(1, t=4)
    mcfg = M.ModelConfig(d_f=3, d_h=8, heads=2)
    params = M.init_params(mcfg, 0)
    lcfg = M.LossConfig(lambda1=0.2, lambda2=0.4)
    loss, parts = M.total_loss(batch, params, mcfg, lcfg)
    assert parts["total"] == pytest.approx(parts["ce"] + 0.2 * parts["gcl"] + 0.4 * parts["topo"])
    _, ce_only = M.total_loss(batch, params, mcfg, M.LossConfig(use_gcl=False, use_topo=False))
    assert set(ce_only) == {"ce", "total"} and ce_only["ce"] == pytest.approx(parts["ce"])


def test_config_validation():
    with pytest.raises(ConfigError):
        M.ModelConfig(d_f=3, d_h=10, heads=4)
    with pytest.raises(ConfigError):
        M.ModelConfig(d_f=3, layers=0)
    with pytest.raises(ConfigError):
        M.LossConfig(ce_source="both")
