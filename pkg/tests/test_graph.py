import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phgcl.errors import ParameterError, ParseError, StructuralError
from phgcl.graph import (
    Dataset,
    Graph,
    generate_synthetic,
    generate_synthetic_connectome,
    load_dataset,
    resparsify,
    save_dataset,
    sparsify,
)

CORR = np.array([
    [1.0, 0.9, -0.8, 0.1],
    [0.9, 1.0, 0.8, 0.2],
    [-0.8, 0.8, 1.0, 0.5],
    [0.1, 0.2, 0.5, 1.0],
])


def test_graph_normalises_edge_order():
    g = Graph.from_edge_list(3, [(2, 1), (0, 2, 0.5)], np.zeros((3, 1)))
    assert g.edges.tolist() == [[0, 2], [1, 2]]
    assert g.weights.tolist() == [0.5, 1.0]
    assert not g.edges.flags.writeable


@pytest.mark.parametrize("edges", [[(0, 0)], [(0, 3)], [(0, 1), (1, 0)], [(-1, 1)]])
def test_graph_rejects_bad_edges(edges):
    with pytest.raises(StructuralError):
        Graph.from_edge_list(3, edges, np.zeros((3, 1)))


def test_graph_rejects_bad_label_and_features():
    with pytest.raises(StructuralError):
        Graph(2, np.zeros((0, 2)), np.zeros(0), np.zeros((2, 1)), label=2)
    with pytest.raises(StructuralError):
        Graph(2, np.zeros((0, 2)), np.zeros(0), np.zeros((3, 1)))


def test_sparsify_keeps_strongest_pairs_with_tie_order():
    assert sparsify(CORR, 0.5).edge_set() == {(0, 1), (0, 2), (1, 2)}
    # ceil(6/3) = 2 exactly, the tie at |0.8| goes to the smaller u
    assert sparsify(CORR, 1 / 3).edge_set() == {(0, 1), (0, 2)}
    assert sparsify(CORR, 0.34).n_edges == 3
    assert sparsify(CORR, 1.0).n_edges == 6
    np.testing.assert_array_equal(sparsify(CORR, 0.5).features, CORR)


@pytest.mark.parametrize("rho", [0.0, -0.1, 1.5])
def test_sparsify_rejects_rho(rho):
    with pytest.raises(ParameterError):
        sparsify(CORR, rho)


def test_sparsify_rejects_asymmetric():
    bad = CORR.copy()
    bad[0, 1] += 0.1
    with pytest.raises(StructuralError):
        sparsify(bad, 0.5)


def _random_corr(seed, n):
    rng = np.random.default_rng(seed)
    a = rng.uniform(-1, 1, size=(n, n))
    c = (a + a.T) / 2
    np.fill_diagonal(c, 1.0)
    return c


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 15), st.floats(0.05, 1.0))
def test_sparsify_edge_count(seed, n, rho):
    g = sparsify(_random_corr(seed, n), rho)
    total = n * (n - 1) // 2
    assert g.n_edges == min(total, math.ceil(rho * total - 1e-9))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 12), st.floats(0.05, 1.0))
def test_sparsify_permutation_equivariant(seed, n, rho):
    corr = _random_corr(seed, n)  # continuous values, so no ties
    perm = np.random.default_rng(seed).permutation(n)
    inv = np.argsort(perm)
    permuted = corr[np.ix_(inv, inv)]  # node i of corr becomes node perm[i]
    assert sparsify(permuted, rho).edge_set() == sparsify(corr, rho).permuted(perm).edge_set()


def test_synthetic_is_deterministic_and_balanced():
    a = generate_synthetic(20, 10, 4, 0.2, seed=5)
    b = generate_synthetic(20, 10, 4, 0.2, seed=5)
    assert all(x == y for x, y in zip(a.graphs, b.graphs))
    assert a.labels.tolist() == [0, 1] * 10
    c = generate_synthetic(20, 10, 4, 0.2, seed=6)
    assert any(x != y for x, y in zip(a.graphs, c.graphs))


def test_synthetic_class_gap_zero_is_exchangeable():
    ds = generate_synthetic(400, 12, 3, 0.0, seed=1)
    e0 = np.mean([g.n_edges for g in ds.graphs if g.label == 0])
    e1 = np.mean([g.n_edges for g in ds.graphs if g.label == 1])
    # both classes share p_in = 0.3; expected 2 * 15 * 0.3 + 36 * 0.1 = 12.6 edges
    assert e0 == pytest.approx(12.6, abs=0.6)
    assert e1 == pytest.approx(12.6, abs=0.6)
    f0 = np.mean([g.features[:, 0].mean() for g in ds.graphs if g.label == 0])
    f1 = np.mean([g.features[:, 0].mean() for g in ds.graphs if g.label == 1])
    assert abs(f0 - f1) < 0.01


def test_synthetic_class_gap_shifts_density():
    ds = generate_synthetic(200, 20, 3, 0.2, seed=2)
    e0 = np.mean([g.n_edges for g in ds.graphs if g.label == 0])
    e1 = np.mean([g.n_edges for g in ds.graphs if g.label == 1])
    assert e0 > e1 + 10


@pytest.mark.parametrize("kw", [{"n_graphs": 3}, {"class_gap": 0.5}, {"class_gap": -0.1}, {"d_f": 1}])
def test_synthetic_rejects(kw):
    args = {"n_graphs": 4, "n_nodes": 5, "d_f": 3, "class_gap": 0.1, "seed": 0, **kw}
    with pytest.raises(ParameterError):
        generate_synthetic(**args)


def test_connectome_resparsify_round_trip():
    ds = generate_synthetic_connectome(6, 10, 0.2, 0.3, seed=0)
    again = resparsify(ds, 0.3)
    assert all(a == b for a, b in zip(ds.graphs, again.graphs))
    denser = resparsify(ds, 0.6)
    assert all(g.n_edges == 27 for g in denser.graphs)
    with pytest.raises(StructuralError):
        resparsify(generate_synthetic(4, 5, 3, 0.1, 0), 0.3)


def test_dataset_io_round_trip(tmp_path):
    ds = generate_synthetic(6, 7, 3, 0.1, seed=3)
    path = tmp_path / "d.jsonl"
    save_dataset(ds, path)
    back = load_dataset(path)
    assert back.d_f == 3 and back.seed == 3 and back.name == "synthetic"
    assert all(a == b for a, b in zip(ds.graphs, back.graphs))


def test_dataset_io_empty_graph(tmp_path):
    ds = Dataset((Graph(0, np.zeros((0, 2)), np.zeros(0), np.zeros((0, 2)), 1),), 2)
    path = tmp_path / "e.jsonl"
    save_dataset(ds, path)
    assert load_dataset(path).graphs[0].n_nodes == 0


def _write(path, records):
    path.write_text("\n".join(r if isinstance(r, str) else json.dumps(r) for r in records) + "\n")


GOOD = {"n_nodes": 2, "edges": [[0, 1, 1.0]], "features": [[0.0], [1.0]], "label": 0}


@pytest.mark.parametrize("bad, message", [
    ("{not json", "invalid JSON"),
    ({"n_nodes": 2, "edges": []}, "missing field"),
    ({**GOOD, "edges": [[0, 5, 1.0]]}, "out of range"),
    ({**GOOD, "edges": [[0, 1]]}, r"\[u, v, w\]"),
    ({**GOOD, "features": [[0.0, 1.0], [1.0, 1.0]]}, "inconsistent d_F"),
    ({**GOOD, "edges": [[1, 1, 1.0]]}, "self-loop"),
])
def test_load_errors_name_the_record(tmp_path, bad, message):
    path = tmp_path / "bad.jsonl"
    _write(path, [GOOD, bad])
    with pytest.raises(ParseError, match=message) as info:
        load_dataset(path)
    assert info.value.record == 1
    assert "record 1" in str(info.value)


def test_dataset_rejects_mixed_labels():
    g1 = Graph(1, np.zeros((0, 2)), np.zeros(0), np.zeros((1, 1)), 0)
    g2 = Graph(1, np.zeros((0, 2)), np.zeros(0), np.zeros((1, 1)), None)
    with pytest.raises(StructuralError):
        Dataset((g1, g2), 1)
