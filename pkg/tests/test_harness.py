import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.metrics import roc_auc_score

from phgcl.errors import ConfigError, StratificationError, StructuralError
from phgcl.graph import generate_synthetic
from phgcl.harness import experiments as E
from phgcl.harness import report
from phgcl.harness.config import TrainConfig, config_from_mapping, parse_config
from phgcl.harness.metrics import FoldMetrics, Metrics, auc, confusion
from phgcl.harness.training import _batches, cross_validate, stratified_splits, train_final

TINY = TrainConfig(epochs=2, repeats=1, folds=2, d_h=8, heads=2, layers=1, batch_size=8, topo_k=4)


@pytest.fixture(scope="module")
def small():
    return generate_synthetic(16, 8, 3, 0.2, seed=0)


def test_auc_worked_example():
    scores, labels = [0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]
    assert auc(scores, labels) == 0.75
    assert roc_auc_score(labels, scores) == 0.75


def test_auc_ties_count_half():
    assert auc([0.5, 0.5], [0, 1]) == 0.5
    assert auc([0.2, 0.5, 0.5, 0.9], [0, 0, 1, 1]) == pytest.approx(0.875)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 100_000), st.integers(2, 40))
def test_auc_matches_sklearn(seed, n):
    rng = np.random.default_rng(seed)
    labels = np.r_[0, 1, rng.integers(0, 2, n)]
    scores = rng.integers(0, 5, labels.size) / 4  # coarse scores to force ties
    assert auc(scores, labels) == pytest.approx(roc_auc_score(labels, scores), abs=1e-12)


def test_auc_single_class_raises():
    with pytest.raises(StructuralError):
        auc([0.1, 0.2], [1, 1])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 100_000))
def test_confusion_identities(seed):
    rng = np.random.default_rng(seed)
    labels = np.r_[0, 1, rng.integers(0, 2, 20)]
    probs = rng.random(labels.size)
    c = confusion(probs, labels)
    assert c.total == labels.size
    assert c.tp + c.fn == labels.sum()
    pos = labels.mean()
    assert c.acc == pytest.approx(pos * c.sen + (1 - pos) * c.spe)


def test_metrics_summary_uses_population_std():
    folds = tuple(FoldMetrics(0, i, a, 0.5, 1.0, 0.0, 1, 1, 0, 0) for i, a in enumerate([0.6, 0.8]))
    m = Metrics(folds)
    assert m.acc == pytest.approx(0.7)
    assert m.summary()["acc_std"] == pytest.approx(0.1)


def test_stratified_splits_partition_and_balance():
    labels = np.array([0] * 12 + [1] * 8)
    splits = stratified_splits(labels, 4, [0, 0])
    test_sets = [te for _, te in splits]
    assert sorted(np.concatenate(test_sets).tolist()) == list(range(20))
    for tr, te in splits:
        assert not set(tr) & set(te)
        assert np.bincount(labels[te]).tolist() == [3, 2]


def test_stratified_splits_reject():
    with pytest.raises(StratificationError):
        stratified_splits(np.array([0, 0, 0, 1]), 2, [0])
    with pytest.raises(StratificationError):
        stratified_splits(np.array([-1, -1]), 2, [0])


def test_batches_merge_trailing_singleton():
    assert [len(b) for b in _batches(np.arange(9), 4)] == [4, 5]
    assert [len(b) for b in _batches(np.arange(8), 4)] == [4, 4]
    assert [len(b) for b in _batches(np.arange(1), 4)] == [1]


def test_parse_config():
    cfg = parse_config("# comment\nepochs = 7\nuse_topo = off  # trailing\nreadout = attention\ntau=0.25\n")
    assert cfg.epochs == 7 and cfg.use_topo is False and cfg.readout == "attention" and cfg.tau == 0.25
    assert parse_config(cfg.to_text()) == cfg


@pytest.mark.parametrize("text, message", [
    ("epochs = 2\nepochs = 3", "duplicate"),
    ("bogus = 1", "unknown"),
    ("epochs", "expected"),
    ("epochs = many", "cannot parse"),
    ("use_gcl = maybe", "boolean"),
    ("p_e = 0.5", "p_tau"),
    ("heads = 5", "divisible"),
])
def test_parse_config_errors(text, message):
    with pytest.raises(ConfigError, match=message):
        parse_config(text)


def test_config_from_mapping_overrides():
    cfg = config_from_mapping({"epochs": "3"}, TINY)
    assert cfg.epochs == 3 and cfg.d_h == 8


def test_ablation_loss_wiring():
    assert TrainConfig(use_augment=True, use_gcl=False).loss_config().ce_source == "views"
    assert TrainConfig(use_augment=False, use_gcl=False).loss_config().ce_source == "original"
    assert TrainConfig().loss_config().ce_source == "original"


def test_ablation_rows():
    names = [r[0] for r in E.ABLATION_ROWS]
    assert len(names) == 8 and names[0] == "GCN" and names[-1] == "PHGCL-DDGformer"
    flags = {tuple(r[1:]) for r in E.ABLATION_ROWS}
    assert len(flags) == 8


def test_cross_validate_is_deterministic(small):
    a = cross_validate(small, TINY)
    b = cross_validate(small, TINY)
    assert a == b
    assert len(a.folds) == 2 and [f.fold for f in a.folds] == [0, 1]


def test_single_point_sweep_equals_cross_validate(small):
    rep = E.sweep_layers(small, [1], TINY)
    direct = E.metrics_row(cross_validate(small, TINY))
    assert rep.ok and rep.rows == [{"layers": 1, **direct}]


def test_sweep_records_failures(small):
    rep = E.sweep_layers(small, [1, 0], TINY)
    assert not rep.ok and rep.failures[0]["layers"] == 0
    assert "ConfigError" in rep.failures[0]["error"]
    assert "FAILED" in report.format_table(rep)


def test_empty_grid_rejected(small):
    with pytest.raises(ConfigError):
        E.sweep_lambdas(small, [], TINY)


def test_lambda_grid_shape(small):
    rep = E.sweep_lambdas(small, [0.1, 1.0], TINY.replace(epochs=1), grid2=[0.01])
    assert [(r["lambda1"], r["lambda2"]) for r in rep.rows] == [(0.1, 0.01), (1.0, 0.01)]


def test_write_report_files(small, tmp_path):
    rep = E.sweep_layers(small, [1], TINY.replace(epochs=1))
    paths = report.write_report(rep, tmp_path)
    assert paths["figure"].read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    lines = paths["records"].read_text().splitlines()
    assert len(lines) == 1 and '"kind": "layers"' in lines[0]
    assert "layers report" in paths["summary"].read_text()


def test_train_final_returns_best_epoch(small):
    fit = train_final(small, TINY.replace(epochs=3))
    assert 0 <= fit.best_epoch < 3 and len(fit.history) == 3
    assert all("val_acc" in h for h in fit.history)


def test_parallel_workers_match_serial(small):
    assert cross_validate(small, TINY.replace(workers=2)) == cross_validate(small, TINY)
