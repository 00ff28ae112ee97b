"""Training loop, model selection and stratified cross-validation.

Randomness follows a seed ladder: ``[seed, repeat]`` drives the split,
``[seed, repeat, fold, 0]`` the initialisation, ``[seed, repeat, fold, 1, epoch]``
the batch order, ``[seed, repeat, fold, 2, epoch, graph]`` each graph's
augmentation and ``[seed, repeat, fold, 3]`` the validation hold-out. Runs can therefore execute in any order or in parallel
without changing a single bit of the result.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from sklearn.model_selection import StratifiedKFold, train_test_split

from phgcl import model as M
from phgcl.augment import AugmentConfig, make_views
from phgcl.autodiff import Adam, Tensor
from phgcl.centrality import CentralityScores, DistanceMatrix, pagerank, shortest_paths
from phgcl.errors import StratificationError, StructuralError
from phgcl.graph import Dataset, Graph
from phgcl.harness.config import TrainConfig
from phgcl.harness.metrics import FoldMetrics, Metrics
from phgcl.topology import topo_descriptor

log = logging.getLogger(__name__)

EVAL_CHUNK = 64
# seed-ladder slot for the final full-data fit, well clear of repeat indices
FINAL_RUN = 1 << 20


@dataclass(eq=False)
class CachedGraph:
    graph: Graph
    phi: CentralityScores
    dist: DistanceMatrix
    arrays: M.GraphArrays
    topo: np.ndarray
    index: int = 0


def cache_graph(g: Graph, cfg: TrainConfig, index: int = 0) -> CachedGraph:
    phi = pagerank(g, cfg.damping) if g.n_nodes else None
    dist = shortest_paths(g)
    topo = topo_descriptor(g, phi, cfg.topo_k).values
    return CachedGraph(g, phi, dist, M.prepare(g, dist), topo, index)


def _int_seed(path) -> int:
    return int(np.random.default_rng(path).integers(2**31 - 1))


def build_train_batch(items: list[CachedGraph], index: list[int], cfg: TrainConfig, seed_path: list[int]) -> M.TrainBatch:
    """Collate the original graphs and, when enabled, freshly sampled views."""
    labels = np.array([items[i].graph.label for i in index], dtype=np.float64)
    original = M.collate([items[i].arrays for i in index])
    if not cfg.use_augment and not cfg.use_gcl:
        return M.TrainBatch(original, labels)
    aug = AugmentConfig(cfg.p_e, cfg.p_f, cfg.p_tau)
    arr_e, arr_f, topo_e, topo_f = [], [], [], []
    for i in index:
        c = items[i]
        if cfg.use_augment:
            pair = make_views(c.graph, c.phi, aug, seed=[*seed_path, c.index])
            view_e = pair.view_e
            phi_e = pagerank(view_e, cfg.damping)
            arr_e.append(M.prepare(view_e, shortest_paths(view_e)))
            topo_e.append(topo_descriptor(view_e, phi_e, cfg.topo_k).values)
            arr_f.append(M.prepare(c.graph, c.dist, pair.view_f.features))
        else:
            arr_e.append(c.arrays)
            arr_f.append(c.arrays)
            topo_e.append(c.topo)
        # the masked view keeps every edge, so its filtration equals the original's
        topo_f.append(c.topo)
    return M.TrainBatch(original, labels, M.collate(arr_e), M.collate(arr_f), np.stack(topo_e), np.stack(topo_f))


def predict(items: list[CachedGraph], params: dict[str, Tensor], mcfg: M.ModelConfig) -> np.ndarray:
    out = []
    for lo in range(0, len(items), EVAL_CHUNK):
        batch = M.collate([c.arrays for c in items[lo:lo + EVAL_CHUNK]])
        out.append(M.predict_proba(batch, params, mcfg))
    return np.concatenate(out) if out else np.zeros(0)


def _batches(order: np.ndarray, size: int) -> list[list[int]]:
    chunks = [order[i:i + size].tolist() for i in range(0, len(order), size)]
    # a lone trailing graph has no in-batch negatives; fold it into the previous batch
    if len(chunks) > 1 and len(chunks[-1]) == 1:
        chunks[-2].extend(chunks.pop())
    return chunks


def _bce(probs: np.ndarray, labels: np.ndarray) -> float:
    p = np.clip(probs, M.CLAMP, 1 - M.CLAMP)
    return float(-np.mean(labels * np.log(p) + (1 - labels) * np.log(1 - p)))


@dataclass
class FitResult:
    params: dict[str, Tensor]
    best_epoch: int
    history: list[dict] = field(default_factory=list)
    optimizer: object = None


def fit(train: list[CachedGraph], val: list[CachedGraph], cfg: TrainConfig, d_f: int,
        seed_path: list[int]) -> FitResult:
    """Train for ``cfg.epochs`` and keep the parameters of the best validation epoch.

    Best means highest validation accuracy, ties going to the lower
    validation cross-entropy and then to the earlier epoch. Without a
    validation set the final epoch is kept.
    """
    mcfg = cfg.model_config(d_f)
    lcfg = cfg.loss_config()
    params = M.init_params(mcfg, _int_seed([*seed_path, 0]))
    steps_per_epoch = len(_batches(np.arange(len(train)), cfg.batch_size))
    opt = Adam(params, lr=cfg.base_lr, period=cfg.epochs * steps_per_epoch, floor=cfg.lr_floor)
    val_y = np.array([c.graph.label for c in val], dtype=np.float64)
    best_key = None
    best = {k: p.data.copy() for k, p in params.items()}
    best_epoch = cfg.epochs - 1
    history = []
    for epoch in range(cfg.epochs):
        order = np.random.default_rng([*seed_path, 1, epoch]).permutation(len(train))
        losses = []
        for chunk in _batches(order, cfg.batch_size):
            batch = build_train_batch(train, chunk, cfg, [*seed_path, 2, epoch])
            loss, parts = M.total_loss(batch, params, mcfg, lcfg)
            opt.zero_grad()
            loss.backward()
            opt.step()
            losses.append(parts["total"])
        record = {"epoch": epoch, "train_loss": float(np.mean(losses))}
        if val:
            probs = predict(val, params, mcfg)
            acc = float(((probs >= 0.5) == (val_y == 1)).mean())
            vloss = _bce(probs, val_y)
            record.update(val_acc=acc, val_loss=vloss)
            key = (acc, -vloss)
            if best_key is None or key > best_key:
                best_key = key
                best_epoch = epoch
                best = {k: p.data.copy() for k, p in params.items()}
        history.append(record)
    if val:
        for k, p in params.items():
            p.data = best[k]
    return FitResult(params, best_epoch, history, opt)


def stratified_splits(labels: np.ndarray, folds: int, seed_path) -> list[tuple[np.ndarray, np.ndarray]]:
    if labels.size == 0 or labels.min() < 0:
        raise StratificationError("cross-validation needs a labelled dataset")
    counts = np.bincount(labels, minlength=2)
    if (counts < folds).any():
        raise StratificationError(f"each class needs at least {folds} graphs, got class counts {counts.tolist()}")
    skf = StratifiedKFold(n_splits=folds, shuffle=True, random_state=_int_seed(seed_path))
    return [(tr, te) for tr, te in skf.split(np.zeros(len(labels)), labels)]


def _split_validation(train_idx: np.ndarray, labels: np.ndarray, fraction: float, seed_path):
    if fraction <= 0:
        return train_idx, train_idx[:0]
    n_val = int(round(fraction * len(train_idx)))
    y = labels[train_idx]
    if n_val < 2 or np.bincount(y, minlength=2).min() < 2:
        return train_idx, train_idx[:0]
    tr, va = train_test_split(train_idx, test_size=n_val, stratify=y, random_state=_int_seed(seed_path))
    return np.sort(tr), np.sort(va)


def run_fold(ds: Dataset, cfg: TrainConfig, repeat: int, fold: int,
             cache: list[CachedGraph] | None = None) -> FoldMetrics:
    labels = ds.labels
    train_idx, test_idx = stratified_splits(labels, cfg.folds, [cfg.seed, repeat])[fold]
    tr, va = _split_validation(train_idx, labels, cfg.val_fraction, [cfg.seed, repeat, fold, 3])
    if cache is None:
        cache = [cache_graph(g, cfg, i) for i, g in enumerate(ds.graphs)]
    seed_path = [cfg.seed, repeat, fold]
    result = fit([cache[i] for i in tr], [cache[i] for i in va], cfg, ds.d_f, seed_path)
    test = [cache[i] for i in test_idx]
    probs = predict(test, result.params, cfg.model_config(ds.d_f))
    fm = FoldMetrics.from_predictions(probs, labels[test_idx], repeat, fold, result.best_epoch)
    log.info("repeat %d fold %d: acc=%.3f auc=%.3f (best epoch %d)", repeat, fold, fm.acc, fm.auc, fm.best_epoch)
    return fm


def _run_fold_task(args) -> FoldMetrics:
    ds, cfg, repeat, fold = args
    return run_fold(ds, cfg, repeat, fold)


def cross_validate(ds: Dataset, cfg: TrainConfig) -> Metrics:
    """Stratified k-fold CV repeated ``cfg.repeats`` times with fresh split seeds."""
    if not len(ds):
        raise StructuralError("cannot cross-validate an empty dataset")
    stratified_splits(ds.labels, cfg.folds, [cfg.seed, 0])
    tasks = [(r, f) for r in range(cfg.repeats) for f in range(cfg.folds)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_fold_task, [(ds, cfg, r, f) for r, f in tasks]))
    else:
        cache = [cache_graph(g, cfg, i) for i, g in enumerate(ds.graphs)]
        results = [run_fold(ds, cfg, r, f, cache) for r, f in tasks]
    results.sort(key=lambda m: (m.repeat, m.fold))
    return Metrics(tuple(results))


def train_final(ds: Dataset, cfg: TrainConfig) -> FitResult:
    """Fit on the whole dataset, holding out ``val_fraction`` for model selection."""
    labels = ds.labels
    idx = np.arange(len(ds))
    tr, va = _split_validation(idx, labels, cfg.val_fraction, [cfg.seed, FINAL_RUN])
    cache = [cache_graph(g, cfg, i) for i, g in enumerate(ds.graphs)]
    return fit([cache[i] for i in tr], [cache[i] for i in va], cfg, ds.d_f, [cfg.seed, FINAL_RUN, 0])
