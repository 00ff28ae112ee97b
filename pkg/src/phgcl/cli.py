"""Command-line entry point (``phgcl``)."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path


from phgcl import model as M
from phgcl.augment import AugmentConfig, make_views
from phgcl.autodiff import Tensor, load_checkpoint, save_checkpoint
from phgcl.centrality import pagerank, shortest_paths
from phgcl.errors import ConfigError, PHGCLError
from phgcl.graph import (
    Dataset,
    graph_record,
    generate_synthetic,
    generate_synthetic_connectome,
    load_dataset,
    save_dataset,
)
from phgcl.harness import experiments, report
from phgcl.harness.config import TrainConfig, config_from_mapping, load_config
from phgcl.harness.metrics import FoldMetrics
from phgcl.harness.training import cross_validate, train_final
from phgcl.topology import diagram_of, vectorize

log = logging.getLogger("phgcl")


def _grid(text: str, kind=float) -> list:
    return [kind(tok) for tok in text.replace(",", " ").split()]


def _config(args) -> TrainConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else TrainConfig()
    overrides = {}
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, val = item.split("=", 1)
        overrides[key.strip()] = val.strip()
    return config_from_mapping(overrides, cfg) if overrides else cfg


def _write_lines(path, records) -> None:
    report.write_records(path, records)


# ---------------------------------------------------------------- commands


def cmd_generate(args) -> int:
    if args.connectome:
        ds = generate_synthetic_connectome(args.n_graphs, args.n_nodes, args.class_gap, args.rho, args.seed)
    else:
        ds = generate_synthetic(args.n_graphs, args.n_nodes, args.d_f, args.class_gap, args.seed)
    save_dataset(ds, args.out)
    log.info("wrote %d graphs to %s", len(ds), args.out)
    return 0


def cmd_augment(args) -> int:
    ds = load_dataset(args.inp)
    cfg = AugmentConfig(args.p_e, args.p_f, args.p_tau, args.seed)
    recs = []
    for i, g in enumerate(ds.graphs):
        pair = make_views(g, pagerank(g, args.damping), cfg, seed=[args.seed, i])
        recs.append({
            "graph": i,
            "view_e": graph_record(pair.view_e),
            "view_f": graph_record(pair.view_f),
            "edge_probs": pair.edge_probs.tolist(),
            "feat_probs": pair.feat_probs.tolist(),
            "mask": pair.mask.astype(int).tolist(),
        })
    _write_lines(args.out, recs)
    return 0


def cmd_topo_stats(args) -> int:
    ds = load_dataset(args.inp)
    recs = []
    for i, g in enumerate(ds.graphs):
        dist = shortest_paths(g)
        phi = pagerank(g, args.damping)
        recs.append({"graph": i, "mu": dist.mean, "sigma": dist.std, "top_central": phi.top_k(args.top_k),
                     "pagerank_iterations": phi.iterations, "pagerank_converged": bool(phi.converged)})
    _write_lines(args.out, recs)
    return 0


def cmd_topo_diagrams(args) -> int:
    ds = load_dataset(args.inp)
    recs = []
    for i, g in enumerate(ds.graphs):
        dgm = diagram_of(g, pagerank(g, args.damping) if g.n_nodes else None)
        recs.append({"graph": i, "pairs": dgm.pairs.tolist(), "essential": dgm.essential.tolist(),
                     "max_value": dgm.max_value, "cycle_rank": dgm.cycle_rank,
                     "vector": vectorize(dgm, args.k).values.tolist()})
    _write_lines(args.out, recs)
    return 0


def _save_model(path, fit, cfg: TrainConfig, ds: Dataset) -> None:
    meta = {"format": "phgcl-model", "config": cfg.to_dict(), "d_F": ds.d_f, "best_epoch": fit.best_epoch}
    save_checkpoint(path, fit.params, fit.optimizer.state, meta)


def _load_model(path):
    arrays, _, meta = load_checkpoint(path)
    if meta.get("format") != "phgcl-model":
        raise ConfigError(f"{path} is not a model checkpoint")
    cfg = config_from_mapping(meta["config"])
    params = {k: Tensor(v) for k, v in arrays.items()}
    return params, cfg.model_config(int(meta["d_F"])), cfg


def cmd_train(args) -> int:
    cfg = _config(args)
    ds = load_dataset(args.inp)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(cfg.to_text(), encoding="utf-8")
    status = 0
    if not args.no_cv:
        metrics = cross_validate(ds, cfg)
        rep = report.cv_report(metrics, cfg.to_dict())
        paths = report.write_report(rep, out)
        with open(paths["records"], "a", encoding="utf-8") as fh:
            fh.write(json.dumps(report.cv_summary_record(metrics), sort_keys=True) + "\n")
        s = metrics.summary()
        print(f"ACC {100 * s['acc']:.1f} ± {100 * s['acc_std']:.1f}  AUC {100 * s['auc']:.1f} ± "
              f"{100 * s['auc_std']:.1f}  SEN {100 * s['sen']:.1f}  SPE {100 * s['spe']:.1f}")
    fit = train_final(ds, cfg)
    _save_model(out / "model.ckpt", fit, cfg, ds)
    log.info("checkpoint written to %s", out / "model.ckpt")
    return status


def cmd_eval(args) -> int:
    params, mcfg, _ = _load_model(args.checkpoint)
    ds = load_dataset(args.inp)
    probs = M.predict_proba(M.batch_graphs(ds.graphs), params, mcfg)
    fm = FoldMetrics.from_predictions(probs, ds.labels)
    rec = {"kind": "eval", "status": "ok", "n": len(ds), "acc": fm.acc, "auc": fm.auc, "sen": fm.sen,
           "spe": fm.spe, "tp": fm.tp, "tn": fm.tn, "fp": fm.fp, "fn": fm.fn}
    print(json.dumps(rec, sort_keys=True))
    if args.out:
        _write_lines(args.out, [rec] + [{"graph": i, "prob": float(p)} for i, p in enumerate(probs)])
    return 0


def cmd_roi_scores(args) -> int:
    params, mcfg, _ = _load_model(args.checkpoint)
    if mcfg.readout != "attention":
        raise ConfigError("roi-scores needs a model trained with readout = attention")
    ds = load_dataset(args.inp)
    recs, scores = [], []
    for i, g in enumerate(ds.graphs):
        with_scores = M.encode(M.batch_graphs([g]), params, mcfg).scores[0, : g.n_nodes]
        scores.append(with_scores)
        recs.append({"graph": i, "scores": [[v, float(s)] for v, s in enumerate(with_scores)]})
    _write_lines(args.out, recs)
    if not args.no_figure and scores:
        report.plot_roi_scores(scores, Path(args.out).with_suffix(".png"))
    return 0


def _finish(rep, out) -> int:
    report.write_report(rep, out)
    print(report.format_table(rep), end="")
    return 0 if rep.ok else 1


def cmd_sweep(args) -> int:
    cfg = _config(args)
    ds = load_dataset(args.inp)
    if args.what == "sparsity":
        rep = experiments.sweep_sparsity(ds, _grid(args.grid) if args.grid else experiments.SPARSITY_GRID, cfg)
    elif args.what == "layers":
        rep = experiments.sweep_layers(ds, _grid(args.grid, int) if args.grid else experiments.LAYER_GRID, cfg)
    else:
        grid = _grid(args.grid) if args.grid else experiments.LAMBDA_GRID
        rep = experiments.sweep_lambdas(ds, grid, cfg, _grid(args.grid2) if args.grid2 else None)
    return _finish(rep, args.out)


def cmd_ablate(args) -> int:
    cfg = _config(args)
    ds = load_dataset(args.inp)
    return _finish(experiments.ablate(ds, cfg), args.out)


# ---------------------------------------------------------------- parser


def _add_config(p) -> None:
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config entry")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phgcl", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic two-class dataset")
    p.add_argument("--n-graphs", type=int, default=200)
    p.add_argument("--n-nodes", type=int, default=30)
    p.add_argument("--d-f", type=int, default=8)
    p.add_argument("--class-gap", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--connectome", action="store_true", help="correlation-matrix features, edges by sparsity ratio")
    p.add_argument("--rho", type=float, default=0.3)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("augment", help="dump both augmented views of every graph")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--p-e", type=float, default=0.3)
    p.add_argument("--p-f", type=float, default=0.3)
    p.add_argument("--p-tau", type=float, default=0.3)
    p.add_argument("--damping", type=float, default=0.85)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_augment)

    topo = sub.add_parser("topo", help="graph statistics and persistence diagrams")
    tsub = topo.add_subparsers(dest="topo_command", required=True)
    p = tsub.add_parser("stats")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--top-k", type=int, default=5)
    p.add_argument("--damping", type=float, default=0.85)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_topo_stats)
    p = tsub.add_parser("diagrams")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--k", type=int, default=32)
    p.add_argument("--damping", type=float, default=0.85)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_topo_diagrams)

    p = sub.add_parser("train", help="cross-validate, then fit and save a final model")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--no-cv", action="store_true")
    _add_config(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a labelled dataset with a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="hyperparameter sweeps")
    p.add_argument("what", choices=("sparsity", "layers", "lambdas"))
    p.add_argument("--grid", help="comma separated values (λ1 values for lambdas)")
    p.add_argument("--grid2", help="λ2 values for lambdas; defaults to --grid")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True, help="output directory")
    _add_config(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("ablate", help="run the eight component ablation rows")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True, help="output directory")
    _add_config(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("roi-scores", help="export attention-readout node scores")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-figure", action="store_true")
    p.set_defaults(func=cmd_roi_scores)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (PHGCLError, OSError) as exc:
        print(f"phgcl: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
