"""Report output: line-delimited records, a text table and a figure per report."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from phgcl import plotting
from phgcl.harness.experiments import Report
from phgcl.harness.metrics import Metrics

METRICS = ("acc", "auc", "spe", "sen")


def _pct(row: dict, name: str) -> str:
    return f"{100 * row[name]:.1f} ± {100 * row[name + '_std']:.1f}"


def _fmt_key(v) -> str:
    if isinstance(v, bool):
        return "✓" if v else ""
    if isinstance(v, float):
        return f"{v:g}"
    return str(v)


def format_table(report: Report) -> str:
    headers = [*report.keys, "ACC (%)", "AUC (%)", "SPE (%)", "SEN (%)"]
    body = [[_fmt_key(row[k]) for k in report.keys] + [_pct(row, m) for m in METRICS] for row in report.rows]
    for f in report.failures:
        body.append([_fmt_key(f[k]) for k in report.keys] + ["FAILED", "", "", ""])
    widths = [max(len(h), *(len(r[i]) for r in body)) if body else len(h) for i, h in enumerate(headers)]
    line = "  ".join(h.ljust(w) for h, w in zip(headers, widths))
    rule = "-" * len(line)
    rows = ["  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in body]
    return "\n".join([f"{report.kind} report", rule, line, rule, *rows, rule]) + "\n"


def write_records(path, records) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True))
            fh.write("\n")
    return path


def report_records(report: Report) -> list[dict]:
    recs = [{"kind": report.kind, "status": "ok", **row} for row in report.rows]
    recs += [{"kind": report.kind, "status": "failed", **f} for f in report.failures]
    return recs


def write_report(report: Report, out_dir, figure: bool = True) -> dict[str, Path]:
    """Write ``<kind>.jsonl``, ``<kind>_summary.txt`` and ``<kind>.png`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "records": write_records(out / f"{report.kind}.jsonl", report_records(report)),
        "summary": out / f"{report.kind}_summary.txt",
    }
    paths["summary"].write_text(format_table(report), encoding="utf-8")
    if figure and report.rows:
        paths["figure"] = plot_report(report, out / f"{report.kind}.png")
    return paths


def cv_report(metrics: Metrics, cfg: dict) -> Report:
    rep = Report("cv", ("repeat", "fold"), config=cfg)
    for f in metrics.folds:
        rep.rows.append({"repeat": f.repeat, "fold": f.fold, "acc": f.acc, "auc": f.auc, "sen": f.sen,
                         "spe": f.spe, "acc_std": 0.0, "auc_std": 0.0, "sen_std": 0.0, "spe_std": 0.0,
                         "tp": f.tp, "tn": f.tn, "fp": f.fp, "fn": f.fn, "best_epoch": f.best_epoch})
    return rep


def cv_summary_record(metrics: Metrics) -> dict:
    return {"kind": "cv_summary", "status": "ok", "runs": len(metrics.folds), **metrics.summary()}


# ---------------------------------------------------------------- figures


def plot_report(report: Report, path) -> Path:
    with plotting.style():
        fig = _PLOTTERS.get(report.kind, _plot_bars)(report)
        return plotting.save(fig, path)


def _plot_curve(report: Report):
    fig, axes = plotting.new_figure()
    ax = axes[0, 0]
    xs = [row["rho"] for row in report.rows]
    for m in ("acc", "auc"):
        ys = np.array([row[m] for row in report.rows]) * 100
        err = np.array([row[m + "_std"] for row in report.rows]) * 100
        ax.errorbar(xs, ys, yerr=err, marker="o", capsize=3, color=plotting.COLORS[m], label=plotting.LABELS[m])
    ax.set_xlabel("sparsity ratio")
    ax.set_ylabel("score (%)")
    ax.legend(frameon=False)
    return fig


def _plot_bars(report: Report):
    fig, axes = plotting.new_figure()
    ax = axes[0, 0]
    labels = [" / ".join(_fmt_key(row[k]) or "-" for k in report.keys[:1]) for row in report.rows]
    x = np.arange(len(report.rows))
    width = 0.8 / len(METRICS)
    for j, m in enumerate(METRICS):
        ys = [100 * row[m] for row in report.rows]
        err = [100 * row[m + "_std"] for row in report.rows]
        ax.bar(x + (j - 1.5) * width, ys, width, yerr=err, capsize=2, color=plotting.COLORS[m],
               label=plotting.LABELS[m])
    ax.set_xticks(x, labels)
    ax.set_xlabel(report.keys[0])
    ax.set_ylabel("score (%)")
    ax.legend(frameon=False, ncols=4, loc="lower center")
    return fig


def _plot_ablation(report: Report):
    fig, axes = plotting.new_figure(aspect=0.75)
    ax = axes[0, 0]
    names = [row["model"] for row in report.rows]
    y = np.arange(len(names))
    for j, m in enumerate(("acc", "auc")):
        ax.barh(y + (j - 0.5) * 0.38, [100 * row[m] for row in report.rows], 0.38,
                xerr=[100 * row[m + "_std"] for row in report.rows], capsize=2,
                color=plotting.COLORS[m], label=plotting.LABELS[m])
    ax.set_yticks(y, names)
    ax.invert_yaxis()
    ax.set_xlabel("score (%)")
    ax.legend(frameon=False)
    return fig


def _plot_heatmaps(report: Report):
    l1 = sorted({row["lambda1"] for row in report.rows})
    l2 = sorted({row["lambda2"] for row in report.rows})
    fig, axes = plotting.new_figure(1, 2, aspect=0.45)
    for ax, m in zip(axes[0], ("acc", "auc")):
        grid = np.full((len(l1), len(l2)), np.nan)
        for row in report.rows:
            grid[l1.index(row["lambda1"]), l2.index(row["lambda2"])] = 100 * row[m]
        im = ax.imshow(grid, origin="lower", cmap="viridis", aspect="auto")
        for i in range(len(l1)):
            for j in range(len(l2)):
                if np.isfinite(grid[i, j]):
                    ax.text(j, i, f"{grid[i, j]:.1f}", ha="center", va="center", color="w", fontsize=7)
        ax.set_xticks(range(len(l2)), [f"{v:g}" for v in l2])
        ax.set_yticks(range(len(l1)), [f"{v:g}" for v in l1])
        ax.set_xlabel("λ2")
        ax.set_ylabel("λ1")
        ax.set_title(plotting.LABELS[m] + " (%)")
        fig.colorbar(im, ax=ax, shrink=0.8)
    return fig


def _plot_cv(report: Report):
    fig, axes = plotting.new_figure()
    ax = axes[0, 0]
    x = np.arange(len(report.rows))
    for j, m in enumerate(("acc", "auc")):
        ax.bar(x + (j - 0.5) * 0.4, [100 * r[m] for r in report.rows], 0.4,
               color=plotting.COLORS[m], label=plotting.LABELS[m])
    ax.set_xticks(x, [f"r{r['repeat']}f{r['fold']}" for r in report.rows], rotation=90)
    ax.set_ylabel("score (%)")
    ax.legend(frameon=False)
    return fig


_PLOTTERS = {
    "sparsity": _plot_curve,
    "layers": _plot_bars,
    "lambdas": _plot_heatmaps,
    "ablation": _plot_ablation,
    "cv": _plot_cv,
}


def plot_roi_scores(scores: list[np.ndarray], path, top_k: int = 10) -> Path:
    """Bar chart of the mean attention-readout score per node over all graphs."""
    width = max(len(s) for s in scores)
    acc = np.zeros(width)
    cnt = np.zeros(width)
    for s in scores:
        acc[: len(s)] += s
        cnt[: len(s)] += 1
    mean = acc / np.maximum(cnt, 1)
    top = set(np.argsort(-mean, kind="stable")[:top_k].tolist())
    with plotting.style():
        fig, axes = plotting.new_figure(aspect=0.4)
        ax = axes[0, 0]
        ax.bar(np.arange(width), mean, color=["#d62728" if i in top else "#7f7f7f" for i in range(width)])
        ax.set_xlabel("node (ROI) id")
        ax.set_ylabel("mean attention score")
        return plotting.save(fig, path)
