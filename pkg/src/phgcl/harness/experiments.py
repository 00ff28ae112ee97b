"""Hyperparameter sweeps and the component ablation."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

from phgcl.errors import ConfigError
from phgcl.graph import Dataset, resparsify
from phgcl.harness.config import TrainConfig
from phgcl.harness.metrics import Metrics
from phgcl.harness.training import cross_validate

log = logging.getLogger(__name__)

SPARSITY_GRID = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7)
LAYER_GRID = (1, 2, 3)
LAMBDA_GRID = (1e-3, 1e-2, 1e-1, 1.0)

# (row label, Ada, DDformer, GCL, Topo), baseline first and the full model last
ABLATION_ROWS = (
    ("GCN", False, False, False, False),
    ("DDformer", False, True, False, False),
    ("GCN + Ada", True, False, False, False),
    ("DDformer+Ada", True, True, False, False),
    ("PHGCL w/o Topo", True, False, True, False),
    ("PHGCL-DDGformer w/o Topo", True, True, True, False),
    ("PHGCL", True, False, True, True),
    ("PHGCL-DDGformer", True, True, True, True),
)


@dataclass
class Report:
    """A table of runs: ``keys`` name the grid columns of each row."""

    kind: str
    keys: tuple[str, ...]
    rows: list[dict] = field(default_factory=list)
    failures: list[dict] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.failures


def metrics_row(m: Metrics) -> dict:
    row = m.summary()
    row["runs"] = len(m.folds)
    return row


def _run_grid(kind: str, keys: tuple[str, ...], points: Sequence[dict], run: Callable[[dict], Metrics],
              cfg: TrainConfig) -> Report:
    report = Report(kind, keys, config=cfg.to_dict())
    for point in points:
        try:
            m = run(point)
        except Exception as exc:  # one failed grid point must not sink the sweep
            log.error("%s %s failed: %s", kind, point, exc)
            report.failures.append({**point, "error": f"{type(exc).__name__}: {exc}"})
            continue
        report.rows.append({**point, **metrics_row(m)})
        log.info("%s %s: acc=%.3f auc=%.3f", kind, point, m.acc, m.auc)
    return report


def _require(grid) -> list:
    grid = list(grid)
    if not grid:
        raise ConfigError("sweep grid must not be empty")
    return grid


def sweep_sparsity(ds: Dataset, grid: Sequence[float], cfg: TrainConfig) -> Report:
    """Re-binarise every graph at each ratio; features must be correlation matrices."""
    points = [{"rho": float(r)} for r in _require(grid)]
    return _run_grid("sparsity", ("rho",), points,
                     lambda p: cross_validate(resparsify(ds, p["rho"]), cfg.replace(rho=p["rho"])), cfg)


def sweep_layers(ds: Dataset, grid: Sequence[int], cfg: TrainConfig) -> Report:
    points = [{"layers": int(n)} for n in _require(grid)]
    return _run_grid("layers", ("layers",), points,
                     lambda p: cross_validate(ds, cfg.replace(layers=p["layers"])), cfg)


def sweep_lambdas(ds: Dataset, grid: Sequence[float], cfg: TrainConfig,
                  grid2: Sequence[float] | None = None) -> Report:
    """Full λ1 x λ2 grid; ``grid2`` defaults to ``grid``."""
    g1 = _require(grid)
    g2 = _require(grid if grid2 is None else grid2)
    points = [{"lambda1": float(a), "lambda2": float(b)} for a, b in itertools.product(g1, g2)]
    return _run_grid("lambdas", ("lambda1", "lambda2"), points,
                     lambda p: cross_validate(ds, cfg.replace(**p)), cfg)


def ablation_config(cfg: TrainConfig, ada: bool, ddformer: bool, gcl: bool, topo: bool) -> TrainConfig:
    return cfg.replace(use_augment=ada, use_ddformer=ddformer, use_gcl=gcl, use_topo=topo)


def ablate(ds: Dataset, cfg: TrainConfig, rows=ABLATION_ROWS) -> Report:
    points = [{"model": name, "ada": a, "ddformer": d, "gcl": g, "topo": t} for name, a, d, g, t in rows]
    return _run_grid("ablation", ("model", "ada", "ddformer", "gcl", "topo"), points,
                     lambda p: cross_validate(ds, ablation_config(cfg, p["ada"], p["ddformer"], p["gcl"], p["topo"])),
                     cfg)
