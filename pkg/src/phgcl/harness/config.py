"""Training configuration and its flat ``key = value`` file format."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from phgcl.errors import ConfigError
from phgcl.model import LossConfig, ModelConfig


@dataclass(frozen=True)
class TrainConfig:
    rho: float = 0.3
    p_e: float = 0.3
    p_f: float = 0.3
    p_tau: float = 0.3
    damping: float = 0.85
    layers: int = 2
    heads: int = 4
    d_h: int = 32
    tau: float = 0.5
    lambda1: float = 0.1
    lambda2: float = 0.01
    epochs: int = 50
    batch_size: int = 32
    base_lr: float = 1e-3
    lr_floor: float = 0.0
    seed: int = 0
    folds: int = 5
    repeats: int = 5
    val_fraction: float = 0.2
    use_augment: bool = True
    use_ddformer: bool = True
    use_gcl: bool = True
    use_topo: bool = True
    readout: str = "mean"
    topo_k: int = 32
    symmetric_nce: bool = False
    workers: int = 1

    def __post_init__(self):
        for name in ("rho", "p_e", "p_f", "p_tau", "val_fraction"):
            val = getattr(self, name)
            if not (0.0 <= val <= 1.0):
                raise ConfigError(f"{name} must lie in [0, 1], got {val}")
        if not (0.0 < self.damping < 1.0):
            raise ConfigError(f"damping must lie in (0, 1), got {self.damping}")
        if self.p_e > self.p_tau or self.p_f > self.p_tau:
            raise ConfigError("p_e and p_f must not exceed p_tau")
        for name in ("epochs", "batch_size", "folds", "repeats", "layers", "heads", "d_h", "topo_k", "workers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.folds < 2:
            raise ConfigError(f"folds must be >= 2 for cross-validation, got {self.folds}")
        if self.tau <= 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")
        if self.d_h % self.heads:
            raise ConfigError(f"d_h={self.d_h} must be divisible by heads={self.heads}")
        if self.readout not in ("mean", "attention"):
            raise ConfigError(f"readout must be 'mean' or 'attention', got {self.readout!r}")

    def replace(self, **changes) -> TrainConfig:
        return dataclasses.replace(self, **changes)

    def model_config(self, d_f: int) -> ModelConfig:
        return ModelConfig(d_f=d_f, d_h=self.d_h, heads=self.heads, layers=self.layers,
                           use_ddformer=self.use_ddformer, readout=self.readout)

    def loss_config(self) -> LossConfig:
        # augmentation without contrast: the views act as extra supervised samples
        ce_source = "views" if self.use_augment and not self.use_gcl else "original"
        return LossConfig(tau=self.tau, lambda1=self.lambda1, lambda2=self.lambda2,
                          use_gcl=self.use_gcl, use_topo=self.use_topo,
                          symmetric=self.symmetric_nce, ce_source=ce_source)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_text(self) -> str:
        return "".join(f"{k} = {_format(v)}\n" for k, v in self.to_dict().items())


def _format(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


def _coerce(name: str, kind, raw: str):
    if kind is bool or kind == "bool":
        low = raw.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
    try:
        if kind is int or kind == "int":
            return int(raw)
        if kind is float or kind == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r} as {kind}") from None
    return raw.strip("\"'")


_TYPES = {f.name: f.type for f in fields(TrainConfig)}


def config_from_mapping(values: dict[str, object], base: TrainConfig | None = None) -> TrainConfig:
    unknown = sorted(set(values) - set(_TYPES))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    coerced = {k: _coerce(k, _TYPES[k], str(v)) if isinstance(v, str) else v for k, v in values.items()}
    return dataclasses.replace(base or TrainConfig(), **coerced)


def parse_config(text: str) -> TrainConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment, blank lines are skipped."""
    values: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = raw
    return config_from_mapping(values)


def load_config(path) -> TrainConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))
