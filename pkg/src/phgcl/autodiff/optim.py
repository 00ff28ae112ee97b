"""Initialisation, Adam and the cosine learning-rate schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from phgcl.autodiff.tensor import Tensor
from phgcl.errors import ParameterError, StructuralError


def xavier_init(shape: tuple[int, int], seed, name: str | None = None) -> Tensor:
    """Glorot-uniform weights on [-a, a] with a = sqrt(6 / (fan_in + fan_out))."""
    if len(shape) != 2:
        raise StructuralError(f"xavier_init expects a 2-D shape, got {shape}")
    fan_in, fan_out = shape
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    rng = np.random.default_rng(seed)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True, name=name)


def cosine_lr(step: int, period: int, base: float, floor: float = 0.0) -> float:
    """Cosine annealing from ``base`` at step 0 down to ``floor`` at ``period``."""
    if period <= 0:
        return base
    t = min(max(step, 0), period)
    return floor + 0.5 * (base - floor) * (1.0 + math.cos(math.pi * t / period))


@dataclass
class OptimizerState:
    lr: float = 1e-3
    period: int = 1
    floor: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def current_lr(self) -> float:
        return cosine_lr(self.step, self.period, self.lr, self.floor)


class Adam:
    """Adam with bias correction, driven by a cosine schedule over ``period`` steps."""

    def __init__(self, params: dict[str, Tensor], lr: float = 1e-3, period: int = 1,
                 floor: float = 0.0, betas=(0.9, 0.999), eps: float = 1e-8):
        if lr < 0:
            raise ParameterError(f"learning rate must be non-negative, got {lr}")
        self.params = params
        self.state = OptimizerState(lr=lr, period=period, floor=floor,
                                    beta1=betas[0], beta2=betas[1], eps=eps)
        for name, p in params.items():
            self.state.m[name] = np.zeros_like(p.data)
            self.state.v[name] = np.zeros_like(p.data)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self, grads: dict[str, np.ndarray] | None = None) -> float:
        """Apply one update; returns the learning rate that was used."""
        st = self.state
        lr = st.current_lr()
        st.step += 1
        b1, b2 = st.beta1, st.beta2
        c1 = 1.0 - b1 ** st.step
        c2 = 1.0 - b2 ** st.step
        for name, p in self.params.items():
            g = p.grad if grads is None else grads.get(name)
            if g is None:
                continue
            m = st.m[name]
            v = st.v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p.data -= lr * (m / c1) / (np.sqrt(v / c2) + st.eps)
        return lr


def adam_step(params: dict[str, Tensor], grads: dict[str, np.ndarray], state: OptimizerState) -> dict[str, Tensor]:
    """Functional form of one Adam update over named parameters."""
    opt = Adam.__new__(Adam)
    opt.params = params
    opt.state = state
    for name, p in params.items():
        state.m.setdefault(name, np.zeros_like(p.data))
        state.v.setdefault(name, np.zeros_like(p.data))
    opt.step(grads)
    return params
