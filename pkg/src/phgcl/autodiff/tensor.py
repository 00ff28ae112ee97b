"""Dense reverse-mode differentiation on numpy arrays.

Every operation returns a new :class:`Tensor` that remembers its parents
and a closure mapping the output gradient to parent gradients. Calling
:meth:`Tensor.backward` on a scalar walks the recorded graph in reverse
topological order. Leading axes broadcast the numpy way, so a batch of
padded graphs is just a 3-D tensor.
"""

from __future__ import annotations

from contextlib import contextmanager
from typing import Callable, Iterator, Sequence

import numpy as np

from phgcl.errors import StructuralError

DTYPE = np.float64
_grad_enabled = True


@contextmanager
def no_grad() -> Iterator[None]:
    """Run operations without recording them for backward."""
    global _grad_enabled
    prev, _grad_enabled = _grad_enabled, False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=DTYPE)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, grad: np.ndarray | None = None) -> None:
        """Accumulate d(self)/d(leaf) into ``.grad`` of every tracked ancestor."""
        if grad is None:
            if self.data.size != 1:
                raise StructuralError(f"backward() without a seed needs a scalar, got shape {self.shape}")
            grad = np.ones_like(self.data)
        order = _topological_order(self)
        grads: dict[int, np.ndarray] = {id(self): np.asarray(grad, dtype=DTYPE)}
        for node in order:
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_tensor(other)))

    def __rsub__(self, other):
        return add(as_tensor(other), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    @property
    def T(self) -> Tensor:
        return transpose(self)


def _topological_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    order.reverse()
    return order


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _broadcast_shape(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise StructuralError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


# ---------------------------------------------------------------- arithmetic


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "add")
    sa, sb = a.shape, b.shape
    return _make(a.data + b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def neg(a: Tensor) -> Tensor:
    return _make(-a.data, (a,), lambda g: (-g,))


def mul(a, b) -> Tensor:
    """Elementwise product with broadcasting."""
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "mul")
    ad, bd = a.data, b.data

    def backward(g):
        return (
            _unbroadcast(g * bd, ad.shape) if a.requires_grad else None,
            _unbroadcast(g * ad, bd.shape) if b.requires_grad else None,
        )

    return _make(ad * bd, (a, b), backward)


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    return _make(a.data * c, (a,), lambda g: (g * c,))


def matmul(a, b) -> Tensor:
    """Matrix product over the last two axes; leading axes broadcast."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise StructuralError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    try:
        out = np.matmul(a.data, b.data)
    except ValueError:
        raise StructuralError(f"matmul: incompatible shapes {a.shape} and {b.shape}") from None
    ad, bd = a.data, b.data

    def backward(g):
        ga = _unbroadcast(np.matmul(g, np.swapaxes(bd, -1, -2)), ad.shape) if a.requires_grad else None
        gb = _unbroadcast(np.matmul(np.swapaxes(ad, -1, -2), g), bd.shape) if b.requires_grad else None
        return ga, gb

    return _make(out, (a, b), backward)


def transpose(a: Tensor) -> Tensor:
    """Swap the last two axes."""
    if a.ndim < 2:
        raise StructuralError(f"transpose: need at least 2 axes, got shape {a.shape}")
    return _make(np.swapaxes(a.data, -1, -2), (a,), lambda g: (np.swapaxes(g, -1, -2),))


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    src = a.shape
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise StructuralError(f"reshape: cannot view {src} as {shape}") from None
    return _make(out, (a,), lambda g: (g.reshape(src),))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Concatenate along ``axis`` (axis 0 concatenates rows of 2-D inputs)."""
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        shapes = ", ".join(str(t.shape) for t in tensors)
        raise StructuralError(f"concat: incompatible shapes {shapes} along axis {axis}") from None
    bounds = np.cumsum([0] + [t.shape[axis] for t in tensors])

    def backward(g):
        return [np.take(g, np.arange(lo, hi), axis=axis) for lo, hi in zip(bounds[:-1], bounds[1:])]

    return _make(out, tuple(tensors), backward)


def concat_rows(tensors: Sequence[Tensor]) -> Tensor:
    return concat(tensors, axis=0)


def select_rows(a: Tensor, index) -> Tensor:
    """Gather rows (axis 0) by integer index; repeated indices accumulate."""
    index = np.asarray(index, dtype=np.int64)
    if index.size and (index.min() < -a.shape[0] or index.max() >= a.shape[0]):
        raise StructuralError(f"select_rows: index out of range for shape {a.shape}")
    src = a.shape

    def backward(g):
        out = np.zeros(src, dtype=DTYPE)
        np.add.at(out, index, g)
        return (out,)

    return _make(a.data[index], (a,), backward)


# ---------------------------------------------------------------- reductions


def sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    src = a.shape
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, src).copy(),)

    return _make(out, (a,), backward)


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    count = a.data.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    return scale(sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def row_mean(a: Tensor) -> Tensor:
    """Mean over the row axis (second to last), keeping it as length 1."""
    return mean(a, axis=-2, keepdims=True)


# ---------------------------------------------------------------- elementwise


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return _make(out, (a,), lambda g: (g * out,))


def log(a: Tensor) -> Tensor:
    ad = a.data
    return _make(np.log(ad), (a,), lambda g: (g / ad,))


def sigmoid(a: Tensor) -> Tensor:
    out = np.empty_like(a.data)
    pos = a.data >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a.data[pos]))
    e = np.exp(a.data[~pos])
    out[~pos] = e / (1.0 + e)
    return _make(out, (a,), lambda g: (g * out * (1.0 - out),))


def relu(a: Tensor) -> Tensor:
    on = a.data > 0
    return _make(np.where(on, a.data, 0.0), (a,), lambda g: (g * on,))


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    inside = (a.data >= lo) & (a.data <= hi)
    return _make(np.clip(a.data, lo, hi), (a,), lambda g: (g * inside,))


# ---------------------------------------------------------------- row-wise


def _softmax_backward(out: np.ndarray, g: np.ndarray) -> np.ndarray:
    return out * (g - (g * out).sum(axis=-1, keepdims=True))


def softmax(a: Tensor) -> Tensor:
    """Softmax over the last axis."""
    z = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=-1, keepdims=True)
    return _make(out, (a,), lambda g: (_softmax_backward(out, g),))


def masked_softmax(logits: Tensor, mask=None, exclude=None) -> Tensor:
    """Softmax of ``logits * mask`` over the last axis, skipping excluded entries.

    ``mask`` is a constant multiplicative mask broadcast against the logits.
    Entries where ``exclude`` is true get zero weight and take no part in the
    normalisation. A row with every entry excluded comes out all zero.
    """
    mask_arr = None if mask is None else np.asarray(mask.data if isinstance(mask, Tensor) else mask, dtype=DTYPE)
    z = logits.data if mask_arr is None else logits.data * mask_arr
    if exclude is not None:
        exclude = np.broadcast_to(np.asarray(exclude, dtype=bool), z.shape)
        z = np.where(exclude, -np.inf, z)
    zmax = z.max(axis=-1, keepdims=True)
    zmax = np.where(np.isfinite(zmax), zmax, 0.0)
    e = np.exp(z - zmax)
    denom = e.sum(axis=-1, keepdims=True)
    out = e / np.where(denom > 0, denom, 1.0)
    if mask_arr is not None:
        shape = logits.shape

        def backward(g):
            return (_unbroadcast(_softmax_backward(out, g) * mask_arr, shape),)
    else:

        def backward(g):
            return (_softmax_backward(out, g),)

    return _make(out, (logits,), backward)


def layer_norm(a: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalise each row (last axis) to zero mean and unit variance."""
    x = a.data
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    out = xc * inv
    n = x.shape[-1]

    def backward(g):
        gm = g.mean(axis=-1, keepdims=True)
        gx = (g * out).sum(axis=-1, keepdims=True) / n
        return (inv * (g - gm - out * gx),)

    return _make(out, (a,), backward)


def l2_normalize(a: Tensor, eps: float = 1e-12) -> Tensor:
    """Scale each row to unit Euclidean norm; an all-zero row stays zero."""
    x = a.data
    norm = np.sqrt((x * x).sum(axis=-1, keepdims=True))
    small = norm < eps
    denom = np.where(small, 1.0, norm)
    out = np.where(small, 0.0, x / denom)

    def backward(g):
        proj = (g * out).sum(axis=-1, keepdims=True)
        return (np.where(small, 0.0, (g - out * proj) / denom),)

    return _make(out, (a,), backward)
