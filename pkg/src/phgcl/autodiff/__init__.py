from phgcl.autodiff.checkpoint import load_checkpoint, save_checkpoint
from phgcl.autodiff.optim import Adam, OptimizerState, adam_step, cosine_lr, xavier_init
from phgcl.autodiff.tensor import (
    Tensor,
    add,
    as_tensor,
    clip,
    concat,
    concat_rows,
    exp,
    l2_normalize,
    layer_norm,
    log,
    masked_softmax,
    matmul,
    mean,
    mul,
    neg,
    no_grad,
    relu,
    reshape,
    row_mean,
    scale,
    select_rows,
    sigmoid,
    softmax,
    sum,
    transpose,
)

__all__ = [
    "Adam", "OptimizerState", "Tensor", "adam_step", "add", "as_tensor", "clip", "concat",
    "concat_rows", "cosine_lr", "exp", "l2_normalize", "layer_norm", "load_checkpoint", "log",
    "masked_softmax", "matmul", "mean", "mul", "neg", "no_grad", "relu", "reshape", "row_mean",
    "save_checkpoint", "scale", "select_rows", "sigmoid", "softmax", "sum", "transpose",
    "xavier_init",
]
