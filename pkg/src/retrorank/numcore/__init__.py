"""Numeric substrate: float64 tensors with reverse-mode autodiff, Adam,
seeded PRNG streams, and the hot-loop kernel backends."""

from .adam import AdamState, adam_step
from .autodiff import (
    AutodiffError,
    Node,
    ShapeError,
    add,
    as_array,
    backward,
    concat,
    constant,
    conv2d_maxpool,
    dot,
    gather_rows,
    matmul,
    mul,
    narrow,
    no_grad,
    parameter,
    reshape,
    row,
    scale,
    set_check_finite,
    sigmoid,
    softplus,
    sq_norm,
    stack_rows,
    sub,
    sum_all,
    tanh,
    zero_grad,
)
from .kernels import BACKEND, available_backends
from .prng import Prng, fnv1a64, mix64

__all__ = [
    "AdamState",
    "AutodiffError",
    "BACKEND",
    "Node",
    "Prng",
    "ShapeError",
    "adam_step",
    "add",
    "as_array",
    "available_backends",
    "backward",
    "concat",
    "constant",
    "conv2d_maxpool",
    "dot",
    "fnv1a64",
    "gather_rows",
    "matmul",
    "mix64",
    "mul",
    "narrow",
    "no_grad",
    "parameter",
    "reshape",
    "row",
    "scale",
    "set_check_finite",
    "sigmoid",
    "softplus",
    "sq_norm",
    "stack_rows",
    "sub",
    "sum_all",
    "tanh",
    "zero_grad",
]
