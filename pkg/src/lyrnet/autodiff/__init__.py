"""Reverse-mode automatic differentiation over dense numpy arrays."""

from .tensor import Tensor, build_tape
from .ops import (
    add, sub, mul, div, neg, exp, log, tanh, gelu,
    matmul, reshape, transpose, concat, getitem, sum, mean,
    embedding_lookup, take_along_last,
    softmax, log_softmax, cross_entropy, layer_norm, dropout,
)
from .gradcheck import GradCheckReport, grad_check, relative_error

__all__ = [
    "Tensor", "build_tape",
    "add", "sub", "mul", "div", "neg", "exp", "log", "tanh", "gelu",
    "matmul", "reshape", "transpose", "concat", "getitem", "sum", "mean",
    "embedding_lookup", "take_along_last",
    "softmax", "log_softmax", "cross_entropy", "layer_norm", "dropout",
    "GradCheckReport", "grad_check", "relative_error",
]
