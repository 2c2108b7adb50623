"""Reverse-mode autodiff over dense float64 arrays.

A Node wraps a value (numpy array, scalars are 0-d) plus an optional
closure that pushes gradients to its parents.  Graphs are rebuilt for
every forward pass; parameters are long-lived Nodes whose .grad
accumulates across backward() calls until zero_grad().

Tensors are always float64 and C-contiguous by convention; enable
set_check_finite(True) to assert every op result is finite.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

from . import kernels


class ShapeError(ValueError):
    """Operand shapes incompatible for the requested op."""


class AutodiffError(RuntimeError):
    """Graph misuse: non-scalar loss, repeated backward, etc."""


_grad_enabled = True
_check_finite = False


def set_check_finite(flag: bool) -> None:
    """Globally assert that every op output is finite (debug aid)."""
    global _check_finite
    _check_finite = bool(flag)


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block (cheaper evaluation)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Node:
    __slots__ = ("value", "grad", "parents", "requires_grad", "_backward", "_done", "name")

    def __init__(self, value, requires_grad=False, parents=(), backward=None, name=None):
        self.value = value
        self.grad = None
        self.parents = parents
        self.requires_grad = requires_grad
        self._backward = backward
        self._done = False
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def item(self) -> float:
        return float(self.value)

    def __repr__(self):
        tag = self.name or "node"
        return f"Node({tag}, shape={self.value.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return scale(self, -1.0)


def as_array(x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        return arr  # ascontiguousarray would promote 0-d to 1-d
    return np.ascontiguousarray(arr)


def constant(x, name=None) -> Node:
    """Leaf that never receives gradient."""
    return Node(as_array(x), requires_grad=False, name=name)


def parameter(x, name=None) -> Node:
    """Trainable leaf; .grad accumulates across backward passes."""
    return Node(as_array(x), requires_grad=True, name=name)


def _make(value: np.ndarray, parents: Sequence[Node], backward: Callable[[Node], None]) -> Node:
    if _check_finite and not np.all(np.isfinite(value)):
        raise AutodiffError("non-finite value produced by an op")
    if _grad_enabled and any(p.requires_grad for p in parents):
        return Node(value, requires_grad=True, parents=tuple(parents), backward=backward)
    return Node(value)


def _accum(node: Node, g: np.ndarray) -> None:
    if node.grad is None:
        node.grad = np.zeros_like(node.value)
    node.grad += g


# ---------------------------------------------------------------- basic ops

def add(a: Node, b: Node) -> Node:
    if a.value.shape != b.value.shape:
        raise ShapeError(f"add: shapes {a.value.shape} vs {b.value.shape}")
    out_val = a.value + b.value

    def backward(out):
        if a.requires_grad:
            _accum(a, out.grad)
        if b.requires_grad:
            _accum(b, out.grad)

    return _make(out_val, (a, b), backward)


def sub(a: Node, b: Node) -> Node:
    return add(a, scale(b, -1.0))


def mul(a: Node, b: Node) -> Node:
    if a.value.shape != b.value.shape:
        raise ShapeError(f"mul: shapes {a.value.shape} vs {b.value.shape}")
    out_val = a.value * b.value

    def backward(out):
        if a.requires_grad:
            _accum(a, out.grad * b.value)
        if b.requires_grad:
            _accum(b, out.grad * a.value)

    return _make(out_val, (a, b), backward)


def scale(a: Node, c: float) -> Node:
    c = float(c)
    out_val = a.value * c

    def backward(out):
        if a.requires_grad:
            _accum(a, out.grad * c)

    return _make(out_val, (a,), backward)


def matmul(a: Node, b: Node) -> Node:
    av, bv = a.value, b.value
    if av.ndim == 2 and bv.ndim == 2:
        if av.shape[1] != bv.shape[0]:
            raise ShapeError(f"matmul: shapes {av.shape} vs {bv.shape}")
        out_val = av @ bv

        def backward(out):
            if a.requires_grad:
                _accum(a, out.grad @ bv.T)
            if b.requires_grad:
                _accum(b, av.T @ out.grad)

    elif av.ndim == 2 and bv.ndim == 1:
        if av.shape[1] != bv.shape[0]:
            raise ShapeError(f"matmul: shapes {av.shape} vs {bv.shape}")
        out_val = av @ bv

        def backward(out):
            if a.requires_grad:
                _accum(a, np.outer(out.grad, bv))
            if b.requires_grad:
                _accum(b, av.T @ out.grad)

    else:
        raise ShapeError(f"matmul: unsupported ranks {av.shape} vs {bv.shape}")
    return _make(out_val, (a, b), backward)


def dot(a: Node, b: Node) -> Node:
    if a.value.ndim != 1 or a.value.shape != b.value.shape:
        raise ShapeError(f"dot: shapes {a.value.shape} vs {b.value.shape}")
    out_val = np.asarray(a.value @ b.value)

    def backward(out):
        if a.requires_grad:
            _accum(a, out.grad * b.value)
        if b.requires_grad:
            _accum(b, out.grad * a.value)

    return _make(out_val, (a, b), backward)


def tanh(a: Node) -> Node:
    out_val = np.tanh(a.value)

    def backward(out):
        if a.requires_grad:
            _accum(a, out.grad * (1.0 - out.value * out.value))

    return _make(out_val, (a,), backward)


def sigmoid(a: Node) -> Node:
    out_val = kernels.sigmoid(a.value)

    def backward(out):
        if a.requires_grad:
            _accum(a, out.grad * out.value * (1.0 - out.value))

    return _make(out_val, (a,), backward)


def softplus(a: Node) -> Node:
    """log(1 + e^x), evaluated without overflow."""
    v = a.value
    out_val = np.maximum(v, 0.0) + np.log1p(np.exp(-np.abs(v)))

    def backward(out):
        if a.requires_grad:
            _accum(a, out.grad * kernels.sigmoid(v))

    return _make(out_val, (a,), backward)


def concat(nodes: Sequence[Node], axis: int = 0) -> Node:
    nodes = list(nodes)
    if not nodes:
        raise ShapeError("concat: need at least one operand")
    out_val = np.concatenate([n.value for n in nodes], axis=axis)
    sizes = [n.value.shape[axis] for n in nodes]

    def backward(out):
        start = 0
        for n, size in zip(nodes, sizes):
            if n.requires_grad:
                index = [slice(None)] * out.grad.ndim
                index[axis] = slice(start, start + size)
                _accum(n, out.grad[tuple(index)])
            start += size

    return _make(out_val, nodes, backward)


def narrow(a: Node, axis: int, start: int, length: int) -> Node:
    index = [slice(None)] * a.value.ndim
    index[axis] = slice(start, start + length)
    index = tuple(index)
    out_val = a.value[index].copy()

    def backward(out):
        if a.requires_grad:
            if a.grad is None:
                a.grad = np.zeros_like(a.value)
            a.grad[index] += out.grad

    return _make(out_val, (a,), backward)


def row(a: Node, i: int) -> Node:
    """Single row of a 2-d node, as a vector."""
    out_val = a.value[i].copy()

    def backward(out):
        if a.requires_grad:
            if a.grad is None:
                a.grad = np.zeros_like(a.value)
            a.grad[i] += out.grad

    return _make(out_val, (a,), backward)


def reshape(a: Node, shape) -> Node:
    out_val = a.value.reshape(shape)

    def backward(out):
        if a.requires_grad:
            _accum(a, out.grad.reshape(a.value.shape))

    return _make(out_val, (a,), backward)


def sum_all(a: Node) -> Node:
    out_val = np.asarray(a.value.sum())

    def backward(out):
        if a.requires_grad:
            _accum(a, np.full_like(a.value, float(out.grad)))

    return _make(out_val, (a,), backward)


def sq_norm(a: Node) -> Node:
    """Sum of squared entries, as a scalar node."""
    out_val = np.asarray(float(np.dot(a.value.ravel(), a.value.ravel())))

    def backward(out):
        if a.requires_grad:
            _accum(a, 2.0 * float(out.grad) * a.value)

    return _make(out_val, (a,), backward)


def gather_rows(table: Node, ids) -> Node:
    ids = np.asarray(ids, dtype=np.intp)
    out_val = table.value[ids]

    def backward(out):
        if table.requires_grad:
            if table.grad is None:
                table.grad = np.zeros_like(table.value)
            np.add.at(table.grad, ids, out.grad)

    return _make(out_val, (table,), backward)


def stack_rows(nodes: Sequence[Node]) -> Node:
    nodes = list(nodes)
    out_val = np.stack([n.value for n in nodes], axis=0)

    def backward(out):
        for idx, n in enumerate(nodes):
            if n.requires_grad:
                _accum(n, out.grad[idx])

    return _make(out_val, nodes, backward)


def conv2d_maxpool(x: Node, k: Node) -> Node:
    """3x3 same-conv (zero pad 1) + 2x2/stride-2 max pool.

    x is (C, H, W), k is (F, C, 3, 3); output (F, ceil(H/2), ceil(W/2)).
    """
    out_val, argmax = kernels.conv_pool_forward(x.value, k.value)

    def backward(out):
        gx, gk = kernels.conv_pool_backward(x.value, k.value, argmax, out.grad)
        if x.requires_grad:
            _accum(x, gx)
        if k.requires_grad:
            _accum(k, gk)

    return _make(out_val, (x, k), backward)


# ------------------------------------------------------------- graph walks

def _topo_order(loss: Node) -> list[Node]:
    order: list[Node] = []
    seen: set[int] = set()
    stack: list[tuple[Node, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def backward(loss: Node) -> None:
    """Populate .grad of every reachable requires_grad node.

    The loss must be scalar.  Running backward twice through the same
    graph is an error: rebuild the graph (and zero_grad the parameters)
    for the next pass.
    """
    if loss.value.shape != ():
        raise AutodiffError(f"backward needs a scalar loss, got shape {loss.value.shape}")
    if loss._done:
        raise AutodiffError("backward already ran for this graph; rebuild it after zero_grad")
    loss._done = True
    loss.grad = np.asarray(1.0)
    for node in reversed(_topo_order(loss)):
        if node._backward is not None and node.grad is not None:
            node._backward(node)


def zero_grad(params: Iterable[Node]) -> None:
    for p in params:
        p.grad = None
