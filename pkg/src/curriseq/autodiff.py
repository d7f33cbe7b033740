"""Minimal reverse-mode automatic differentiation over dense float64 arrays.

The graph is built eagerly: every operation returns a new Tensor that records
its parents and a closure routing the output gradient back to them.
``backward`` walks the tape in reverse topological order (iteratively, so deep
recurrent graphs do not hit the recursion limit).

Only the operations the sequence model needs are provided: elementwise
add/mul with broadcasting, (batched) matmul, embedding gather, index
selection along the last axis, stabilized softmax/log-softmax, log, exp,
tanh, sigmoid, relu, concat/stack, reduction sum, reshape, and the transpose
needed for attention.  Masked reductions are expressed as ``sums(mul(x, mask))``
with a constant mask.  Everything is float64.
"""

from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    """Operand shapes incompatible with an operation."""


class Tensor:
    """A node in the computation graph: a float64 array plus grad plumbing."""

    __slots__ = ("data", "grad", "requires_grad", "op", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, op="leaf", parents=(), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self.op = op
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    def item(self):
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self):
        backward(self)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, op={self.op!r})"

    # Small operator surface; anything fancier goes through the module functions.
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __sub__(self, other):
        return add(self, -_as_tensor(other))

    def __rsub__(self, other):
        return add(_as_tensor(other), -self)

    def __matmul__(self, other):
        return matmul(self, other)


def constant(data):
    """A leaf tensor that never receives gradients."""
    return Tensor(data, requires_grad=False)


def parameter(data):
    """A trainable leaf tensor."""
    return Tensor(data, requires_grad=True)


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, op, parents, bwd):
    needs = any(p.requires_grad for p in parents)
    if not needs:
        return Tensor(data, op=op)
    return Tensor(data, requires_grad=True, op=op, parents=tuple(parents), backward=bwd)


def _accumulate(t, g, fresh=False):
    """Add g into t.grad.  ``fresh`` marks g as newly allocated and unaliased,
    letting the first accumulation take ownership instead of copying."""
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = g if fresh else np.array(g)
    else:
        t.grad += g


def _unbroadcast(grad, shape):
    """Sum `grad` down to `shape` (inverse of numpy broadcasting)."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        out = a.data + b.data
    except ValueError as e:
        raise ShapeError(f"add: cannot broadcast {a.data.shape} with {b.data.shape}") from e

    def bwd(g):
        ga = _unbroadcast(g, a.data.shape)
        _accumulate(a, ga, fresh=ga is not g)
        gb = _unbroadcast(g, b.data.shape)
        _accumulate(b, gb, fresh=gb is not g)

    return _make(out, "add", (a, b), bwd)


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        out = a.data * b.data
    except ValueError as e:
        raise ShapeError(f"mul: cannot broadcast {a.data.shape} with {b.data.shape}") from e

    def bwd(g):
        _accumulate(a, _unbroadcast(g * b.data, a.data.shape), fresh=True)
        _accumulate(b, _unbroadcast(g * a.data, b.data.shape), fresh=True)

    return _make(out, "mul", (a, b), bwd)


def scale(a, s):
    """Multiply by a python scalar constant."""
    s = float(s)

    def bwd(g):
        _accumulate(a, g * s, fresh=True)

    return _make(a.data * s, "scale", (a,), bwd)


def matmul(a, b):
    """Matrix product; 2-D or batched 3-D operands (no broadcasting)."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.shape[-1] != b.data.shape[-2]:
        raise ShapeError(f"matmul: inner dims differ, {a.data.shape} @ {b.data.shape}")
    if a.data.ndim == 3 and b.data.ndim == 3 and a.data.shape[0] != b.data.shape[0]:
        raise ShapeError(f"matmul: batch dims differ, {a.data.shape} @ {b.data.shape}")
    out = a.data @ b.data

    def bwd(g):
        _accumulate(a, _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.data.shape), fresh=True)
        _accumulate(b, _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.data.shape), fresh=True)

    return _make(out, "matmul", (a, b), bwd)


def gather_rows(table, ids):
    """Embedding lookup: rows of `table` (V, d) indexed by an int array."""
    ids = np.asarray(ids)
    if ids.size and (ids.min() < 0 or ids.max() >= table.data.shape[0]):
        raise ShapeError(
            f"gather_rows: index out of range for table with {table.data.shape[0]} rows"
        )
    out = table.data[ids]

    def bwd(g):
        if table.requires_grad:
            if table.grad is None:
                table.grad = np.zeros_like(table.data)
            np.add.at(table.grad, ids.reshape(-1), g.reshape(-1, table.data.shape[1]))

    return _make(out, "gather_rows", (table,), bwd)


def take_along(t, idx):
    """Select one entry per row along the last axis: out[...] = t[..., idx[...]]."""
    idx = np.asarray(idx)
    if idx.shape != t.data.shape[:-1]:
        raise ShapeError(f"take_along: index shape {idx.shape} vs value {t.data.shape}")
    expanded = np.expand_dims(idx, -1)
    out = np.take_along_axis(t.data, expanded, axis=-1).squeeze(-1)

    def bwd(g):
        if t.requires_grad:
            if t.grad is None:
                t.grad = np.zeros_like(t.data)
            flat = t.grad.reshape(-1, t.data.shape[-1])
            rows = np.arange(flat.shape[0])
            np.add.at(flat, (rows, idx.reshape(-1)), g.reshape(-1))

    return _make(out, "take_along", (t,), bwd)


def softmax(t, axis=-1):
    """Numerically stabilized softmax (row max subtracted before exp)."""
    shifted = t.data - t.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=axis, keepdims=True)

    def bwd(g):
        dot = (p * g).sum(axis=axis, keepdims=True)
        _accumulate(t, p * (g - dot), fresh=True)

    return _make(p, "softmax", (t,), bwd)


def log_softmax(t, axis=-1):
    """log softmax via the shifted log-sum-exp; returned values are finite."""
    shifted = t.data - t.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse
    p = np.exp(out)

    def bwd(g):
        _accumulate(t, g - p * g.sum(axis=axis, keepdims=True), fresh=True)

    return _make(out, "log_softmax", (t,), bwd)


def log(t):
    def bwd(g):
        _accumulate(t, g / t.data, fresh=True)

    return _make(np.log(t.data), "log", (t,), bwd)


def exp(t):
    out = np.exp(t.data)

    def bwd(g):
        _accumulate(t, g * out, fresh=True)

    return _make(out, "exp", (t,), bwd)


def tanh(t):
    out = np.tanh(t.data)

    def bwd(g):
        _accumulate(t, g * (1.0 - out * out), fresh=True)

    return _make(out, "tanh", (t,), bwd)


def sigmoid(t):
    out = 1.0 / (1.0 + np.exp(-t.data))

    def bwd(g):
        _accumulate(t, g * out * (1.0 - out), fresh=True)

    return _make(out, "sigmoid", (t,), bwd)


def relu(t):
    out = np.maximum(t.data, 0.0)

    def bwd(g):
        _accumulate(t, g * (t.data > 0.0), fresh=True)

    return _make(out, "relu", (t,), bwd)


def concat(tensors, axis=-1):
    tensors = [_as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis if axis >= 0 else g.ndim + axis] = slice(lo, hi)
            _accumulate(t, g[tuple(sl)])

    return _make(out, "concat", tuple(tensors), bwd)


def stack(tensors, axis=0):
    tensors = [_as_tensor(t) for t in tensors]
    out = np.stack([t.data for t in tensors], axis=axis)

    def bwd(g):
        for k, t in enumerate(tensors):
            _accumulate(t, np.take(g, k, axis=axis), fresh=True)

    return _make(out, "stack", tuple(tensors), bwd)


def narrow(t, lo, hi):
    """Slice [lo, hi) along the last axis."""
    if not 0 <= lo < hi <= t.data.shape[-1]:
        raise ShapeError(f"narrow: [{lo}, {hi}) outside last axis of {t.data.shape}")
    out = t.data[..., lo:hi]

    def bwd(g):
        if t.requires_grad:
            if t.grad is None:
                t.grad = np.zeros_like(t.data)
            t.grad[..., lo:hi] += g

    return _make(out, "narrow", (t,), bwd)


def reduce_sum(t, axis=None, keepdims=False):
    out = t.data.sum(axis=axis, keepdims=keepdims)

    def bwd(g):
        g = np.asarray(g)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(t, np.broadcast_to(g, t.data.shape).copy(), fresh=True)

    return _make(out, "reduce_sum", (t,), bwd)


def reshape(t, shape):
    def bwd(g):
        _accumulate(t, g.reshape(t.data.shape))

    return _make(t.data.reshape(shape), "reshape", (t,), bwd)


def transpose_last2(t):
    out = np.swapaxes(t.data, -1, -2)

    def bwd(g):
        _accumulate(t, np.swapaxes(g, -1, -2))

    return _make(out, "transpose", (t,), bwd)


def _topo_order(root):
    """Reverse-postorder DFS over the implicit graph, iterative."""
    order, visited = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))
    return order


def backward(loss):
    """Run reverse-mode accumulation from a scalar loss node.

    Gradients accumulate into ``.grad`` of every reachable tensor with
    ``requires_grad``; call ``zero_grad`` on leaves between steps.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.data.shape}")
    if not loss.requires_grad:
        return
    order = _topo_order(loss)
    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is not None:
            node._backward(node.grad)


def check_gradients(fn, tensors, step=1e-5):
    """Max relative error between analytic and central-difference gradients.

    ``fn()`` must return a scalar Tensor computed from `tensors` (trainable
    leaves). Error per coordinate is |analytic - numeric| divided by
    max(|analytic|, |numeric|, 1e-8).
    """
    for t in tensors:
        t.zero_grad()
    loss = fn()
    if loss.data.size != 1:
        raise ValueError("check_gradients needs a scalar-valued function")
    backward(loss)
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in tensors]

    worst = 0.0
    for t, ana in zip(tensors, analytic):
        flat = t.data.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + step
            up = float(fn().data)
            flat[j] = orig - step
            down = float(fn().data)
            flat[j] = orig
            if not (np.isfinite(up) and np.isfinite(down)):
                raise FloatingPointError("non-finite value during finite differencing")
            num = (up - down) / (2.0 * step)
            a = ana.reshape(-1)[j]
            err = abs(a - num) / max(abs(a), abs(num), 1e-8)
            worst = max(worst, err)
    return worst
