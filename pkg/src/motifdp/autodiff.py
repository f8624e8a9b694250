"""Dense float64 tensors with a reverse-mode tape.

The graph is recorded on an explicit tape: every differentiable op appends one
node (outputs, inputs, backward closure) to the active tape, so nodes are
already in topological order and the backward pass is a single reverse sweep.
With no tape active, ops compute values only, which is the fast path for
evaluation.

One tape per execution context; tensors are safe to share read-only once
training is done.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "ShapeError",
    "record",
    "active_tape",
    "linear",
    "add",
    "sub",
    "mul",
    "scale",
    "add_n",
    "concat",
    "stack",
    "pick_row",
    "reshape",
    "leaky_relu",
    "sigmoid",
    "tanh",
    "relu_like",
    "pseudo_huber",
    "softmax",
    "log",
    "exp",
    "tsum",
    "tmean",
    "nll_pick",
    "embedding_row",
    "embedding_rows",
]


class ShapeError(ValueError):
    """Raised when operand shapes do not line up."""


class Tensor:
    """A dense float64 array, optionally participating in the active tape."""

    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def accumulate_grad(self, g: np.ndarray):
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            np.add(self.grad, g, out=self.grad)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


class _Node:
    __slots__ = ("outputs", "inputs", "backward_fn")

    def __init__(self, outputs, inputs, backward_fn):
        self.outputs = outputs
        self.inputs = inputs
        self.backward_fn = backward_fn


_ACTIVE_TAPE: "Tape | None" = None


def active_tape() -> "Tape | None":
    return _ACTIVE_TAPE


class Tape:
    """Ordered record of one forward pass. Use as a context manager."""

    __slots__ = ("nodes", "_prev")

    def __init__(self):
        self.nodes: list[_Node] = []
        self._prev = None

    def __enter__(self):
        global _ACTIVE_TAPE
        self._prev = _ACTIVE_TAPE
        _ACTIVE_TAPE = self
        return self

    def __exit__(self, exc_type, exc, tb):
        global _ACTIVE_TAPE
        _ACTIVE_TAPE = self._prev
        return False

    def backward(self, loss: Tensor):
        """Propagate d(loss)/d(node) back through every recorded node."""
        if loss.data.ndim != 0 and loss.data.size != 1:
            raise ShapeError("backward root must be a scalar")
        loss.grad = np.ones_like(loss.data)
        for node in reversed(self.nodes):
            outs = node.outputs
            if all(o.grad is None for o in outs):
                continue
            gouts = tuple(
                o.grad if o.grad is not None else np.zeros_like(o.data) for o in outs
            )
            gins = node.backward_fn(*gouts)
            for t, g in zip(node.inputs, gins):
                if g is not None:
                    t.accumulate_grad(g)


def record(outputs, inputs, backward_fn):
    """Append a custom node to the active tape (no-op when no tape is live).

    backward_fn receives one gradient array per output and must return one
    gradient array (or None) per input, in order.
    """
    tape = _ACTIVE_TAPE
    if tape is not None and any(t.requires_grad for t in inputs):
        for o in outputs:
            o.requires_grad = True
        tape.nodes.append(_Node(tuple(outputs), tuple(inputs), backward_fn))


def _out(data, inputs, backward_fn) -> Tensor:
    y = Tensor(data)
    record((y,), inputs, backward_fn)
    return y


# ---------------------------------------------------------------------------
# primitives


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """y = x @ w (+ b). Maps in-dim a to out-dim b with w stored (a, b).

    x may be a vector (a,) or a row batch (n, a).
    """
    xd, wd = x.data, w.data
    if xd.shape[-1] != wd.shape[0]:
        raise ShapeError(f"linear: {xd.shape} @ {wd.shape}")
    y = xd @ wd
    if b is not None:
        y = y + b.data

    if b is None:

        def bw(g):
            if xd.ndim == 1:
                return g @ wd.T, np.outer(xd, g)
            return g @ wd.T, xd.T @ g

        return _out(y, (x, w), bw)

    def bwb(g):
        if xd.ndim == 1:
            return g @ wd.T, np.outer(xd, g), g
        return g @ wd.T, xd.T @ g, g.sum(axis=0)

    return _out(y, (x, w, b), bwb)


def add(x: Tensor, y: Tensor) -> Tensor:
    if x.data.shape != y.data.shape:
        raise ShapeError(f"add: {x.data.shape} vs {y.data.shape}")
    return _out(x.data + y.data, (x, y), lambda g: (g, g))


def sub(x: Tensor, y: Tensor) -> Tensor:
    if x.data.shape != y.data.shape:
        raise ShapeError(f"sub: {x.data.shape} vs {y.data.shape}")
    return _out(x.data - y.data, (x, y), lambda g: (g, -g))


def mul(x: Tensor, y: Tensor) -> Tensor:
    if x.data.shape != y.data.shape:
        raise ShapeError(f"mul: {x.data.shape} vs {y.data.shape}")
    xd, yd = x.data, y.data
    return _out(xd * yd, (x, y), lambda g: (g * yd, g * xd))


def scale(x: Tensor, s: float) -> Tensor:
    return _out(x.data * s, (x,), lambda g: (g * s,))


def add_n(tensors) -> Tensor:
    """Sum of same-shaped tensors in one node."""
    tensors = tuple(tensors)
    acc = tensors[0].data.copy()
    for t in tensors[1:]:
        acc += t.data
    return _out(acc, tensors, lambda g: (g,) * len(tensors))


def concat(parts, axis: int = 0) -> Tensor:
    parts = tuple(parts)
    sizes = [p.data.shape[axis] for p in parts]
    y = np.concatenate([p.data for p in parts], axis=axis)
    offsets = np.cumsum([0] + sizes)

    def bw(g):
        return tuple(
            np.take(g, np.arange(offsets[i], offsets[i + 1]), axis=axis)
            for i in range(len(parts))
        )

    return _out(y, parts, bw)


def stack(rows) -> Tensor:
    """Stack 1-D tensors into a matrix (n, m)."""
    rows = tuple(rows)
    y = np.stack([r.data for r in rows])
    return _out(y, rows, lambda g: tuple(g[i] for i in range(len(rows))))


def pick_row(m: Tensor, i: int) -> Tensor:
    md = m.data

    def bw(g):
        gm = np.zeros_like(md)
        gm[i] = g
        return (gm,)

    return _out(md[i], (m,), bw)


def reshape(x: Tensor, shape) -> Tensor:
    xd = x.data
    return _out(xd.reshape(shape), (x,), lambda g: (g.reshape(xd.shape),))


def leaky_relu(x: Tensor, alpha: float) -> Tensor:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"leaky_relu slope must be in (0,1), got {alpha}")
    xd = x.data
    y = np.maximum(xd, alpha * xd)
    mask = np.where(xd >= 0.0, 1.0, alpha)
    return _out(y, (x,), lambda g: (g * mask,))


# the feed-forward stacks use the leaky unit everywhere; alias for readability
relu_like = leaky_relu


def sigmoid(x: Tensor) -> Tensor:
    y = 1.0 / (1.0 + np.exp(-x.data))
    return _out(y, (x,), lambda g: (g * y * (1.0 - y),))


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return _out(y, (x,), lambda g: (g * (1.0 - y * y),))


def pseudo_huber(x: Tensor, delta: float) -> Tensor:
    """Smoothed absolute value, elementwise: delta^2 (sqrt(1+(x/delta)^2) - 1)."""
    if delta <= 0:
        raise ValueError("pseudo_huber delta must be positive")
    t = x.data / delta
    root = np.sqrt(1.0 + t * t)
    y = delta * delta * (root - 1.0)
    return _out(y, (x,), lambda g: (g * x.data / root,))


def softmax(z: Tensor) -> Tensor:
    """Stable softmax over a 1-D tensor; output sums to 1."""
    zd = z.data
    e = np.exp(zd - zd.max())
    p = e / e.sum()
    return _out(p, (z,), lambda g: (p * (g - float(p @ g)),))


def log(x: Tensor) -> Tensor:
    xd = x.data
    return _out(np.log(xd), (x,), lambda g: (g / xd,))


def exp(x: Tensor) -> Tensor:
    y = np.exp(x.data)
    return _out(y, (x,), lambda g: (g * y,))


def tsum(x: Tensor) -> Tensor:
    xd = x.data
    return _out(np.float64(xd.sum()), (x,), lambda g: (np.full_like(xd, g),))


def tmean(x: Tensor) -> Tensor:
    xd = x.data
    n = xd.size
    return _out(np.float64(xd.mean()), (x,), lambda g: (np.full_like(xd, g / n),))


def nll_pick(p: Tensor, target: int) -> Tensor:
    """-log p[target] for a probability vector p.

    An underflowed or non-finite probability yields inf/nan rather than
    raising, so training divergence can be detected by the caller.
    """
    pd = p.data
    pt = pd[target]
    if pt > 0.0:
        value = -math.log(pt)
    else:
        value = math.inf if pt == 0.0 else math.nan

    def bw(g):
        gp = np.zeros_like(pd)
        gp[target] = -g / pt
        return (gp,)

    return _out(np.float64(value), (p,), bw)


def embedding_row(e: Tensor, idx: int) -> Tensor:
    ed = e.data
    if not 0 <= idx < ed.shape[0]:
        raise IndexError(f"symbol {idx} outside embedding table of {ed.shape[0]}")

    def bw(g):
        ge = np.zeros_like(ed)
        ge[idx] = g
        return (ge,)

    return _out(ed[idx].copy(), (e,), bw)


def embedding_rows(e: Tensor, idx) -> Tensor:
    """Gather rows idx (array of ints) from table e; grads scatter-add back."""
    ed = e.data
    idx = np.asarray(idx, dtype=np.intp)

    def bw(g):
        ge = np.zeros_like(ed)
        np.add.at(ge, idx, g)
        return (ge,)

    return _out(ed[idx], (e,), bw)
