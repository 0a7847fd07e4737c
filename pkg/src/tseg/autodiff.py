"""Reverse-mode automatic differentiation over dense float tensors.

Each operation records its inputs and a backward closure on the output
tensor; :func:`backward` walks the recorded graph in reverse topological
order and accumulates gradients additively into ``.grad`` buffers (cleared
by the optimizer, not by backward itself). Compute runs in float32 by
default; float64 tensors are supported for gradient checking.

The numeric hot paths go through :mod:`tseg._kernels`, which dispatches to
either the compiled backend or the numpy reference implementation.
"""

import os
from contextlib import contextmanager

import numpy as np

from . import _kernels as K
from .errors import ContractError, NumericError, ShapeError

_CHECK_FINITE = os.environ.get("TSEG_CHECK_FINITE", "0") == "1"

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable graph recording inside the block (inference fast path)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """A dense float array plus an optional gradient and graph linkage."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad=False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward_fn = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        if self.data.size != 1:
            raise ContractError("item() requires a scalar tensor")
        return float(self.data.reshape(()))

    def accumulate_grad(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype})"


def _result(data, parents, backward_fn):
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward_fn = backward_fn
    if _CHECK_FINITE and not np.all(np.isfinite(out.data)):
        raise NumericError("non-finite values produced by an operation")
    return out


def backward(loss):
    """Accumulate d(loss)/d(tensor) into .grad for every reachable tensor."""
    if loss.data.size != 1:
        raise ContractError("backward() requires a scalar loss tensor")
    # reverse topological order via iterative post-order DFS
    order = []
    visited = set()
    stack = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))
    loss.accumulate_grad(np.ones_like(loss.data))
    for node in reversed(order):
        if node._backward_fn is not None and node.grad is not None:
            node._backward_fn(node.grad)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def add(a, b):
    """Elementwise sum of two same-shape tensors."""
    if a.shape != b.shape:
        raise ShapeError(f"add: shapes {a.shape} and {b.shape} differ")

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(g)
        if b.requires_grad:
            b.accumulate_grad(g)

    return _result(a.data + b.data, (a, b), bwd)


def mul(a, b):
    """Elementwise (Hadamard) product of two same-shape tensors."""
    if a.shape != b.shape:
        raise ShapeError(f"mul: shapes {a.shape} and {b.shape} differ")

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(g * b.data)
        if b.requires_grad:
            b.accumulate_grad(g * a.data)

    return _result(a.data * b.data, (a, b), bwd)


def scale(a, c):
    """Multiply by a python scalar constant."""
    c = float(c)

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(g * c)

    return _result(a.data * c, (a,), bwd)


def add_bias(x, b):
    """x[..., d] + b[d]: broadcast a vector over all leading axes."""
    if x.shape[-1] != b.shape[0] or b.data.ndim != 1:
        raise ShapeError(f"add_bias: {x.shape} vs {b.shape}")
    lead = tuple(range(x.data.ndim - 1))

    def bwd(g):
        if x.requires_grad:
            x.accumulate_grad(g)
        if b.requires_grad:
            b.accumulate_grad(g.sum(axis=lead))

    return _result(x.data + b.data, (x, b), bwd)


def add_positional(x, p):
    """x[b, t, d] + p[t, d]: broadcast a positional table over the batch."""
    if x.data.ndim != 3 or x.shape[1:] != p.shape:
        raise ShapeError(f"add_positional: {x.shape} vs {p.shape}")

    def bwd(g):
        if x.requires_grad:
            x.accumulate_grad(g)
        if p.requires_grad:
            p.accumulate_grad(g.sum(axis=0))

    return _result(x.data + p.data[None], (x, p), bwd)


def matmul(a, b):
    """2-D matrix product."""
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: {a.shape} x {b.shape}")

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(K.matmul(g, b.data, trans_b=True))
        if b.requires_grad:
            b.accumulate_grad(K.matmul(a.data, g, trans_a=True))

    return _result(K.matmul(a.data, b.data), (a, b), bwd)


def bmm(a, b, trans_b=False):
    """Batched matrix product over a stacked leading axis (3-D inputs)."""
    if a.data.ndim != 3 or b.data.ndim != 3:
        raise ShapeError("bmm expects 3-D tensors")

    def bwd(g):
        if trans_b:
            if a.requires_grad:
                a.accumulate_grad(K.bmm(g, b.data))
            if b.requires_grad:
                b.accumulate_grad(K.bmm(g, a.data, trans_a=True))
        else:
            if a.requires_grad:
                a.accumulate_grad(K.bmm(g, b.data, trans_b=True))
            if b.requires_grad:
                b.accumulate_grad(K.bmm(a.data, g, trans_a=True))

    return _result(K.bmm(a.data, b.data, trans_b=trans_b), (a, b), bwd)


def reshape(x, shape):
    shape = tuple(shape)
    old = x.shape

    def bwd(g):
        if x.requires_grad:
            x.accumulate_grad(g.reshape(old))

    return _result(x.data.reshape(shape), (x,), bwd)


def split_heads(x, num_heads):
    """(B, T, D) -> (B, H, T, D/H)."""
    bsz, t, d = x.shape
    dk = d // num_heads

    def bwd(g):
        if x.requires_grad:
            x.accumulate_grad(
                np.ascontiguousarray(g.transpose(0, 2, 1, 3)).reshape(bsz, t, d)
            )

    y = np.ascontiguousarray(x.data.reshape(bsz, t, num_heads, dk).transpose(0, 2, 1, 3))
    return _result(y, (x,), bwd)


def merge_heads(x):
    """(B, H, T, D/H) -> (B, T, D)."""
    bsz, h, t, dk = x.shape

    def bwd(g):
        if x.requires_grad:
            x.accumulate_grad(
                np.ascontiguousarray(g.reshape(bsz, t, h, dk).transpose(0, 2, 1, 3))
            )

    y = np.ascontiguousarray(x.data.transpose(0, 2, 1, 3)).reshape(bsz, t, h * dk)
    return _result(y, (x,), bwd)


def softmax_rows(x):
    """Numerically stabilized softmax over the last axis."""
    if not np.all(np.isfinite(x.data)):
        raise NumericError("softmax_rows: non-finite input")
    y = K.softmax_fwd(x.data)

    def bwd(g):
        if x.requires_grad:
            x.accumulate_grad(K.softmax_bwd(y, g))

    return _result(y, (x,), bwd)


def layer_norm(x, gain, bias, eps=1e-5):
    """Per-row normalization over the last axis followed by an affine map."""
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError(f"layer_norm: last dim {d} vs gain {gain.shape} bias {bias.shape}")
    y, mean, rstd = K.layer_norm_fwd(x.data, gain.data, bias.data, eps)

    def bwd(g):
        gx, ggain, gbias = K.layer_norm_bwd(x.data, gain.data, mean, rstd, g)
        if x.requires_grad:
            x.accumulate_grad(gx)
        if gain.requires_grad:
            gain.accumulate_grad(ggain)
        if bias.requires_grad:
            bias.accumulate_grad(gbias)

    return _result(y, (x, gain, bias), bwd)


def gelu(x):
    def bwd(g):
        if x.requires_grad:
            x.accumulate_grad(K.gelu_bwd(x.data, g))

    return _result(K.gelu_fwd(x.data), (x,), bwd)


def sigmoid(x):
    y = K.sigmoid_fwd(x.data)

    def bwd(g):
        if x.requires_grad:
            x.accumulate_grad(K.sigmoid_bwd(y, g))

    return _result(y, (x,), bwd)


def dropout(x, rate, rng):
    """Inverted dropout; identity when rate == 0."""
    if rate == 0.0:
        return x
    keep = 1.0 - rate
    mask = (rng.random(x.shape) < keep).astype(x.dtype) / keep

    def bwd(g):
        if x.requires_grad:
            x.accumulate_grad(g * mask)

    return _result(x.data * mask, (x,), bwd)


def stack_rows(tensors):
    """Stack T same-shape 1-D tensors into a (T, D) tensor."""

    def bwd(g):
        for i, t in enumerate(tensors):
            if t.requires_grad:
                t.accumulate_grad(g[i])

    return _result(np.stack([t.data for t in tensors]), tuple(tensors), bwd)


def stack_scalars(tensors):
    """Stack T scalar tensors into a (T,) tensor."""

    def bwd(g):
        for i, t in enumerate(tensors):
            if t.requires_grad:
                t.accumulate_grad(g[i].reshape(t.shape))

    return _result(
        np.stack([t.data.reshape(()) for t in tensors]), tuple(tensors), bwd
    )


def pos_linear(h, w, b):
    """Per-position linear map: out[b, t] = h[b, t, :] . w[t, :] + b[t]."""
    if h.data.ndim != 3 or h.shape[1:] != w.shape or b.shape != (h.shape[1],):
        raise ShapeError(f"pos_linear: h {h.shape}, w {w.shape}, b {b.shape}")
    y = np.einsum("btd,td->bt", h.data, w.data) + b.data[None]

    def bwd(g):
        if h.requires_grad:
            h.accumulate_grad(g[:, :, None] * w.data[None])
        if w.requires_grad:
            w.accumulate_grad(np.einsum("bt,btd->td", g, h.data))
        if b.requires_grad:
            b.accumulate_grad(g.sum(axis=0))

    return _result(y, (h, w, b), bwd)


def sum_all(x):
    def bwd(g):
        if x.requires_grad:
            x.accumulate_grad(np.full_like(x.data, g.reshape(())))

    return _result(np.asarray(x.data.sum(), dtype=x.dtype), (x,), bwd)


def mean_all(x):
    n = x.data.size

    def bwd(g):
        if x.requires_grad:
            x.accumulate_grad(np.full_like(x.data, g.reshape(()) / n))

    return _result(np.asarray(x.data.mean(), dtype=x.dtype), (x,), bwd)


def bce_loss_op(probs, labels, clamp=1e-7):
    """Mean binary cross-entropy over all entries, probabilities clamped."""
    labels = np.asarray(labels, dtype=probs.dtype)
    if labels.shape != probs.shape:
        raise ShapeError(f"bce: probs {probs.shape} vs labels {labels.shape}")
    loss = K.bce_fwd(probs.data, labels, clamp)

    def bwd(g):
        if probs.requires_grad:
            probs.accumulate_grad(K.bce_bwd(probs.data, labels, clamp) * g.reshape(()))

    return _result(np.asarray(loss, dtype=probs.dtype), (probs,), bwd)


def transition_penalty_op(probs, lam):
    """lam * mean over (b, t>=1) of squared adjacent-probability steps."""
    if probs.data.ndim != 2 or probs.shape[1] < 2:
        raise ContractError("transition penalty requires a (B, T>=2) tensor")
    lam = float(lam)
    diffs = probs.data[:, 1:] - probs.data[:, :-1]
    n = diffs.size
    val = lam * float((diffs * diffs).mean())

    def bwd(g):
        if probs.requires_grad:
            gp = np.zeros_like(probs.data)
            coeff = g.reshape(()) * lam * 2.0 / n
            gp[:, 1:] += coeff * diffs
            gp[:, :-1] -= coeff * diffs
            probs.accumulate_grad(gp)

    return _result(np.asarray(val, dtype=probs.dtype), (probs,), bwd)
