"""Reverse-mode automatic differentiation over dense row-major matrices.

This is a closed-world engine: only the node types required by the
encoder/decoder/classifier stack exist, and the backward pass dispatches on
each node's op tag, so an unknown tag raises instead of silently dropping a
gradient. Values are float32 by default; callers may build float64 graphs
(e.g. for finite-difference checks) and every op preserves the input dtype.
Reductions accumulate in float64 before casting back.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .errors import ShapeError, UnsupportedOperationError, UsageError
from .rng import Rng

ACTIVATIONS = ("identity", "relu", "sigmoid")


class Tensor:
    """One graph node: a numpy value plus the provenance needed for backward."""

    __slots__ = ("value", "grad", "op", "parents", "ctx", "requires_grad")

    def __init__(self, value, requires_grad: bool = False, dtype=np.float32):
        self.value = np.ascontiguousarray(value, dtype=dtype)
        self.grad: Optional[np.ndarray] = None
        self.op = "leaf"
        self.parents: tuple = ()
        self.ctx = None
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.value.shape

    @property
    def dtype(self):
        return self.value.dtype

    def item(self) -> float:
        return float(self.value)

    def accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        self.grad += g

    def __repr__(self):
        return f"Tensor(op={self.op!r}, shape={self.value.shape}, requires_grad={self.requires_grad})"


def _node(value: np.ndarray, op: str, parents: tuple, ctx=None) -> Tensor:
    t = Tensor.__new__(Tensor)
    t.value = value
    t.grad = None
    t.op = op
    t.parents = parents
    t.ctx = ctx
    t.requires_grad = any(p.requires_grad for p in parents)
    return t


def _sum64(x: np.ndarray) -> float:
    return float(np.sum(x, dtype=np.float64))


# ---------------------------------------------------------------------------
# forward ops


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """x @ w + b with x: (n, din), w: (din, dout), b: (dout,)."""
    if x.value.ndim != 2 or w.value.ndim != 2 or b.value.ndim != 1:
        raise ShapeError(
            f"linear expects 2-d input/weight and 1-d bias, got {x.shape}, {w.shape}, {b.shape}"
        )
    if x.value.shape[1] != w.value.shape[0] or w.value.shape[1] != b.value.shape[0]:
        raise ShapeError(
            f"linear dimension mismatch: input {x.shape}, weight {w.shape}, bias {b.shape}"
        )
    out = x.value @ w.value + b.value
    return _node(out, "linear", (x, w, b))


def relu(t: Tensor) -> Tensor:
    return _node(np.maximum(t.value, 0), "relu", (t,))


def sigmoid(t: Tensor) -> Tensor:
    v = t.value
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return _node(out, "sigmoid", (t,), ctx=out)


def linear_forward(x: Tensor, w: Tensor, b: Tensor, activation: str = "identity") -> Tensor:
    """Affine layer followed by an optional activation from the closed set."""
    if activation not in ACTIVATIONS:
        raise UsageError(f"unknown activation {activation!r}, expected one of {ACTIVATIONS}")
    out = linear(x, w, b)
    if activation == "relu":
        return relu(out)
    if activation == "sigmoid":
        return sigmoid(out)
    return out


def slice_cols(t: Tensor, start: int, stop: int) -> Tensor:
    if t.value.ndim != 2:
        raise ShapeError(f"slice_cols expects a 2-d tensor, got {t.shape}")
    out = np.ascontiguousarray(t.value[:, start:stop])
    return _node(out, "slice_cols", (t,), ctx=(start, stop))


def gaussian_sample(mu: Tensor, logvar: Tensor, rng: Rng) -> Tensor:
    """Reparameterized draw z = mu + exp(logvar/2) * eps with eps ~ N(0, I)."""
    if mu.value.shape != logvar.value.shape:
        raise ShapeError(f"mu shape {mu.shape} != logvar shape {logvar.shape}")
    sigma = np.exp(0.5 * logvar.value)
    eps = rng.standard_normal(mu.value.shape, dtype=mu.value.dtype)
    out = mu.value + sigma * eps
    return _node(out, "gauss_sample", (mu, logvar), ctx=(sigma, eps))


def exp_half(logvar: Tensor) -> Tensor:
    """Standard deviation exp(logvar/2) of a diagonal Gaussian."""
    return _node(np.exp(0.5 * logvar.value), "exp_half", (logvar,))


def l1_recon(pred: Tensor, target: np.ndarray) -> Tensor:
    """Per-row L1 distance to a constant target, averaged over the batch."""
    target = np.asarray(target, dtype=pred.value.dtype)
    if pred.value.shape != target.shape:
        raise ShapeError(f"prediction shape {pred.shape} != target shape {target.shape}")
    diff = pred.value - target
    n = pred.value.shape[0]
    val = np.asarray(_sum64(np.abs(diff)) / n, dtype=pred.value.dtype)
    return _node(val, "l1_recon", (pred,), ctx=diff)


def sum_sq_diff(a: Tensor, b: Tensor) -> Tensor:
    """Per-row squared L2 distance between two tensors, averaged over the batch."""
    if a.value.shape != b.value.shape:
        raise ShapeError(f"operand shapes differ: {a.shape} vs {b.shape}")
    diff = a.value - b.value
    n = a.value.shape[0] if a.value.ndim == 2 else 1
    val = np.asarray(_sum64(diff * diff) / n, dtype=a.value.dtype)
    return _node(val, "sum_sq_diff", (a, b), ctx=diff)


def kl_std_normal(mu: Tensor, logvar: Tensor) -> Tensor:
    """KL(N(mu, diag(exp(logvar))) || N(0, I)) summed per row, batch mean."""
    if mu.value.shape != logvar.value.shape:
        raise ShapeError(f"mu shape {mu.shape} != logvar shape {logvar.shape}")
    lv = logvar.value
    n = mu.value.shape[0]
    per_elem = -0.5 * (1.0 + lv - mu.value * mu.value - np.exp(lv))
    val = np.asarray(_sum64(per_elem) / n, dtype=mu.value.dtype)
    return _node(val, "kl_std_normal", (mu, logvar))


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean negative log-likelihood of integer labels under row-wise softmax."""
    if logits.value.ndim != 2:
        raise ShapeError(f"logits must be 2-d, got {logits.shape}")
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.shape[0] != logits.value.shape[0]:
        raise ShapeError(f"labels shape {labels.shape} does not match logits {logits.shape}")
    z = logits.value
    zmax = z.max(axis=1, keepdims=True)
    ez = np.exp(z - zmax)
    probs = ez / ez.sum(axis=1, keepdims=True)
    n = z.shape[0]
    logp = (z - zmax) - np.log(ez.sum(axis=1, keepdims=True))
    val = np.asarray(-_sum64(logp[np.arange(n), labels]) / n, dtype=z.dtype)
    return _node(val, "softmax_xent", (logits,), ctx=(probs, labels))


def weighted_sum(terms, weights) -> Tensor:
    """Scalar combination sum_i weights[i] * terms[i]."""
    if len(terms) != len(weights) or not terms:
        raise UsageError("weighted_sum needs one weight per term")
    dtype = terms[0].value.dtype
    total = sum(float(w) * float(t.value) for t, w in zip(terms, weights))
    return _node(np.asarray(total, dtype=dtype), "wsum", tuple(terms), ctx=tuple(float(w) for w in weights))


# ---------------------------------------------------------------------------
# backward dispatch


def _bwd_linear(node, g):
    x, w, b = node.parents
    if x.requires_grad:
        x.accumulate(g @ w.value.T)
    if w.requires_grad:
        w.accumulate(x.value.T @ g)
    if b.requires_grad:
        b.accumulate(g.sum(axis=0))


def _bwd_relu(node, g):
    (t,) = node.parents
    if t.requires_grad:
        t.accumulate(g * (t.value > 0))


def _bwd_sigmoid(node, g):
    (t,) = node.parents
    if t.requires_grad:
        s = node.ctx
        t.accumulate(g * s * (1.0 - s))


def _bwd_slice_cols(node, g):
    (t,) = node.parents
    if t.requires_grad:
        start, stop = node.ctx
        full = np.zeros_like(t.value)
        full[:, start:stop] = g
        t.accumulate(full)


def _bwd_gauss_sample(node, g):
    mu, logvar = node.parents
    sigma, eps = node.ctx
    if mu.requires_grad:
        mu.accumulate(g)
    if logvar.requires_grad:
        logvar.accumulate(g * (0.5 * sigma * eps))


def _bwd_exp_half(node, g):
    (logvar,) = node.parents
    if logvar.requires_grad:
        logvar.accumulate(g * (0.5 * node.value))


def _bwd_l1_recon(node, g):
    (pred,) = node.parents
    if pred.requires_grad:
        diff = node.ctx
        n = pred.value.shape[0]
        pred.accumulate((float(g) / n) * np.sign(diff))


def _bwd_sum_sq_diff(node, g):
    a, b = node.parents
    diff = node.ctx
    n = a.value.shape[0] if a.value.ndim == 2 else 1
    scaled = (2.0 * float(g) / n) * diff
    if a.requires_grad:
        a.accumulate(scaled)
    if b.requires_grad:
        b.accumulate(-scaled)


def _bwd_kl_std_normal(node, g):
    mu, logvar = node.parents
    n = mu.value.shape[0]
    if mu.requires_grad:
        mu.accumulate((float(g) / n) * mu.value)
    if logvar.requires_grad:
        logvar.accumulate((float(g) / (2.0 * n)) * (np.exp(logvar.value) - 1.0))


def _bwd_softmax_xent(node, g):
    (logits,) = node.parents
    if logits.requires_grad:
        probs, labels = node.ctx
        n = probs.shape[0]
        grad = probs.copy()
        grad[np.arange(n), labels] -= 1.0
        logits.accumulate((float(g) / n) * grad)


def _bwd_wsum(node, g):
    for t, w in zip(node.parents, node.ctx):
        if t.requires_grad:
            t.accumulate(np.asarray(float(g) * w, dtype=t.value.dtype))


_BACKWARD = {
    "linear": _bwd_linear,
    "relu": _bwd_relu,
    "sigmoid": _bwd_sigmoid,
    "slice_cols": _bwd_slice_cols,
    "gauss_sample": _bwd_gauss_sample,
    "exp_half": _bwd_exp_half,
    "l1_recon": _bwd_l1_recon,
    "sum_sq_diff": _bwd_sum_sq_diff,
    "kl_std_normal": _bwd_kl_std_normal,
    "softmax_xent": _bwd_softmax_xent,
    "wsum": _bwd_wsum,
}


def backward(loss: Tensor) -> None:
    """Populate .grad on every reachable tensor with requires_grad set.

    The loss must be a scalar node. Dispatch is by op tag over the closed
    node set; anything else raises UnsupportedOperationError.
    """
    if loss.value.ndim != 0:
        raise UsageError(f"backward expects a scalar loss, got shape {loss.value.shape}")
    order: list[Tensor] = []
    seen = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if id(node) in seen:
            continue
        if expanded:
            seen.add(id(node))
            order.append(node)
            continue
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen and p.requires_grad:
                stack.append((p, False))
    loss.grad = np.ones_like(loss.value)
    for node in reversed(order):
        if node.op == "leaf":
            continue
        fn = _BACKWARD.get(node.op)
        if fn is None:
            raise UnsupportedOperationError(f"no backward rule for node type {node.op!r}")
        fn(node, node.grad)
