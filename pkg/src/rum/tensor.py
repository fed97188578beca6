"""Dense float64 tensors with a recorded operation tape and reverse-mode gradients.

Every operation that touches a tracked tensor records itself on an implicit
tape (the parent links of the output tensor). ``backward`` replays that tape
in reverse topological order, accumulating gradients additively into every
reachable leaf with ``requires_grad=True``. Everything is double precision.
"""

from __future__ import annotations

import json

import numpy as np


class Tensor:
    """A float64 ndarray plus an optional gradient slot and tape links."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data)

    def __repr__(self):
        tag = f" name={self.name}" if self.name else ""
        return f"<Tensor shape={self.data.shape}{tag} grad={'yes' if self.requires_grad else 'no'}>"

    # operator sugar; constants are wrapped as untracked tensors
    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __matmul__(self, other):
        return matmul(self, _wrap(other))

    def __neg__(self):
        return scale(self, -1.0)

    def backward(self):
        backward(self)


def _wrap(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _tracked(*tensors):
    return any(t.requires_grad or t._parents for t in tensors)


_GRAD_ENABLED = True


class no_grad:
    """Context manager disabling tape recording (inference passes)."""

    def __enter__(self):
        global _GRAD_ENABLED
        self.prev = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self.prev
        return False


def _attach(out, parents, rule):
    """Record `rule` on the tape if any parent participates in gradients."""
    if _GRAD_ENABLED and _tracked(*parents):
        out._parents = tuple(parents)
        out._backward = rule
        out.requires_grad = True
    return out


def _unbroadcast(grad, shape):
    """Reduce `grad` back to `shape` after numpy broadcasting."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _accum(t, g):
    # grad arrays are never mutated in place, so sharing with a child is safe
    if not t.requires_grad:
        return
    g = _unbroadcast(np.asarray(g, dtype=np.float64), t.data.shape)
    t.grad = g if t.grad is None else t.grad + g


def tape(root):
    """The recorded operations reaching `root`, in topological order.

    Parents always precede children in the returned list; each node appears
    exactly once (single output per recorded operation).
    """
    order = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited:
                stack.append((p, False))
    return order


def backward(loss):
    """Accumulate d(loss)/d(leaf) into every tracked leaf. `loss` must be scalar."""
    if loss.data.ndim != 0 and loss.data.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.data.shape}")
    order = tape(loss)
    _accum(loss, np.ones_like(loss.data))
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def gradients(loss, params):
    """Run backward and return {name: grad array} for a dict of parameters."""
    for p in params.values():
        p.grad = None
    backward(loss)
    return {k: (p.grad if p.grad is not None else np.zeros_like(p.data))
            for k, p in params.items()}


def zero_grads(tensors):
    for t in tensors:
        t.grad = None


def assert_finite(t, what="tensor"):
    if not np.all(np.isfinite(t.data)):
        raise FloatingPointError(f"non-finite values in {what}")
    return t


# ---------------------------------------------------------------------------
# primitive ops
# ---------------------------------------------------------------------------

def add(a, b):
    out = Tensor(a.data + b.data)

    def rule(g):
        _accum(a, g)
        _accum(b, g)

    return _attach(out, (a, b), rule)


def sub(a, b):
    out = Tensor(a.data - b.data)

    def rule(g):
        _accum(a, g)
        _accum(b, -g)

    return _attach(out, (a, b), rule)


def mul(a, b):
    out = Tensor(a.data * b.data)

    def rule(g):
        _accum(a, g * b.data)
        _accum(b, g * a.data)

    return _attach(out, (a, b), rule)


def scale(a, c):
    c = float(c)
    out = Tensor(a.data * c)

    def rule(g):
        _accum(a, g * c)

    return _attach(out, (a,), rule)


def matmul(a, b):
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError(f"matmul expects 2-D operands, got {a.data.shape} @ {b.data.shape}")
    if a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.data.shape} @ {b.data.shape}")
    out = Tensor(a.data @ b.data)

    def rule(g):
        # skip the expensive product for constant operands
        if a.requires_grad:
            _accum(a, g @ b.data.T)
        if b.requires_grad:
            _accum(b, a.data.T @ g)

    return _attach(out, (a, b), rule)


def concat(tensors, axis=-1):
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def rule(g):
        for t, piece in zip(tensors, np.split(g, splits, axis=axis)):
            _accum(t, piece)

    return _attach(out, tuple(tensors), rule)


def slice_rows(a, start, stop):
    out = Tensor(a.data[start:stop])

    def rule(g):
        full = np.zeros_like(a.data)
        full[start:stop] = g
        _accum(a, full)

    return _attach(out, (a,), rule)


def gather_rows(a, index):
    """out[i] = a[index[i]]; backward scatter-adds into the gathered rows."""
    index = np.asarray(index, dtype=np.int64)
    out = Tensor(a.data[index])

    def rule(g):
        full = np.zeros_like(a.data)
        np.add.at(full, index, g)
        _accum(a, full)

    return _attach(out, (a,), rule)


def reshape(a, shape):
    out = Tensor(a.data.reshape(shape))

    def rule(g):
        _accum(a, g.reshape(a.data.shape))

    return _attach(out, (a,), rule)


def tsum(a, axis=None, keepdims=False):
    out = Tensor(a.data.sum(axis=axis, keepdims=keepdims))

    def rule(g):
        if axis is None:
            _accum(a, np.broadcast_to(g, a.data.shape))
        elif keepdims:
            _accum(a, np.broadcast_to(g, a.data.shape))
        else:
            _accum(a, np.broadcast_to(np.expand_dims(g, axis), a.data.shape))

    return _attach(out, (a,), rule)


def tmean(a, axis=None, keepdims=False):
    n = a.data.size if axis is None else a.data.shape[axis]
    return scale(tsum(a, axis=axis, keepdims=keepdims), 1.0 / n)


def tpow(a, exponent):
    """Elementwise power with a constant exponent (a >= 0 for fractional)."""
    exponent = float(exponent)
    y = np.power(a.data, exponent)
    out = Tensor(y)

    def rule(g):
        _accum(a, g * exponent * np.power(a.data, exponent - 1.0))

    return _attach(out, (a,), rule)


def sigmoid(a):
    y = np.empty_like(a.data)
    pos = a.data >= 0
    y[pos] = 1.0 / (1.0 + np.exp(-a.data[pos]))
    ex = np.exp(a.data[~pos])
    y[~pos] = ex / (1.0 + ex)
    out = Tensor(y)

    def rule(g):
        _accum(a, g * y * (1.0 - y))

    return _attach(out, (a,), rule)


def tanh(a):
    y = np.tanh(a.data)
    out = Tensor(y)

    def rule(g):
        _accum(a, g * (1.0 - y * y))

    return _attach(out, (a,), rule)


def silu(a):
    """x * sigmoid(x)."""
    s = 1.0 / (1.0 + np.exp(-np.clip(a.data, -500, 500)))
    out = Tensor(a.data * s)

    def rule(g):
        _accum(a, g * (s + a.data * s * (1.0 - s)))

    return _attach(out, (a,), rule)


def exp(a):
    y = np.exp(a.data)
    out = Tensor(y)

    def rule(g):
        _accum(a, g * y)

    return _attach(out, (a,), rule)


def log(a):
    out = Tensor(np.log(a.data))

    def rule(g):
        _accum(a, g / a.data)

    return _attach(out, (a,), rule)


def square(a):
    out = Tensor(a.data * a.data)

    def rule(g):
        _accum(a, 2.0 * g * a.data)

    return _attach(out, (a,), rule)


def softmax(a):
    """Softmax over the last axis."""
    z = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(y)

    def rule(g):
        dot = (g * y).sum(axis=-1, keepdims=True)
        _accum(a, y * (g - dot))

    return _attach(out, (a,), rule)


def dropout(a, p, train, rng=None):
    """Inverted-scaling dropout; identity when train is false or p == 0."""
    if not train or p == 0.0:
        out = Tensor(a.data)

        def rule(g):
            _accum(a, g)

        return _attach(out, (a,), rule)
    if rng is None:
        raise ValueError("dropout in train mode needs an rng")
    keep = rng.random(a.data.shape) >= p
    mask = keep / (1.0 - p)
    out = Tensor(a.data * mask)

    def rule(g):
        _accum(a, g * mask)

    return _attach(out, (a,), rule)


_OPS = {
    "matmul": matmul,
    "add": add,
    "sub": sub,
    "mul": mul,
    "concat": concat,
    "slice": slice_rows,
    "gather": gather_rows,
    "reshape": reshape,
    "sum": tsum,
    "mean": tmean,
    "pow": tpow,
    "sigmoid": sigmoid,
    "tanh": tanh,
    "silu": silu,
    "exp": exp,
    "log": log,
    "square": square,
    "softmax": softmax,
    "dropout": dropout,
    "scale": scale,
}


def tensor_op(kind, *inputs, **kwargs):
    """Dispatch an op by name. Mostly useful for generic property tests."""
    if kind not in _OPS:
        raise ValueError(f"unknown op kind {kind!r}")
    return _OPS[kind](*inputs, **kwargs)


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------

def softmax_cross_entropy(logits, targets):
    """Mean NLL of integer target classes under softmax(logits). Stable."""
    targets = np.asarray(targets, dtype=np.int64)
    if logits.data.ndim != 2 or logits.data.shape[0] != len(targets):
        raise ValueError("logits rows must match target count")
    if targets.min() < 0 or targets.max() >= logits.data.shape[1]:
        raise ValueError("target class id out of range")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - logsumexp
    n = len(targets)
    out = Tensor(-logp[np.arange(n), targets].mean())

    def rule(g):
        grad = np.exp(logp)
        grad[np.arange(n), targets] -= 1.0
        _accum(logits, g * grad / n)

    return _attach(out, (logits,), rule)


def nll_from_probs(probs, targets):
    """Mean negative log of already-normalized class probabilities."""
    targets = np.asarray(targets, dtype=np.int64)
    if probs.data.ndim != 2 or probs.data.shape[0] != len(targets):
        raise ValueError("probability rows must match target count")
    n = len(targets)
    picked = probs.data[np.arange(n), targets]
    out = Tensor(-np.log(picked).mean())

    def rule(g):
        grad = np.zeros_like(probs.data)
        grad[np.arange(n), targets] = -g / (n * picked)
        _accum(probs, grad)

    return _attach(out, (probs,), rule)


def mse(pred, target):
    """Mean over all elements of squared differences."""
    if pred.data.shape != target.data.shape:
        raise ValueError(f"mse shape mismatch: {pred.data.shape} vs {target.data.shape}")
    return tmean(square(sub(pred, target)))


# ---------------------------------------------------------------------------
# gradient checking
# ---------------------------------------------------------------------------

def grad_check(fn, inputs, eps=1e-5):
    """Max relative error between reverse-mode and central finite differences.

    `fn` maps the list of input tensors to a scalar Tensor. Gradients are
    compared elementwise with |g_ad - g_fd| / max(1, |g_ad| + |g_fd|).
    """
    for t in inputs:
        t.requires_grad = True
        t.grad = None
    out = fn(*inputs)
    if out.data.size != 1:
        raise ValueError("grad_check needs a scalar-valued function")
    backward(out)
    worst = 0.0
    for t in inputs:
        g_ad = t.grad if t.grad is not None else np.zeros_like(t.data)
        flat = t.data.reshape(-1)
        g_fd = np.zeros_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = float(fn(*inputs).data)
            flat[i] = orig - eps
            lo = float(fn(*inputs).data)
            flat[i] = orig
            g_fd[i] = (hi - lo) / (2 * eps)
        g_fd = g_fd.reshape(t.data.shape)
        denom = np.maximum(1.0, np.abs(g_ad) + np.abs(g_fd))
        worst = max(worst, float(np.max(np.abs(g_ad - g_fd) / denom)))
    return worst


# ---------------------------------------------------------------------------
# parameter checkpoints
# ---------------------------------------------------------------------------

CHECKPOINT_VERSION = 1


def save_checkpoint(path, params):
    doc = {
        "format_version": CHECKPOINT_VERSION,
        "params": {
            k: {"shape": list(v.data.shape), "values": v.data.reshape(-1).tolist()}
            for k, v in params.items()
        },
    }
    with open(path, "w") as f:
        json.dump(doc, f)


def load_checkpoint(path):
    with open(path) as f:
        doc = json.load(f)
    if doc.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint format_version {doc.get('format_version')!r}")
    params = {}
    for k, entry in doc["params"].items():
        arr = np.asarray(entry["values"], dtype=np.float64).reshape(entry["shape"])
        params[k] = Tensor(arr, requires_grad=True, name=k)
    return params
