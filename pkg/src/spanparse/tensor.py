"""Dense 2-D matrices with reverse-mode differentiation.

Every operation returns a new :class:`Tensor` that remembers its inputs and
a closure propagating its gradient back to them.  Calling :func:`backward`
on a 1x1 tensor walks that graph in reverse topological order.
"""

from __future__ import annotations

import io
import struct

import numpy as np

LN_EPS = 1e-6
FD_STEP = 1e-5
PARAM_MAGIC = b"CSPN1"


class ShapeMismatch(ValueError):
    pass


class NonScalarLoss(ValueError):
    pass


class Tensor:
    __slots__ = ("value", "grad", "parents", "backward_fn", "name")

    def __init__(self, value, parents=(), backward_fn=None, name=None):
        value = np.asarray(value, dtype=np.float64)
        if value.ndim != 2:
            value = value.reshape(1, -1) if value.ndim < 2 else value
            if value.ndim != 2:
                raise ShapeMismatch(f"expected a matrix, got shape {value.shape}")
        self.value = value
        self.grad = None
        self.parents = parents
        self.backward_fn = backward_fn
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    @property
    def rows(self):
        return self.value.shape[0]

    @property
    def cols(self):
        return self.value.shape[1]

    def accumulate(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def zero_grad(self):
        self.grad = None

    def item(self):
        return float(self.value[0, 0])

    def __matmul__(self, other):
        return matmul(self, other)

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __repr__(self):
        label = f" {self.name}" if self.name else ""
        return f"<Tensor{label} {self.rows}x{self.cols}>"


def parameter(value, name=None):
    return Tensor(np.array(value, dtype=np.float64, copy=True), name=name)


def constant(value):
    return Tensor(value)


def _check(cond, msg):
    if not cond:
        raise ShapeMismatch(msg)


# ---------------------------------------------------------------------------
# Linear algebra

def matmul(a: Tensor, b: Tensor) -> Tensor:
    _check(a.cols == b.rows, f"matmul {a.shape} @ {b.shape}")

    def bw(g):
        a.accumulate(g @ b.value.T)
        b.accumulate(a.value.T @ g)

    return Tensor(a.value @ b.value, (a, b), bw)


def add(a: Tensor, b: Tensor) -> Tensor:
    _check(a.shape == b.shape, f"add {a.shape} + {b.shape}")

    def bw(g):
        a.accumulate(g)
        b.accumulate(g)

    return Tensor(a.value + b.value, (a, b), bw)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check(a.shape == b.shape, f"sub {a.shape} - {b.shape}")

    def bw(g):
        a.accumulate(g)
        b.accumulate(-g)

    return Tensor(a.value - b.value, (a, b), bw)


def add_row(a: Tensor, bias: Tensor) -> Tensor:
    """Add a 1 x cols bias to every row of ``a``."""
    _check(bias.rows == 1 and bias.cols == a.cols, f"add_row {a.shape} + {bias.shape}")

    def bw(g):
        a.accumulate(g)
        bias.accumulate(g.sum(axis=0, keepdims=True))

    return Tensor(a.value + bias.value, (a, bias), bw)


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)

    def bw(g):
        a.accumulate(g * c)

    return Tensor(a.value * c, (a,), bw)


def transpose(a: Tensor) -> Tensor:
    def bw(g):
        a.accumulate(g.T)

    return Tensor(a.value.T.copy(), (a,), bw)


def concat_cols(parts) -> Tensor:
    parts = list(parts)
    _check(len({p.rows for p in parts}) == 1, "concat_cols needs equal row counts")
    bounds = np.cumsum([0] + [p.cols for p in parts])

    def bw(g):
        for p, lo, hi in zip(parts, bounds[:-1], bounds[1:]):
            p.accumulate(g[:, lo:hi])

    return Tensor(np.concatenate([p.value for p in parts], axis=1), tuple(parts), bw)


def take_cols(a: Tensor, start: int, stop: int) -> Tensor:
    _check(0 <= start < stop <= a.cols, f"take_cols [{start}:{stop}] of {a.shape}")

    def bw(g):
        full = np.zeros_like(a.value)
        full[:, start:stop] = g
        a.accumulate(full)

    return Tensor(a.value[:, start:stop].copy(), (a,), bw)


def take_rows(a: Tensor, index) -> Tensor:
    """Gather rows by index; repeated indices are allowed."""
    index = np.asarray(index, dtype=np.intp)

    def bw(g):
        full = np.zeros_like(a.value)
        np.add.at(full, index, g)
        a.accumulate(full)

    return Tensor(a.value[index], (a,), bw)


# ---------------------------------------------------------------------------
# Nonlinearities

def relu(a: Tensor) -> Tensor:
    mask = a.value > 0

    def bw(g):
        a.accumulate(g * mask)

    return Tensor(np.where(mask, a.value, 0.0), (a,), bw)


def _softmax(x):
    z = x - x.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_rows(a: Tensor) -> Tensor:
    p = _softmax(a.value)

    def bw(g):
        a.accumulate(p * (g - (g * p).sum(axis=1, keepdims=True)))

    return Tensor(p, (a,), bw)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = LN_EPS) -> Tensor:
    """Normalize each row to zero mean and unit variance, then gain and shift."""
    d = x.cols
    _check(gain.shape == (1, d) and bias.shape == (1, d), "layer_norm parameter shape")
    mu = x.value.mean(axis=1, keepdims=True)
    xc = x.value - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=1, keepdims=True) + eps)
    xhat = xc * inv

    def bw(g):
        gain.accumulate((g * xhat).sum(axis=0, keepdims=True))
        bias.accumulate(g.sum(axis=0, keepdims=True))
        gx = g * gain.value
        x.accumulate(inv * (gx - gx.mean(axis=1, keepdims=True)
                            - xhat * (gx * xhat).mean(axis=1, keepdims=True)))

    return Tensor(xhat * gain.value + bias.value, (x, gain, bias), bw)


# ---------------------------------------------------------------------------
# Reductions and losses

def sum_all(a: Tensor) -> Tensor:
    def bw(g):
        a.accumulate(np.full_like(a.value, g[0, 0]))

    return Tensor([[a.value.sum()]], (a,), bw)


def masked_sum(a: Tensor, mask) -> Tensor:
    """Sum of ``a * mask`` for a constant ``mask`` of the same shape."""
    mask = np.asarray(mask, dtype=np.float64)
    _check(mask.shape == a.shape, f"mask {mask.shape} vs {a.shape}")

    def bw(g):
        a.accumulate(mask * g[0, 0])

    return Tensor([[float((a.value * mask).sum())]], (a,), bw)


def cross_entropy(logits: Tensor, targets) -> Tensor:
    """Mean negative log-likelihood of integer ``targets`` under row softmax."""
    targets = np.asarray(targets, dtype=np.intp)
    _check(targets.shape == (logits.rows,), "one target per row")
    z = logits.value - logits.value.max(axis=1, keepdims=True)
    logz = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - logz
    rows = np.arange(logits.rows)
    n = logits.rows

    def bw(g):
        d = np.exp(logp)
        d[rows, targets] -= 1.0
        logits.accumulate(d * (g[0, 0] / n))

    return Tensor([[-logp[rows, targets].mean()]], (logits,), bw)


# ---------------------------------------------------------------------------
# Backward pass

def _topological(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor):
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every leaf reachable from ``loss``.

    Leaves (parameters) keep accumulating across calls until zeroed;
    intermediate nodes are reset so a graph may be walked only once.
    """
    if loss.shape != (1, 1):
        raise NonScalarLoss(f"loss must be 1x1, got {loss.shape}")
    order = _topological(loss)
    for node in order:
        if node.parents:
            node.grad = None
    loss.accumulate(np.ones((1, 1)))
    for node in reversed(order):
        if node.backward_fn is not None and node.grad is not None:
            node.backward_fn(node.grad)


# ---------------------------------------------------------------------------
# Finite differences

def numeric_gradient(f, param: Tensor, h: float = FD_STEP):
    """Central finite-difference gradient of scalar ``f()`` w.r.t. ``param``."""
    grad = np.zeros_like(param.value)
    flat = param.value.reshape(-1)
    gflat = grad.reshape(-1)
    for k in range(flat.size):
        old = flat[k]
        flat[k] = old + h
        up = f().item()
        flat[k] = old - h
        down = f().item()
        flat[k] = old
        gflat[k] = (up - down) / (2 * h)
    return grad


def relative_error(analytic, numeric, floor=1e-10):
    """Norm-wise relative error; both near zero counts as agreement."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    diff = np.linalg.norm(analytic - numeric)
    denom = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
    if denom < floor:
        return 0.0 if diff < floor else float("inf")
    return float(diff / denom)


def gradient_check(f, params: dict, h: float = FD_STEP):
    """Return {name: relative error} comparing backprop against finite differences."""
    for p in params.values():
        p.zero_grad()
    backward(f())
    errors = {}
    for name, p in params.items():
        analytic = p.grad if p.grad is not None else np.zeros_like(p.value)
        errors[name] = relative_error(analytic, numeric_gradient(f, p, h))
    for p in params.values():
        p.zero_grad()
    return errors


# ---------------------------------------------------------------------------
# Parameter container

def dump_params(params: dict) -> bytes:
    """Serialize named matrices: magic, then (name length, name, rows, cols, data)."""
    out = io.BytesIO()
    out.write(PARAM_MAGIC)
    for name, p in params.items():
        value = p.value if isinstance(p, Tensor) else np.asarray(p, dtype=np.float64)
        raw = name.encode("utf-8")
        out.write(struct.pack("<I", len(raw)))
        out.write(raw)
        out.write(struct.pack("<II", *value.shape))
        out.write(np.ascontiguousarray(value, dtype="<f8").tobytes())
    return out.getvalue()


def load_params(data: bytes) -> dict:
    if data[:len(PARAM_MAGIC)] != PARAM_MAGIC:
        raise ValueError("not a parameter container (bad magic bytes)")
    params = {}
    k = len(PARAM_MAGIC)
    while k < len(data):
        (name_len,) = struct.unpack_from("<I", data, k)
        k += 4
        name = data[k:k + name_len].decode("utf-8")
        k += name_len
        rows, cols = struct.unpack_from("<II", data, k)
        k += 8
        size = rows * cols * 8
        if k + size > len(data):
            raise ValueError(f"truncated parameter {name!r}")
        params[name] = np.frombuffer(data[k:k + size], dtype="<f8").reshape(rows, cols).astype(np.float64)
        k += size
    return params


def save_params(path, params: dict):
    with open(path, "wb") as f:
        f.write(dump_params(params))


def read_params(path) -> dict:
    with open(path, "rb") as f:
        return load_params(f.read())
