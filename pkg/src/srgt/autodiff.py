"""Dense float64 tensors with reverse-mode differentiation.

A tensor records its parents and a backward closure when gradients are
enabled; ``Tensor.backward`` runs one reverse topological sweep from a
scalar loss and accumulates gradients into every reachable tensor that
requires them.  Gradients accumulate across calls until explicitly zeroed.
"""

from __future__ import annotations

import struct
from contextlib import contextmanager

import numpy as np

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable tape recording inside the block (forward-only evaluation)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, parents=(), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad) and _grad_enabled
        self._parents = parents if self.requires_grad else ()
        self._backward = backward if self.requires_grad else None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data.copy())

    def zero_grad(self):
        self.grad = None

    def backward(self):
        if self.data.shape != ():
            raise ValueError(f"backward requires a scalar, got shape {self.data.shape}")
        topo, seen = [], set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        _accum(self, np.ones(()))
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node.grad)

    # operator sugar -------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _accum(t: Tensor, g: np.ndarray):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Reduce a broadcast gradient back to the original operand shape."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g.reshape(shape)


def _make(data, parents, backward):
    req = _grad_enabled and any(p.requires_grad for p in parents)
    if not req:
        return Tensor(data)
    return Tensor(data, requires_grad=True, parents=tuple(parents), backward=backward)


# elementwise and linear-algebra primitives --------------------------------


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data + b.data

    def backward(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(g, b.data.shape))

    return _make(out_data, (a, b), backward)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data * b.data

    def backward(g):
        _accum(a, _unbroadcast(g * b.data, a.data.shape))
        _accum(b, _unbroadcast(g * a.data, b.data.shape))

    return _make(out_data, (a, b), backward)


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data / b.data

    def backward(g):
        _accum(a, _unbroadcast(g / b.data, a.data.shape))
        _accum(b, _unbroadcast(-g * a.data / (b.data ** 2), b.data.shape))

    return _make(out_data, (a, b), backward)


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError("matmul expects 2-D operands")
    if a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.data.shape} @ {b.data.shape}")
    out_data = a.data @ b.data

    def backward(g):
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    return _make(out_data, (a, b), backward)


def transpose(a):
    a = as_tensor(a)

    def backward(g):
        _accum(a, g.T)

    return _make(a.data.T, (a,), backward)


def reshape(a, shape):
    a = as_tensor(a)
    old = a.data.shape

    def backward(g):
        _accum(a, g.reshape(old))

    return _make(a.data.reshape(shape), (a,), backward)


def narrow(a, axis, start, length):
    """Contiguous slice along one axis."""
    a = as_tensor(a)
    index = [slice(None)] * a.data.ndim
    index[axis] = slice(start, start + length)
    index = tuple(index)

    def backward(g):
        if a.requires_grad:
            full = np.zeros_like(a.data)
            full[index] = g
            _accum(a, full)

    return _make(a.data[index].copy(), (a,), backward)


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    out_data = np.concatenate([t.data for t in tensors], axis=axis)

    def backward(g):
        offset = 0
        for t, n in zip(tensors, sizes):
            index = [slice(None)] * g.ndim
            index[axis] = slice(offset, offset + n)
            _accum(t, g[tuple(index)])
            offset += n

    return _make(out_data, tensors, backward)


def tsum(a, axis=None, keepdims=False):
    a = as_tensor(a)
    out_data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accum(a, np.broadcast_to(g, a.data.shape).copy())

    return _make(out_data, (a,), backward)


def tmean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    count = a.data.size if axis is None else a.data.shape[axis]
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def tabs(a):
    a = as_tensor(a)

    def backward(g):
        _accum(a, g * np.sign(a.data))

    return _make(np.abs(a.data), (a,), backward)


def relu(a):
    a = as_tensor(a)

    def backward(g):
        _accum(a, g * (a.data > 0))

    return _make(np.maximum(a.data, 0.0), (a,), backward)


def sigmoid(a):
    a = as_tensor(a)
    # numerically stable in both tails
    pos = a.data >= 0
    out_data = np.empty_like(a.data)
    out_data[pos] = 1.0 / (1.0 + np.exp(-a.data[pos]))
    ex = np.exp(a.data[~pos])
    out_data[~pos] = ex / (1.0 + ex)

    def backward(g):
        _accum(a, g * out_data * (1.0 - out_data))

    return _make(out_data, (a,), backward)


def tlog(a):
    a = as_tensor(a)

    def backward(g):
        _accum(a, g / a.data)

    return _make(np.log(a.data), (a,), backward)


def clip(a, lo, hi):
    """Clamp values; gradient passes only through unclipped entries."""
    a = as_tensor(a)
    out_data = np.clip(a.data, lo, hi)
    inside = (a.data > lo) & (a.data < hi)

    def backward(g):
        _accum(a, g * inside)

    return _make(out_data, (a,), backward)


# model-level primitives ---------------------------------------------------


def softmax_rows(a):
    """Softmax along the last axis; each row sums to 1."""
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    ex = np.exp(shifted)
    out_data = ex / ex.sum(axis=-1, keepdims=True)

    def backward(g):
        inner = (g * out_data).sum(axis=-1, keepdims=True)
        _accum(a, out_data * (g - inner))

    return _make(out_data, (a,), backward)


def layer_norm(x, gamma, beta, eps=1e-5):
    """Normalize the last axis to zero mean / unit variance, then affine."""
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv_std
    out_data = gamma.data * xhat + beta.data

    def backward(g):
        lead = tuple(range(g.ndim - 1))
        _accum(gamma, _unbroadcast((g * xhat).sum(axis=lead) if lead else g * xhat,
                                   gamma.data.shape))
        _accum(beta, _unbroadcast(g.sum(axis=lead) if lead else g, beta.data.shape))
        if x.requires_grad:
            gx = g * gamma.data
            m1 = gx.mean(axis=-1, keepdims=True)
            m2 = (gx * xhat).mean(axis=-1, keepdims=True)
            _accum(x, inv_std * (gx - m1 - xhat * m2))

    return _make(out_data, (x, gamma, beta), backward)


def embedding_lookup(table, idx):
    """Gather rows of ``table``; backward scatter-adds into the table."""
    table = as_tensor(table)
    idx = np.asarray(idx, dtype=np.int64)
    if idx.ndim != 1:
        idx = idx.ravel()
    rows = table.data.shape[0]
    if idx.size and (idx.min() < 0 or idx.max() >= rows):
        raise ValueError(f"embedding index out of range [0, {rows})")

    def backward(g):
        if table.requires_grad:
            acc = np.zeros_like(table.data)
            np.add.at(acc, idx, g)
            _accum(table, acc)

    return _make(table.data[idx], (table,), backward)


def conv1d_collapse(x, kernel, bias, mask):
    """Same-padded 1-D convolution over positions, masked mean-pool to one vector.

    ``x`` is (L, D) or batched (B, L, D); ``kernel`` is (w, D, D); ``mask``
    marks valid positions.  A fully masked row pools to the bias alone.
    """
    x, kernel, bias = as_tensor(x), as_tensor(kernel), as_tensor(bias)
    single = x.data.ndim == 2
    xd = x.data[None] if single else x.data
    md = np.asarray(mask, dtype=bool)
    if md.ndim == 1:
        md = md[None]
    B, L, D = xd.shape
    w = kernel.data.shape[0]
    if kernel.data.shape != (w, D, D) or bias.data.shape != (D,):
        raise ValueError("conv1d_collapse shape mismatch")
    if md.shape != (B, L):
        raise ValueError("conv1d_collapse mask shape mismatch")
    pad = w // 2
    xp = np.zeros((B, L + 2 * pad, D))
    xp[:, pad:pad + L] = xd
    y = np.broadcast_to(bias.data, (B, L, D)).copy()
    for u in range(w):
        y += xp[:, u:u + L] @ kernel.data[u]
    counts = md.sum(axis=1)
    out_data = np.where(
        (counts > 0)[:, None],
        (y * md[:, :, None]).sum(axis=1) / np.maximum(counts, 1)[:, None],
        bias.data[None, :],
    )
    if single:
        out_data = out_data[0]

    def backward(g):
        gb = g[None] if single else g
        gy = np.zeros((B, L, D))
        pos = counts > 0
        gy[pos] = (gb[pos] / counts[pos, None])[:, None, :] * md[pos][:, :, None]
        _accum(bias, gb.sum(axis=0))
        if kernel.requires_grad:
            gk = np.empty_like(kernel.data)
            for u in range(w):
                gk[u] = np.einsum("bpd,bpe->de", xp[:, u:u + L], gy)
            _accum(kernel, gk)
        if x.requires_grad:
            gxp = np.zeros_like(xp)
            for u in range(w):
                gxp[:, u:u + L] += gy @ kernel.data[u].T
            gx = gxp[:, pad:pad + L]
            _accum(x, gx[0] if single else gx)

    return _make(out_data, (x, kernel, bias), backward)


# gradient checking --------------------------------------------------------


def finite_difference_check(f, tensors, h=1e-5, floor=1e-6):
    """Max relative error between analytic grads of ``f()`` and central differences.

    ``f`` rebuilds the scalar loss from the current ``tensors`` data on every
    call; analytic gradients come from one backward sweep.
    """
    for t in tensors:
        t.zero_grad()
    f().backward()
    grads = [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in tensors]
    worst = 0.0
    for t, g in zip(tensors, grads):
        flat = t.data.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = f().item()
            flat[i] = orig - h
            fm = f().item()
            flat[i] = orig
            fd = (fp - fm) / (2 * h)
            a = g.ravel()[i]
            err = abs(a - fd) / max(abs(a), abs(fd), floor)
            worst = max(worst, err)
    return worst


# checkpoint format --------------------------------------------------------

CHECKPOINT_MAGIC = b"SRGT-CKPT-v1\n"


def save_checkpoint(path, named_arrays):
    """Write named float64 arrays: magic, count, then per-tensor shape header + raw LE data."""
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(named_arrays)))
        for name, arr in named_arrays.items():
            arr = np.asarray(arr, dtype="<f8")
            nb = name.encode("utf-8")
            fh.write(struct.pack("<H", len(nb)))
            fh.write(nb)
            fh.write(struct.pack("<B", arr.ndim))
            for dim in arr.shape:
                fh.write(struct.pack("<I", dim))
            fh.write(arr.tobytes(order="C"))


def load_checkpoint(path):
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ValueError("not a parameter checkpoint (bad magic)")
        (count,) = struct.unpack("<I", fh.read(4))
        out = {}
        for _ in range(count):
            (nlen,) = struct.unpack("<H", fh.read(2))
            name = fh.read(nlen).decode("utf-8")
            (ndim,) = struct.unpack("<B", fh.read(1))
            shape = tuple(struct.unpack("<I", fh.read(4))[0] for _ in range(ndim))
            n = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(fh.read(8 * n), dtype="<f8").reshape(shape)
            out[name] = data.astype(np.float64)
    return out
