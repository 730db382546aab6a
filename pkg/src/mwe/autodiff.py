"""Dense float64 tensors with reverse-mode differentiation.

A Tensor wraps a numpy array plus an optional gradient buffer. Every
operation builds the graph implicitly: the output tensor remembers its
parent tensors and a closure that propagates adjoints to them. Calling
``backward()`` on a scalar walks that graph once in reverse topological
order. The graph is rebuilt on every forward pass, so there is no global
tape to reset; independent graphs can coexist.

Only the ranks the model needs are supported: 2-D matrices plus a 3-D
batched matmul form. Broadcasting is limited to what numpy does, with
gradients summed back over broadcast axes.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

__all__ = [
    "Tensor",
    "tensor",
    "matmul",
    "add",
    "sub",
    "mul",
    "neg",
    "absolute",
    "concat",
    "reshape",
    "transpose",
    "index_rows",
    "take",
    "tsum",
    "tmean",
    "softmax",
    "log_softmax",
    "layer_norm",
    "gelu",
    "topo_order",
    "grad_check",
]

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _check_nan(data: np.ndarray, op: str) -> np.ndarray:
    # NaN from finite inputs is a bug, not a warning condition.
    if np.isnan(data).any():
        raise FloatingPointError(f"NaN produced in forward op '{op}'")
    return data


class Tensor:
    """A float64 ndarray with optional gradient and graph linkage."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "_op")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents: tuple = ()
        self._backward = None
        self._op = "leaf"

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g: np.ndarray):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self):
        """Reverse-accumulate gradients from this scalar into all leaves."""
        if self.data.ndim != 0 and self.data.size != 1:
            raise ValueError(
                f"backward() needs a scalar loss, got shape {self.data.shape}"
            )
        order = topo_order(self)
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # Operator sugar; everything routes through the module-level ops.
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, op={self._op})"


def tensor(data, requires_grad: bool = False) -> Tensor:
    return Tensor(data, requires_grad=requires_grad)


def _wrap(data, op: str, parents, backward) -> Tensor:
    out = Tensor(_check_nan(data, op))
    needs = any(isinstance(p, Tensor) and (p.requires_grad or p._backward is not None)
                for p in parents)
    if needs:
        out.requires_grad = True
        out._parents = tuple(p for p in parents if isinstance(p, Tensor))
        out._backward = backward
        out._op = op
    return out


def topo_order(root: Tensor) -> list:
    """Parents-before-children ordering of the graph below ``root``."""
    order: list = []
    seen: set = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            stack.append((p, False))
    return order


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum gradient over axes that numpy broadcast during the forward."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product. Supports (m,k)@(k,n), (k,)@(k,n), and batched
    (B,m,k)@(k,n) / (B,m,k)@(B,k,n)."""
    a, b = _as_tensor(a), _as_tensor(b)
    ad, bd = a.data, b.data
    inner_a = ad.shape[-1]
    inner_b = bd.shape[-2] if bd.ndim >= 2 else bd.shape[-1]
    if inner_a != inner_b:
        raise ValueError(
            f"matmul: inner dimensions differ, {ad.shape} vs {bd.shape}"
        )
    out_data = ad @ bd

    def backward(g):
        if a.requires_grad or a._backward is not None:
            if ad.ndim == 1:
                ga = g @ bd.T
            elif bd.ndim == 2 and ad.ndim >= 2:
                ga = g @ bd.T
            else:
                ga = g @ np.swapaxes(bd, -1, -2)
            a._accumulate(_unbroadcast(ga, ad.shape))
        if b.requires_grad or b._backward is not None:
            if ad.ndim == 1:
                gb = np.outer(ad, g)
            elif ad.ndim == 2:
                gb = ad.T @ g
            elif bd.ndim == 2:
                # (B,m,k)@(k,n): fold the batch into rows
                gb = ad.reshape(-1, ad.shape[-1]).T @ g.reshape(-1, g.shape[-1])
            else:
                gb = np.swapaxes(ad, -1, -2) @ g
            b._accumulate(_unbroadcast(gb, bd.shape))

    return _wrap(out_data, "matmul", (a, b), backward)


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data + b.data

    def backward(g):
        if a.requires_grad or a._backward is not None:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad or b._backward is not None:
            b._accumulate(_unbroadcast(g, b.data.shape))

    return _wrap(out_data, "add", (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data - b.data

    def backward(g):
        if a.requires_grad or a._backward is not None:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad or b._backward is not None:
            b._accumulate(_unbroadcast(-g, b.data.shape))

    return _wrap(out_data, "sub", (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data * b.data

    def backward(g):
        if a.requires_grad or a._backward is not None:
            a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad or b._backward is not None:
            b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    return _wrap(out_data, "mul", (a, b), backward)


def neg(a: Tensor) -> Tensor:
    a = _as_tensor(a)

    def backward(g):
        a._accumulate(-g)

    return _wrap(-a.data, "neg", (a,), backward)


def absolute(a: Tensor) -> Tensor:
    """Elementwise |x|; subgradient at 0 is taken as 0."""
    a = _as_tensor(a)
    sign = np.sign(a.data)

    def backward(g):
        a._accumulate(g * sign)

    return _wrap(np.abs(a.data), "abs", (a,), backward)


def concat(parts, axis: int = 0) -> Tensor:
    parts = [_as_tensor(p) for p in parts]
    out_data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad or p._backward is not None:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                p._accumulate(g[tuple(sl)])

    return _wrap(out_data, "concat", tuple(parts), backward)


def reshape(a: Tensor, shape) -> Tensor:
    a = _as_tensor(a)

    def backward(g):
        a._accumulate(g.reshape(a.data.shape))

    return _wrap(a.data.reshape(shape), "reshape", (a,), backward)


def transpose(a: Tensor) -> Tensor:
    """Swap the last two axes."""
    a = _as_tensor(a)

    def backward(g):
        a._accumulate(np.swapaxes(g, -1, -2))

    return _wrap(np.swapaxes(a.data, -1, -2), "transpose", (a,), backward)


def index_rows(a: Tensor, idx) -> Tensor:
    """Gather rows by integer index; duplicate indices accumulate in the
    backward pass (this is the embedding-lookup primitive)."""
    a = _as_tensor(a)
    idx = np.asarray(idx, dtype=np.intp)

    def backward(g):
        if a.requires_grad or a._backward is not None:
            ga = np.zeros_like(a.data)
            np.add.at(ga, idx, g)
            a._accumulate(ga)

    return _wrap(a.data[idx], "index_rows", (a,), backward)


def take(a: Tensor, index: int) -> Tensor:
    """Pick one element of a 1-D tensor as a scalar."""
    a = _as_tensor(a)
    if a.data.ndim != 1:
        raise ValueError(f"take expects a 1-D tensor, got shape {a.data.shape}")

    def backward(g):
        ga = np.zeros_like(a.data)
        ga[index] = g
        a._accumulate(ga)

    return _wrap(a.data[index], "take", (a,), backward)


def tsum(a: Tensor, axis=None) -> Tensor:
    a = _as_tensor(a)

    def backward(g):
        if axis is None:
            a._accumulate(np.broadcast_to(g, a.data.shape).copy())
        else:
            a._accumulate(np.broadcast_to(np.expand_dims(g, axis), a.data.shape).copy())

    return _wrap(a.data.sum(axis=axis), "sum", (a,), backward)


def tmean(a: Tensor, axis=None) -> Tensor:
    a = _as_tensor(a)
    n = a.data.size if axis is None else a.data.shape[axis]

    def backward(g):
        if axis is None:
            a._accumulate(np.broadcast_to(g / n, a.data.shape).copy())
        else:
            a._accumulate(np.broadcast_to(np.expand_dims(g, axis) / n, a.data.shape).copy())

    return _wrap(a.data.mean(axis=axis), "mean", (a,), backward)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    """Stable softmax along ``axis`` (max-subtracted before exponentiation)."""
    a = _as_tensor(a)
    if not -a.data.ndim <= axis < a.data.ndim:
        raise ValueError(f"softmax: axis {axis} out of range for shape {a.data.shape}")
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        dot = (g * y).sum(axis=axis, keepdims=True)
        a._accumulate(y * (g - dot))

    return _wrap(y, "softmax", (a,), backward)


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    a = _as_tensor(a)
    m = a.data.max(axis=axis, keepdims=True)
    shifted = a.data - m
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out_data = shifted - lse
    sm = np.exp(out_data)

    def backward(g):
        a._accumulate(g - sm * g.sum(axis=axis, keepdims=True))

    return _wrap(out_data, "log_softmax", (a,), backward)


def layer_norm(a: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-6) -> Tensor:
    """Normalize the trailing dimension to zero mean / unit variance, then
    apply the affine transform gamma * xhat + beta."""
    a, gamma, beta = _as_tensor(a), _as_tensor(gamma), _as_tensor(beta)
    d = a.data.shape[-1]
    if gamma.data.shape != (d,) or beta.data.shape != (d,):
        raise ValueError(
            f"layer_norm: gamma/beta must have shape ({d},), got "
            f"{gamma.data.shape} and {beta.data.shape}"
        )
    mu = a.data.mean(axis=-1, keepdims=True)
    var = a.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (a.data - mu) * inv
    out_data = xhat * gamma.data + beta.data

    def backward(g):
        if gamma.requires_grad or gamma._backward is not None:
            gamma._accumulate((g * xhat).reshape(-1, d).sum(axis=0))
        if beta.requires_grad or beta._backward is not None:
            beta._accumulate(g.reshape(-1, d).sum(axis=0))
        if a.requires_grad or a._backward is not None:
            gx = g * gamma.data
            ga = inv * (
                gx
                - gx.mean(axis=-1, keepdims=True)
                - xhat * (gx * xhat).mean(axis=-1, keepdims=True)
            )
            a._accumulate(ga)

    return _wrap(out_data, "layer_norm", (a, gamma, beta), backward)


def gelu(a: Tensor) -> Tensor:
    """Exact Gaussian-error linear unit, x * Phi(x) with the erf form."""
    a = _as_tensor(a)
    phi = 0.5 * (1.0 + erf(a.data * _INV_SQRT2))
    out_data = a.data * phi

    def backward(g):
        pdf = np.exp(-0.5 * a.data * a.data) * _INV_SQRT2PI
        a._accumulate(g * (phi + a.data * pdf))

    return _wrap(out_data, "gelu", (a,), backward)


def grad_check(f, params, h: float = 1e-5) -> float:
    """Compare analytic gradients of the scalar ``f()`` against central
    finite differences over every coordinate of ``params``.

    Returns max over coordinates of |analytic - numeric| / max(1, |analytic|).
    ``f`` must close over ``params`` and rebuild the graph on each call.
    """
    if isinstance(params, Tensor):
        params = [params]
    for p in params:
        p.zero_grad()
    loss = f()
    if loss.data.ndim != 0 and loss.data.size != 1:
        raise ValueError("grad_check: f() must return a scalar")
    loss.backward()
    grads = [p.grad.copy() if p.grad is not None else np.zeros_like(p.data)
             for p in params]
    worst = 0.0
    for p, analytic in zip(params, grads):
        flat = p.data.reshape(-1)
        aflat = analytic.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = float(f().data)
            flat[i] = orig - h
            fm = float(f().data)
            flat[i] = orig
            numeric = (fp - fm) / (2.0 * h)
            rel = abs(aflat[i] - numeric) / max(1.0, abs(aflat[i]))
            if rel > worst:
                worst = rel
    return worst
