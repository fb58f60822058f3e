"""Minimal reverse-mode automatic differentiation over numpy arrays.

Complex values are supported with the convention that the gradient of a real
loss ``L`` with respect to ``z = x + jy`` is ``dL/dx + j dL/dy``; this is the
steepest-ascent direction in the complex plane. Gradients of real-valued
leaves are kept real.
"""

from __future__ import annotations

import numpy as np


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, n in enumerate(shape):
        if n == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


class Tensor:
    __array_priority__ = 100

    def __init__(self, value, parents=(), backward=None, requires_grad=False):
        self.value = np.asarray(value)
        if self.value.dtype.kind in "iub":
            self.value = self.value.astype(float)
        self.parents = parents
        self._backward = backward
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self.grad = None

    # ------------------------------------------------------------------ plumbing
    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    @property
    def is_complex(self):
        return np.iscomplexobj(self.value)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.value.dtype})"

    def _accumulate(self, g):
        if not self.is_complex:
            g = np.real(g)
        g = _unbroadcast(np.asarray(g), self.shape)
        self.grad = g.copy() if self.grad is None else self.grad + g

    def backward(self, seed=None):
        """Accumulate gradients into every leaf that requires them."""
        order, seen = [], set()

        def visit(node):
            if id(node) in seen or not node.requires_grad:
                return
            seen.add(id(node))
            for p in node.parents:
                visit(p)
            order.append(node)

        visit(self)
        grads = {id(self): np.ones(self.shape) if seed is None else np.asarray(seed)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node._accumulate(g)
                continue
            for parent, pg in zip(node.parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                if not parent.is_complex:
                    pg = np.real(pg)
                pg = _unbroadcast(np.asarray(pg), parent.shape)
                grads[id(parent)] = grads[id(parent)] + pg if id(parent) in grads else pg

    # --------------------------------------------------------------- operators
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_tensor(other)))

    def __rsub__(self, other):
        return add(as_tensor(other), neg(self))

    def __neg__(self):
        return neg(self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(as_tensor(other), self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(as_tensor(other), self)

    def __pow__(self, p):
        return power(self, p)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        n = self.value.size if axis is None else np.prod([self.shape[a] for a in np.atleast_1d(axis)])
        return tsum(self, axis, keepdims) * (1.0 / n)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 and isinstance(shape[0], tuple) else shape)

    @property
    def T(self):
        return transpose(self)

    def conj(self):
        return conj(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def leaf(value) -> Tensor:
    return Tensor(np.array(value, copy=True), requires_grad=True)


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return Tensor(a.value + b.value, (a, b), lambda g: (g, g))


def neg(a):
    a = as_tensor(a)
    return Tensor(-a.value, (a,), lambda g: (-g,))


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return Tensor(a.value * b.value, (a, b), lambda g: (g * np.conj(b.value), g * np.conj(a.value)))


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    y = a.value / b.value
    return Tensor(y, (a, b), lambda g: (g / np.conj(b.value), -g * np.conj(y / b.value)))


def power(a, p: float):
    a = as_tensor(a)
    y = a.value ** p
    return Tensor(y, (a,), lambda g: (g * np.conj(p * a.value ** (p - 1)),))


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def back(g):
        av, bv = a.value, b.value
        if bv.ndim == 1:
            ga = np.multiply.outer(g, np.conj(bv)) if av.ndim == 2 else g[..., None] * np.conj(bv)
            gb = np.conj(np.swapaxes(av, -1, -2)) @ g[..., None]
            return ga, gb[..., 0] if gb.ndim > 1 else gb
        return g @ np.conj(np.swapaxes(bv, -1, -2)), np.conj(np.swapaxes(av, -1, -2)) @ g

    return Tensor(a.value @ b.value, (a, b), back)


def einsum(spec: str, *ops):
    """``np.einsum`` with gradients; every input index must appear elsewhere."""
    ops = [as_tensor(o) for o in ops]
    ins, out = spec.replace(" ", "").split("->")
    ins = ins.split(",")

    def back(g):
        grads = []
        for i, sub in enumerate(ins):
            others = [ins[j] for j in range(len(ins)) if j != i]
            avail = set(out).union(*others) if others else set(out)
            if not set(sub) <= avail or len(set(sub)) != len(sub):
                raise NotImplementedError(f"einsum gradient for operand {sub!r} in {spec!r}")
            terms = ",".join([out] + others) + "->" + sub
            vals = [g] + [np.conj(ops[j].value) for j in range(len(ins)) if j != i]
            grads.append(np.einsum(terms, *vals))
        return grads

    return Tensor(np.einsum(spec, *[o.value for o in ops]), tuple(ops), back)


def conj(a):
    a = as_tensor(a)
    return Tensor(np.conj(a.value), (a,), lambda g: (np.conj(g),))


def real(a):
    a = as_tensor(a)
    return Tensor(np.real(a.value), (a,), lambda g: (g.astype(complex),))


def imag(a):
    a = as_tensor(a)
    return Tensor(np.imag(a.value), (a,), lambda g: (1j * g,))


def make_complex(re, im):
    re, im = as_tensor(re), as_tensor(im)
    return Tensor(re.value + 1j * im.value, (re, im), lambda g: (np.real(g), np.imag(g)))


def tabs(a, floor: float = 0.0):
    """Magnitude; the gradient at zero is taken as zero."""
    a = as_tensor(a)
    mag = np.abs(a.value)
    safe = np.where(mag > floor, mag, 1.0)

    def back(g):
        return (np.where(mag > floor, g * a.value / safe, 0.0),)

    return Tensor(mag, (a,), back)


def abs2(a):
    a = as_tensor(a)
    return Tensor(np.abs(a.value) ** 2, (a,), lambda g: (2.0 * g * a.value,))


def exp(a):
    a = as_tensor(a)
    y = np.exp(a.value)
    return Tensor(y, (a,), lambda g: (g * np.conj(y),))


def log(a):
    a = as_tensor(a)
    return Tensor(np.log(a.value), (a,), lambda g: (g / np.conj(a.value),))


def sqrt(a):
    a = as_tensor(a)
    y = np.sqrt(a.value)
    return Tensor(y, (a,), lambda g: (g / (2.0 * np.conj(y)),))


def tanh(a):
    a = as_tensor(a)
    y = np.tanh(a.value)
    return Tensor(y, (a,), lambda g: (g * (1.0 - y ** 2),))


def sin(a):
    a = as_tensor(a)
    return Tensor(np.sin(a.value), (a,), lambda g: (g * np.cos(a.value),))


def cos(a):
    a = as_tensor(a)
    return Tensor(np.cos(a.value), (a,), lambda g: (-g * np.sin(a.value),))


def relu(a):
    a = as_tensor(a)
    mask = a.value > 0
    return Tensor(np.where(mask, a.value, 0.0), (a,), lambda g: (g * mask,))


def maximum(a, c: float):
    a = as_tensor(a)
    mask = a.value > c
    return Tensor(np.where(mask, a.value, c), (a,), lambda g: (g * mask,))


def tsum(a, axis=None, keepdims=False):
    a = as_tensor(a)
    def back(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.shape),)

    return Tensor(np.sum(a.value, axis=axis, keepdims=keepdims), (a,), back)


def reshape(a, shape):
    a = as_tensor(a)
    return Tensor(a.value.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def transpose(a, axes=None):
    a = as_tensor(a)
    inv = None if axes is None else np.argsort(axes)
    return Tensor(np.transpose(a.value, axes), (a,), lambda g: (np.transpose(g, inv),))


def getitem(a, idx):
    a = as_tensor(a)
    def back(g):
        out = np.zeros(a.shape, dtype=np.result_type(g, a.value))
        np.add.at(out, idx, g)
        return (out,)

    return Tensor(a.value[idx], (a,), back)


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return Tensor(np.concatenate([t.value for t in tensors], axis=axis), tuple(tensors),
                  lambda g: tuple(np.split(g, sizes, axis=axis)))


def stack(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    return Tensor(np.stack([t.value for t in tensors], axis=axis), tuple(tensors),
                  lambda g: tuple(np.moveaxis(g, axis, 0)))


def gather_rows(a, index):
    """``a[index]`` for an integer index vector along axis 0."""
    index = np.asarray(index, dtype=np.int64)
    return getitem(a, (index,))


def segment_sum(a, segments, n_segments):
    """Sum rows of ``a`` (E, ...) into ``n_segments`` buckets."""
    from . import kernels

    segments = np.asarray(segments, dtype=np.int64)
    flat = a.value.reshape(a.shape[0], -1)
    if np.iscomplexobj(flat):
        out = np.zeros((n_segments, flat.shape[1]), complex)
        np.add.at(out, segments, flat)
    else:
        out = kernels.segment_sum(flat, segments, n_segments)
    out = out.reshape((n_segments,) + a.shape[1:])
    return Tensor(out, (a,), lambda g: (g[segments],))


def detach(a):
    return Tensor(a.value.copy())
