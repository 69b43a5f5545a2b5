"""Minimal reverse-mode automatic differentiation over float64 numpy arrays.

Only the handful of primitives the fusion kernel needs are provided.  Each
op records its parents and a closure mapping the output gradient to parent
gradients; :meth:`Tensor.backward` walks the graph in reverse topological
order.
"""
from __future__ import annotations

import numpy as np


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")
    __array_priority__ = 100  # make ndarray @ Tensor defer to Tensor

    def __init__(self, data, requires_grad=False, parents=(), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self._parents = parents
        self._backward = backward

    def __repr__(self):
        return f"Tensor(shape={self.shape})"

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def T(self):
        return self.transpose()

    def numpy(self):
        return self.data

    # graph traversal
    def backward(self, grad=None):
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a gradient needs a scalar output")
            grad = np.ones_like(self.data)
        order, seen = [], set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        grads = {id(self): np.asarray(grad, dtype=np.float64)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = grads[key] + pg if key in grads else pg

    # arithmetic
    def __add__(self, other):
        other = as_tensor(other)
        a, b = self.shape, other.shape
        return Tensor(self.data + other.data, parents=(self, other),
                      backward=lambda g: (_unbroadcast(g, a), _unbroadcast(g, b)))

    __radd__ = __add__

    def __neg__(self):
        return Tensor(-self.data, parents=(self,), backward=lambda g: (-g,))

    def __sub__(self, other):
        return self + (-as_tensor(other))

    def __rsub__(self, other):
        return as_tensor(other) + (-self)

    def __mul__(self, other):
        other = as_tensor(other)
        x, y = self.data, other.data
        return Tensor(x * y, parents=(self, other),
                      backward=lambda g: (_unbroadcast(g * y, x.shape),
                                          _unbroadcast(g * x, y.shape)))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return self * other ** -1.0
        return self * (1.0 / other)

    def __pow__(self, p):
        p = float(p)
        x = self.data
        return Tensor(x ** p, parents=(self,), backward=lambda g: (g * p * x ** (p - 1.0),))

    def __matmul__(self, other):
        other = as_tensor(other)
        x, y = self.data, other.data

        def back(g):
            gx = g @ np.swapaxes(y, -1, -2) if y.ndim > 1 else np.multiply.outer(g, y)
            gy = np.swapaxes(x, -1, -2) @ g if x.ndim > 1 else np.multiply.outer(x, g)
            return _unbroadcast(gx, x.shape), _unbroadcast(gy, y.shape)
        return Tensor(x @ y, parents=(self, other), backward=back)

    def __rmatmul__(self, other):
        return as_tensor(other) @ self

    # shape ops
    def sum(self, axis=None, keepdims=False):
        shape = self.shape

        def back(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape).copy(),)
        return Tensor(self.data.sum(axis=axis, keepdims=keepdims), parents=(self,), backward=back)

    def mean(self, axis=None, keepdims=False):
        n = self.data.size if axis is None else np.prod([self.shape[a] for a in np.atleast_1d(axis)])
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / float(n))

    def reshape(self, *shape):
        old = self.shape
        return Tensor(self.data.reshape(*shape), parents=(self,),
                      backward=lambda g: (g.reshape(old),))

    def transpose(self, *axes):
        axes = axes or tuple(reversed(range(self.ndim)))
        inverse = np.argsort(axes)
        return Tensor(self.data.transpose(axes), parents=(self,),
                      backward=lambda g: (g.transpose(inverse),))

    def __getitem__(self, index):
        shape = self.shape

        def back(g):
            out = np.zeros(shape)
            np.add.at(out, index, g)
            return (out,)
        return Tensor(self.data[index], parents=(self,), backward=back)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(data) -> Tensor:
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True)


def exp(x: Tensor) -> Tensor:
    y = np.exp(x.data)
    return Tensor(y, parents=(x,), backward=lambda g: (g * y,))


def log(x: Tensor) -> Tensor:
    d = x.data
    return Tensor(np.log(d), parents=(x,), backward=lambda g: (g / d,))


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return Tensor(y, parents=(x,), backward=lambda g: (g * (1.0 - y * y),))


def concat(items, axis=0) -> Tensor:
    items = [as_tensor(t) for t in items]
    cuts = np.cumsum([t.shape[axis] for t in items])[:-1]
    return Tensor(np.concatenate([t.data for t in items], axis=axis), parents=tuple(items),
                  backward=lambda g: tuple(np.split(g, cuts, axis=axis)))


def softmax(x: Tensor, axis=-1) -> Tensor:
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)
    return Tensor(y, parents=(x,),
                  backward=lambda g: (y * (g - (g * y).sum(axis=axis, keepdims=True)),))


def gelu(x: Tensor) -> Tensor:
    """Tanh approximation of the Gaussian error linear unit."""
    c = np.sqrt(2.0 / np.pi)
    inner = c * (x + 0.044715 * x ** 3.0)
    return 0.5 * x * (1.0 + tanh(inner))


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, axis=-1, eps=1e-6) -> Tensor:
    mu = x.mean(axis=axis, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=axis, keepdims=True)
    return xc * (var + eps) ** -0.5 * gain + bias


def conv2d(x: Tensor, w: Tensor, b: Tensor, stride=1, pad=0) -> Tensor:
    """Single-image 2-D convolution: ``x`` is ``(Cin, H, W)``, ``w`` is
    ``(Cout, Cin, kh, kw)`` and ``b`` is ``(Cout,)``; zero padding."""
    cin, h, wd = x.shape
    cout, cin_w, kh, kw = w.shape
    if cin != cin_w:
        raise ValueError(f"conv expects {cin_w} input channels, got {cin}")
    xp = np.pad(x.data, ((0, 0), (pad, pad), (pad, pad)))
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (wd + 2 * pad - kw) // stride + 1
    cols = np.empty((cin, kh, kw, oh, ow))
    for ky in range(kh):
        for kx in range(kw):
            cols[:, ky, kx] = xp[:, ky:ky + stride * oh:stride, kx:kx + stride * ow:stride]
    cols2 = cols.reshape(cin * kh * kw, oh * ow)
    wmat = w.data.reshape(cout, -1)
    out = (wmat @ cols2 + b.data[:, None]).reshape(cout, oh, ow)

    def back(g):
        g2 = g.reshape(cout, -1)
        gw = (g2 @ cols2.T).reshape(w.shape)
        gb = g2.sum(axis=1)
        gcols = (wmat.T @ g2).reshape(cin, kh, kw, oh, ow)
        gxp = np.zeros_like(xp)
        for ky in range(kh):
            for kx in range(kw):
                gxp[:, ky:ky + stride * oh:stride, kx:kx + stride * ow:stride] += gcols[:, ky, kx]
        gx = gxp[:, pad:pad + h, pad:pad + wd]
        return gx, gw, gb
    return Tensor(out, parents=(x, w, b), backward=back)


def avg_pool2(x: Tensor) -> Tensor:
    c, h, w = x.shape
    if h % 2 or w % 2:
        raise ValueError(f"2x2 pooling needs even dimensions, got {h}x{w}")
    return x.reshape(c, h // 2, 2, w // 2, 2).mean(axis=(2, 4))


def upsample_nearest(x: Tensor, factor: int) -> Tensor:
    """Repeat each pixel ``factor`` times along both trailing axes."""
    y = np.repeat(np.repeat(x.data, factor, axis=-2), factor, axis=-1)
    lead = x.shape[:-2]
    h, w = x.shape[-2:]

    def back(g):
        return (g.reshape(*lead, h, factor, w, factor).sum(axis=(-3, -1)),)
    return Tensor(y, parents=(x,), backward=back)
