"""A small tape-based reverse-mode autodiff over numpy arrays.

Every :class:`Tensor` produced by an operation remembers its parents and a
closure that pushes the upstream gradient back to them. :meth:`Tensor.backward`
walks the resulting DAG once in reverse topological order.

Only what the DG residual and the residual dense network need is here:
broadcasting arithmetic, matmul against constants or tensors, indexing,
reshaping, reductions, ``abs``/``maximum``/``relu``, concatenation and a
same-padded 1-D convolution.
"""

from __future__ import annotations

import numpy as np


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    __array_ufunc__ = None  # make ndarray <op> Tensor defer to Tensor

    def __init__(self, data, requires_grad: bool = False, name: str | None = None,
                 _parents: tuple = (), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self.grad: np.ndarray | None = None
        self.name = name
        self._parents = _parents if self.requires_grad else ()
        self._backward = _backward if self.requires_grad else None

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def T(self) -> Tensor:
        return self.transpose()

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g: np.ndarray):
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    # -- graph traversal ---------------------------------------------------

    def backward(self, grad=None):
        if grad is None:
            if self.data.size != 1:
                raise ValueError(f"backward() without a seed needs a scalar, got shape {self.shape}")
            grad = np.ones_like(self.data)
        if not self.requires_grad:
            return
        order: list[Tensor] = []
        seen: set[int] = set()
        stack = [(self, False)]
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
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        # interior nodes carry transient grads; leaves accumulate across calls
        upstream = {id(self): np.asarray(grad, dtype=np.float64)}
        for node in reversed(order):
            g = upstream.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node._accumulate(g)
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                if id(parent) in upstream:
                    upstream[id(parent)] = upstream[id(parent)] + pg
                else:
                    upstream[id(parent)] = pg

    # -- arithmetic ----------------------------------------------------------

    def __add__(self, other):
        other = as_tensor(other)
        a_shape, b_shape = self.shape, other.shape
        return Tensor(self.data + other.data, _parents=(self, other),
                      _backward=lambda g: (_unbroadcast(g, a_shape), _unbroadcast(g, b_shape)))

    __radd__ = __add__

    def __neg__(self):
        return Tensor(-self.data, _parents=(self,), _backward=lambda g: (-g,))

    def __sub__(self, other):
        return self + (-as_tensor(other))

    def __rsub__(self, other):
        return as_tensor(other) + (-self)

    def __mul__(self, other):
        other = as_tensor(other)
        a, b = self, other

        def back(g):
            return (_unbroadcast(g * b.data, a.shape) if a.requires_grad else None,
                    _unbroadcast(g * a.data, b.shape) if b.requires_grad else None)
        return Tensor(a.data * b.data, _parents=(a, b), _backward=back)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_tensor(other)
        a, b = self, other

        def back(g):
            return (_unbroadcast(g / b.data, a.shape) if a.requires_grad else None,
                    _unbroadcast(-g * a.data / b.data ** 2, b.shape) if b.requires_grad else None)
        return Tensor(a.data / b.data, _parents=(a, b), _backward=back)

    def __rtruediv__(self, other):
        return as_tensor(other) / self

    def __pow__(self, p: float):
        x = self
        return Tensor(x.data ** p, _parents=(x,),
                      _backward=lambda g: (g * p * x.data ** (p - 1),))

    def __abs__(self):
        x = self
        return Tensor(np.abs(x.data), _parents=(x,), _backward=lambda g: (g * np.sign(x.data),))

    def __matmul__(self, other):
        other = as_tensor(other)
        a, b = self, other

        def back(g):
            ga = g @ np.swapaxes(b.data, -1, -2) if a.requires_grad else None
            gb = np.swapaxes(a.data, -1, -2) @ g if b.requires_grad else None
            return ga, gb
        return Tensor(a.data @ b.data, _parents=(a, b), _backward=back)

    def __rmatmul__(self, other):
        return as_tensor(other) @ self

    # -- shape manipulation -----------------------------------------------

    def __getitem__(self, idx):
        x = self

        def back(g):
            full = np.zeros_like(x.data)
            np.add.at(full, idx, g)
            return (full,)
        return Tensor(x.data[idx], _parents=(x,), _backward=back)

    def reshape(self, *shape):
        x = self
        return Tensor(x.data.reshape(*shape), _parents=(x,),
                      _backward=lambda g: (g.reshape(x.shape),))

    def transpose(self):
        return Tensor(self.data.T, _parents=(self,), _backward=lambda g: (g.T,))

    def sum(self, axis=None, keepdims: bool = False):
        x = self

        def back(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, x.shape),)
        return Tensor(x.data.sum(axis=axis, keepdims=keepdims), _parents=(x,), _backward=back)

    def mean(self, axis=None, keepdims: bool = False):
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def is_tensor(x) -> bool:
    return isinstance(x, Tensor)


def value(x) -> np.ndarray:
    """Underlying array of a tensor, or the array itself."""
    return x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


def maximum(a, b):
    """Elementwise max; the gradient goes to ``a`` on ties."""
    if not (is_tensor(a) or is_tensor(b)):
        return np.maximum(a, b)
    a, b = as_tensor(a), as_tensor(b)
    pick_a = a.data >= b.data

    def back(g):
        return (_unbroadcast(np.where(pick_a, g, 0.0), a.shape),
                _unbroadcast(np.where(pick_a, 0.0, g), b.shape))
    return Tensor(np.maximum(a.data, b.data), _parents=(a, b), _backward=back)


def absolute(x):
    return abs(x) if is_tensor(x) else np.abs(x)


def relu(x: Tensor) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    return Tensor(np.where(mask, x.data, 0.0), _parents=(x,),
                  _backward=lambda g: (np.where(mask, g, 0.0),))


def concat(tensors, axis: int = 0):
    if not any(is_tensor(t) for t in tensors):
        return np.concatenate(tensors, axis=axis)
    tensors = [as_tensor(t) for t in tensors]
    splits = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def back(g):
        return tuple(np.split(g, splits, axis=axis))
    return Tensor(np.concatenate([t.data for t in tensors], axis=axis),
                  _parents=tuple(tensors), _backward=back)


def stack(tensors, axis: int = 0):
    if not any(is_tensor(t) for t in tensors):
        return np.stack(tensors, axis=axis)
    expanded = []
    for t in tensors:
        t = as_tensor(t)
        shape = list(t.shape)
        shape.insert(axis if axis >= 0 else len(shape) + 1 + axis, 1)
        expanded.append(t.reshape(*shape))
    return concat(expanded, axis=axis)


def where(mask, a, b):
    """``mask ? a : b`` with a constant boolean mask."""
    mask = np.asarray(mask, dtype=bool)
    if not (is_tensor(a) or is_tensor(b)):
        return np.where(mask, a, b)
    a, b = as_tensor(a), as_tensor(b)
    return Tensor(np.where(mask, a.data, b.data), _parents=(a, b),
                  _backward=lambda g: (_unbroadcast(np.where(mask, g, 0.0), a.shape),
                                       _unbroadcast(np.where(mask, 0.0, g), b.shape)))


def _pad(x: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return x
    xp = np.zeros((x.shape[0], x.shape[1] + 2 * pad))
    xp[:, pad:pad + x.shape[1]] = x
    return xp


def conv1d(x, weight, bias=None) -> Tensor:
    """Same-padded 1-D cross-correlation.

    ``x`` is (c_in, n), ``weight`` is (c_out, c_in, k) with odd ``k`` and
    ``bias`` is (c_out,). Padding is with zeros. Computed as one matmul per
    kernel tap against a shifted view of the padded input.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    c_out, c_in, k = weight.shape
    if x.ndim != 2 or x.shape[0] != c_in:
        raise ValueError(f"conv1d: input has shape {x.shape}, weight expects {c_in} channels")
    if k % 2 == 0:
        raise ValueError(f"conv1d: kernel size must be odd, got {k}")
    n = x.shape[1]
    pad = (k - 1) // 2
    xp = _pad(x.data, pad)
    taps = [np.ascontiguousarray(weight.data[:, :, j]) for j in range(k)]
    out = taps[0] @ xp[:, 0:n]
    for j in range(1, k):
        out += taps[j] @ xp[:, j:j + n]
    parents = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        out += bias.data[:, None]
        parents.append(bias)

    def back(g):
        gw = None
        if weight.requires_grad:
            gw = np.empty(weight.shape)
            for j in range(k):
                gw[:, :, j] = g @ xp[:, j:j + n].T
        gx = None
        if x.requires_grad:
            gxp = np.zeros((c_in, n + 2 * pad))
            for j in range(k):
                gxp[:, j:j + n] += taps[j].T @ g
            gx = gxp[:, pad:pad + n]
        grads = [gx, gw]
        if bias is not None:
            grads.append(g.sum(axis=1))
        return tuple(grads)
    return Tensor(out, _parents=tuple(parents), _backward=back)
