"""Dense float64 tensors with reverse-mode automatic differentiation.

A small tape-based engine in the micrograd style, vectorized over numpy
arrays. All ops broadcast like numpy and are written against negative
(axis-relative) indices, so the same model code runs on a single example
or with any number of extra leading batch axes. That property is load
bearing: training batches videos on a leading axis, and the gradient
checker batches finite-difference probes the same way.

Training and gradient checking run in float64 throughout; 32-bit floats
only appear in serialized artifacts.
"""

from __future__ import annotations

import contextlib

import numpy as np

from vctext.errors import NonFiniteError, ShapeError

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block (cheap forward-only eval)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    """A dense float64 array plus an optional gradient and tape entry."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        d = np.asarray(data, dtype=np.float64)
        if not np.isfinite(d).all():
            raise NonFiniteError("tensor created from non-finite values")
        self.data = d
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple = ()
        self._backward = None

    @classmethod
    def _make(cls, data: np.ndarray, parents: tuple, backward) -> "Tensor":
        out = object.__new__(cls)
        out.data = data
        out.grad = None
        if _GRAD_ENABLED and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._backward = backward
        else:
            out.requires_grad = False
            out._parents = ()
            out._backward = None
        return out

    # ---- introspection ----

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def detach(self) -> "Tensor":
        out = object.__new__(Tensor)
        out.data = self.data
        out.grad = None
        out.requires_grad = False
        out._parents = ()
        out._backward = None
        return out

    def assert_finite(self, where: str = "tensor") -> "Tensor":
        if not np.isfinite(self.data).all():
            raise NonFiniteError(f"non-finite values in {where}")
        return self

    # ---- autodiff ----

    def _accum(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self) -> None:
        """Reverse-mode sweep seeded with d(self)/d(self) = 1; self must be scalar."""
        if self.data.size != 1:
            raise ShapeError(f"backward() needs a scalar, got shape {self.data.shape}")
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited and p._parents:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # ---- arithmetic ----

    def __add__(self, other):
        other = as_tensor(other)
        try:
            data = self.data + other.data
        except ValueError as e:
            raise ShapeError(str(e)) from e

        def bw(g, a=self, b=other):
            if a.requires_grad:
                a._accum(_unbroadcast(g, a.data.shape))
            if b.requires_grad:
                b._accum(_unbroadcast(g, b.data.shape))

        return Tensor._make(data, (self, other), bw)

    __radd__ = __add__

    def __neg__(self):
        def bw(g, a=self):
            if a.requires_grad:
                a._accum(-g)

        return Tensor._make(-self.data, (self,), bw)

    def __sub__(self, other):
        return self + (-as_tensor(other))

    def __rsub__(self, other):
        return as_tensor(other) + (-self)

    def __mul__(self, other):
        other = as_tensor(other)
        try:
            data = self.data * other.data
        except ValueError as e:
            raise ShapeError(str(e)) from e

        def bw(g, a=self, b=other):
            if a.requires_grad:
                a._accum(_unbroadcast(g * b.data, a.data.shape))
            if b.requires_grad:
                b._accum(_unbroadcast(g * a.data, b.data.shape))

        return Tensor._make(data, (self, other), bw)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_tensor(other)
        try:
            data = self.data / other.data
        except ValueError as e:
            raise ShapeError(str(e)) from e

        def bw(g, a=self, b=other, out=data):
            if a.requires_grad:
                a._accum(_unbroadcast(g / b.data, a.data.shape))
            if b.requires_grad:
                b._accum(_unbroadcast(-g * out / b.data, b.data.shape))

        return Tensor._make(data, (self, other), bw)

    def __rtruediv__(self, other):
        return as_tensor(other) / self

    def __pow__(self, exponent):
        if not isinstance(exponent, (int, float)):
            raise ShapeError("only scalar exponents are supported")
        data = self.data ** exponent

        def bw(g, a=self, c=float(exponent)):
            if a.requires_grad:
                a._accum(g * c * a.data ** (c - 1.0))

        return Tensor._make(data, (self,), bw)

    def __matmul__(self, other):
        other = as_tensor(other)
        if self.data.ndim < 2 or other.data.ndim < 2:
            raise ShapeError("matmul operands must have at least 2 dimensions")
        try:
            data = self.data @ other.data
        except ValueError as e:
            raise ShapeError(str(e)) from e

        def bw(g, a=self, b=other):
            if a.requires_grad:
                a._accum(_unbroadcast(g @ b.data.swapaxes(-1, -2), a.data.shape))
            if b.requires_grad:
                b._accum(_unbroadcast(a.data.swapaxes(-1, -2) @ g, b.data.shape))

        return Tensor._make(data, (self, other), bw)

    # ---- elementwise transcendental ----

    def exp(self):
        data = np.exp(self.data)

        def bw(g, a=self, out=data):
            if a.requires_grad:
                a._accum(g * out)

        return Tensor._make(data, (self,), bw)

    def log(self):
        data = np.log(self.data)

        def bw(g, a=self):
            if a.requires_grad:
                a._accum(g / a.data)

        return Tensor._make(data, (self,), bw)

    def tanh(self):
        data = np.tanh(self.data)

        def bw(g, a=self, out=data):
            if a.requires_grad:
                a._accum(g * (1.0 - out * out))

        return Tensor._make(data, (self,), bw)

    def sigmoid(self):
        data = _stable_sigmoid(self.data)

        def bw(g, a=self, out=data):
            if a.requires_grad:
                a._accum(g * out * (1.0 - out))

        return Tensor._make(data, (self,), bw)

    def softplus(self):
        x = self.data
        data = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))

        def bw(g, a=self):
            if a.requires_grad:
                a._accum(g * _stable_sigmoid(a.data))

        return Tensor._make(data, (self,), bw)

    def sqrt(self):
        data = np.sqrt(self.data)

        def bw(g, a=self, out=data):
            if a.requires_grad:
                a._accum(g * 0.5 / out)

        return Tensor._make(data, (self,), bw)

    # ---- reductions ----

    def sum(self, axis=None, keepdims: bool = False):
        data = self.data.sum(axis=axis, keepdims=keepdims)

        def bw(g, a=self, ax=axis, kd=keepdims):
            if not a.requires_grad:
                return
            if ax is None:
                a._accum(np.broadcast_to(g, a.data.shape).copy())
                return
            if not kd:
                axes = ax if isinstance(ax, tuple) else (ax,)
                g = np.expand_dims(g, axes)
            a._accum(np.broadcast_to(g, a.data.shape).copy())

        return Tensor._make(data, (self,), bw)

    def mean(self, axis=None, keepdims: bool = False):
        if axis is None:
            count = self.data.size
        else:
            axes = axis if isinstance(axis, tuple) else (axis,)
            count = 1
            for ax in axes:
                count *= self.data.shape[ax]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    # ---- shape manipulation ----

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        try:
            data = self.data.reshape(shape)
        except ValueError as e:
            raise ShapeError(str(e)) from e

        def bw(g, a=self):
            if a.requires_grad:
                a._accum(g.reshape(a.data.shape))

        return Tensor._make(data, (self,), bw)

    def swapaxes(self, a: int, b: int):
        data = self.data.swapaxes(a, b)

        def bw(g, t=self, i=a, j=b):
            if t.requires_grad:
                t._accum(g.swapaxes(i, j))

        return Tensor._make(data, (self,), bw)

    def unsqueeze(self, axis: int):
        data = np.expand_dims(self.data, axis)

        def bw(g, a=self, ax=axis):
            if a.requires_grad:
                a._accum(np.squeeze(g, axis=ax))

        return Tensor._make(data, (self,), bw)

    def __getitem__(self, index):
        data = self.data[index]

        def bw(g, a=self, idx=index):
            if a.requires_grad:
                full = np.zeros_like(a.data)
                full[idx] += g  # basic indexing only: no repeated elements
                a._accum(full)

        return Tensor._make(data, (self,), bw)

    def take_along_last(self, indices: np.ndarray):
        """Gather along the trailing axis; indices must be unique per row."""
        idx = np.asarray(indices, dtype=np.intp)
        data = np.take_along_axis(self.data, idx, axis=-1)

        def bw(g, a=self, i=idx):
            if a.requires_grad:
                full = np.zeros_like(a.data)
                np.put_along_axis(full, np.broadcast_to(i, g.shape), g, axis=-1)
                a._accum(full)

        return Tensor._make(data, (self,), bw)

    def index_select(self, axis: int, indices) -> "Tensor":
        """Select rows along `axis` by integer index (repeats allowed)."""
        idx = np.asarray(indices, dtype=np.intp)
        data = np.take(self.data, idx, axis=axis)

        def bw(g, a=self, ax=axis, i=idx):
            if a.requires_grad:
                full = np.zeros_like(a.data)
                ax_norm = ax if ax >= 0 else a.data.ndim + ax
                np.add.at(full, (slice(None),) * ax_norm + (i,), g)
                a._accum(full)

        return Tensor._make(data, (self,), bw)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def concat(tensors: list[Tensor], axis: int = 0) -> Tensor:
    """Concatenate along `axis`, broadcasting the other axes like numpy ops."""
    tensors = [as_tensor(t) for t in tensors]
    ndim = max(t.data.ndim for t in tensors)
    ax = axis if axis >= 0 else ndim + axis
    padded = [(1,) * (ndim - t.data.ndim) + t.data.shape for t in tensors]
    target = [max(s[i] for s in padded) for i in range(ndim)]
    expanded = []
    for t, s in zip(tensors, padded):
        full = list(target)
        full[ax] = s[ax]
        try:
            expanded.append(np.broadcast_to(t.data.reshape(s), tuple(full)))
        except ValueError as e:
            raise ShapeError(f"concat cannot broadcast {t.data.shape} "
                             f"into {tuple(full)}") from e
    data = np.concatenate(expanded, axis=ax)
    sizes = [s[ax] for s in padded]
    offsets = np.cumsum([0] + sizes)

    def bw(g, ts=tensors, offs=offsets):
        sl = [slice(None)] * g.ndim
        for t, start, stop in zip(ts, offs[:-1], offs[1:]):
            if t.requires_grad:
                sl[ax] = slice(start, stop)
                t._accum(_unbroadcast(g[tuple(sl)], t.data.shape))

    return Tensor._make(data, tuple(tensors), bw)
