"""Dense tensors with reverse-mode automatic differentiation.

A :class:`Tensor` wraps a row-major numpy float buffer; building one from an
op records the parents and a backward closure, so :func:`backward` can
accumulate d(loss)/d(parameter) for every reachable node.  Training runs in
float32; gradient checking runs the same graph in float64.
"""

from __future__ import annotations

import struct
from contextlib import contextmanager
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import InvalidStep, NonScalarLoss, ShapeMismatch

_grad_enabled = True


@contextmanager
def no_grad():
    """Skip graph construction inside the block (pure evaluation)."""
    global _grad_enabled
    saved = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = saved


class Tensor:
    """A numpy buffer plus the bookkeeping needed for the reverse pass."""

    __slots__ = ("data", "grad", "_parents", "_backward_fn")

    def __init__(self, data, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        self.data: np.ndarray = arr
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward_fn: Callable[[np.ndarray], None] | None = None

    # -- introspection ---------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype})"

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeMismatch(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    # -- gradient plumbing -------------------------------------------------

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    # -- operator sugar ----------------------------------------------------

    def __add__(self, other):
        return add(self, _ensure(other, self.dtype))

    def __radd__(self, other):
        return add(_ensure(other, self.dtype), self)

    def __sub__(self, other):
        return sub(self, _ensure(other, self.dtype))

    def __rsub__(self, other):
        return sub(_ensure(other, self.dtype), self)

    def __mul__(self, other):
        return mul(self, _ensure(other, self.dtype))

    def __rmul__(self, other):
        return mul(_ensure(other, self.dtype), self)

    def __neg__(self):
        return mul(self, _ensure(-1.0, self.dtype))

    def __matmul__(self, other):
        return matmul(self, _ensure(other, self.dtype))


def _ensure(value, dtype) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=dtype))


def _make(data: np.ndarray, parents: tuple[Tensor, ...], backward_fn) -> Tensor:
    # Op outputs are always well-formed float arrays; skip __init__ checks.
    out = object.__new__(Tensor)
    out.data = data if isinstance(data, np.ndarray) else np.asarray(data)
    out.grad = None
    if _grad_enabled:
        out._parents = parents
        out._backward_fn = backward_fn
    else:
        out._parents = ()
        out._backward_fn = None
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the parent's shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# -- elementwise and linear ops ---------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    try:
        out = a.data + b.data
    except ValueError as exc:
        raise ShapeMismatch(f"add: {a.shape} vs {b.shape}") from exc

    def backward_fn(g):
        a._accumulate(_unbroadcast(g, a.shape))
        b._accumulate(_unbroadcast(g, b.shape))

    return _make(out, (a, b), backward_fn)


def sub(a: Tensor, b: Tensor) -> Tensor:
    try:
        out = a.data - b.data
    except ValueError as exc:
        raise ShapeMismatch(f"sub: {a.shape} vs {b.shape}") from exc

    def backward_fn(g):
        a._accumulate(_unbroadcast(g, a.shape))
        b._accumulate(_unbroadcast(-g, b.shape))

    return _make(out, (a, b), backward_fn)


def mul(a: Tensor, b: Tensor) -> Tensor:
    try:
        out = a.data * b.data
    except ValueError as exc:
        raise ShapeMismatch(f"mul: {a.shape} vs {b.shape}") from exc

    def backward_fn(g):
        a._accumulate(_unbroadcast(g * b.data, a.shape))
        b._accumulate(_unbroadcast(g * a.data, b.shape))

    return _make(out, (a, b), backward_fn)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul: {a.shape} @ {b.shape}")
    out = a.data @ b.data

    def backward_fn(g):
        a._accumulate(g @ b.data.T)
        b._accumulate(a.data.T @ g)

    return _make(out, (a, b), backward_fn)


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeMismatch(f"transpose: expected 2-d, got {a.shape}")

    def backward_fn(g):
        a._accumulate(g.T)

    return _make(a.data.T.copy(), (a,), backward_fn)


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not parts:
        raise ShapeMismatch("concat: no inputs")
    try:
        out = np.concatenate([p.data for p in parts], axis=axis)
    except ValueError as exc:
        raise ShapeMismatch(f"concat: {[p.shape for p in parts]}") from exc
    sizes = [p.shape[axis] if p.data.ndim else 1 for p in parts]
    offsets = np.cumsum(sizes)[:-1]

    def backward_fn(g):
        for part, piece in zip(parts, np.split(g, offsets, axis=axis)):
            part._accumulate(piece)

    return _make(out, tuple(parts), backward_fn)


def sigmoid(a: Tensor) -> Tensor:
    # exp of a non-positive argument cannot overflow.
    x = a.data
    t = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + t), t / (1.0 + t))

    def backward_fn(g):
        a._accumulate(g * out * (1.0 - out))

    return _make(out, (a,), backward_fn)


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)

    def backward_fn(g):
        a._accumulate(g * (1.0 - out * out))

    return _make(out, (a,), backward_fn)


def relu(a: Tensor) -> Tensor:
    out = np.maximum(a.data, 0)

    def backward_fn(g):
        a._accumulate(g * (a.data > 0))

    return _make(out, (a,), backward_fn)


def log(a: Tensor) -> Tensor:
    out = np.log(a.data)

    def backward_fn(g):
        a._accumulate(g / a.data)

    return _make(out, (a,), backward_fn)


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    out = np.clip(a.data, lo, hi)
    inside = (a.data >= lo) & (a.data <= hi)

    def backward_fn(g):
        a._accumulate(g * inside)

    return _make(out, (a,), backward_fn)


def tsum(a: Tensor) -> Tensor:
    out = a.data.sum(dtype=a.dtype)

    def backward_fn(g):
        a._accumulate(np.broadcast_to(g, a.shape).astype(a.dtype))

    return _make(np.asarray(out), (a,), backward_fn)


def mean(a: Tensor) -> Tensor:
    n = a.data.size
    out = a.data.sum(dtype=a.dtype) / n

    def backward_fn(g):
        a._accumulate((np.broadcast_to(g, a.shape) / n).astype(a.dtype))

    return _make(np.asarray(out), (a,), backward_fn)


def gather(table: Tensor, ids: np.ndarray) -> Tensor:
    """Select rows of a 2-d table by integer id; scatter-adds on backward."""
    ids = np.asarray(ids)
    if table.data.ndim != 2:
        raise ShapeMismatch(f"gather: table must be 2-d, got {table.shape}")
    out = table.data[ids]

    def backward_fn(g):
        if table.grad is None:
            table.grad = np.zeros_like(table.data)
        np.add.at(table.grad, ids, g)

    return _make(out, (table,), backward_fn)


# -- loss --------------------------------------------------------------------

BCE_EPS = 1e-7


def bce_loss(p: Tensor, y) -> Tensor:
    """Mean binary cross-entropy; probabilities clamped to [eps, 1-eps]."""
    y = np.asarray(y, dtype=p.dtype)
    if y.shape != p.shape:
        raise ShapeMismatch(f"bce_loss: {p.shape} vs labels {y.shape}")
    ph = clip(p, BCE_EPS, 1.0 - BCE_EPS)
    yt = Tensor(y)
    one = Tensor(np.asarray(1.0, dtype=p.dtype))
    return mean(-(yt * log(ph) + (one - yt) * log(one - ph)))


# -- reverse pass -------------------------------------------------------------


def backward(loss: Tensor) -> None:
    """Accumulate gradients of a scalar loss into every reachable leaf.

    Leaf tensors (parameters, inputs) keep accumulating across calls until
    explicitly zeroed; interior node gradients are scratch space and are
    released as the pass consumes them.  Each node's backward closure runs
    exactly once, in reverse topological order (iterative, so deep
    recurrent graphs do not hit the recursion limit).
    """
    if loss.data.size != 1:
        raise NonScalarLoss(f"loss has shape {loss.shape}")

    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))

    loss._accumulate(np.ones_like(loss.data))
    for node in reversed(order):
        if node._backward_fn is None:
            continue
        g = node.grad
        if g is None:
            continue
        node._backward_fn(g)
        # Interior grads were only needed to feed the parents.
        node.grad = None


# -- finiteness ----------------------------------------------------------------


def has_nonfinite(x) -> bool:
    """True if any NaN/Inf is present in a tensor or array."""
    arr = x.data if isinstance(x, Tensor) else np.asarray(x)
    return not bool(np.isfinite(arr).all())


# -- serialization -------------------------------------------------------------


def tensor_to_bytes(arr: np.ndarray) -> bytes:
    """Rank and dims as little-endian u64, then values as little-endian f32."""
    arr = np.asarray(arr)
    header = struct.pack("<Q", arr.ndim) + struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return header + np.ascontiguousarray(arr, dtype="<f4").tobytes()


def tensor_from_bytes(buf: bytes, offset: int = 0) -> tuple[np.ndarray, int]:
    """Inverse of :func:`tensor_to_bytes`; returns (array, next offset)."""
    if len(buf) < offset + 8:
        raise ValueError("truncated tensor header")
    (rank,) = struct.unpack_from("<Q", buf, offset)
    offset += 8
    if len(buf) < offset + 8 * rank:
        raise ValueError("truncated tensor dims")
    dims = struct.unpack_from(f"<{rank}Q", buf, offset)
    offset += 8 * rank
    count = int(np.prod(dims)) if rank else 1
    nbytes = 4 * count
    if len(buf) < offset + nbytes:
        raise ValueError("truncated tensor data")
    arr = np.frombuffer(buf, dtype="<f4", count=count, offset=offset).reshape(dims)
    return arr.astype(np.float32), offset + nbytes


# -- finite differences ---------------------------------------------------------


def finite_diff_check(
    f: Callable[[], Tensor],
    params: Iterable[Tensor],
    h: float = 1e-5,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``f`` re-evaluates the scalar loss from the current parameter values.
    Run with float64 parameters; float32 roundoff swamps the comparison.
    """
    if h <= 0:
        raise InvalidStep(f"step must be positive, got {h}")
    params = list(params)
    for p in params:
        p.zero_grad()
    backward(f())
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]

    worst = 0.0
    with no_grad():
        for p, a in zip(params, analytic):
            aflat = a.reshape(-1)
            for i in range(p.data.size):
                idx = np.unravel_index(i, p.data.shape)
                saved = p.data[idx]
                p.data[idx] = saved + h
                up = f().item()
                p.data[idx] = saved - h
                down = f().item()
                p.data[idx] = saved
                numeric = (up - down) / (2.0 * h)
                denom = max(abs(aflat[i]), abs(numeric), 1e-8)
                worst = max(worst, abs(aflat[i] - numeric) / denom)
    for p in params:
        p.zero_grad()
    return worst
