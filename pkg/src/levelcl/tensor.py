"""Dense float64 tensors with reverse-mode automatic differentiation.

The op set is deliberately small: exactly what a small convolutional encoder
and a softmax-style contrastive loss need. Values are always 64-bit floats;
gradients accumulate into ``.grad`` buffers on backward passes. Graphs are
built eagerly through closures and freed once the tensors go out of scope.
"""

from __future__ import annotations

from contextlib import contextmanager
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import ContractViolationError, DegenerateInputError

Array = np.ndarray

_grad_enabled = True


@contextmanager
def no_grad() -> Iterator[None]:
    """Disable graph construction inside the block (inference / export)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """A numpy-backed node in a reverse-mode differentiation graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: Array | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[], None] | None = None

    # -- introspection -------------------------------------------------

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

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # -- graph machinery -------------------------------------------------

    def _accumulate(self, g: Array) -> None:
        if self.grad is None:
            # copy: g may alias the child's grad buffer
            self.grad = np.array(g, dtype=np.float64)
        else:
            self.grad += g

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into every reachable leaf's ``.grad``.

        The root must hold a single scalar value.
        """
        if self.size != 1:
            raise ContractViolationError(
                f"backward() requires a scalar root, got shape {self.shape}"
            )
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))
        self._accumulate(np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward()

    # -- operator sugar ----------------------------------------------------

    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return add(self, neg(_as_tensor(other)))

    def __rsub__(self, other):
        return add(_as_tensor(other), neg(self))

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    def __rmul__(self, other):
        return mul(_as_tensor(other), self)

    def __neg__(self):
        return neg(self)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise ContractViolationError("tensor/tensor division is not supported")
        return mul(self, Tensor(1.0 / float(other)))

    def __matmul__(self, other):
        return matmul(self, _as_tensor(other))


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: Array, parents: Sequence[Tensor], backward: Callable[[], None]) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(g: Array, shape: tuple[int, ...]) -> Array:
    """Sum g down to ``shape`` (inverse of numpy broadcasting)."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def forward_backward(root: Tensor, leaves: Sequence[Tensor]) -> list[Array]:
    """Run a backward pass from a scalar root and return fresh leaf gradients.

    Leaves that do not participate in the graph receive zeros.
    """
    for leaf in leaves:
        leaf.grad = None
    root.backward()
    return [
        leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data)
        for leaf in leaves
    ]


# -- elementwise ops --------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    data = a.data + b.data

    def backward():
        g = out.grad
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))

    out = _make(data, (a, b), backward)
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    data = a.data * b.data

    def backward():
        g = out.grad
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.shape))

    out = _make(data, (a, b), backward)
    return out


def neg(a: Tensor) -> Tensor:
    def backward():
        a._accumulate(-out.grad)

    out = _make(-a.data, (a,), backward)
    return out


def relu(a: Tensor) -> Tensor:
    data = np.maximum(a.data, 0.0)

    def backward():
        a._accumulate(out.grad * (a.data > 0.0))

    out = _make(data, (a,), backward)
    return out


def exp(a: Tensor) -> Tensor:
    data = np.exp(a.data)

    def backward():
        a._accumulate(out.grad * data)

    out = _make(data, (a,), backward)
    return out


def log(a: Tensor) -> Tensor:
    def backward():
        a._accumulate(out.grad / a.data)

    out = _make(np.log(a.data), (a,), backward)
    return out


# -- shape and reduction ops --------------------------------------------------


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    def backward():
        a._accumulate(out.grad.reshape(a.shape))

    out = _make(a.data.reshape(shape), (a,), backward)
    return out


def transpose(a: Tensor) -> Tensor:
    if a.ndim != 2:
        raise ContractViolationError("transpose expects a 2-D tensor")

    def backward():
        a._accumulate(out.grad.T)

    out = _make(a.data.T, (a,), backward)
    return out


def _kept_shape(shape: tuple[int, ...], axis) -> tuple[int, ...]:
    if axis is None:
        return (1,) * len(shape)
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    axes = tuple(ax % len(shape) for ax in axes)
    return tuple(1 if i in axes else s for i, s in enumerate(shape))


def tensor_sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    data = a.data.sum(axis=axis, keepdims=keepdims)
    kept = _kept_shape(a.shape, axis)

    def backward():
        g = out.grad.reshape(kept)
        a._accumulate(np.broadcast_to(g, a.shape).copy())

    out = _make(data, (a,), backward)
    return out


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    data = a.data.mean(axis=axis, keepdims=keepdims)
    kept = _kept_shape(a.shape, axis)
    # elements reduced per output element
    count = max(a.size, 1) // max(int(np.prod(kept)), 1)

    def backward():
        g = out.grad.reshape(kept)
        a._accumulate(np.broadcast_to(g, a.shape) / count)

    out = _make(data, (a,), backward)
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2:
        raise ContractViolationError("matmul expects 2-D tensors")
    if a.shape[1] != b.shape[0]:
        raise ContractViolationError(
            f"matmul shape mismatch: {a.shape} @ {b.shape}"
        )
    data = a.data @ b.data

    def backward():
        g = out.grad
        if a.requires_grad:
            a._accumulate(g @ b.data.T)
        if b.requires_grad:
            b._accumulate(a.data.T @ g)

    out = _make(data, (a, b), backward)
    return out


def take_rows(a: Tensor, start: int, stop: int) -> Tensor:
    """Contiguous row slice out[i] = a[start + i]; rows stay in order."""
    if a.ndim != 2 or not 0 <= start <= stop <= a.shape[0]:
        raise ContractViolationError("take_rows expects a valid 2-D row range")
    data = a.data[start:stop].copy()

    def backward():
        ga = np.zeros_like(a.data)
        ga[start:stop] = out.grad
        a._accumulate(ga)

    out = _make(data, (a,), backward)
    return out


def take_cols(a: Tensor, idx: Array) -> Tensor:
    """Per-row column gather: out[i, j] = a[i, idx[i, j]]."""
    if a.ndim != 2 or idx.ndim != 2 or idx.shape[0] != a.shape[0]:
        raise ContractViolationError("take_cols expects (B,N) data and (B,K) indices")
    rows = np.arange(a.shape[0])[:, None]
    data = a.data[rows, idx]

    def backward():
        ga = np.zeros_like(a.data)
        np.add.at(ga, (np.broadcast_to(rows, idx.shape), idx), out.grad)
        a._accumulate(ga)

    out = _make(data, (a,), backward)
    return out


def l2_normalize(a: Tensor, eps: float = 1e-12) -> Tensor:
    """Scale every row of a 2-D tensor to unit Euclidean norm."""
    if a.ndim != 2:
        raise ContractViolationError("l2_normalize expects a 2-D tensor")
    norms = np.sqrt((a.data * a.data).sum(axis=1, keepdims=True))
    if a.shape[0] and norms.min() < eps:
        raise DegenerateInputError("l2_normalize received a (near-)zero row")
    data = a.data / norms

    def backward():
        g = out.grad
        inner = (g * data).sum(axis=1, keepdims=True)
        a._accumulate((g - data * inner) / norms)

    out = _make(data, (a,), backward)
    return out


def row_logsumexp(a: Tensor) -> Tensor:
    """Numerically stable log(sum(exp(row))) for each row of a (B, N) tensor.

    The row max is treated as a constant shift; its gradient contribution
    cancels analytically, so only the softmax term propagates.
    """
    if a.ndim != 2 or a.shape[1] < 1:
        raise ContractViolationError("row_logsumexp expects a (B, N>=1) tensor")
    shift = a.data.max(axis=1, keepdims=True)
    shifted = a - Tensor(shift)
    total = tensor_sum(exp(shifted), axis=1)
    return log(total) + Tensor(shift[:, 0])


# -- spatial ops -------------------------------------------------------------


def conv2d(x: Tensor, w: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """2-D cross-correlation of (B,C,H,W) input with (F,C,kh,kw) filters."""
    if x.ndim != 4 or w.ndim != 4:
        raise ContractViolationError("conv2d expects 4-D input and weight tensors")
    if x.shape[1] != w.shape[1]:
        raise ContractViolationError(
            f"conv2d channel mismatch: input {x.shape}, weight {w.shape}"
        )
    if stride not in (1, 2):
        raise ContractViolationError("conv2d supports stride 1 or 2 only")
    batch, _, height, width = x.shape
    filters, channels, kh, kw = w.shape
    if padding:
        xp = np.zeros(
            (batch, channels, height + 2 * padding, width + 2 * padding), dtype=np.float64
        )
        xp[:, :, padding : padding + height, padding : padding + width] = x.data
    else:
        xp = x.data
    hp, wp = xp.shape[2], xp.shape[3]
    if hp < kh or wp < kw:
        raise ContractViolationError("conv2d kernel larger than (padded) input")
    out_h = (hp - kh) // stride + 1
    out_w = (wp - kw) // stride + 1
    windows = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    windows = windows[:, :, ::stride, ::stride]  # (B, C, out_h, out_w, kh, kw)
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(
        batch * out_h * out_w, channels * kh * kw
    )
    wmat = w.data.reshape(filters, channels * kh * kw)
    data = (cols @ wmat.T).reshape(batch, out_h, out_w, filters).transpose(0, 3, 1, 2)

    def backward():
        g = out.grad.transpose(0, 2, 3, 1).reshape(batch * out_h * out_w, filters)
        if w.requires_grad:
            w._accumulate((g.T @ cols).reshape(filters, channels, kh, kw))
        if x.requires_grad:
            gcols = (g @ wmat).reshape(batch, out_h, out_w, channels, kh, kw)
            gxp = np.zeros_like(xp)
            for ky in range(kh):
                for kx in range(kw):
                    gxp[
                        :,
                        :,
                        ky : ky + stride * out_h : stride,
                        kx : kx + stride * out_w : stride,
                    ] += gcols[:, :, :, :, ky, kx].transpose(0, 3, 1, 2)
            if padding:
                gx = gxp[:, :, padding : padding + height, padding : padding + width]
            else:
                gx = gxp
            x._accumulate(gx)

    out = _make(data, (x, w), backward)
    return out


def max_pool2d(x: Tensor, window: int = 2) -> Tensor:
    """Non-overlapping max pooling over (B,C,H,W); H and W must divide evenly."""
    if x.ndim != 4:
        raise ContractViolationError("max_pool2d expects a 4-D tensor")
    batch, channels, height, width = x.shape
    if height % window or width % window:
        raise ContractViolationError("max_pool2d requires window to divide H and W")
    out_h, out_w = height // window, width // window
    tiles = x.data.reshape(batch, channels, out_h, window, out_w, window)
    tiles = tiles.transpose(0, 1, 2, 4, 3, 5).reshape(
        batch, channels, out_h, out_w, window * window
    )
    argmax = tiles.argmax(axis=-1)
    data = np.take_along_axis(tiles, argmax[..., None], axis=-1)[..., 0]

    def backward():
        gtiles = np.zeros_like(tiles)
        np.put_along_axis(gtiles, argmax[..., None], out.grad[..., None], axis=-1)
        gx = (
            gtiles.reshape(batch, channels, out_h, out_w, window, window)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(batch, channels, height, width)
        )
        x._accumulate(gx)

    out = _make(data, (x,), backward)
    return out
