"""Dense 2-D tensors with a reverse-mode gradient tape.

Every value is a real matrix of shape ``(rows, cols)``; scalars are 1x1.
Operations performed inside a ``with Tape() as tape:`` block are recorded,
and ``tape.gradients(loss, params)`` replays the recording in reverse to
accumulate vector-Jacobian products. Outside a tape, the same functions
run as plain numpy compute with no bookkeeping, which is what evaluation
paths use.

Broadcasting is deliberately narrow: elementwise ops accept equal shapes,
a (1, c) row (bias), a (r, 1) column, or a (1, 1) scalar against an
(r, c) matrix. Anything else is a shape error.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
from scipy.special import expit

NORM_EPS = 1e-12  # guard added under the square root of row norms

_active_tapes: list["Tape"] = []
_finite_checks = True


def set_finite_checks(enabled: bool) -> bool:
    """Toggle per-operation NaN/Inf validation. Returns the previous setting.

    Checks are on by default. Long training loops may disable them for
    throughput; the training driver still validates every loss component
    each epoch.
    """
    global _finite_checks
    previous = _finite_checks
    _finite_checks = bool(enabled)
    return previous


class Tensor:
    """A dense float matrix, optionally tracked for gradients."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data)
        if arr.dtype.kind != "f":
            arr = arr.astype(np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise ValueError(f"tensors are 2-D; got shape {arr.shape}")
        self.data = np.ascontiguousarray(arr)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._vjp: Callable[[np.ndarray], tuple[np.ndarray, ...]] | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() needs a scalar tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # Operator sugar; non-tensor operands become constants.
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

    def __truediv__(self, other):
        return div(self, _wrap(other))

    def __matmul__(self, other):
        return matmul(self, _wrap(other))

    def __neg__(self):
        return neg(self)

    @property
    def T(self) -> "Tensor":
        return transpose(self)


class Tape:
    """Creation-ordered record of tracked operations.

    The record is topologically ordered by construction: a node's inputs
    always exist before the node itself.
    """

    def __init__(self):
        self._nodes: list[Tensor] = []

    def __enter__(self) -> "Tape":
        _active_tapes.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        _active_tapes.pop()

    def __len__(self) -> int:
        return len(self._nodes)

    def backward(self, loss: Tensor) -> dict[int, np.ndarray]:
        """Accumulate gradients of a scalar loss for every tracked leaf.

        Returns a map from ``id(tensor)`` to gradient array for each
        requires_grad leaf reached by the backward sweep, and mirrors the
        result onto ``tensor.grad``.
        """
        if loss.shape != (1, 1):
            raise ValueError(f"loss must be a 1x1 scalar, got shape {loss.shape}")
        if not loss.requires_grad:
            return {}  # constant loss: every leaf gradient is zero
        index = None
        for i in range(len(self._nodes) - 1, -1, -1):
            if self._nodes[i] is loss:
                index = i
                break
        if index is None:
            raise RuntimeError("loss was not recorded on this tape (detached?)")

        grads: dict[int, np.ndarray] = {id(loss): np.ones((1, 1), dtype=loss.dtype)}
        leaf_grads: dict[int, np.ndarray] = {}
        for node in reversed(self._nodes[: index + 1]):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            for parent, pg in zip(node._parents, node._vjp(g)):
                if not parent.requires_grad:
                    continue
                store = leaf_grads if parent._vjp is None else grads
                key = id(parent)
                if key in store:
                    store[key] = store[key] + pg
                else:
                    store[key] = pg
                if parent._vjp is None:
                    parent.grad = store[key]
        return leaf_grads

    def gradients(self, loss: Tensor, params: Sequence[Tensor]) -> list[np.ndarray]:
        """Gradient of ``loss`` for each param; zeros for non-participants."""
        leaf_grads = self.backward(loss)
        return [
            leaf_grads.get(id(p), np.zeros_like(p.data)) for p in params
        ]


def _wrap(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def _finite_guard(arr: np.ndarray, op: str) -> None:
    if _finite_checks and not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"non-finite values produced by {op}")


def _track(data: np.ndarray, op: str, parents: tuple[Tensor, ...], vjp) -> Tensor:
    _finite_guard(data, op)
    out = Tensor(data)
    if _active_tapes and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._vjp = vjp
        _active_tapes[-1]._nodes.append(out)
    return out


def custom_op(data, op: str, parents: tuple[Tensor, ...], vjp) -> Tensor:
    """Register an externally computed primitive on the active tape.

    ``vjp`` maps the output gradient to one gradient per parent, exactly
    like the built-in primitives. Lets domain modules fuse hot paths
    without reaching into tape internals.
    """
    return _track(np.asarray(data), op, tuple(parents), vjp)


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> None:
    (ra, ca), (rb, cb) = a.shape, b.shape
    if (ra != rb and 1 not in (ra, rb)) or (ca != cb and 1 not in (ca, cb)):
        raise ValueError(f"{op}: shapes {a.shape} and {b.shape} do not align")


def _unbroadcast(g: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    if g.shape == shape:
        return g
    if shape[0] == 1 and g.shape[0] != 1:
        g = g.sum(axis=0, keepdims=True)
    if shape[1] == 1 and g.shape[1] != 1:
        g = g.sum(axis=1, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise arithmetic

def add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "add")

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _track(a.data + b.data, "add", (a, b), vjp)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "sub")

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _track(a.data - b.data, "sub", (a, b), vjp)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "mul")

    def vjp(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _track(a.data * b.data, "mul", (a, b), vjp)


def div(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "div")
    out = a.data / b.data

    def vjp(g):
        ga = _unbroadcast(g / b.data, a.shape)
        gb = _unbroadcast(-g * out / b.data, b.shape)
        return ga, gb

    return _track(out, "div", (a, b), vjp)


def neg(a: Tensor) -> Tensor:
    return _track(-a.data, "neg", (a,), lambda g: (-g,))


# ---------------------------------------------------------------------------
# linear algebra

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul: inner dims differ, {a.shape} @ {b.shape}")

    def vjp(g):
        return g @ b.data.T, a.data.T @ g

    return _track(a.data @ b.data, "matmul", (a, b), vjp)


def transpose(a: Tensor) -> Tensor:
    return _track(a.data.T.copy(), "transpose", (a,), lambda g: (g.T,))


# ---------------------------------------------------------------------------
# nonlinearities

def relu(a: Tensor) -> Tensor:
    mask = a.data > 0  # subgradient at exactly 0 is 0

    def vjp(g):
        return (g * mask,)

    return _track(np.where(mask, a.data, 0.0), "relu", (a,), vjp)


def sigmoid(a: Tensor) -> Tensor:
    out = expit(a.data)  # stable in both tails

    def vjp(g):
        return (g * out * (1.0 - out),)

    return _track(out, "sigmoid", (a,), vjp)


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)

    def vjp(g):
        return (g * out,)

    return _track(out, "exp", (a,), vjp)


def log(a: Tensor) -> Tensor:
    if _finite_checks and np.any(a.data <= 0):
        raise ValueError("log: input has non-positive entries")

    def vjp(g):
        return (g / a.data,)

    return _track(np.log(a.data), "log", (a,), vjp)


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)

    def vjp(g):
        return (g * (1.0 - out * out),)

    return _track(out, "tanh", (a,), vjp)


def clip(a: Tensor, low: float, high: float) -> Tensor:
    """Clamp entries to [low, high]; gradient passes only inside the range."""

    def vjp(g):
        return (g * ((a.data >= low) & (a.data <= high)),)

    return _track(np.clip(a.data, low, high), "clip", (a,), vjp)


def maximum(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise maximum; ties route the subgradient to the first input."""
    if a.shape != b.shape:
        raise ValueError(f"maximum: shapes differ, {a.shape} vs {b.shape}")

    def vjp(g):
        take_a = a.data >= b.data
        return g * take_a, g * ~take_a

    return _track(np.maximum(a.data, b.data), "maximum", (a, b), vjp)


def softmax(a: Tensor, axis: int) -> Tensor:
    """Softmax along ``axis`` (0 = down columns, 1 = across rows)."""
    if axis not in (0, 1):
        raise ValueError("softmax axis must be 0 or 1")
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        inner = (g * out).sum(axis=axis, keepdims=True)
        return ((g - inner) * out,)

    return _track(out, "softmax", (a,), vjp)


def row_normalize(a: Tensor) -> Tensor:
    """Scale each row to unit L2 norm; all-zero rows stay zero.

    The norm is computed as sqrt(sum(x^2) + 1e-12), so rows with norms far
    above 1e-6 come out unit length to ~1e-12 while zero rows pass through.
    """
    norms = np.sqrt((a.data * a.data).sum(axis=1, keepdims=True) + NORM_EPS)
    out = a.data / norms

    def vjp(g):
        inner = (g * a.data).sum(axis=1, keepdims=True)
        return (g / norms - a.data * (inner / norms**3),)

    return _track(out, "row_normalize", (a,), vjp)


# ---------------------------------------------------------------------------
# shape manipulation

def concat_cols(parts: Sequence[Tensor]) -> Tensor:
    parts = list(parts)
    rows = parts[0].shape[0]
    if any(p.shape[0] != rows for p in parts):
        raise ValueError("concat_cols: row counts differ")
    widths = [p.shape[1] for p in parts]
    offsets = np.cumsum([0] + widths)

    def vjp(g):
        return tuple(g[:, offsets[i]:offsets[i + 1]] for i in range(len(parts)))

    return _track(np.concatenate([p.data for p in parts], axis=1), "concat_cols", tuple(parts), vjp)


def concat_rows(parts: Sequence[Tensor]) -> Tensor:
    parts = list(parts)
    cols = parts[0].shape[1]
    if any(p.shape[1] != cols for p in parts):
        raise ValueError("concat_rows: column counts differ")
    heights = [p.shape[0] for p in parts]
    offsets = np.cumsum([0] + heights)

    def vjp(g):
        return tuple(g[offsets[i]:offsets[i + 1], :] for i in range(len(parts)))

    return _track(np.concatenate([p.data for p in parts], axis=0), "concat_rows", tuple(parts), vjp)


def slice_cols(a: Tensor, start: int, stop: int) -> Tensor:
    if not (0 <= start < stop <= a.shape[1]):
        raise ValueError(f"slice_cols: [{start}, {stop}) out of range for {a.shape}")

    def vjp(g):
        full = np.zeros_like(a.data)
        full[:, start:stop] = g
        return (full,)

    return _track(a.data[:, start:stop].copy(), "slice_cols", (a,), vjp)


def reverse_cols(a: Tensor) -> Tensor:
    def vjp(g):
        return (g[:, ::-1],)

    return _track(a.data[:, ::-1].copy(), "reverse_cols", (a,), vjp)


# ---------------------------------------------------------------------------
# gather / scatter over rows (edge-indexed message passing)

def _scatter_add_rows(rows: np.ndarray, index: np.ndarray, num_rows: int) -> np.ndarray:
    """Sum ``rows`` into buckets by index (reduceat is far faster than ufunc.at)."""
    out = np.zeros((num_rows, rows.shape[1]), dtype=rows.dtype)
    if index.size == 0:
        return out
    order = np.argsort(index, kind="stable")
    sorted_index = index[order]
    starts = np.flatnonzero(np.r_[True, sorted_index[1:] != sorted_index[:-1]])
    out[sorted_index[starts]] = np.add.reduceat(rows[order], starts, axis=0)
    return out


def take_rows(a: Tensor, index: np.ndarray) -> Tensor:
    """Gather rows of ``a`` by integer index (rows may repeat)."""
    index = np.asarray(index)
    if index.ndim != 1:
        raise ValueError("take_rows: index must be 1-D")
    if index.size and (index.min() < 0 or index.max() >= a.shape[0]):
        raise ValueError("take_rows: index out of range")

    def vjp(g):
        return (_scatter_add_rows(g, index, a.shape[0]),)

    return _track(a.data[index], "take_rows", (a,), vjp)


def segment_sum(a: Tensor, segments: np.ndarray, num_segments: int) -> Tensor:
    """Sum rows of ``a`` into ``num_segments`` buckets given per-row ids."""
    segments = np.asarray(segments)
    if segments.shape != (a.shape[0],):
        raise ValueError("segment_sum: need one segment id per row")
    if segments.size and (segments.min() < 0 or segments.max() >= num_segments):
        raise ValueError("segment_sum: segment id out of range")

    def vjp(g):
        return (g[segments],)

    return _track(_scatter_add_rows(a.data, segments, num_segments),
                  "segment_sum", (a,), vjp)


# ---------------------------------------------------------------------------
# reductions

def reduce_sum(a: Tensor, axis: int | None = None) -> Tensor:
    """Sum over all entries (axis None, giving 1x1) or along one axis.

    Axis sums keep the reduced dimension, so axis=1 gives a column (r, 1).
    """
    if axis is None:
        out = a.data.sum().reshape(1, 1)
    elif axis in (0, 1):
        out = a.data.sum(axis=axis, keepdims=True)
    else:
        raise ValueError("reduce_sum axis must be None, 0, or 1")

    def vjp(g):
        return (np.broadcast_to(g, a.shape),)

    return _track(out, "reduce_sum", (a,), vjp)


def reduce_mean(a: Tensor) -> Tensor:
    """Mean over all entries, as a 1x1 scalar."""
    size = a.data.size
    out = (a.data.sum() / size).reshape(1, 1)

    def vjp(g):
        return (np.broadcast_to(g / size, a.shape),)

    return _track(out, "reduce_mean", (a,), vjp)
