# ============================================================================
# apps/numcore/ops.py - Differentiable primitives
# ============================================================================

import logging
from typing import Callable, Optional, Sequence

import numpy as np

from config import EXP_CLAMP, LOG_EPS
from shared.errors import NumericError, ShapeError
from .tensor import Array, Node, active_tape, constant

logger = logging.getLogger(__name__)


def _as_array(x) -> Array:
    return x if isinstance(x, Array) else constant(x)


def _emit(op: str, values: np.ndarray, inputs: Sequence[Array],
          backward: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]) -> Array:
    if not np.all(np.isfinite(values)):
        raise NumericError(f"{op} produced non-finite values")
    tape = active_tape()
    needs_grad = tape is not None and any(a.requires_grad for a in inputs)
    out = Array(values, requires_grad=needs_grad)
    if needs_grad:
        tape.record(Node(op, out, tuple(inputs), backward))
    return out


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    """Sum a broadcast gradient back down to the operand's shape"""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_broadcast(op: str, a: Array, b: Array) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}")


# ----------------------------------------------------------------------------
# Elementwise arithmetic
# ----------------------------------------------------------------------------

def add(a, b) -> Array:
    a, b = _as_array(a), _as_array(b)
    _check_broadcast("add", a, b)
    return _emit("add", a.values + b.values, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Array:
    a, b = _as_array(a), _as_array(b)
    _check_broadcast("sub", a, b)
    return _emit("sub", a.values - b.values, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)))


def mul(a, b) -> Array:
    a, b = _as_array(a), _as_array(b)
    _check_broadcast("mul", a, b)
    return _emit("mul", a.values * b.values, (a, b),
                 lambda g: (_unbroadcast(g * b.values, a.shape), _unbroadcast(g * a.values, b.shape)))


def scale(a: Array, factor: float) -> Array:
    return _emit("scale", a.values * factor, (a,), lambda g: (g * factor,))


def neg(a: Array) -> Array:
    return scale(a, -1.0)


# ----------------------------------------------------------------------------
# Linear algebra
# ----------------------------------------------------------------------------

def tensor_matmul(a: Array, b: Array) -> Array:
    """Matrix product for 1-D/2-D operands (vector-matrix, matrix-vector, matrix-matrix)"""
    a, b = _as_array(a), _as_array(b)
    if a.values.ndim not in (1, 2) or b.values.ndim not in (1, 2):
        raise ShapeError(f"matmul supports 1-D and 2-D operands, got {a.shape} and {b.shape}")
    inner_a = a.shape[-1]
    inner_b = b.shape[0]
    if inner_a != inner_b:
        raise ShapeError(f"matmul inner extents differ: {a.shape} x {b.shape}")

    av, bv = a.values, b.values

    def backward(g):
        if av.ndim == 2 and bv.ndim == 2:
            return g @ bv.T, av.T @ g
        if av.ndim == 1 and bv.ndim == 2:
            return bv @ g, np.outer(av, g)
        if av.ndim == 2 and bv.ndim == 1:
            return np.outer(g, bv), av.T @ g
        return g * bv, g * av

    return _emit("matmul", av @ bv, (a, b), backward)


matmul = tensor_matmul


def transpose(a: Array) -> Array:
    if a.values.ndim != 2:
        raise ShapeError(f"transpose needs a 2-D array, got {a.shape}")
    return _emit("transpose", a.values.T, (a,), lambda g: (g.T,))


# ----------------------------------------------------------------------------
# Nonlinearities
# ----------------------------------------------------------------------------

def sigmoid(x: Array) -> Array:
    clamped = np.clip(x.values, -EXP_CLAMP, EXP_CLAMP)
    out = 1.0 / (1.0 + np.exp(-clamped))
    return _emit("sigmoid", out, (x,), lambda g: (g * out * (1.0 - out),))


def tanh(x: Array) -> Array:
    out = np.tanh(x.values)
    return _emit("tanh", out, (x,), lambda g: (g * (1.0 - out * out),))


def activation_apply(x: Array, kind: str) -> Array:
    if kind == "sigmoid":
        return sigmoid(x)
    if kind == "tanh":
        return tanh(x)
    raise ValueError(f"Unknown activation: {kind}")


def softmax(x: Array, mask: Optional[np.ndarray] = None) -> Array:
    """Softmax over the last axis; entries equal to -inf or False in mask get zero mass"""
    raw = x.values
    valid = ~np.isneginf(raw)
    if mask is not None:
        valid = valid & np.broadcast_to(np.asarray(mask, dtype=bool), raw.shape)
    if not np.all(valid.any(axis=-1)):
        raise NumericError("softmax over a fully masked row")

    safe = np.where(valid, raw, 0.0)
    if not np.all(np.isfinite(safe)):
        raise NumericError("softmax input is not finite")
    row_max = np.max(np.where(valid, safe, -np.inf), axis=-1, keepdims=True)
    shifted = np.maximum(safe - row_max, -EXP_CLAMP)
    exps = np.where(valid, np.exp(shifted), 0.0)
    out = exps / exps.sum(axis=-1, keepdims=True)

    def backward(g):
        dot = np.sum(g * out, axis=-1, keepdims=True)
        return (out * (g - dot),)

    return _emit("softmax", out, (x,), backward)


def softmax_rows(x: Array, mask: Optional[np.ndarray] = None) -> Array:
    if x.values.ndim != 2:
        raise ShapeError(f"softmax_rows needs an m x n array, got {x.shape}")
    return softmax(x, mask)


def log(x: Array, eps: float = LOG_EPS) -> Array:
    """Natural log with the argument clamped from below at eps"""
    clamped = np.maximum(x.values, eps)
    live = x.values > eps
    return _emit("log", np.log(clamped), (x,), lambda g: (np.where(live, g / clamped, 0.0),))


def dropout(x: Array, rate: float, rng: Optional[np.random.Generator], training: bool) -> Array:
    """Inverted dropout; identity when not training or rate is zero"""
    if not training or rate <= 0.0 or rng is None:
        return x
    keep = (rng.random(x.shape) >= rate).astype(np.float64) / (1.0 - rate)
    return mul(x, constant(keep))


# ----------------------------------------------------------------------------
# Reductions and reshaping
# ----------------------------------------------------------------------------

def reduce_sum(x: Array, axis: Optional[int] = None) -> Array:
    shape = x.shape
    if axis is None:
        return _emit("sum", np.asarray(x.values.sum()), (x,), lambda g: (np.broadcast_to(g, shape).copy(),))
    out = x.values.sum(axis=axis)

    def backward(g):
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return _emit("sum_axis", out, (x,), backward)


def concat(parts: Sequence[Array], axis: int = 0) -> Array:
    parts = [_as_array(p) for p in parts]
    if not parts:
        raise ShapeError("concat of nothing")
    try:
        out = np.concatenate([p.values for p in parts], axis=axis)
    except ValueError:
        raise ShapeError(f"concat: incompatible shapes {[p.shape for p in parts]}")
    bounds = np.cumsum([p.shape[axis] for p in parts])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _emit("concat", out, parts, backward)


def stack(parts: Sequence[Array]) -> Array:
    """Stack equal-shape arrays along a new leading axis"""
    parts = [_as_array(p) for p in parts]
    if not parts:
        raise ShapeError("stack of nothing")
    shapes = {p.shape for p in parts}
    if len(shapes) != 1:
        raise ShapeError(f"stack: mismatched shapes {sorted(shapes)}")
    out = np.stack([p.values for p in parts])
    return _emit("stack", out, parts, lambda g: tuple(g[i] for i in range(len(parts))))


def slice_range(x: Array, start: int, stop: int) -> Array:
    """Contiguous slice along the last axis"""
    shape = x.shape

    def backward(g):
        full = np.zeros(shape)
        full[..., start:stop] = g
        return (full,)

    return _emit("slice", x.values[..., start:stop], (x,), backward)


def pick(x: Array, index: int) -> Array:
    """Single element of a vector as a scalar array"""
    if x.values.ndim != 1:
        raise ShapeError(f"pick needs a vector, got {x.shape}")
    size = x.shape[0]

    def backward(g):
        full = np.zeros(size)
        full[index] = g
        return (full,)

    return _emit("pick", np.asarray(x.values[index]), (x,), backward)


def take_rows(table: Array, indices: Sequence[int]) -> Array:
    """Gather rows of a 2-D table (embedding lookup)"""
    idx = np.asarray(indices, dtype=np.int64)
    if table.values.ndim != 2:
        raise ShapeError(f"take_rows needs a 2-D table, got {table.shape}")
    shape = table.shape

    def backward(g):
        full = np.zeros(shape)
        np.add.at(full, idx, g)
        return (full,)

    return _emit("take_rows", table.values[idx], (table,), backward)


def take_row(table: Array, index: int) -> Array:
    shape = table.shape

    def backward(g):
        full = np.zeros(shape)
        full[index] = g
        return (full,)

    return _emit("take_row", table.values[index], (table,), backward)
