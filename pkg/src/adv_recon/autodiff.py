# -*- coding: utf-8 -*-
#
# Copyright © 2026 The adv-recon-python authors. All rights reserved.
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <http://www.gnu.org/licenses/>.

"""Reverse-mode automatic differentiation over dense real and complex arrays.

Operations are evaluated eagerly. When at least one input is a Tensor belonging to a
Tape, the operation is recorded on that tape together with a vector-Jacobian product
(VJP) closure; when all inputs are plain arrays the same functions simply return
arrays, so reconstruction operators can be written once and evaluated with or
without a tape.

Gradient convention for complex values: for a real scalar loss L and a complex
tensor z = a + ib, the gradient reported for z is dL/da + i dL/db (equivalently
2 dL/dz* in Wirtinger terms). With this convention the adjoint of a complex-linear
map A is its conjugate transpose, the adjoint of a unitary map is its inverse, and
a projected gradient step can treat z as a real vector of twice the length. The
gradient reported for a real tensor is the real part of whatever flows into it.

Subgradients: magnitude and sqrt propagate zero at a zero input.
"""

from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import sparse
from structlog import get_logger

from adv_recon.exception import NumericalError, ShapeError

log = get_logger(__name__)


class Tensor:
    """An array value recorded on a Tape.

    Tensors are created by Tape.leaf, Tape.constant or by applying a primitive to at
    least one existing Tensor. The wrapped value must not be mutated.
    """

    __slots__ = ("value", "tape", "id", "requires_grad", "name")

    # Make numpy defer to the reflected operators below, e.g. for ndarray * Tensor
    __array_ufunc__ = None

    def __init__(
        self,
        value: np.ndarray,
        tape: "Tape",
        node_id: int,
        requires_grad: bool = False,
        name: str = None,
    ):
        self.value = value
        self.tape = tape
        self.id = node_id
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    @property
    def dtype(self) -> np.dtype:
        return self.value.dtype

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.value)

    def item(self):
        return self.value.item()

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __abs__(self):
        return magnitude(self)

    def __getitem__(self, index):
        return getitem(self, index)

    def __repr__(self):
        return (
            f"Tensor(id={self.id}, shape={self.shape}, dtype={self.dtype}, "
            f"requires_grad={self.requires_grad})"
        )


@dataclass
class Node:
    """A recorded operation: the op name, the tape ids of its inputs (None for inputs
    that do not require a gradient) and the closure computing input gradients from
    the output gradient."""

    op: str
    inputs: tuple
    input_complex: tuple
    output: int
    vjp: Callable


class Tape:
    """An ordered record of operations, in evaluation order.

    Because operations are recorded as they are evaluated, the node order is always a
    valid topological order. A tape and its tensors are confined to one thread; run
    independent computations on independent tapes.
    """

    def __init__(self):
        self.nodes: list[Node] = []
        self.leaves: dict[int, Tensor] = {}
        self._next_id = 0

    def _new_id(self) -> int:
        self._next_id += 1
        return self._next_id

    def leaf(self, value, name: str = None, requires_grad: bool = True) -> Tensor:
        """Return a new leaf tensor, with respect to which gradients are reported.

        Args:
            value: Array data. Integer and boolean data are promoted to float64.
            name: An optional name, used in log messages.
            requires_grad: Whether backward should report a gradient for this leaf.

        Returns:
            Tensor
        """
        arr = np.asarray(value)
        if not (np.issubdtype(arr.dtype, np.floating) or np.iscomplexobj(arr)):
            arr = arr.astype(np.float64)
        if not np.all(np.isfinite(arr)):
            raise NumericalError(f"Leaf tensor '{name}' contains non-finite values")

        t = Tensor(arr, self, self._new_id(), requires_grad=requires_grad, name=name)
        if requires_grad:
            self.leaves[t.id] = t
        return t

    def constant(self, value, name: str = None) -> Tensor:
        """Return a tensor that takes part in operations on this tape but never
        receives a gradient."""
        return self.leaf(value, name=name, requires_grad=False)

    def record(self, op: str, inputs: Sequence, value: np.ndarray, vjp) -> Tensor:
        """Record the result of a primitive evaluated on inputs.

        Args:
            op: The primitive name.
            inputs: The primitive's inputs; Tensors and/or constants.
            value: The eagerly computed output value.
            vjp: A callable mapping the output gradient to a tuple of input gradients.

        Returns:
            Tensor
        """
        ids = tuple(
            x.id if isinstance(x, Tensor) and x.requires_grad else None for x in inputs
        )
        requires_grad = any(i is not None for i in ids)
        out = Tensor(np.asarray(value), self, self._new_id(), requires_grad)

        if requires_grad:
            cplx = tuple(np.iscomplexobj(_value(x)) for x in inputs)
            self.nodes.append(Node(op, ids, cplx, out.id, vjp))
        return out

    def backward(self, loss: Tensor) -> dict[int, np.ndarray]:
        """Propagate gradients from a real scalar loss to every leaf of this tape.

        Gradients of tensors used more than once are accumulated. Each recorded node
        is visited once, in reverse order.

        Args:
            loss: A real, 0-dimensional tensor recorded on this tape.

        Returns:
            A dict mapping leaf ids to gradient arrays of the leaf's shape and dtype.
        """
        if not isinstance(loss, Tensor) or loss.tape is not self:
            raise ValueError("The loss must be a tensor recorded on this tape")
        if loss.ndim != 0:
            raise ShapeError(
                f"The loss must be a scalar, but has shape {loss.shape}",
                primitive="backward",
                expected=(),
                observed=loss.shape,
            )
        if loss.is_complex:
            raise TypeError("The loss must be real-valued, but is complex")

        grads: dict[int, Any] = {}
        if loss.requires_grad:
            grads[loss.id] = np.ones_like(loss.value)

        for node in reversed(self.nodes):
            g = grads.pop(node.output, None)
            if g is None:
                continue

            for tid, gi, cplx in zip(node.inputs, node.vjp(g), node.input_complex):
                if tid is None or gi is None:
                    continue
                if not cplx and np.iscomplexobj(gi):
                    gi = gi.real
                grads[tid] = grads[tid] + gi if tid in grads else gi

        result = {}
        for tid, t in self.leaves.items():
            g = grads.get(tid)
            if g is None:
                g = np.zeros_like(t.value)
            result[tid] = np.array(g, dtype=t.dtype)

        log.debug("Backward pass complete", num_nodes=len(self.nodes))
        return result


def _value(x):
    if isinstance(x, Tensor):
        return x.value
    if isinstance(x, (np.ndarray, int, float, complex, np.generic)):
        return x
    return np.asarray(x)


def _record(op: str, inputs: Sequence, value, vjp):
    tape = None
    for x in inputs:
        if isinstance(x, Tensor):
            if tape is None:
                tape = x.tape
            elif x.tape is not tape:
                raise ValueError(
                    f"{op}: tensors from different tapes cannot be combined"
                )

    if tape is None:
        return value
    return tape.record(op, inputs, value, vjp)


def _broadcast_shapes(op: str, *shapes) -> tuple:
    try:
        return np.broadcast_shapes(*shapes)
    except ValueError:
        raise ShapeError(
            f"{op}: operand shapes {list(shapes)} cannot be broadcast together",
            primitive=op,
            observed=list(shapes),
        )


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _require_real(op: str, *values):
    for v in values:
        if np.iscomplexobj(v):
            raise TypeError(f"{op} is only defined for real inputs")


def add(a, b):
    av, bv = _value(a), _value(b)
    sa, sb = np.shape(av), np.shape(bv)
    _broadcast_shapes("add", sa, sb)

    def vjp(g):
        return _unbroadcast(g, sa), _unbroadcast(g, sb)

    return _record("add", (a, b), av + bv, vjp)


def sub(a, b):
    av, bv = _value(a), _value(b)
    sa, sb = np.shape(av), np.shape(bv)
    _broadcast_shapes("sub", sa, sb)

    def vjp(g):
        return _unbroadcast(g, sa), _unbroadcast(-g, sb)

    return _record("sub", (a, b), av - bv, vjp)


def mul(a, b):
    """Elementwise (complex) multiplication, also used for multiplication by a
    scalar."""
    av, bv = _value(a), _value(b)
    sa, sb = np.shape(av), np.shape(bv)
    _broadcast_shapes("mul", sa, sb)

    def vjp(g):
        return _unbroadcast(g * np.conj(bv), sa), _unbroadcast(g * np.conj(av), sb)

    return _record("mul", (a, b), av * bv, vjp)


def div(a, b):
    av, bv = _value(a), _value(b)
    sa, sb = np.shape(av), np.shape(bv)
    _broadcast_shapes("div", sa, sb)
    out = av / bv

    def vjp(g):
        ga = g / np.conj(bv)
        return _unbroadcast(ga, sa), _unbroadcast(-ga * np.conj(out), sb)

    return _record("div", (a, b), out, vjp)


def conj(x):
    xv = _value(x)

    def vjp(g):
        return (np.conj(g),)

    return _record("conj", (x,), np.conj(xv), vjp)


def magnitude(x):
    """Elementwise |x|, real-valued. The subgradient at 0 is taken to be 0."""
    xv = _value(x)
    out = np.abs(xv)

    def vjp(g):
        safe = np.where(out > 0, out, 1)
        return (np.where(out > 0, g * xv / safe, 0),)

    return _record("magnitude", (x,), out, vjp)


def square(x):
    """Elementwise squared magnitude |x|^2, real-valued."""
    xv = _value(x)
    out = xv.real**2 + xv.imag**2 if np.iscomplexobj(xv) else xv * xv

    def vjp(g):
        return (2 * g * xv,)

    return _record("square", (x,), out, vjp)


def sqrt(x):
    """Elementwise square root of a nonnegative real tensor. The subgradient at 0 is
    taken to be 0."""
    xv = _value(x)
    _require_real("sqrt", xv)
    out = np.sqrt(xv)

    def vjp(g):
        safe = np.where(out > 0, out, 1)
        return (np.where(out > 0, g / (2 * safe), 0),)

    return _record("sqrt", (x,), out, vjp)


def real(x):
    xv = _value(x)

    def vjp(g):
        return (g,)

    return _record("real", (x,), np.real(xv), vjp)


def imag(x):
    xv = _value(x)

    def vjp(g):
        return (1j * g,)

    return _record("imag", (x,), np.imag(xv), vjp)


def to_complex(re, im):
    """Assemble a complex tensor from real and imaginary parts."""
    rv, iv = _value(re), _value(im)
    _require_real("to_complex", rv, iv)
    sr, si = np.shape(rv), np.shape(iv)
    _broadcast_shapes("to_complex", sr, si)

    def vjp(g):
        return _unbroadcast(np.real(g), sr), _unbroadcast(np.imag(g), si)

    return _record("to_complex", (re, im), rv + 1j * iv, vjp)


def reduce_sum(x, axis=None, keepdims: bool = False):
    xv = _value(x)
    shape = np.shape(xv)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape),)

    return _record("sum", (x,), np.sum(xv, axis=axis, keepdims=keepdims), vjp)


def masked_sum(x, mask):
    """Sum of x over the voxels selected by a constant (broadcastable) mask."""
    xv = _value(x)
    mv = np.asarray(_value(mask))
    if isinstance(mask, Tensor) and mask.requires_grad:
        raise ValueError("masked_sum: the mask must be a constant")
    _broadcast_shapes("masked_sum", np.shape(xv), mv.shape)
    shape = np.shape(xv)

    def vjp(g):
        return (g * np.broadcast_to(mv, shape), None)

    return _record("masked_sum", (x, mask), np.sum(xv * mv), vjp)


def _correlate(xp: np.ndarray, w: np.ndarray) -> np.ndarray:
    k = w.shape[-1]
    windows = sliding_window_view(xp, (k, k), axis=(1, 2))
    return np.tensordot(windows, w, axes=([0, 3, 4], [1, 2, 3])).transpose(2, 0, 1)


def conv2d(x, w, b=None):
    """Two-dimensional cross-correlation with zero 'same' padding and unit stride.

    Args:
        x: Real input of shape (C_in, H, W).
        w: Real kernel of shape (C_out, C_in, k, k), k odd.
        b: Optional real bias of shape (C_out,).

    Returns:
        Output of shape (C_out, H, W).
    """
    xv, wv = _value(x), _value(w)
    bv = None if b is None else _value(b)
    _require_real("conv2d", xv, wv)

    if xv.ndim != 3 or wv.ndim != 4:
        raise ShapeError(
            f"conv2d: expected input (C_in, H, W) and kernel (C_out, C_in, k, k), "
            f"got {xv.shape} and {wv.shape}",
            primitive="conv2d",
            observed=(xv.shape, wv.shape),
        )
    c_out, c_in, kh, kw = wv.shape
    if xv.shape[0] != c_in:
        raise ShapeError(
            f"conv2d: input has {xv.shape[0]} channels, kernel expects {c_in}",
            primitive="conv2d",
            expected=c_in,
            observed=xv.shape[0],
        )
    if kh != kw or kh % 2 == 0:
        raise ShapeError(
            f"conv2d: kernel must be square with odd size, got {kh}x{kw}",
            primitive="conv2d",
            observed=(kh, kw),
        )
    if bv is not None and np.shape(bv) != (c_out,):
        raise ShapeError(
            f"conv2d: bias shape {np.shape(bv)} does not match {c_out} output channels",
            primitive="conv2d",
            expected=(c_out,),
            observed=np.shape(bv),
        )

    p = kh // 2
    xp = np.pad(xv, ((0, 0), (p, p), (p, p)))
    out = _correlate(xp, wv)
    if bv is not None:
        out = out + bv[:, None, None]

    def vjp(g):
        windows = sliding_window_view(xp, (kh, kw), axis=(1, 2))
        gw = np.tensordot(g, windows, axes=([1, 2], [1, 2]))
        w_adj = wv[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
        gx = _correlate(np.pad(g, ((0, 0), (p, p), (p, p))), w_adj)
        gb = None if bv is None else g.sum(axis=(1, 2))
        return gx, gw, gb

    inputs = (x, w) if b is None else (x, w, b)
    return _record("conv2d", inputs, out, vjp)


def leaky_relu(x, slope: float = 0.01):
    xv = _value(x)
    _require_real("leaky_relu", xv)
    positive = xv > 0

    def vjp(g):
        return (np.where(positive, g, slope * g),)

    return _record("leaky_relu", (x,), np.where(positive, xv, slope * xv), vjp)


def relu(x):
    return leaky_relu(x, slope=0.0)


class ResampleGrid:
    """A fixed bilinear resampling of the last two axes of an array.

    The grid is stored as a sparse interpolation matrix, so resampling is linear in
    the data and its adjoint is the transposed matrix. Samples falling outside the
    input grid read zeros.
    """

    def __init__(self, in_shape: tuple, ys: np.ndarray, xs: np.ndarray):
        """Create a grid sampling an input of in_shape at fractional pixel
        coordinates.

        Args:
            in_shape: The (H, W) shape of the input.
            ys: Row coordinates of the output samples, shape (H_out, W_out).
            xs: Column coordinates of the output samples, same shape as ys.
        """
        ys, xs = np.asarray(ys, dtype=np.float64), np.asarray(xs, dtype=np.float64)
        if ys.shape != xs.shape or ys.ndim != 2:
            raise ShapeError(
                "bilinear: coordinate arrays must be 2-D and of equal shape",
                primitive="bilinear",
                observed=(ys.shape, xs.shape),
            )

        h, w = in_shape
        self.in_shape = (h, w)
        self.out_shape = ys.shape

        y0, x0 = np.floor(ys), np.floor(xs)
        wy, wx = ys - y0, xs - x0
        y0, x0 = y0.astype(np.int64), x0.astype(np.int64)
        rows = np.arange(ys.size).reshape(ys.shape)

        r_idx, c_idx, weights = [], [], []
        for dy, dx, wt in (
            (0, 0, (1 - wy) * (1 - wx)),
            (0, 1, (1 - wy) * wx),
            (1, 0, wy * (1 - wx)),
            (1, 1, wy * wx),
        ):
            yy, xx = y0 + dy, x0 + dx
            valid = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w) & (wt != 0)
            r_idx.append(rows[valid])
            c_idx.append(yy[valid] * w + xx[valid])
            weights.append(wt[valid])

        self.matrix = sparse.csr_matrix(
            (np.concatenate(weights), (np.concatenate(r_idx), np.concatenate(c_idx))),
            shape=(ys.size, h * w),
        )

    def apply(self, v: np.ndarray) -> np.ndarray:
        lead = v.shape[:-2]
        flat = v.reshape(-1, self.in_shape[0] * self.in_shape[1])
        out = np.asarray(self.matrix @ flat.T).T.reshape(*lead, *self.out_shape)
        return out.astype(np.result_type(v, np.float32), copy=False)

    def adjoint(self, g: np.ndarray) -> np.ndarray:
        lead = g.shape[:-2]
        flat = g.reshape(-1, self.out_shape[0] * self.out_shape[1])
        out = np.asarray(self.matrix.T @ flat.T).T.reshape(*lead, *self.in_shape)
        return out.astype(np.result_type(g, np.float32), copy=False)


def bilinear(x, grid: ResampleGrid):
    """Resample the last two axes of x on a fixed bilinear grid with zero padding."""
    xv = _value(x)
    if np.shape(xv)[-2:] != grid.in_shape:
        raise ShapeError(
            f"bilinear: input spatial shape {np.shape(xv)[-2:]} does not match the "
            f"grid's input shape {grid.in_shape}",
            primitive="bilinear",
            expected=grid.in_shape,
            observed=np.shape(xv)[-2:],
        )

    def vjp(g):
        return (grid.adjoint(g),)

    return _record("bilinear", (x,), grid.apply(xv), vjp)


def concat(xs: Sequence, axis: int = 0):
    values = [_value(x) for x in xs]
    try:
        out = np.concatenate(values, axis=axis)
    except ValueError as e:
        raise ShapeError(
            f"concat: {e}",
            primitive="concat",
            observed=[np.shape(v) for v in values],
        )
    splits = np.cumsum([np.shape(v)[axis] for v in values])[:-1]

    def vjp(g):
        return tuple(np.split(g, splits, axis=axis))

    return _record("concat", tuple(xs), out, vjp)


def getitem(x, index):
    """Slicing and cropping. Repeated indices in advanced indexing accumulate."""
    xv = _value(x)
    out = xv[index]
    idx = index if isinstance(index, tuple) else (index,)
    advanced = any(isinstance(i, (np.ndarray, list)) for i in idx)

    def vjp(g):
        gx = np.zeros(np.shape(xv), dtype=g.dtype)
        if advanced:
            np.add.at(gx, index, g)
        else:
            gx[index] = g
        return (gx,)

    return _record("getitem", (x,), out, vjp)


def reshape(x, shape):
    xv = _value(x)
    try:
        out = np.reshape(xv, shape)
    except ValueError:
        raise ShapeError(
            f"reshape: cannot reshape {np.shape(xv)} to {shape}",
            primitive="reshape",
            expected=shape,
            observed=np.shape(xv),
        )

    def vjp(g):
        return (g.reshape(np.shape(xv)),)

    return _record("reshape", (x,), out, vjp)


def pad2(x, before: tuple, after: tuple):
    """Zero-pad the last two axes by (top, left) before and (bottom, right) after."""
    xv = _value(x)
    h, w = np.shape(xv)[-2:]
    widths = [(0, 0)] * (np.ndim(xv) - 2)
    widths += [(before[0], after[0]), (before[1], after[1])]

    def vjp(g):
        return (g[..., before[0] : before[0] + h, before[1] : before[1] + w],)

    return _record("pad2", (x,), np.pad(xv, widths), vjp)


def avg_pool2(x):
    """2x2 average pooling over the last two axes, which must have even sizes."""
    xv = _value(x)
    *lead, h, w = np.shape(xv)
    if h % 2 or w % 2:
        raise ShapeError(
            f"avg_pool2: spatial dimensions must be even, got {h}x{w}",
            primitive="avg_pool2",
            observed=(h, w),
        )
    out = xv.reshape(*lead, h // 2, 2, w // 2, 2).mean(axis=(-3, -1))

    def vjp(g):
        return (np.repeat(np.repeat(g, 2, axis=-2), 2, axis=-1) / 4,)

    return _record("avg_pool2", (x,), out, vjp)


def upsample2(x):
    """2x nearest-neighbour upsampling over the last two axes."""
    xv = _value(x)
    *lead, h, w = np.shape(xv)

    def vjp(g):
        return (g.reshape(*lead, h, 2, w, 2).sum(axis=(-3, -1)),)

    return _record("upsample2", (x,), np.repeat(np.repeat(xv, 2, -2), 2, -1), vjp)


_FFT_AXES = (-2, -1)


def _complex_dtype(v: np.ndarray) -> np.dtype:
    return np.result_type(v, np.complex64)


# Results keep the precision of their input; numpy.fft computes in double.
def _fft2c(v: np.ndarray) -> np.ndarray:
    dtype = _complex_dtype(v)
    v = np.fft.ifftshift(v, axes=_FFT_AXES)
    v = np.fft.fft2(v, axes=_FFT_AXES, norm="ortho")
    return np.fft.fftshift(v, axes=_FFT_AXES).astype(dtype, copy=False)


def _ifft2c(v: np.ndarray) -> np.ndarray:
    dtype = _complex_dtype(v)
    v = np.fft.ifftshift(v, axes=_FFT_AXES)
    v = np.fft.ifft2(v, axes=_FFT_AXES, norm="ortho")
    return np.fft.fftshift(v, axes=_FFT_AXES).astype(dtype, copy=False)


def _check_fft_shape(op, xv):
    shape = np.shape(xv)
    if len(shape) < 2 or min(shape[-2:]) < 1:
        raise ShapeError(
            f"{op}: expected at least two non-empty trailing dimensions, got {shape}",
            primitive=op,
            observed=shape,
        )


def fft2c(x):
    """Centered, orthonormal 2-D FFT over the last two axes.

    The zero frequency is placed at index (H // 2, W // 2). numpy's pocketfft
    backend handles arbitrary sizes. Being unitary, its adjoint is ifft2c.
    """
    xv = _value(x)
    _check_fft_shape("fft2c", xv)

    def vjp(g):
        return (_ifft2c(g),)

    return _record("fft2c", (x,), _fft2c(xv), vjp)


def ifft2c(x):
    """Centered, orthonormal inverse 2-D FFT over the last two axes."""
    xv = _value(x)
    _check_fft_shape("ifft2c", xv)

    def vjp(g):
        return (_fft2c(g),)

    return _record("ifft2c", (x,), _ifft2c(xv), vjp)


PRIMITIVES: dict[str, Callable] = {
    "add": add,
    "sub": sub,
    "scalar_mul": mul,
    "mul": mul,
    "div": div,
    "conj": conj,
    "magnitude": magnitude,
    "square": square,
    "sqrt": sqrt,
    "real": real,
    "imag": imag,
    "to_complex": to_complex,
    "sum": reduce_sum,
    "masked_sum": masked_sum,
    "conv2d": conv2d,
    "leaky_relu": leaky_relu,
    "relu": relu,
    "bilinear": bilinear,
    "concat": concat,
    "getitem": getitem,
    "reshape": reshape,
    "pad2": pad2,
    "avg_pool2": avg_pool2,
    "upsample2": upsample2,
    "fft2c": fft2c,
    "ifft2c": ifft2c,
}


def record_op(op: str, *inputs, **params):
    """Apply the named primitive to inputs, recording it when any input is a Tensor.

    Args:
        op: A key of PRIMITIVES.
        *inputs: Tensors or arrays.
        **params: Primitive-specific keyword parameters (e.g. slope, axis, grid).

    Returns:
        A Tensor if any input is a Tensor, otherwise an array.
    """
    try:
        fn = PRIMITIVES[op]
    except KeyError:
        raise ValueError(f"Unknown primitive '{op}'")
    return fn(*inputs, **params)


def value_and_grad(fn: Callable, *arrays) -> tuple[float, list[np.ndarray]]:
    """Evaluate a real scalar function of arrays and its gradient on a fresh tape.

    Args:
        fn: A function of Tensors returning a real scalar Tensor.
        *arrays: The points at which to evaluate.

    Returns:
        The function value and a list of gradients, one per argument.
    """
    tape = Tape()
    leaves = [tape.leaf(a, name=f"arg{i}") for i, a in enumerate(arrays)]
    out = fn(*leaves)
    if not isinstance(out, Tensor):
        out = tape.constant(out)
    grads = tape.backward(out)

    return out.item(), [grads[leaf.id] for leaf in leaves]


def numerical_gradient(fn: Callable, x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient of a real scalar function of one array,
    under the same complex convention as Tape.backward.

    Args:
        fn: A function of an array returning a float.
        x: The point at which to evaluate; not modified.
        eps: The finite-difference step.

    Returns:
        An array of x's shape and dtype.
    """
    x = np.array(x, copy=True)
    grad = np.zeros_like(x)
    flat, gflat = x.reshape(-1), grad.reshape(-1)
    units = (1.0, 1j) if np.iscomplexobj(x) else (1.0,)

    for i in range(flat.size):
        orig = flat[i]
        for unit in units:
            flat[i] = orig + eps * unit
            f_plus = float(fn(x))
            flat[i] = orig - eps * unit
            f_minus = float(fn(x))
            flat[i] = orig
            gflat[i] += unit * (f_plus - f_minus) / (2 * eps)

    return grad


def relative_error(observed: np.ndarray, expected: np.ndarray) -> float:
    """Return |observed - expected| / |expected| in the L2 norm."""
    denom = np.linalg.norm(expected)
    if denom == 0:
        return float(np.linalg.norm(observed))
    return float(np.linalg.norm(observed - expected) / denom)
