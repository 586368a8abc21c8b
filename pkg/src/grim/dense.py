"""Dense tensors, reference kernels, and the CONV-to-GEMM lowering.

Everything here is the slow-but-trusted path: float32 storage, float64
accumulation, no clever scheduling. The sparse executor is validated
against these routines, so they must stay independent of it.

Conventions (fixed once, used everywhere):
  * matrices are 2-D row-major float32 ndarrays of shape (rows, cols)
  * 4-D tensors are NCHW float32 ndarrays
  * a filter bank (f, c, kh, kw) flattens to a (f, c*kh*kw) matrix with
    kernel elements in (c, kh, kw) order, matching im2col's row order
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ShapeError

DTYPE = np.float32


def as_matrix(a, name: str = "matrix", allow_zero_rows: bool = False) -> np.ndarray:
    """Validate/coerce `a` into a 2-D C-contiguous float32 matrix."""
    arr = np.ascontiguousarray(a, dtype=DTYPE)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got ndim={arr.ndim}")
    if arr.shape[0] < 1 and not allow_zero_rows:
        raise ShapeError(f"{name} must have at least one row")
    if arr.shape[1] < 1:
        raise ShapeError(f"{name} must have at least one column")
    return arr


def as_tensor4(a, name: str = "tensor") -> np.ndarray:
    arr = np.ascontiguousarray(a, dtype=DTYPE)
    if arr.ndim != 4:
        raise ShapeError(f"{name} must be 4-D NCHW, got ndim={arr.ndim}")
    if min(arr.shape) < 1:
        raise ShapeError(f"{name} has a zero dimension: {arr.shape}")
    return arr


def as_vector(a, name: str = "vector") -> np.ndarray:
    arr = np.ascontiguousarray(a, dtype=DTYPE)
    if arr.ndim != 1:
        raise ShapeError(f"{name} must be 1-D, got ndim={arr.ndim}")
    return arr


@dataclass(frozen=True)
class ConvSpec:
    """Geometry of a 2-D convolution: kernel size, strides, zero padding."""

    kernel_h: int
    kernel_w: int
    stride_h: int = 1
    stride_w: int = 1
    pad_h: int = 0
    pad_w: int = 0

    def __post_init__(self):
        if self.kernel_h < 1 or self.kernel_w < 1:
            raise ShapeError("kernel dims must be >= 1")
        if self.stride_h < 1 or self.stride_w < 1:
            raise ShapeError("strides must be >= 1")
        if self.pad_h < 0 or self.pad_w < 0:
            raise ShapeError("padding must be >= 0")

    def out_dims(self, h: int, w: int) -> tuple[int, int]:
        """Output spatial dims; requires exact stride divisibility and
        positive results."""
        num_h = h + 2 * self.pad_h - self.kernel_h
        num_w = w + 2 * self.pad_w - self.kernel_w
        if num_h < 0 or num_w < 0 or num_h % self.stride_h or num_w % self.stride_w:
            raise ShapeError(
                f"conv output dims are not positive integers for input {h}x{w} "
                f"with {self}"
            )
        return num_h // self.stride_h + 1, num_w // self.stride_w + 1


def _windows(x: np.ndarray, spec: ConvSpec) -> tuple[np.ndarray, int, int]:
    """All receptive-field windows of `x`, shape (n, c, oh, ow, kh, kw)."""
    n, c, h, w = x.shape
    oh, ow = spec.out_dims(h, w)
    padded = np.pad(
        x, ((0, 0), (0, 0), (spec.pad_h, spec.pad_h), (spec.pad_w, spec.pad_w))
    )
    win = sliding_window_view(padded, (spec.kernel_h, spec.kernel_w), axis=(2, 3))
    return win[:, :, :: spec.stride_h, :: spec.stride_w, :, :], oh, ow


def im2col(x: np.ndarray, spec: ConvSpec) -> np.ndarray:
    """Expand conv receptive fields into a (c*kh*kw, n*oh*ow) matrix.

    Column j holds the receptive field of output position j, positions
    enumerated in (n, oh, ow) order; rows are in (c, kh, kw) order.
    Padding contributes zeros.
    """
    x = as_tensor4(x, "im2col input")
    win, oh, ow = _windows(x, spec)
    n, c = x.shape[0], x.shape[1]
    cols = win.transpose(1, 4, 5, 0, 2, 3).reshape(
        c * spec.kernel_h * spec.kernel_w, n * oh * ow
    )
    return np.ascontiguousarray(cols, dtype=DTYPE)


def im2col_skipping(x: np.ndarray, spec: ConvSpec, dead_weight_cols) -> np.ndarray:
    """im2col that never materializes rows matching fully pruned weight columns.

    `dead_weight_cols` indexes columns of the (f, c*kh*kw) weight matrix,
    which correspond to rows of the expanded input. Surviving rows keep
    their relative order. The result may have zero rows when everything
    is dead; callers must handle that case.
    """
    x = as_tensor4(x, "im2col input")
    dead = np.unique(np.asarray(sorted(dead_weight_cols), dtype=np.int64))
    n, c = x.shape[0], x.shape[1]
    total = c * spec.kernel_h * spec.kernel_w
    if dead.size and (dead[0] < 0 or dead[-1] >= total):
        raise IndexError(f"dead column index out of range [0, {total})")
    win, oh, ow = _windows(x, spec)
    keep = np.setdiff1d(np.arange(total, dtype=np.int64), dead)
    ci, rem = np.divmod(keep, spec.kernel_h * spec.kernel_w)
    ki, kj = np.divmod(rem, spec.kernel_w)
    # gather only surviving (c, kh, kw) planes: result (n, S, oh, ow)
    gathered = win[:, ci, :, :, ki, kj]
    out = gathered.transpose(1, 0, 2, 3).reshape(keep.size, n * oh * ow)
    return np.ascontiguousarray(out, dtype=DTYPE)


def dense_gemm(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Reference matrix product: float64 accumulation, float32 store."""
    a = as_matrix(a, "a", allow_zero_rows=True)
    b = as_matrix(b, "b", allow_zero_rows=True)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"gemm mismatch: {a.shape} x {b.shape}")
    return (a.astype(np.float64) @ b.astype(np.float64)).astype(DTYPE)


def dense_matvec(w: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Reference matrix-vector product with float64 accumulation."""
    w = as_matrix(w, "w")
    x = as_vector(x, "x")
    if w.shape[1] != x.shape[0]:
        raise ShapeError(f"matvec mismatch: {w.shape} x {x.shape}")
    return (w.astype(np.float64) @ x.astype(np.float64)).astype(DTYPE)


def filters_to_matrix(filters: np.ndarray) -> np.ndarray:
    """Flatten a (f, c, kh, kw) filter bank to (f, c*kh*kw), (c, kh, kw) order."""
    filters = as_tensor4(filters, "filters")
    f = filters.shape[0]
    return np.ascontiguousarray(filters.reshape(f, -1), dtype=DTYPE)


def matrix_to_filters(m: np.ndarray, c: int, kh: int, kw: int) -> np.ndarray:
    if m.shape[1] != c * kh * kw:
        raise ShapeError(f"matrix cols {m.shape[1]} != {c}*{kh}*{kw}")
    return np.ascontiguousarray(m.reshape(m.shape[0], c, kh, kw), dtype=DTYPE)


def gemm_to_tensor4(y: np.ndarray, n: int, oh: int, ow: int) -> np.ndarray:
    """Fold a (f, n*oh*ow) GEMM result back into an NCHW tensor."""
    f = y.shape[0]
    if y.shape[1] != n * oh * ow:
        raise ShapeError(f"gemm result cols {y.shape[1]} != {n}*{oh}*{ow}")
    return np.ascontiguousarray(y.reshape(f, n, oh, ow).transpose(1, 0, 2, 3))


def conv2d_direct(x: np.ndarray, filters: np.ndarray, spec: ConvSpec) -> np.ndarray:
    """Naive seven-loop convolution. Oracle only; do not use on large shapes."""
    x = as_tensor4(x, "input")
    filters = as_tensor4(filters, "filters")
    n, c, h, w = x.shape
    f, fc, kh, kw = filters.shape
    if fc != c:
        raise ShapeError(f"filter channels {fc} != input channels {c}")
    if (kh, kw) != (spec.kernel_h, spec.kernel_w):
        raise ShapeError("filter kernel dims disagree with spec")
    oh, ow = spec.out_dims(h, w)
    out = np.zeros((n, f, oh, ow), dtype=DTYPE)
    for b in range(n):
        for fi in range(f):
            for oy in range(oh):
                for ox in range(ow):
                    acc = 0.0
                    for ci in range(c):
                        for ky in range(kh):
                            for kx in range(kw):
                                iy = oy * spec.stride_h + ky - spec.pad_h
                                ix = ox * spec.stride_w + kx - spec.pad_w
                                if 0 <= iy < h and 0 <= ix < w:
                                    acc += float(x[b, ci, iy, ix]) * float(
                                        filters[fi, ci, ky, kx]
                                    )
                    out[b, fi, oy, ox] = acc
    return out


def _zeros_like_bias(size: int) -> np.ndarray:
    return np.zeros(size, dtype=DTYPE)


@dataclass
class GruWeights:
    """Gate weights for one GRU cell.

    Each weight may be a dense matrix or any object the supplied matvec
    understands (e.g. a BCRC-encoded matrix with a sparse matvec).
    x-side weights map the input, h-side weights map the previous state.
    """

    update_x: object
    update_h: object
    reset_x: object
    reset_h: object
    cand_x: object
    cand_h: object
    bias_update: np.ndarray = None
    bias_reset: np.ndarray = None
    bias_cand: np.ndarray = None

    def __post_init__(self):
        hidden = _rows_of(self.update_h)
        if self.bias_update is None:
            self.bias_update = _zeros_like_bias(hidden)
        if self.bias_reset is None:
            self.bias_reset = _zeros_like_bias(hidden)
        if self.bias_cand is None:
            self.bias_cand = _zeros_like_bias(hidden)


def _rows_of(w) -> int:
    if hasattr(w, "rows"):
        return w.rows
    return w.shape[0]


def _sigmoid(v: np.ndarray) -> np.ndarray:
    return (1.0 / (1.0 + np.exp(-v.astype(np.float64)))).astype(DTYPE)


def gru_cell(
    x: np.ndarray, h_prev: np.ndarray, weights: GruWeights, matvec=None
) -> np.ndarray:
    """One GRU step; every matrix-vector product goes through `matvec`.

    Update-gate convention: h = z * h_prev + (1 - z) * cand, so all-zero
    weights and biases give h = 0.5 * h_prev.
    """
    mv = matvec if matvec is not None else dense_matvec
    x = as_vector(x, "x")
    h_prev = as_vector(h_prev, "h_prev")
    w = weights
    hidden = h_prev.shape[0]
    for name in ("bias_update", "bias_reset", "bias_cand"):
        if getattr(w, name).shape[0] != hidden:
            raise ShapeError(f"{name} length != hidden size {hidden}")
    z = _sigmoid(mv(w.update_x, x) + mv(w.update_h, h_prev) + w.bias_update)
    r = _sigmoid(mv(w.reset_x, x) + mv(w.reset_h, h_prev) + w.bias_reset)
    cand = np.tanh(
        (mv(w.cand_x, x) + mv(w.cand_h, (r * h_prev).astype(DTYPE)) + w.bias_cand).astype(
            np.float64
        )
    ).astype(DTYPE)
    return (z * h_prev + (1.0 - z) * cand).astype(DTYPE)
