"""BCRC compact sparse storage, a CSR baseline, and overhead accounting.

BCRC (Blocked Column-Row Compact) stores a block-pruned matrix in six
arrays. With rows reordered so identical kept-column sets are adjacent,
each maximal run of such rows stores its column list exactly once:

  reorder        reorder[k] = original row id at reordered position k
  row_offset     per reordered row, start into `weights`; sentinel at end
  occurrence     start row of each run; terminal sentinel = row count
  column_stride  per run, start into `compact_column`; terminal sentinel
  compact_column shared column lists, one per run, strictly increasing
  weights        surviving values, reordered-row major

All index arrays are 4-byte unsigned; `extra_storage_bytes` charges every
index entry (sentinels included) and excludes the weights payload. Rows
with no surviving weights share a single run with an empty column list.

The `.bcrc` file layout is little-endian:
  magic "BCRC" | version u8 | rows u32 | cols u32 |
  then the six arrays in the order above, each as u32 length + payload
  (u32 entries for index arrays, f32 for weights).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .dense import DTYPE, as_matrix
from .errors import ConsistencyError, FormatError
from .reorder import ReorderPlan, plan_reorder

__all__ = [
    "BcrcMatrix",
    "CsrMatrix",
    "encode_bcrc",
    "decode_bcrc",
    "encode_csr",
    "decode_csr",
    "extra_storage_bytes",
    "save_bcrc",
    "load_bcrc",
]

_MAGIC = b"BCRC"
_VERSION = 1
_IDX = np.uint32


@dataclass
class BcrcMatrix:
    rows: int
    cols: int
    reorder: np.ndarray
    row_offset: np.ndarray
    occurrence: np.ndarray
    column_stride: np.ndarray
    compact_column: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.reorder = np.ascontiguousarray(self.reorder, dtype=_IDX)
        self.row_offset = np.ascontiguousarray(self.row_offset, dtype=_IDX)
        self.occurrence = np.ascontiguousarray(self.occurrence, dtype=_IDX)
        self.column_stride = np.ascontiguousarray(self.column_stride, dtype=_IDX)
        self.compact_column = np.ascontiguousarray(self.compact_column, dtype=_IDX)
        self.weights = np.ascontiguousarray(self.weights, dtype=DTYPE)
        self.validate()
        self._schedule_cache: dict[int, list] = {}  # executor worker plans

    @property
    def nnz(self) -> int:
        return int(self.weights.size)

    @property
    def num_runs(self) -> int:
        return int(self.occurrence.size - 1)

    def validate(self):
        r = self.rows
        if r < 1 or self.cols < 1:
            raise FormatError("rows and cols must be >= 1")
        if self.reorder.size != r:
            raise FormatError("reorder length != rows")
        if np.sort(self.reorder).tolist() != list(range(r)):
            raise FormatError("reorder is not a permutation of [0, rows)")
        if self.row_offset.size != r + 1:
            raise FormatError("row_offset must have rows+1 entries")
        if self.row_offset[0] != 0 or self.row_offset[-1] != self.weights.size:
            raise FormatError("row_offset endpoints are wrong")
        if np.any(np.diff(self.row_offset.astype(np.int64)) < 0):
            raise FormatError("row_offset must be non-decreasing")
        occ = self.occurrence.astype(np.int64)
        if occ.size < 2 or occ[0] != 0 or occ[-1] != r:
            raise FormatError("occurrence must start at 0 and end at rows")
        if np.any(np.diff(occ) <= 0):
            raise FormatError("occurrence must be strictly increasing")
        cs = self.column_stride.astype(np.int64)
        if cs.size != occ.size:
            raise FormatError("column_stride length != occurrence length")
        if cs[0] != 0 or cs[-1] != self.compact_column.size:
            raise FormatError("column_stride endpoints are wrong")
        if np.any(np.diff(cs) < 0):
            raise FormatError("column_stride must be non-decreasing")
        ro = self.row_offset.astype(np.int64)
        for g in range(occ.size - 1):
            ncols = cs[g + 1] - cs[g]
            run_cols = self.compact_column[cs[g] : cs[g + 1]].astype(np.int64)
            if run_cols.size and (
                np.any(np.diff(run_cols) <= 0) or run_cols[-1] >= self.cols
            ):
                raise FormatError(f"run {g} columns not strictly increasing/<cols")
            widths = np.diff(ro[occ[g] : occ[g + 1] + 1])
            if np.any(widths != ncols):
                raise FormatError(f"run {g} rows disagree with its column list")

    def run_of_row(self, reordered_row: int) -> int:
        return int(
            np.searchsorted(self.occurrence, reordered_row, side="right") - 1
        )

    def dead_columns(self) -> np.ndarray:
        """Columns of the original matrix with no surviving weight anywhere."""
        alive = np.zeros(self.cols, dtype=bool)
        alive[self.compact_column.astype(np.int64)] = True
        return np.flatnonzero(~alive).astype(np.int64)

    def to_dense(self) -> np.ndarray:
        return decode_bcrc(self)


@dataclass
class CsrMatrix:
    rows: int
    cols: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.row_ptr = np.ascontiguousarray(self.row_ptr, dtype=_IDX)
        self.col_idx = np.ascontiguousarray(self.col_idx, dtype=_IDX)
        self.values = np.ascontiguousarray(self.values, dtype=DTYPE)
        if self.row_ptr.size != self.rows + 1 or self.row_ptr[0] != 0:
            raise FormatError("bad row_ptr")
        if self.row_ptr[-1] != self.values.size or self.col_idx.size != self.values.size:
            raise FormatError("row_ptr/col_idx/values disagree")

    @property
    def nnz(self) -> int:
        return int(self.values.size)


def _mask_dense(w: np.ndarray, mask) -> np.ndarray:
    if mask is None:
        return w != 0
    if hasattr(mask, "to_dense"):
        dense = mask.to_dense()
    else:
        dense = np.asarray(mask, dtype=bool)
    if dense.shape != w.shape:
        raise ConsistencyError("mask shape != weights shape")
    return dense


def encode_bcrc(w: np.ndarray, mask, plan: ReorderPlan | None = None) -> BcrcMatrix:
    """Encode a masked matrix; the plan must come from (w, mask).

    Masked-out values are dropped; surviving values are stored bitwise.
    """
    w = as_matrix(w)
    dense = _mask_dense(w, mask)
    if plan is None:
        plan = plan_reorder(w, dense)
    if plan.perm.size != w.shape[0]:
        raise ConsistencyError("plan row count != weights rows")

    reorder = plan.perm.astype(_IDX)
    row_counts = dense.sum(axis=1)
    row_offset = [0]
    occurrence = [0]
    column_stride = [0]
    compact_column: list[np.ndarray] = []
    weight_parts: list[np.ndarray] = []

    for start, end in plan.groups:
        rows = plan.perm[start:end]
        cols = np.flatnonzero(dense[rows[0]])
        if np.any(row_counts[rows] != cols.size) or (
            cols.size and not dense[np.ix_(rows, cols)].all()
        ):
            raise ConsistencyError(
                f"plan group ({start},{end}) rows do not share one pattern"
            )
        weight_parts.append(w[np.ix_(rows, cols)].ravel())
        for k in range(start, end):
            row_offset.append(row_offset[-1] + cols.size)
        occurrence.append(end)
        column_stride.append(column_stride[-1] + cols.size)
        compact_column.append(cols.astype(_IDX))

    weights = (
        np.concatenate(weight_parts)
        if weight_parts
        else np.empty(0, dtype=DTYPE)
    )
    compact = (
        np.concatenate(compact_column)
        if compact_column
        else np.empty(0, dtype=_IDX)
    )
    return BcrcMatrix(
        rows=w.shape[0],
        cols=w.shape[1],
        reorder=reorder,
        row_offset=np.asarray(row_offset, dtype=_IDX),
        occurrence=np.asarray(occurrence, dtype=_IDX),
        column_stride=np.asarray(column_stride, dtype=_IDX),
        compact_column=compact,
        weights=weights,
    )


def decode_bcrc(b: BcrcMatrix) -> np.ndarray:
    """Dense matrix with zeros at pruned positions, original row order."""
    out = np.zeros((b.rows, b.cols), dtype=DTYPE)
    occ = b.occurrence.astype(np.int64)
    cs = b.column_stride.astype(np.int64)
    ro = b.row_offset.astype(np.int64)
    reorder = b.reorder.astype(np.int64)
    for g in range(b.num_runs):
        cols = b.compact_column[cs[g] : cs[g + 1]].astype(np.int64)
        if not cols.size:
            continue
        rows = reorder[occ[g] : occ[g + 1]]
        slab = b.weights[ro[occ[g]] : ro[occ[g + 1]]].reshape(rows.size, cols.size)
        out[np.ix_(rows, cols)] = slab
    return out


def encode_csr(w: np.ndarray, mask=None) -> CsrMatrix:
    w = as_matrix(w)
    dense = _mask_dense(w, mask)
    row_ptr = [0]
    col_parts = []
    val_parts = []
    for r in range(w.shape[0]):
        cols = np.flatnonzero(dense[r])
        col_parts.append(cols.astype(_IDX))
        val_parts.append(w[r, cols])
        row_ptr.append(row_ptr[-1] + cols.size)
    return CsrMatrix(
        rows=w.shape[0],
        cols=w.shape[1],
        row_ptr=np.asarray(row_ptr, dtype=_IDX),
        col_idx=np.concatenate(col_parts) if col_parts else np.empty(0, _IDX),
        values=np.concatenate(val_parts) if val_parts else np.empty(0, DTYPE),
    )


def decode_csr(m: CsrMatrix) -> np.ndarray:
    out = np.zeros((m.rows, m.cols), dtype=DTYPE)
    rp = m.row_ptr.astype(np.int64)
    for r in range(m.rows):
        cols = m.col_idx[rp[r] : rp[r + 1]].astype(np.int64)
        out[r, cols] = m.values[rp[r] : rp[r + 1]]
    return out


def extra_storage_bytes(fmt) -> int:
    """Bytes of index/metadata arrays (4-byte entries), excluding values."""
    if isinstance(fmt, BcrcMatrix):
        n = (
            fmt.reorder.size
            + fmt.row_offset.size
            + fmt.occurrence.size
            + fmt.column_stride.size
            + fmt.compact_column.size
        )
        return 4 * int(n)
    if isinstance(fmt, CsrMatrix):
        return 4 * int(fmt.row_ptr.size + fmt.col_idx.size)
    raise TypeError(f"unsupported format: {type(fmt)!r}")


def _pack_array(arr: np.ndarray, kind: str) -> bytes:
    payload = arr.astype("<u4" if kind == "u4" else "<f4").tobytes()
    return struct.pack("<I", arr.size) + payload


def to_bytes(b: BcrcMatrix) -> bytes:
    parts = [
        _MAGIC,
        struct.pack("<B", _VERSION),
        struct.pack("<II", b.rows, b.cols),
        _pack_array(b.reorder, "u4"),
        _pack_array(b.row_offset, "u4"),
        _pack_array(b.occurrence, "u4"),
        _pack_array(b.column_stride, "u4"),
        _pack_array(b.compact_column, "u4"),
        _pack_array(b.weights, "f4"),
    ]
    return b"".join(parts)


def from_bytes(data: bytes) -> BcrcMatrix:
    if data[:4] != _MAGIC:
        raise FormatError("bad magic; not a .bcrc payload")
    if data[4] != _VERSION:
        raise FormatError(f"unsupported version {data[4]}")
    off = 5
    rows, cols = struct.unpack_from("<II", data, off)
    off += 8

    def take(dtype):
        nonlocal off
        (n,) = struct.unpack_from("<I", data, off)
        off += 4
        width = 4
        end = off + n * width
        if end > len(data):
            raise FormatError("truncated array payload")
        arr = np.frombuffer(data[off:end], dtype=dtype).copy()
        off = end
        return arr

    reorder = take("<u4")
    row_offset = take("<u4")
    occurrence = take("<u4")
    column_stride = take("<u4")
    compact_column = take("<u4")
    weights = take("<f4")
    if off != len(data):
        raise FormatError("trailing bytes after weights array")
    try:
        return BcrcMatrix(
            rows=int(rows),
            cols=int(cols),
            reorder=reorder,
            row_offset=row_offset,
            occurrence=occurrence,
            column_stride=column_stride,
            compact_column=compact_column,
            weights=weights,
        )
    except FormatError:
        raise
    except Exception as exc:  # malformed sizes surface as FormatError
        raise FormatError(str(exc)) from exc


def save_bcrc(b: BcrcMatrix, path):
    with open(path, "wb") as fh:
        fh.write(to_bytes(b))


def load_bcrc(path) -> BcrcMatrix:
    with open(path, "rb") as fh:
        return from_bytes(fh.read())
