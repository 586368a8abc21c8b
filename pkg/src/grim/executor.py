"""Sparse GEMV/GEMM over BCRC matrices, plus the register-load cost model.

Two interchangeable backends implement the kernels: a Cython extension
(grim._kernels) and a numpy fallback (grim._kernels_py). The extension is
preferred when importable; set GRIM_PURE_PYTHON=1 to force the fallback.

Scheduling follows the group structure of the format: runs are processed
in order, and within a run the rows are split into contiguous chunks of
ceil(run_rows / threads), one worker per chunk. Every output row is
written by exactly one worker and accumulated in a fixed order, so
results are bitwise identical across thread counts for a fixed config.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .bcrc import BcrcMatrix
from .errors import ConsistencyError, ShapeError

__all__ = [
    "KernelConfig",
    "LoadStats",
    "DEFAULT_CONFIG",
    "sparse_gemv",
    "sparse_gemm",
    "count_loads",
    "backend_name",
    "default_threads",
]

if os.environ.get("GRIM_PURE_PYTHON", "") not in ("", "0"):
    from . import _kernels_py as _backend
else:
    try:
        from . import _kernels as _backend  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as _backend


def backend_name() -> str:
    return _backend.NAME


def default_threads() -> int:
    env = os.environ.get("GRIM_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass(frozen=True)
class KernelConfig:
    """Tuning knobs for one kernel invocation."""

    tile_rows: int = 8
    tile_cols: int = 64
    unroll: int = 4
    threads: int = 1
    lre_enabled: bool = True

    def __post_init__(self):
        if min(self.tile_rows, self.tile_cols, self.unroll, self.threads) < 1:
            raise ConsistencyError("all KernelConfig fields must be >= 1")

    def short(self) -> str:
        return (
            f"tr{self.tile_rows}:tc{self.tile_cols}:u{self.unroll}"
            f":t{self.threads}:lre{int(self.lre_enabled)}"
        )

    @classmethod
    def from_short(cls, text: str) -> "KernelConfig":
        vals = {}
        for part in text.split(":"):
            for key in ("tr", "tc", "u", "t", "lre"):
                if part.startswith(key) and part[len(key) :].isdigit():
                    vals[key] = int(part[len(key) :])
                    break
        return cls(
            tile_rows=vals.get("tr", 8),
            tile_cols=vals.get("tc", 64),
            unroll=vals.get("u", 4),
            threads=vals.get("t", 1),
            lre_enabled=bool(vals.get("lre", 1)),
        )


DEFAULT_CONFIG = KernelConfig()


@dataclass(frozen=True)
class LoadStats:
    """Modeled register-load charge counts for one kernel execution."""

    input_loads: int
    weight_loads: int


_POOL: ThreadPoolExecutor | None = None


def _pool() -> ThreadPoolExecutor:
    global _POOL
    if _POOL is None:
        _POOL = ThreadPoolExecutor(max_workers=os.cpu_count() or 1)
    return _POOL


def _worker_chunks(b: BcrcMatrix, threads: int):
    """Per-worker (run, r0, r1) chunk arrays following the group schedule.

    Cached on the matrix: the format is immutable, so the plan for a
    given thread count never changes.
    """
    cached = b._schedule_cache.get(threads)
    if cached is not None:
        return cached
    occ = b.occurrence.astype(np.int64)
    per_worker: list[list[tuple[int, int, int]]] = [[] for _ in range(threads)]
    for g in range(occ.size - 1):
        r0, r1 = int(occ[g]), int(occ[g + 1])
        span = r1 - r0
        chunk = -(-span // threads)  # ceil
        w = 0
        for start in range(r0, r1, chunk):
            per_worker[w].append((g, start, min(start + chunk, r1)))
            w += 1
    out = []
    for items in per_worker:
        if not items:
            continue
        arr = np.asarray(items, dtype=np.int64)
        out.append(
            (
                np.ascontiguousarray(arr[:, 0]),
                np.ascontiguousarray(arr[:, 1]),
                np.ascontiguousarray(arr[:, 2]),
            )
        )
    b._schedule_cache[threads] = out
    return out


def _max_run_cols(b: BcrcMatrix) -> int:
    cached = b._schedule_cache.get("max_cols")
    if cached is None:
        cs = b.column_stride.astype(np.int64)
        cached = int(np.max(np.diff(cs))) if cs.size > 1 else 0
        b._schedule_cache["max_cols"] = cached
    return cached


def _remap_columns(b: BcrcMatrix, dead_cols: np.ndarray) -> tuple[np.ndarray, int]:
    """Column indices renumbered after deleting `dead_cols` input rows."""
    dead = np.unique(np.asarray(dead_cols, dtype=np.int64))
    if dead.size and (dead[0] < 0 or dead[-1] >= b.cols):
        raise ShapeError("dead column index out of range")
    cols = b.compact_column.astype(np.int64)
    if np.isin(cols, dead).any():
        raise ConsistencyError("dead_cols includes a column with stored weights")
    shifted = cols - np.searchsorted(dead, cols, side="left")
    return shifted.astype(np.uint32), b.cols - dead.size


def sparse_gemv(
    b: BcrcMatrix, x: np.ndarray, cfg: KernelConfig = DEFAULT_CONFIG
) -> np.ndarray:
    """y = dense(b) @ x with y returned in original row order."""
    x = np.ascontiguousarray(x, dtype=np.float32)
    if x.ndim != 1 or x.shape[0] != b.cols:
        raise ShapeError(f"x must be 1-D of length {b.cols}, got {x.shape}")
    y_re = np.zeros(b.rows, dtype=np.float32)
    if _backend.NAME == "ext":
        groups = _worker_chunks(b, cfg.threads)
        scratch_len = max(1, _max_run_cols(b))

        def run(args):
            runs, r0s, r1s = args
            scratch = np.empty(scratch_len, dtype=np.float32)
            _backend.gemv_chunks(
                b.row_offset,
                b.occurrence,
                b.column_stride,
                b.compact_column,
                b.weights,
                x,
                y_re,
                runs,
                r0s,
                r1s,
                cfg.unroll,
                cfg.lre_enabled,
                scratch,
            )

        if len(groups) <= 1:
            for g in groups:
                run(g)
        else:
            list(_pool().map(run, groups))
    else:
        y_re = _backend.gemv(
            b.row_offset,
            b.occurrence,
            b.column_stride,
            b.compact_column,
            b.weights,
            x,
            cfg,
        )
    y = np.empty_like(y_re)
    y[b.reorder.astype(np.int64)] = y_re
    return y


def sparse_gemm(
    b: BcrcMatrix,
    x: np.ndarray,
    cfg: KernelConfig = DEFAULT_CONFIG,
    dead_cols=None,
) -> np.ndarray:
    """Y = dense(b) @ X, column-tiled by cfg.tile_cols.

    With `dead_cols`, X must be the input matrix with those rows already
    removed (see im2col_skipping); stored column indices are renumbered to
    match.
    """
    x = np.ascontiguousarray(x, dtype=np.float32)
    if x.ndim != 2:
        raise ShapeError("x must be 2-D")
    compact = b.compact_column
    expected_rows = b.cols
    if dead_cols is not None:
        compact, expected_rows = _remap_columns(b, dead_cols)
    if x.shape[0] != expected_rows:
        raise ShapeError(f"x rows {x.shape[0]} != expected {expected_rows}")

    y_re = np.zeros((b.rows, x.shape[1]), dtype=np.float32)
    if _backend.NAME == "ext":
        groups = _worker_chunks(b, cfg.threads)
        max_cols = max(1, _max_run_cols(b))
        tile = min(cfg.tile_cols, x.shape[1]) or 1

        def run(args):
            runs, r0s, r1s = args
            xg = np.empty(max_cols * tile, dtype=np.float32)
            acc = np.empty(tile, dtype=np.float64)
            _backend.gemm_chunks(
                b.row_offset,
                b.column_stride,
                compact,
                b.weights,
                x,
                y_re,
                runs,
                r0s,
                r1s,
                tile,
                cfg.unroll,
                cfg.lre_enabled,
                xg,
                acc,
            )

        if len(groups) <= 1:
            for g in groups:
                run(g)
        else:
            list(_pool().map(run, groups))
    else:
        y_re = _backend.gemm(
            b.row_offset,
            b.occurrence,
            b.column_stride,
            compact,
            b.weights,
            x,
            cfg,
        )
    y = np.empty_like(y_re)
    y[b.reorder.astype(np.int64)] = y_re
    return y


def count_loads(b: BcrcMatrix, x_cols: int, cfg: KernelConfig) -> LoadStats:
    """Simulate the kernel's load schedule without doing arithmetic.

    A charge event is (input element, tile, row) without load reuse, or
    (input element, tile, run) with it: rows of one occurrence run inside
    a row tile read each shared element once. Weights are charged once
    per column tile. This is a cost model, not a hardware trace.
    """
    if x_cols < 1:
        raise ShapeError("x_cols must be >= 1")
    nnz = b.nnz
    n_col_tiles = -(-x_cols // cfg.tile_cols)
    weight_loads = nnz * n_col_tiles
    if not cfg.lre_enabled:
        return LoadStats(input_loads=nnz * x_cols, weight_loads=weight_loads)
    occ = b.occurrence.astype(np.int64)
    cs = b.column_stride.astype(np.int64)
    charges = 0
    for g in range(occ.size - 1):
        ncols = int(cs[g + 1] - cs[g])
        if ncols == 0:
            continue
        first_tile = occ[g] // cfg.tile_rows
        last_tile = (occ[g + 1] - 1) // cfg.tile_rows
        charges += ncols * int(last_tile - first_tile + 1)
    return LoadStats(input_loads=charges * x_cols, weight_loads=weight_loads)


def config_with_threads(cfg: KernelConfig, threads: int) -> KernelConfig:
    return replace(cfg, threads=max(1, threads))
