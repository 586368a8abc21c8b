"""Pure-numpy fallback kernels for the sparse executor.

Selected at import time by grim.executor when the compiled extension is
unavailable (or GRIM_PURE_PYTHON=1). Rows of one run share a column list,
so their weights form a dense (run_rows, run_cols) slab in the flat
weights array; each run reduces to a gather of the input rows plus one
small dense matmul. float64 accumulation, float32 store.

Outputs are in *reordered* row order; the executor scatters them back.
"""

from __future__ import annotations

import numpy as np

NAME = "python"


def gemv(row_offset, occurrence, column_stride, compact_column, weights, x, cfg):
    rows = row_offset.size - 1
    y = np.zeros(rows, dtype=np.float32)
    occ = occurrence.astype(np.int64)
    cs = column_stride.astype(np.int64)
    ro = row_offset.astype(np.int64)
    x64 = x.astype(np.float64)
    for g in range(occ.size - 1):
        r0, r1 = occ[g], occ[g + 1]
        c0, c1 = cs[g], cs[g + 1]
        if c1 == c0:
            continue
        cols = compact_column[c0:c1].astype(np.int64)
        slab = weights[ro[r0] : ro[r1]].reshape(r1 - r0, c1 - c0)
        y[r0:r1] = (slab.astype(np.float64) @ x64[cols]).astype(np.float32)
    return y


def gemm(row_offset, occurrence, column_stride, compact_column, weights, x, cfg):
    rows = row_offset.size - 1
    y = np.zeros((rows, x.shape[1]), dtype=np.float32)
    occ = occurrence.astype(np.int64)
    cs = column_stride.astype(np.int64)
    ro = row_offset.astype(np.int64)
    for g in range(occ.size - 1):
        r0, r1 = occ[g], occ[g + 1]
        c0, c1 = cs[g], cs[g + 1]
        if c1 == c0:
            continue
        cols = compact_column[c0:c1].astype(np.int64)
        slab = weights[ro[r0] : ro[r1]].reshape(r1 - r0, c1 - c0)
        xg = x[cols].astype(np.float64)
        y[r0:r1] = (slab.astype(np.float64) @ xg).astype(np.float32)
    return y
