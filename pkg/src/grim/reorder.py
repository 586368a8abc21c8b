"""Row reordering so rows with identical sparsity patterns sit together.

Rows are sorted by surviving-weight count (descending), then by a stable
64-bit fingerprint of their kept-column list; ties fall back to the
original row id. Maximal runs of rows with *identical* kept-column sets
become groups - the unit the compact storage format and the executor's
load reuse both key on.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .dense import as_matrix
from .errors import ConsistencyError, PermError

__all__ = ["ReorderPlan", "plan_reorder", "apply_reorder", "unreorder_output"]


@dataclass
class ReorderPlan:
    """perm[k] = original row placed at reordered position k; groups are
    half-open (start, end) ranges over reordered rows with one shared
    kept-column set per group."""

    perm: np.ndarray
    groups: list[tuple[int, int]]

    def __post_init__(self):
        self.perm = np.asarray(self.perm, dtype=np.int64)
        check_permutation(self.perm, self.perm.size)
        pos = 0
        for start, end in self.groups:
            if start != pos or end <= start:
                raise ConsistencyError("groups must contiguously partition rows")
            pos = end
        if pos != self.perm.size:
            raise ConsistencyError("groups do not cover all rows")

    @property
    def inverse(self) -> np.ndarray:
        inv = np.empty_like(self.perm)
        inv[self.perm] = np.arange(self.perm.size, dtype=np.int64)
        return inv


def check_permutation(perm: np.ndarray, rows: int):
    perm = np.asarray(perm)
    if perm.shape != (rows,):
        raise PermError(f"perm length {perm.shape} != rows {rows}")
    seen = np.zeros(rows, dtype=bool)
    if perm.size:
        if perm.min() < 0 or perm.max() >= rows:
            raise PermError("perm entry out of range")
        seen[perm] = True
    if not seen.all():
        raise PermError("perm is not a permutation")


def _mask_to_dense(mask, shape) -> np.ndarray:
    if hasattr(mask, "to_dense"):
        dense = mask.to_dense()
    else:
        dense = np.asarray(mask, dtype=bool)
    if dense.shape != shape:
        raise ConsistencyError(f"mask shape {dense.shape} != weights shape {shape}")
    return dense


def _fingerprint(cols: np.ndarray) -> int:
    digest = hashlib.blake2b(
        cols.astype("<u4").tobytes(), digest_size=8
    ).digest()
    return int.from_bytes(digest, "little")


def plan_reorder(w: np.ndarray, mask) -> ReorderPlan:
    """Sort rows by (nnz desc, pattern fingerprint, original id) and group
    maximal runs of identical kept-column sets."""
    w = as_matrix(w)
    dense = _mask_to_dense(mask, w.shape)
    patterns = [np.flatnonzero(dense[r]).astype(np.uint32) for r in range(w.shape[0])]
    keys = [
        (-patterns[r].size, _fingerprint(patterns[r]), r) for r in range(w.shape[0])
    ]
    perm = np.asarray([k[2] for k in sorted(keys)], dtype=np.int64)

    groups: list[tuple[int, int]] = []
    start = 0
    for k in range(1, perm.size + 1):
        if k == perm.size or not np.array_equal(
            patterns[perm[k]], patterns[perm[start]]
        ):
            groups.append((start, k))
            start = k
    if perm.size == 0:
        groups = []
    return ReorderPlan(perm=perm, groups=groups)


def apply_reorder(w: np.ndarray, plan: ReorderPlan) -> np.ndarray:
    """Return the matrix with row k = original row plan.perm[k]."""
    w = as_matrix(w)
    check_permutation(plan.perm, w.shape[0])
    return np.ascontiguousarray(w[plan.perm])


def unreorder_output(y: np.ndarray, plan: ReorderPlan) -> np.ndarray:
    """Undo a reorder on the output side: result row perm[k] = y row k.

    Accepts 1-D (GEMV result) or 2-D (GEMM result) arrays.
    """
    y = np.asarray(y)
    rows = y.shape[0]
    check_permutation(plan.perm, rows)
    out = np.empty_like(y)
    out[plan.perm] = y
    return out
