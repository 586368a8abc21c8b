import numpy as np
import pytest

from grim.errors import PermError
from grim.reorder import ReorderPlan, apply_reorder, plan_reorder, unreorder_output


def test_identical_rows_single_group():
    w = np.ones((4, 6), dtype=np.float32)
    mask = np.zeros((4, 6), dtype=bool)
    mask[:, [1, 3]] = True
    plan = plan_reorder(w, mask)
    assert plan.groups == [(0, 4)]
    np.testing.assert_array_equal(np.sort(plan.perm), np.arange(4))


def test_distinct_patterns_sorted_by_nnz_desc():
    w = np.ones((3, 4), dtype=np.float32)
    mask = np.array(
        [
            [True, True, True, False],   # nnz 3
            [True, False, False, False], # nnz 1
            [True, True, False, False],  # nnz 2
        ]
    )
    plan = plan_reorder(w, mask)
    nnz_seq = [mask[r].sum() for r in plan.perm]
    assert nnz_seq == [3, 2, 1]
    assert len(plan.groups) == 3


def test_shared_pattern_rows_become_leading_group():
    # rows 0 and 3 share {0, 3, 6}; they land at reordered rows 0 and 1
    mask = np.zeros((4, 8), dtype=bool)
    mask[0, [0, 3, 6]] = True
    mask[3, [0, 3, 6]] = True
    mask[1, [1, 4]] = True
    mask[2, [2]] = True
    w = np.arange(32, dtype=np.float32).reshape(4, 8)
    plan = plan_reorder(w, mask)
    assert plan.perm[0] == 0 and plan.perm[1] == 3
    assert plan.groups[0] == (0, 2)


def test_apply_reorder_identity_and_swap():
    w = np.arange(6, dtype=np.float32).reshape(2, 3)
    ident = ReorderPlan(perm=np.array([0, 1]), groups=[(0, 1), (1, 2)])
    np.testing.assert_array_equal(apply_reorder(w, ident), w)
    swap = ReorderPlan(perm=np.array([1, 0]), groups=[(0, 1), (1, 2)])
    np.testing.assert_array_equal(apply_reorder(w, swap), w[[1, 0]])


def test_apply_then_inverse_restores_bitwise():
    rng = np.random.default_rng(3)
    w = rng.standard_normal((10, 5)).astype(np.float32)
    perm = rng.permutation(10)
    plan = ReorderPlan(perm=perm, groups=[(i, i + 1) for i in range(10)])
    np.testing.assert_array_equal(unreorder_output(apply_reorder(w, plan), plan), w)


def test_permutation_validation():
    w = np.ones((3, 2), dtype=np.float32)
    with pytest.raises(PermError):
        ReorderPlan(perm=np.array([0, 0, 2]), groups=[(0, 3)])
    plan = ReorderPlan(perm=np.array([0, 1]), groups=[(0, 2)])
    with pytest.raises(PermError):
        apply_reorder(w, plan)


def test_multiset_of_rows_preserved():
    rng = np.random.default_rng(4)
    w = rng.standard_normal((12, 7)).astype(np.float32)
    mask = rng.random((12, 7)) < 0.4
    plan = plan_reorder(w, mask)
    out = apply_reorder(w, plan)
    got = sorted(map(tuple, out.tolist()))
    want = sorted(map(tuple, w.tolist()))
    assert got == want


def test_group_purity_and_monotone_nnz():
    rng = np.random.default_rng(5)
    for seed in range(20):
        r = np.random.default_rng(seed)
        rows, cols = int(r.integers(2, 20)), int(r.integers(2, 16))
        mask = r.random((rows, cols)) < r.uniform(0.1, 0.6)
        w = rng.standard_normal((rows, cols)).astype(np.float32)
        plan = plan_reorder(w, mask)
        sizes = []
        for start, end in plan.groups:
            first = np.flatnonzero(mask[plan.perm[start]])
            for k in range(start, end):
                np.testing.assert_array_equal(first, np.flatnonzero(mask[plan.perm[k]]))
            sizes.append(first.size)
        assert sizes == sorted(sizes, reverse=True)


def test_end_to_end_transparency():
    rng = np.random.default_rng(6)
    w = rng.standard_normal((16, 12)).astype(np.float32)
    mask = rng.random((16, 12)) < 0.5
    wm = np.where(mask, w, 0).astype(np.float32)
    plan = plan_reorder(wm, mask)
    x = rng.standard_normal(12).astype(np.float32)
    via = unreorder_output(apply_reorder(wm, plan) @ x, plan)
    np.testing.assert_allclose(via, wm @ x, rtol=1e-6, atol=1e-6)
