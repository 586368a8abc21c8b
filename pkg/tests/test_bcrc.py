from pathlib import Path

import numpy as np
import pytest

from conftest import random_bcr_case
from grim.bcrc import (
    BcrcMatrix,
    decode_bcrc,
    decode_csr,
    encode_bcrc,
    encode_csr,
    extra_storage_bytes,
    from_bytes,
    load_bcrc,
    save_bcrc,
    to_bytes,
)
from grim.errors import ConsistencyError, FormatError
from grim.reorder import plan_reorder

GOLDEN = Path(__file__).parent / "golden" / "fig9.bcrc"


def shared_pattern_case():
    """Four rows where rows 0 and 3 share the column list [0, 3, 6]."""
    mask = np.zeros((4, 8), dtype=bool)
    mask[0, [0, 3, 6]] = True
    mask[3, [0, 3, 6]] = True
    mask[1, [1, 4]] = True
    mask[2, [2]] = True
    w = (np.arange(32, dtype=np.float32) + 1.0).reshape(4, 8)
    return np.where(mask, w, 0).astype(np.float32), mask


def test_shared_pattern_array_heads():
    w, mask = shared_pattern_case()
    b = encode_bcrc(w, mask, plan_reorder(w, mask))
    assert b.reorder[0] == 0 and b.reorder[1] == 3
    assert b.row_offset[0] == 0 and b.row_offset[1] == 3
    assert b.column_stride[0] == 0 and b.column_stride[1] == 3
    np.testing.assert_array_equal(b.compact_column[:3], [0, 3, 6])
    assert b.occurrence[0] == 0 and b.occurrence[1] == 2


def test_shared_pattern_golden_bytes():
    w, mask = shared_pattern_case()
    b = encode_bcrc(w, mask, plan_reorder(w, mask))
    assert GOLDEN.exists(), "golden file missing; regenerate with tests/make_golden.py"
    assert to_bytes(b) == GOLDEN.read_bytes()
    loaded = load_bcrc(GOLDEN)
    np.testing.assert_array_equal(decode_bcrc(loaded), w)


def test_fully_dense_two_by_two():
    w = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32)
    b = encode_bcrc(w, np.ones((2, 2), bool), None)
    assert b.num_runs == 1
    np.testing.assert_array_equal(b.compact_column, [0, 1])
    assert b.weights.size == 4


@pytest.mark.parametrize("seed", range(25))
def test_roundtrip_randomized(seed):
    dense, b, mask = random_bcr_case(seed, max_dim=96)
    np.testing.assert_array_equal(decode_bcrc(b), dense)


def test_roundtrip_empty_matrix():
    w = np.zeros((3, 5), dtype=np.float32)
    b = encode_bcrc(w, np.zeros((3, 5), bool), None)
    assert b.nnz == 0
    np.testing.assert_array_equal(decode_bcrc(b), w)


def test_roundtrip_single_row():
    w = np.array([[1.0, 0.0, 2.0, 0.0]], dtype=np.float32)
    mask = w != 0
    b = encode_bcrc(w, mask, None)
    np.testing.assert_array_equal(decode_bcrc(b), w)


def test_sharing_soundness():
    for seed in range(10):
        dense, b, mask = random_bcr_case(seed + 100, max_dim=64)
        patterns = {
            tuple(np.flatnonzero(dense[r] != 0)) if np.any(dense[r]) else ()
            for r in range(dense.shape[0])
        }
        # stored column lists == distinct kept-column sets among rows
        mdense = mask.to_dense()
        distinct = {tuple(np.flatnonzero(mdense[r])) for r in range(dense.shape[0])}
        assert b.num_runs == len(distinct)


def test_zero_rows_share_one_empty_run():
    w = np.zeros((4, 4), dtype=np.float32)
    mask = np.zeros((4, 4), dtype=bool)
    mask[0, :2] = True
    b = encode_bcrc(w + 1.0, mask, None)
    # three all-pruned rows form a single trailing run with no columns
    assert b.num_runs == 2
    assert b.column_stride[-1] == b.column_stride[-2]


def test_csr_identity():
    w = np.eye(3, dtype=np.float32)
    m = encode_csr(w)
    np.testing.assert_array_equal(m.row_ptr, [0, 1, 2, 3])
    np.testing.assert_array_equal(m.col_idx, [0, 1, 2])


def test_csr_zero_matrix():
    m = encode_csr(np.zeros((2, 3), dtype=np.float32))
    assert m.values.size == 0


def test_csr_roundtrip_masked():
    for seed in range(10):
        dense, _, mask = random_bcr_case(seed + 200, max_dim=48)
        m = encode_csr(dense, mask)
        np.testing.assert_array_equal(decode_csr(m), dense)


def test_extra_storage_csr_formula():
    rng = np.random.default_rng(0)
    w = (rng.random((6, 9)) < 0.4) * rng.standard_normal((6, 9))
    m = encode_csr(w.astype(np.float32))
    assert extra_storage_bytes(m) == 4 * (6 + 1 + m.nnz)


def test_extra_storage_bcrc_single_run_formula():
    # one run of k rows sharing s columns
    k, s, cols = 5, 3, 10
    mask = np.zeros((k, cols), dtype=bool)
    mask[:, [1, 4, 7]] = True
    w = np.ones((k, cols), dtype=np.float32)
    b = encode_bcrc(w, mask, None)
    assert extra_storage_bytes(b) == 4 * (k + (k + 1) + 2 + 2 + s)
    csr = encode_csr(w, mask)
    assert extra_storage_bytes(csr) == 4 * (k + 1 + k * s)
    assert extra_storage_bytes(b) < extra_storage_bytes(csr)  # k*s > k+s+4


def test_bcrc_beats_csr_on_synthesized_matrix():
    from grim.tuner import synthesize_matrix

    w, mask = synthesize_matrix(1024, 1024, 10.0, 4, 16, seed=3)
    b = encode_bcrc(w, mask, plan_reorder(w, mask))
    csr = encode_csr(w, mask)
    assert extra_storage_bytes(b) <= 0.7 * extra_storage_bytes(csr)


def test_serialization_roundtrip_and_errors(tmp_path):
    dense, b, _ = random_bcr_case(7, max_dim=64)
    path = tmp_path / "m.bcrc"
    save_bcrc(b, path)
    loaded = load_bcrc(path)
    np.testing.assert_array_equal(decode_bcrc(loaded), dense)

    raw = bytearray(to_bytes(b))
    raw[0:4] = b"NOPE"
    with pytest.raises(FormatError):
        from_bytes(bytes(raw))
    with pytest.raises(FormatError):
        from_bytes(to_bytes(b)[:-3])


def test_validate_rejects_malformed():
    w = np.array([[1.0, 2.0]], dtype=np.float32)
    b = encode_bcrc(w, w != 0, None)
    with pytest.raises(FormatError):
        BcrcMatrix(
            rows=b.rows,
            cols=b.cols,
            reorder=b.reorder,
            row_offset=np.array([0, 5], np.uint32),  # wrong terminal
            occurrence=b.occurrence,
            column_stride=b.column_stride,
            compact_column=b.compact_column,
            weights=b.weights,
        )


def test_encode_rejects_mismatched_plan():
    w, mask = shared_pattern_case()
    other = np.ones((4, 8), dtype=np.float32)
    plan = plan_reorder(other, np.ones((4, 8), bool))
    with pytest.raises(ConsistencyError):
        encode_bcrc(w, mask, plan)
