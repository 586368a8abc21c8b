import numpy as np
import pytest

from grim.bcrc import encode_bcrc
from grim.executor import KernelConfig
from grim.reorder import plan_reorder
from grim.tuner import synthesize_matrix

# twelve-point kernel config sweep used across executor/acceptance tests
CONFIG_SWEEP = [
    KernelConfig(tile_rows=4, tile_cols=16, unroll=1, threads=1, lre_enabled=True),
    KernelConfig(tile_rows=4, tile_cols=64, unroll=4, threads=1, lre_enabled=True),
    KernelConfig(tile_rows=16, tile_cols=16, unroll=4, threads=1, lre_enabled=True),
    KernelConfig(tile_rows=16, tile_cols=64, unroll=1, threads=1, lre_enabled=True),
    KernelConfig(tile_rows=8, tile_cols=32, unroll=8, threads=1, lre_enabled=True),
    KernelConfig(tile_rows=8, tile_cols=64, unroll=4, threads=2, lre_enabled=True),
    KernelConfig(tile_rows=4, tile_cols=16, unroll=1, threads=1, lre_enabled=False),
    KernelConfig(tile_rows=4, tile_cols=64, unroll=4, threads=1, lre_enabled=False),
    KernelConfig(tile_rows=16, tile_cols=16, unroll=4, threads=1, lre_enabled=False),
    KernelConfig(tile_rows=16, tile_cols=64, unroll=1, threads=1, lre_enabled=False),
    KernelConfig(tile_rows=8, tile_cols=32, unroll=8, threads=2, lre_enabled=False),
    KernelConfig(tile_rows=8, tile_cols=64, unroll=8, threads=4, lre_enabled=True),
]


def random_bcr_case(seed: int, max_dim: int = 256):
    """Random BCR-pruned matrix: (dense_masked, bcrc, mask)."""
    rng = np.random.default_rng(seed)
    block_h = int(rng.choice([1, 2, 4, 8]))
    block_w = int(rng.choice([4, 8, 16]))
    rows = block_h * int(rng.integers(1, max(2, max_dim // block_h) + 1))
    cols = block_w * int(rng.integers(1, max(2, max_dim // block_w) + 1))
    rate = float(rng.uniform(2.0, 20.0))
    w, mask = synthesize_matrix(rows, cols, rate, block_h, block_w, seed=seed)
    b = encode_bcrc(w, mask, plan_reorder(w, mask))
    dense = np.where(mask.to_dense(), w, 0).astype(np.float32)
    return dense, b, mask


def assert_close(actual, expected, rtol=1e-5, atol=1e-6):
    np.testing.assert_allclose(actual, expected, rtol=rtol, atol=atol)


@pytest.fixture(params=["ext", "python"])
def backend(request, monkeypatch):
    """Run a test under both kernel backends (ext skipped if not built)."""
    import grim.executor as executor

    if request.param == "ext":
        try:
            from grim import _kernels
        except ImportError:
            pytest.skip("compiled extension not available")
        monkeypatch.setattr(executor, "_backend", _kernels)
    else:
        from grim import _kernels_py

        monkeypatch.setattr(executor, "_backend", _kernels_py)
    return request.param
