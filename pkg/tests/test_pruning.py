import numpy as np
import pytest

from grim.errors import AlphaError, ConsistencyError, DataError, DivisibilityError
from grim.pruning import (
    AdmmSchedule,
    BcrMask,
    BlockPartition,
    DatasetHandle,
    PruneState,
    SparsityConstraint,
    admm_u_step,
    admm_w_step,
    admm_z_step,
    project_bcr,
    sparsity_accounting,
)


def exhaustive_best_energy(x, c):
    """Exact optimum of retained squared norm over all per-block stripe
    subsets meeting the zero-fraction bound (knapsack over blocks)."""
    rows, cols = x.shape
    part = BlockPartition(rows, cols, c.grid_rows, c.grid_cols)
    bh, bw = part.block_h, part.block_w
    sq = (
        (x.astype(np.float64) ** 2)
        .reshape(c.grid_rows, bh, c.grid_cols, bw)
        .transpose(0, 2, 1, 3)
    )
    options = []
    for i in range(c.grid_rows):
        for j in range(c.grid_cols):
            opts = []
            for rbits in range(2 ** bh):
                rs = [r for r in range(bh) if rbits >> r & 1]
                for cbits in range(2 ** bw):
                    cs = [cc for cc in range(bw) if cbits >> cc & 1]
                    kept = len(rs) * len(cs)
                    en = sq[i, j][np.ix_(rs, cs)].sum() if kept else 0.0
                    opts.append((kept, float(en)))
            options.append(opts)
    total = rows * cols
    budget = total - int(np.ceil(c.alpha * total - 1e-9))
    dp = {0: 0.0}
    for opts in options:
        nxt = {}
        for kept0, en0 in dp.items():
            for kept, en in opts:
                k2 = kept0 + kept
                if k2 > budget:
                    continue
                if nxt.get(k2, -1.0) < en0 + en:
                    nxt[k2] = en0 + en
        dp = nxt
    return max(dp.values())


def test_project_feasible_input_is_fixed_point():
    # zeros already form whole block stripes covering exactly alpha
    x = np.array(
        [[1, 2, 0, 0], [3, 4, 0, 0], [0, 0, 5, 6], [0, 0, 7, 8]], dtype=np.float32
    )
    c = SparsityConstraint(alpha=0.5, grid_rows=2, grid_cols=2)
    z, mask = project_bcr(x, c)
    np.testing.assert_array_equal(z, x)
    assert mask.zero_fraction() >= 0.5


def test_project_zero_matrix_prunes_lowest_cols_first():
    x = np.zeros((4, 4), dtype=np.float32)
    c = SparsityConstraint(alpha=0.5, grid_rows=1, grid_cols=1)
    z, mask = project_bcr(x, c)
    assert np.all(z == 0)
    # deterministic tie-break: columns 0 and 1 go first
    np.testing.assert_array_equal(mask.kept_cols[0][0], [2, 3])
    np.testing.assert_array_equal(mask.kept_rows[0][0], [0, 1, 2, 3])


def test_project_matches_exhaustive_on_small_case():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((4, 4)).astype(np.float32)
    c = SparsityConstraint(alpha=0.5, grid_rows=2, grid_cols=2)
    z, mask = project_bcr(x, c)
    got = float((z.astype(np.float64) ** 2).sum())
    best = exhaustive_best_energy(x, c)
    assert got >= 0.95 * best


def test_project_feasibility_and_fidelity_randomized():
    rng = np.random.default_rng(7)
    for case in range(50):
        n = int(rng.choice([1, 2, 4]))
        m = int(rng.choice([1, 2, 4]))
        rows = n * int(rng.integers(1, 8))
        cols = m * int(rng.integers(1, 8))
        alpha = float(rng.uniform(0.0, 0.95))
        x = rng.standard_normal((rows, cols)).astype(np.float32)
        c = SparsityConstraint(alpha=alpha, grid_rows=n, grid_cols=m)
        z, mask = project_bcr(x, c)
        assert mask.zero_fraction() >= alpha
        dense = mask.to_dense()
        # kept-value fidelity, bitwise
        np.testing.assert_array_equal(z[dense], x[dense])
        assert np.all(z[~dense] == 0)
        # zero pattern is exactly a per-block row x col product
        BcrMask.from_dense(dense, mask.partition)


def test_project_idempotent():
    rng = np.random.default_rng(11)
    x = rng.standard_normal((8, 8)).astype(np.float32)
    c = SparsityConstraint(alpha=0.6, grid_rows=2, grid_cols=2)
    z1, _ = project_bcr(x, c)
    z2, _ = project_bcr(z1, c)
    np.testing.assert_array_equal(z1, z2)


def test_project_errors():
    x = np.ones((4, 4), dtype=np.float32)
    with pytest.raises(AlphaError):
        SparsityConstraint(alpha=1.0, grid_rows=2, grid_cols=2)
    with pytest.raises(DivisibilityError):
        project_bcr(x, SparsityConstraint(alpha=0.5, grid_rows=3, grid_cols=2))


def test_project_degenerate_alpha_may_empty_blocks():
    rng = np.random.default_rng(13)
    x = rng.standard_normal((4, 4)).astype(np.float32)
    z, mask = project_bcr(x, SparsityConstraint(alpha=0.94, grid_rows=2, grid_cols=2))
    assert mask.zero_fraction() >= 0.94


def _state(w, z, u, rho=1.0):
    return PruneState(W=w, Z=z, U=u, rho=rho)


def test_w_step_proximal_only_converges_to_z_minus_u():
    rng = np.random.default_rng(17)
    shape = (4, 4)
    w = rng.standard_normal(shape).astype(np.float32)
    z = rng.standard_normal(shape).astype(np.float32)
    u = rng.standard_normal(shape).astype(np.float32)
    st = _state(w, z, u, rho=1.0)
    zero_grad = lambda _: np.zeros(shape, dtype=np.float32)
    dist = [float(np.linalg.norm(w - (z - u)))]
    cur = w
    for _ in range(5):
        st = _state(cur, z, u, rho=1.0)
        cur = admm_w_step(st, zero_grad, steps=20, lr=0.05)
        dist.append(float(np.linalg.norm(cur - (z - u))))
    assert all(b <= a + 1e-9 for a, b in zip(dist, dist[1:]))
    assert dist[-1] < 0.05 * dist[0]


def test_w_step_rho_zero_is_plain_sgd():
    rng = np.random.default_rng(19)
    w = rng.standard_normal((3, 3)).astype(np.float32)
    st = PruneState(W=w, Z=np.zeros_like(w), U=np.zeros_like(w), rho=1e-12)
    # f = 0.5 ||W||^2 -> gradient W; each step multiplies by (1 - lr)
    out = admm_w_step(st, lambda cur: cur, steps=1, lr=0.1)
    np.testing.assert_allclose(out, 0.9 * w, rtol=1e-4)


def test_w_step_quadratic_fixed_point():
    rng = np.random.default_rng(23)
    shape = (4, 4)
    a = rng.standard_normal(shape).astype(np.float32)
    z = rng.standard_normal(shape).astype(np.float32)
    u = rng.standard_normal(shape).astype(np.float32)
    rho = 2.0
    st = PruneState(W=np.zeros(shape, np.float32), Z=z, U=u, rho=rho)
    out = admm_w_step(st, lambda cur: cur - a, steps=4000, lr=0.05)
    expected = (a + rho * (z - u)) / (1 + rho)
    np.testing.assert_allclose(out, expected, atol=1e-4)


def test_z_step_identity_when_feasible():
    x = np.array([[1, 0], [2, 0]], dtype=np.float32)
    c = SparsityConstraint(alpha=0.5, grid_rows=1, grid_cols=2)
    st = PruneState(W=x, Z=np.zeros_like(x), U=np.zeros_like(x), rho=1.0)
    z, _ = admm_z_step(st, c)
    np.testing.assert_array_equal(z, x)


def test_z_step_equals_projection_of_w_plus_u():
    rng = np.random.default_rng(29)
    w = rng.standard_normal((4, 4)).astype(np.float32)
    u = rng.standard_normal((4, 4)).astype(np.float32)
    c = SparsityConstraint(alpha=0.5, grid_rows=2, grid_cols=2)
    st = PruneState(W=w, Z=np.zeros_like(w), U=u, rho=1.0)
    z, _ = admm_z_step(st, c)
    z_ref, _ = project_bcr((w + u).astype(np.float32), c)
    np.testing.assert_array_equal(z, z_ref)


def test_u_step_formula():
    rng = np.random.default_rng(31)
    w = rng.standard_normal((3, 4)).astype(np.float32)
    z = rng.standard_normal((3, 4)).astype(np.float32)
    u = rng.standard_normal((3, 4)).astype(np.float32)
    st = PruneState(W=w, Z=z, U=u, rho=1.0)
    out = admm_u_step(st)
    ref = np.empty_like(out)
    for i in range(3):
        for j in range(4):
            ref[i, j] = np.float32(u[i, j] + np.float32(w[i, j] - z[i, j]))
    np.testing.assert_array_equal(out, ref)

    same = PruneState(W=w, Z=w.copy(), U=u, rho=1.0)
    np.testing.assert_array_equal(admm_u_step(same), u)

    tiny = PruneState(
        W=np.array([[1.0]], np.float32),
        Z=np.array([[0.0]], np.float32),
        U=np.array([[0.0]], np.float32),
        rho=1.0,
    )
    np.testing.assert_array_equal(admm_u_step(tiny), [[1.0]])


def test_sparsity_accounting():
    assert sparsity_accounting(1024, 1024, 8, 8, 8.0) == 2048.0
    assert sparsity_accounting(16, 4, 1, 1, 1.0) == 64.0
    assert sparsity_accounting(512, 256, 4, 4, 4.0) == 2048.0


def test_dataset_handle_rejects_empty():
    with pytest.raises(DataError):
        DatasetHandle(x=np.zeros((0, 4), np.float32), y=np.zeros(0, np.int64))


def test_admm_schedule_validation():
    with pytest.raises(ConsistencyError):
        AdmmSchedule(rho_start=1.0, rho_end=0.1)
    s = AdmmSchedule(rho_start=1e-4, rho_end=1e-1, admm_epochs=10, ramp_fraction=1.0)
    assert s.rho_at(0) == pytest.approx(1e-4)
    assert s.rho_at(9) == pytest.approx(1e-1)
    assert s.rho_at(3) < s.rho_at(6)
