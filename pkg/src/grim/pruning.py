"""Block-based column-row (BCR) sparsity: projection and the ADMM loop.

A weight matrix is partitioned into a grid_rows x grid_cols grid of equal
blocks. Inside each block, pruning removes whole local rows and columns;
a position survives iff its local row and local column both survive. The
Euclidean projection onto that constraint set has no closed form over the
choice of stripes, so `project_bcr` uses a greedy heuristic: repeatedly
remove the stripe (any block, row or column) whose squared norm per newly
zeroed element is smallest, until the zero fraction reaches alpha.

Ties break deterministically: smaller block index (row-major over the
grid), then columns before rows, then smaller stripe index.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .dense import DTYPE, as_matrix
from .errors import AlphaError, ConsistencyError, DataError, DivisibilityError

__all__ = [
    "SparsityConstraint",
    "BlockPartition",
    "BcrMask",
    "PruneState",
    "AdmmSchedule",
    "project_bcr",
    "admm_w_step",
    "admm_z_step",
    "admm_u_step",
    "sparsity_accounting",
    "DatasetHandle",
    "prune_network",
    "PruneReport",
]


@dataclass(frozen=True)
class BlockPartition:
    """Equal-size block grid over a rows x cols matrix.

    grid_rows / grid_cols count blocks along each dimension; block_h and
    block_w are the per-block extents.
    """

    rows: int
    cols: int
    grid_rows: int
    grid_cols: int

    def __post_init__(self):
        if self.grid_rows < 1 or self.grid_cols < 1:
            raise DivisibilityError("block grid must be at least 1x1")
        if self.rows % self.grid_rows:
            raise DivisibilityError(
                f"grid_rows={self.grid_rows} does not divide rows={self.rows}"
            )
        if self.cols % self.grid_cols:
            raise DivisibilityError(
                f"grid_cols={self.grid_cols} does not divide cols={self.cols}"
            )

    @property
    def block_h(self) -> int:
        return self.rows // self.grid_rows

    @property
    def block_w(self) -> int:
        return self.cols // self.grid_cols


@dataclass(frozen=True)
class SparsityConstraint:
    """Target zero fraction plus the block grid it is enforced on."""

    alpha: float
    grid_rows: int
    grid_cols: int

    def __post_init__(self):
        if not (0.0 <= self.alpha < 1.0):
            raise AlphaError(f"alpha must be in [0, 1), got {self.alpha}")

    def partition_for(self, rows: int, cols: int) -> BlockPartition:
        return BlockPartition(rows, cols, self.grid_rows, self.grid_cols)


class BcrMask:
    """Kept row/column sets for every block of a partition."""

    def __init__(self, partition: BlockPartition, kept_rows, kept_cols):
        self.partition = partition
        n, m = partition.grid_rows, partition.grid_cols
        if len(kept_rows) != n or len(kept_cols) != n:
            raise ConsistencyError("kept sets do not match grid_rows")
        self.kept_rows = [
            [np.sort(np.asarray(kept_rows[i][j], dtype=np.int64)) for j in range(m)]
            for i in range(n)
        ]
        self.kept_cols = [
            [np.sort(np.asarray(kept_cols[i][j], dtype=np.int64)) for j in range(m)]
            for i in range(n)
        ]
        bh, bw = partition.block_h, partition.block_w
        for i in range(n):
            for j in range(m):
                r, c = self.kept_rows[i][j], self.kept_cols[i][j]
                if r.size and (r[0] < 0 or r[-1] >= bh):
                    raise ConsistencyError("kept row index out of block range")
                if c.size and (c[0] < 0 or c[-1] >= bw):
                    raise ConsistencyError("kept col index out of block range")
        self._dense: np.ndarray | None = None

    @classmethod
    def full(cls, partition: BlockPartition) -> "BcrMask":
        n, m = partition.grid_rows, partition.grid_cols
        rows = [[np.arange(partition.block_h)] * m for _ in range(n)]
        cols = [[np.arange(partition.block_w)] * m for _ in range(n)]
        return cls(partition, rows, cols)

    @classmethod
    def from_dense(cls, dense: np.ndarray, partition: BlockPartition) -> "BcrMask":
        """Recover the per-block stripe sets from a boolean mask.

        Raises ConsistencyError when a block's pattern is not the product
        of a row set and a column set.
        """
        p = partition
        dense = np.asarray(dense, dtype=bool)
        if dense.shape != (p.rows, p.cols):
            raise ConsistencyError(f"mask shape {dense.shape} != {(p.rows, p.cols)}")
        blocks = dense.reshape(p.grid_rows, p.block_h, p.grid_cols, p.block_w)
        blocks = blocks.transpose(0, 2, 1, 3)
        kept_r, kept_c = [], []
        for i in range(p.grid_rows):
            ri, ci = [], []
            for j in range(p.grid_cols):
                blk = blocks[i, j]
                r = np.flatnonzero(blk.any(axis=1))
                c = np.flatnonzero(blk.any(axis=0))
                rebuilt = np.zeros_like(blk)
                if r.size and c.size:
                    rebuilt[np.ix_(r, c)] = True
                if not np.array_equal(rebuilt, blk):
                    raise ConsistencyError(
                        f"block ({i},{j}) is not a row-set x col-set product"
                    )
                ri.append(r)
                ci.append(c)
            kept_r.append(ri)
            kept_c.append(ci)
        return cls(p, kept_r, kept_c)

    def to_dense(self) -> np.ndarray:
        if self._dense is not None:
            return self._dense
        p = self.partition
        rowb = np.zeros((p.grid_rows, p.grid_cols, p.block_h), dtype=bool)
        colb = np.zeros((p.grid_rows, p.grid_cols, p.block_w), dtype=bool)
        for i in range(p.grid_rows):
            for j in range(p.grid_cols):
                rowb[i, j, self.kept_rows[i][j]] = True
                colb[i, j, self.kept_cols[i][j]] = True
        blocks = rowb[:, :, :, None] & colb[:, :, None, :]
        self._dense = blocks.transpose(0, 2, 1, 3).reshape(p.rows, p.cols)
        return self._dense

    @property
    def nnz(self) -> int:
        return int(
            sum(
                self.kept_rows[i][j].size * self.kept_cols[i][j].size
                for i in range(self.partition.grid_rows)
                for j in range(self.partition.grid_cols)
            )
        )

    def zero_fraction(self) -> float:
        total = self.partition.rows * self.partition.cols
        return 1.0 - self.nnz / total

    def apply(self, w: np.ndarray) -> np.ndarray:
        w = as_matrix(w)
        return np.where(self.to_dense(), w, np.float32(0.0)).astype(DTYPE)


@dataclass
class PruneState:
    """ADMM variables for one layer."""

    W: np.ndarray
    Z: np.ndarray
    U: np.ndarray
    rho: float
    t: int = 0

    def __post_init__(self):
        self.W = as_matrix(self.W, "W")
        self.Z = as_matrix(self.Z, "Z")
        self.U = as_matrix(self.U, "U")
        if self.W.shape != self.Z.shape or self.W.shape != self.U.shape:
            raise ConsistencyError("W, Z, U must share one shape")
        if not self.rho > 0:
            raise ConsistencyError("rho must be positive")


@dataclass(frozen=True)
class AdmmSchedule:
    """Penalty ramp and epoch counts for the pruning run.

    rho interpolates geometrically from rho_start to rho_end over the
    first `ramp_fraction` of the ADMM epochs and holds rho_end after
    that, so late iterations run at full penalty.
    """

    rho_start: float = 1e-4
    rho_end: float = 1e-1
    admm_epochs: int = 30
    retrain_epochs: int = 10
    sgd_step: float = 0.05
    ramp_fraction: float = 1.0
    freeze_fraction: float = 0.75  # fix each layer's stripe pattern after this point

    def __post_init__(self):
        if self.rho_start <= 0 or self.rho_end < self.rho_start:
            raise ConsistencyError("need 0 < rho_start <= rho_end")
        if self.sgd_step <= 0:
            raise ConsistencyError("sgd_step must be positive")
        if not (0.0 < self.ramp_fraction <= 1.0):
            raise ConsistencyError("ramp_fraction must be in (0, 1]")
        if not (0.0 < self.freeze_fraction <= 1.0):
            raise ConsistencyError("freeze_fraction must be in (0, 1]")

    def rho_at(self, epoch: int) -> float:
        if self.admm_epochs <= 1:
            return self.rho_end
        ramp_epochs = max(1.0, self.ramp_fraction * (self.admm_epochs - 1))
        frac = min(1.0, epoch / ramp_epochs)
        return float(self.rho_start * (self.rho_end / self.rho_start) ** frac)


def project_bcr(x: np.ndarray, c: SparsityConstraint) -> tuple[np.ndarray, BcrMask]:
    """Project `x` onto the BCR constraint set (greedy stripe removal).

    Returns (Z, mask) where Z keeps x's values bitwise at surviving
    positions and zeros the rest, with mask zero fraction >= c.alpha.
    """
    x = as_matrix(x)
    rows, cols = x.shape
    part = c.partition_for(rows, cols)
    n, m = part.grid_rows, part.grid_cols
    bh, bw = part.block_h, part.block_w

    # per-block squared values, laid out (grid_i, grid_j, local_r, local_c)
    sq = (x.astype(np.float64) ** 2).reshape(n, bh, m, bw).transpose(0, 2, 1, 3)
    sq = np.ascontiguousarray(sq)
    row_en = sq.sum(axis=3)  # (n, m, bh): energy of each row stripe
    col_en = sq.sum(axis=2)  # (n, m, bw)
    kept_r = np.ones((n, m, bh), dtype=bool)
    kept_c = np.ones((n, m, bw), dtype=bool)
    nkr = np.full((n, m), bh, dtype=np.int64)
    nkc = np.full((n, m), bw, dtype=np.int64)
    version = np.zeros((n, m), dtype=np.int64)

    total = rows * cols
    zeroed = 0
    heap: list[tuple] = []

    def push_block(bi: int, bj: int):
        v = int(version[bi, bj])
        b = bi * m + bj
        if nkr[bi, bj] > 0:  # removing a column zeroes nkr elements
            denom = float(nkr[bi, bj])
            for cc in np.flatnonzero(kept_c[bi, bj]):
                heapq.heappush(
                    heap, (col_en[bi, bj, cc] / denom, b, 0, int(cc), v)
                )
        if nkc[bi, bj] > 0:
            denom = float(nkc[bi, bj])
            for rr in np.flatnonzero(kept_r[bi, bj]):
                heapq.heappush(
                    heap, (row_en[bi, bj, rr] / denom, b, 1, int(rr), v)
                )

    for bi in range(n):
        for bj in range(m):
            push_block(bi, bj)

    while zeroed / total < c.alpha:
        if not heap:  # unreachable for alpha < 1, kept as a guard
            break
        _, b, kind, idx, v = heapq.heappop(heap)
        bi, bj = divmod(b, m)
        if v != version[bi, bj]:
            continue
        version[bi, bj] += 1
        if kind == 0:
            zeroed += int(nkr[bi, bj])
            kept_c[bi, bj, idx] = False
            nkc[bi, bj] -= 1
            row_en[bi, bj, :] -= sq[bi, bj, :, idx]
        else:
            zeroed += int(nkc[bi, bj])
            kept_r[bi, bj, idx] = False
            nkr[bi, bj] -= 1
            col_en[bi, bj, :] -= sq[bi, bj, idx, :]
        push_block(bi, bj)

    mask = BcrMask(
        part,
        [[np.flatnonzero(kept_r[i, j]) for j in range(m)] for i in range(n)],
        [[np.flatnonzero(kept_c[i, j]) for j in range(m)] for i in range(n)],
    )
    z = np.where(mask.to_dense(), x, np.float32(0.0)).astype(DTYPE)
    return z, mask


def admm_w_step(
    state: PruneState, loss_grad, steps: int, lr: float
) -> np.ndarray:
    """SGD on f(W) + rho/2 ||W - Z + U||_F^2; returns the updated W."""
    if lr <= 0:
        raise ConsistencyError("lr must be positive")
    w = state.W.copy()
    for _ in range(steps):
        g = np.asarray(loss_grad(w), dtype=DTYPE)
        if g.shape != w.shape:
            raise ConsistencyError("loss_grad returned wrong shape")
        g = g + state.rho * (w - state.Z + state.U)
        w = (w - lr * g).astype(DTYPE)
    return w


def admm_z_step(
    state: PruneState, c: SparsityConstraint
) -> tuple[np.ndarray, BcrMask]:
    """Projection half-step: project W + U onto the constraint set."""
    return project_bcr((state.W + state.U).astype(DTYPE), c)


def admm_u_step(state: PruneState) -> np.ndarray:
    """Dual ascent: U + (W - Z); exact no-op when W equals Z."""
    return (state.U + (state.W - state.Z)).astype(DTYPE)


def sparsity_accounting(
    rows: int, cols: int, grid_rows: int, grid_cols: int, pruning_rate: float
) -> float:
    """Average number of surviving weights per block at a given rate."""
    if grid_rows * grid_cols < 1:
        raise DivisibilityError("need at least one block")
    return rows * cols / (pruning_rate * grid_rows * grid_cols)


# ---------------------------------------------------------------------------
# Desk-scale network pruning: ADMM over an FC/RELU chain with a softmax
# cross-entropy head. Enough to run the pruning pipeline end to end on
# small synthetic tasks; large-scale training is out of scope.
# ---------------------------------------------------------------------------


@dataclass
class DatasetHandle:
    """In-memory classification dataset: x is (N, features), y is (N,) labels."""

    x: np.ndarray
    y: np.ndarray
    x_val: np.ndarray | None = None
    y_val: np.ndarray | None = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=DTYPE)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.x.ndim != 2 or self.x.shape[0] == 0:
            raise DataError("dataset is empty or not 2-D")
        if self.y.shape[0] != self.x.shape[0]:
            raise DataError("labels do not match samples")
        if self.x_val is not None:
            self.x_val = np.asarray(self.x_val, dtype=DTYPE)
            self.y_val = np.asarray(self.y_val, dtype=np.int64)

    def batches(self, batch_size: int, rng: np.random.Generator):
        idx = rng.permutation(self.x.shape[0])
        for start in range(0, idx.size, batch_size):
            sel = idx[start : start + batch_size]
            yield self.x[sel].T.copy(), self.y[sel]


@dataclass
class LayerPruneRecord:
    name: str
    shape: tuple[int, int]
    grid: tuple[int, int]
    alpha: float
    zero_fraction: float
    retained_energy: float


@dataclass
class PruneReport:
    layers: list[LayerPruneRecord] = field(default_factory=list)
    residuals: dict[str, list[float]] = field(default_factory=dict)
    train_loss: float = float("nan")
    val_loss: float = float("nan")
    train_accuracy: float = float("nan")
    val_accuracy: float = float("nan")

    def to_text(self) -> str:
        lines = []
        for rec in self.layers:
            lines.append(
                f"layer={rec.name} shape={rec.shape[0]}x{rec.shape[1]} "
                f"grid={rec.grid[0]}x{rec.grid[1]} alpha={rec.alpha:.4f} "
                f"zero_fraction={rec.zero_fraction:.6f} "
                f"retained_energy={rec.retained_energy:.6f}"
            )
        lines.append(f"train_loss={self.train_loss:.6f}")
        lines.append(f"val_loss={self.val_loss:.6f}")
        lines.append(f"train_accuracy={self.train_accuracy:.6f}")
        lines.append(f"val_accuracy={self.val_accuracy:.6f}")
        return "\n".join(lines) + "\n"


class _ChainMlp:
    """Forward/backward for a linear chain of FC and RELU nodes.

    Built from a graph at prune time; weights live in `self.weights` keyed
    by tensor name. Softmax cross-entropy is applied on the final logits.
    """

    def __init__(self, steps: list[tuple[str, str | None]], weights: dict):
        # steps: sequence of ("fc", weight_name) / ("relu", None)
        self.steps = steps
        self.weights = weights

    def forward(self, x: np.ndarray):
        acts = [x]
        for kind, wname in self.steps:
            if kind == "fc":
                acts.append(self.weights[wname] @ acts[-1])
            else:
                acts.append(np.maximum(acts[-1], 0.0))
        return acts

    @staticmethod
    def loss_and_dlogits(logits: np.ndarray, y: np.ndarray):
        shifted = logits - logits.max(axis=0, keepdims=True)
        e = np.exp(shifted)
        probs = e / e.sum(axis=0, keepdims=True)
        nll = -np.log(np.maximum(probs[y, np.arange(y.size)], 1e-12))
        d = probs.copy()
        d[y, np.arange(y.size)] -= 1.0
        return float(nll.mean()), (d / y.size).astype(DTYPE)

    def backward(self, acts, dlogits):
        grads = {}
        delta = dlogits
        for i in range(len(self.steps) - 1, -1, -1):
            kind, wname = self.steps[i]
            a_in = acts[i]
            if kind == "fc":
                grads[wname] = (delta @ a_in.T).astype(DTYPE)
                delta = (self.weights[wname].T @ delta).astype(DTYPE)
            else:
                delta = (delta * (a_in > 0)).astype(DTYPE)
        return grads

    def loss_on(self, x: np.ndarray, y: np.ndarray) -> float:
        logits = self.forward(x)[-1]
        return self.loss_and_dlogits(logits, y)[0]

    def accuracy_on(self, x: np.ndarray, y: np.ndarray) -> float:
        logits = self.forward(x)[-1]
        return float((logits.argmax(axis=0) == y).mean())


def _chain_from_graph(model):
    """Extract the FC/RELU training chain from a Graph; see ir.OpKind."""
    from .ir import OpKind

    order = model.topo_order()
    steps: list[tuple[str, str | None]] = []
    fc_names: list[str] = []
    for node in order:
        if node.kind == OpKind.FC:
            steps.append(("fc", node.weight))
            fc_names.append(node.name)
        elif node.kind == OpKind.RELU:
            steps.append(("relu", None))
        elif node.kind == OpKind.SOFTMAX:
            continue  # folded into the cross-entropy loss
        else:
            from .errors import UnsupportedLayerError

            raise UnsupportedLayerError(
                f"prune_network supports FC/RELU/SOFTMAX chains, got {node.kind}"
                f" at node {node.name}"
            )
    return steps, fc_names


def prune_network(
    model,
    data: DatasetHandle,
    constraints: dict[str, SparsityConstraint],
    sched: AdmmSchedule,
    lr: float = 0.05,
    batch_size: int = 32,
    seed: int = 0,
    weight_decay: float = 1e-3,
    w_steps: int = 1,
    residual_tol: float = 1e-3,
):
    """Run ADMM BCR pruning over an FC-chain graph.

    `constraints` maps layer names to their sparsity constraints.
    `w_steps` repeats the data pass inside each ADMM iteration so the
    W-subproblem is solved more tightly before the Z/U updates; the loop
    stops early once every layer's relative residual ||W - Z|| / ||W||
    drops below `residual_tol` (the iterates have converged). Returns
    (pruned_graph, masks, report); pruned weights satisfy their masks
    exactly, and the report carries per-layer stats plus the per-epoch
    ||W - Z||_F history.
    """
    rng = np.random.default_rng(seed)
    steps, fc_names = _chain_from_graph(model)
    out_graph = model.copy()
    weights = {
        wname: as_matrix(out_graph.weights[wname]).copy()
        for kind, wname in steps
        if kind == "fc"
    }
    net = _ChainMlp(steps, weights)

    by_layer = {}
    for node in out_graph.nodes:
        if node.name in constraints:
            c = constraints[node.name]
            w = weights[node.weight]
            c.partition_for(w.shape[0], w.shape[1])  # divisibility check
            by_layer[node.name] = (node.weight, c)

    # ADMM state: Z starts at the projection of W, U at zero
    states = {}
    for lname, (wname, c) in by_layer.items():
        z, _ = project_bcr(weights[wname], c)
        states[lname] = PruneState(
            W=weights[wname], Z=z, U=np.zeros_like(weights[wname]), rho=sched.rho_at(0)
        )

    residuals: dict[str, list[float]] = {lname: [] for lname in by_layer}
    frozen: dict[str, np.ndarray] = {}  # layer -> dense mask once pattern is fixed
    frozen_masks: dict[str, BcrMask] = {}
    freeze_at = int(np.ceil(sched.freeze_fraction * sched.admm_epochs))
    for epoch in range(sched.admm_epochs):
        rho = sched.rho_at(epoch)
        for _ in range(max(1, w_steps)):
            for xb, yb in data.batches(batch_size, rng):
                acts = net.forward(xb)
                _, dlogits = net.loss_and_dlogits(acts[-1], yb)
                grads = net.backward(acts, dlogits)
                for wname, g in grads.items():
                    weights[wname] -= lr * (g + weight_decay * weights[wname])
                for lname, (wname, c) in by_layer.items():
                    st = states[lname]
                    weights[wname] -= lr * rho * (weights[wname] - st.Z + st.U)
        for lname, (wname, c) in by_layer.items():
            st = states[lname]
            st.W = weights[wname]
            st.rho = rho
            if lname in frozen:
                # pattern fixed: the Z-step projects onto the frozen support
                st.Z = ((st.W + st.U) * frozen[lname]).astype(DTYPE)
            else:
                st.Z, mask = admm_z_step(st, c)
                if epoch + 1 >= freeze_at:
                    frozen[lname] = mask.to_dense()
                    frozen_masks[lname] = mask
            st.U = admm_u_step(st)
            st.t = epoch + 1
            residuals[lname].append(float(np.linalg.norm(st.W - st.Z)))
        if all(
            residuals[lname][-1]
            <= residual_tol * (1.0 + float(np.linalg.norm(weights[wname])))
            for lname, (wname, _) in by_layer.items()
        ):
            break

    # hard prune, then masked retraining
    masks: dict[str, BcrMask] = {}
    pre_energy = {}
    for lname, (wname, c) in by_layer.items():
        if lname in frozen_masks:
            masks[lname] = frozen_masks[lname]
        else:
            st = states[lname]
            st.W = weights[wname]
            _, masks[lname] = admm_z_step(st, c)
        pre_energy[lname] = float(np.sum(weights[wname].astype(np.float64) ** 2))
        weights[wname] *= masks[lname].to_dense()

    dense_masks = {lname: masks[lname].to_dense() for lname in masks}
    for _ in range(sched.retrain_epochs):
        for xb, yb in data.batches(batch_size, rng):
            acts = net.forward(xb)
            _, dlogits = net.loss_and_dlogits(acts[-1], yb)
            grads = net.backward(acts, dlogits)
            for wname, g in grads.items():
                weights[wname] -= lr * (g + weight_decay * weights[wname])
            for lname, (wname, _) in by_layer.items():
                weights[wname] *= dense_masks[lname]

    report = PruneReport(residuals=residuals)
    for lname, (wname, c) in by_layer.items():
        w = weights[wname]
        kept = float(np.sum(w.astype(np.float64) ** 2))
        denom = pre_energy[lname] if pre_energy[lname] > 0 else 1.0
        report.layers.append(
            LayerPruneRecord(
                name=lname,
                shape=w.shape,
                grid=(c.grid_rows, c.grid_cols),
                alpha=c.alpha,
                zero_fraction=masks[lname].zero_fraction(),
                retained_energy=kept / denom,
            )
        )
    report.train_loss = net.loss_on(data.x.T, data.y)
    report.train_accuracy = net.accuracy_on(data.x.T, data.y)
    if data.x_val is not None:
        report.val_loss = net.loss_on(data.x_val.T, data.y_val)
        report.val_accuracy = net.accuracy_on(data.x_val.T, data.y_val)

    for wname, w in weights.items():
        out_graph.weights[wname] = w
    return out_graph, masks, report


def train_dense(
    model,
    data: DatasetHandle,
    epochs: int,
    lr: float = 0.05,
    batch_size: int = 32,
    seed: int = 0,
):
    """Plain SGD baseline on the same chain; returns (graph, train_acc, val_acc)."""
    rng = np.random.default_rng(seed)
    steps, _ = _chain_from_graph(model)
    out_graph = model.copy()
    weights = {
        wname: as_matrix(out_graph.weights[wname]).copy()
        for kind, wname in steps
        if kind == "fc"
    }
    net = _ChainMlp(steps, weights)
    for _ in range(epochs):
        for xb, yb in data.batches(batch_size, rng):
            acts = net.forward(xb)
            _, dlogits = net.loss_and_dlogits(acts[-1], yb)
            grads = net.backward(acts, dlogits)
            for wname, g in grads.items():
                weights[wname] -= lr * g
    for wname, w in weights.items():
        out_graph.weights[wname] = w
    train_acc = net.accuracy_on(data.x.T, data.y)
    val_acc = (
        net.accuracy_on(data.x_val.T, data.y_val) if data.x_val is not None else float("nan")
    )
    return out_graph, train_acc, val_acc
