"""Latency measurement and reporting: per-layer benchmark CSV, the
BCRC-vs-CSR storage grid, and a dense-vs-sparse GEMV comparison.

Timing follows the tuner's convention: median of `repeats` runs after
`warmup` discarded ones on the monotonic clock, reported in microseconds.
"""

from __future__ import annotations

import csv
import statistics
import time
from dataclasses import dataclass

import numpy as np

from . import executor
from .bcrc import BcrcMatrix, decode_bcrc, encode_bcrc, encode_csr, extra_storage_bytes
from .dense import DTYPE, filters_to_matrix
from .errors import ShapeError
from .ir import Graph, OpKind, run_graph
from .reorder import plan_reorder
from .tuner import synthesize_matrix

__all__ = [
    "time_us",
    "BenchRow",
    "bench_model",
    "write_bench_csv",
    "storage_overhead_grid",
    "gemv_speedup",
]

BENCH_COLUMNS = [
    "layer",
    "nnz",
    "config",
    "sparse_us",
    "dense_us",
    "speedup",
    "input_loads_lre",
    "input_loads_nolre",
]


def time_us(fn, repeats: int = 11, warmup: int = 3) -> float:
    for _ in range(warmup):
        fn()
    samples = []
    for _ in range(max(1, repeats)):
        t0 = time.perf_counter_ns()
        fn()
        samples.append((time.perf_counter_ns() - t0) / 1000.0)
    return float(statistics.median(samples))


@dataclass
class BenchRow:
    layer: str
    nnz: int
    config: str
    sparse_us: float
    dense_us: float
    speedup: float
    input_loads_lre: int
    input_loads_nolre: int

    def as_dict(self) -> dict:
        return {
            "layer": self.layer,
            "nnz": self.nnz,
            "config": self.config,
            "sparse_us": f"{self.sparse_us:.3f}",
            "dense_us": f"{self.dense_us:.3f}",
            "speedup": f"{self.speedup:.4f}",
            "input_loads_lre": self.input_loads_lre,
            "input_loads_nolre": self.input_loads_nolre,
        }


def _layer_inputs(g: Graph, inputs: dict, threads: int) -> dict:
    """Run the graph once and capture what each node consumes."""
    captured: dict[str, np.ndarray] = {}
    values: dict[str, np.ndarray] = dict(inputs)
    for name in g.tensors:
        if name in g.weights:
            values[name] = g.weights[name]
    for node in g.topo_order():
        from .ir import _exec_conv, _exec_fc, _exec_pool, _softmax  # reuse dispatch

        ins = [values[t] for t in node.inputs]
        if node.kind in (OpKind.FC, OpKind.CONV2D):
            captured[node.name] = ins[1]
        if node.kind == OpKind.FC:
            out = _exec_fc(node, ins[0], ins[1], threads)
        elif node.kind == OpKind.CONV2D:
            out = _exec_conv(node, ins[0], ins[1], threads)
        elif node.kind == OpKind.POOL:
            out = _exec_pool(node, ins[0])
        elif node.kind == OpKind.RELU:
            out = np.maximum(ins[0], np.float32(0.0)).astype(DTYPE)
        elif node.kind == OpKind.SOFTMAX:
            out = _softmax(ins[0])
        elif node.kind == OpKind.ADD:
            out = (ins[0] + ins[1]).astype(DTYPE)
        elif node.kind == OpKind.MUL:
            out = (ins[0] * ins[1]).astype(DTYPE)
        elif node.kind == OpKind.SIGMOID:
            out = (1.0 / (1.0 + np.exp(-ins[0].astype(np.float64)))).astype(DTYPE)
        elif node.kind == OpKind.TANH:
            out = np.tanh(ins[0].astype(np.float64)).astype(DTYPE)
        elif node.kind == OpKind.BLEND:
            out = (ins[0] * ins[1] + (1.0 - ins[0]) * ins[2]).astype(DTYPE)
        else:
            raise ShapeError(f"cannot bench node kind {node.kind}")
        values[node.name] = out
    return captured


def _dense_weight(g: Graph, name: str):
    w = g.weights[name]
    if isinstance(w, BcrcMatrix):
        return decode_bcrc(w)
    arr = np.asarray(w, dtype=DTYPE)
    return filters_to_matrix(arr) if arr.ndim == 4 else arr


def bench_model(
    g: Graph,
    inputs: dict[str, np.ndarray],
    repeats: int = 11,
    threads: int = 1,
) -> list[BenchRow]:
    """Per-kernel and end-to-end latency rows for a compiled model.

    Sparse timings use each layer's tuned config; dense timings run the
    same product through float32 BLAS on the decoded weights.
    """
    captured = _layer_inputs(g, inputs, threads)
    rows: list[BenchRow] = []
    dense_store = {
        name: _dense_weight(g, name) for name in g.tensors if name in g.weights
    }

    for node in g.topo_order():
        if node.kind not in (OpKind.FC, OpKind.CONV2D):
            continue
        w = g.weights[node.weight]
        x = captured[node.name]
        cfg = node.kernel_config(threads=threads)
        dense_w = dense_store[node.weight]

        if isinstance(w, BcrcMatrix):
            nnz = w.nnz
            if node.kind == OpKind.FC and x.ndim == 1:
                sparse_fn = lambda w=w, x=x, cfg=cfg: executor.sparse_gemv(w, x, cfg)
                dense_fn = lambda dw=dense_w, x=x: dw @ x
                x_cols = 1
            elif node.kind == OpKind.FC:
                sparse_fn = lambda w=w, x=x, cfg=cfg: executor.sparse_gemm(w, x, cfg)
                dense_fn = lambda dw=dense_w, x=x: dw @ x
                x_cols = x.shape[1]
            else:
                from .dense import im2col, im2col_skipping
                from .ir import _conv_spec_of

                spec = _conv_spec_of(node, x, w)
                dead = w.dead_columns()
                xs = im2col_skipping(x, spec, dead)
                xf = im2col(x, spec)
                sparse_fn = lambda w=w, xs=xs, cfg=cfg, dead=dead: executor.sparse_gemm(
                    w, xs, cfg, dead_cols=dead
                )
                dense_fn = lambda dw=dense_w, xf=xf: dw @ xf
                x_cols = xf.shape[1]
            sparse_us = time_us(sparse_fn, repeats)
            dense_us = time_us(dense_fn, repeats)
            on = executor.count_loads(w, x_cols, cfg)
            off = executor.count_loads(
                w, x_cols, executor.KernelConfig(
                    tile_rows=cfg.tile_rows,
                    tile_cols=cfg.tile_cols,
                    unroll=cfg.unroll,
                    threads=cfg.threads,
                    lre_enabled=False,
                )
            )
            rows.append(
                BenchRow(
                    layer=node.name,
                    nnz=nnz,
                    config=cfg.short(),
                    sparse_us=sparse_us,
                    dense_us=dense_us,
                    speedup=dense_us / sparse_us if sparse_us > 0 else float("inf"),
                    input_loads_lre=on.input_loads,
                    input_loads_nolre=off.input_loads,
                )
            )

    # end-to-end: sparse graph vs all-dense twin
    dense_graph = g.copy()
    dense_graph.weights = dict(dense_store)
    sparse_total = time_us(lambda: run_graph(g, inputs, threads=threads), repeats)
    dense_total = time_us(lambda: run_graph(dense_graph, inputs, threads=threads), repeats)
    total_nnz = sum(
        g.weights[n.weight].nnz
        for n in g.nodes
        if n.kind in (OpKind.FC, OpKind.CONV2D)
        and isinstance(g.weights[n.weight], BcrcMatrix)
    )
    rows.append(
        BenchRow(
            layer="__total__",
            nnz=total_nnz,
            config=f"threads{threads}",
            sparse_us=sparse_total,
            dense_us=dense_total,
            speedup=dense_total / sparse_total if sparse_total > 0 else float("inf"),
            input_loads_lre=sum(r.input_loads_lre for r in rows),
            input_loads_nolre=sum(r.input_loads_nolre for r in rows),
        )
    )
    return rows


def write_bench_csv(rows: list[BenchRow], path):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=BENCH_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row.as_dict())


def storage_overhead_grid(
    sizes=(256, 512, 1024),
    rates=(3.6, 6.3, 11.1, 25.0),
    block=(4, 16),
    seed: int = 0,
):
    """BCRC vs CSR extra-byte comparison over synthesized BCR matrices.

    Returns one dict per (size, rate) cell with both byte counts and the
    relative saving of BCRC over CSR.
    """
    grid = []
    for size in sizes:
        for rate in rates:
            w, mask = synthesize_matrix(size, size, rate, block[0], block[1], seed=seed)
            enc = encode_bcrc(w, mask, plan_reorder(w, mask))
            csr = encode_csr(w, mask)
            b_bytes = extra_storage_bytes(enc)
            c_bytes = extra_storage_bytes(csr)
            grid.append(
                {
                    "size": size,
                    "rate": rate,
                    "nnz": enc.nnz,
                    "bcrc_bytes": b_bytes,
                    "csr_bytes": c_bytes,
                    "saving": 1.0 - b_bytes / c_bytes,
                }
            )
    return grid


def write_storage_csv(grid, path):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["size", "rate", "nnz", "bcrc_bytes", "csr_bytes", "saving"]
        )
        writer.writeheader()
        for row in grid:
            out = dict(row)
            out["saving"] = f"{row['saving']:.4f}"
            writer.writerow(out)


def gemv_speedup(
    rows: int = 1024,
    cols: int = 1024,
    rate: float = 10.0,
    block=(4, 16),
    cfg: executor.KernelConfig | None = None,
    repeats: int = 21,
    seed: int = 0,
) -> dict:
    """Measure sparse GEMV against the float32 BLAS dense baseline."""
    w, mask = synthesize_matrix(rows, cols, rate, block[0], block[1], seed=seed)
    enc = encode_bcrc(w, mask, plan_reorder(w, mask))
    dense = np.where(mask.to_dense(), w, 0).astype(DTYPE)
    x = np.random.default_rng(seed).standard_normal(cols).astype(DTYPE)
    if cfg is None:
        cfg = executor.KernelConfig(threads=1)
    sparse_us = time_us(lambda: executor.sparse_gemv(enc, x, cfg), repeats)
    dense_us = time_us(lambda: dense @ x, repeats)
    return {
        "backend": executor.backend_name(),
        "nnz": enc.nnz,
        "sparse_us": sparse_us,
        "dense_us": dense_us,
        "speedup": dense_us / sparse_us if sparse_us > 0 else float("inf"),
    }
