"""Command-line toolchain: prune -> compile -> run / bench / blocksize.

Exit codes: 0 success, 1 unexpected runtime error, 2 usage or validation
error (bad flags, malformed models, divisibility failures, missing
files). The GRIM_THREADS environment variable overrides --threads.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import bench as benchmod
from . import executor
from .bcrc import encode_bcrc
from .dense import DTYPE
from .errors import DataError, DivisibilityError, GrimError, MissingInputError
from .ir import (
    Graph,
    OpKind,
    load_model_dir,
    parse_dsl,
    run_graph,
    save_model_dir,
)
from .pruning import (
    AdmmSchedule,
    BcrMask,
    BlockPartition,
    DatasetHandle,
    SparsityConstraint,
    prune_network,
)
from .reorder import plan_reorder
from .tuner import (
    GaParams,
    HostLatencySource,
    ModelLatencySource,
    TuneCache,
    TuneSpace,
    find_block_size,
    ga_tune,
)


def _threads_for(args) -> int:
    env = os.environ.get("GRIM_THREADS")
    if env:
        return max(1, int(env))
    if getattr(args, "threads", None):
        return max(1, args.threads)
    return os.cpu_count() or 1


def _parse_block(text: str) -> tuple[int, int]:
    try:
        h, w = text.lower().split("x")
        return int(h), int(w)
    except ValueError as exc:
        raise DivisibilityError(f"--block expects HxW, got {text!r}") from exc


def _load_graph_any(path: str) -> tuple[Graph, dict]:
    p = Path(path)
    if p.is_dir():
        return load_model_dir(p)
    if not p.exists():
        raise MissingInputError(f"model path does not exist: {p}")
    g = parse_dsl(p.read_text())
    root = p.parent
    for name, decl in g.tensors.items():
        if decl.data_ref is None:
            continue
        ref = root / decl.data_ref
        if not ref.exists():
            raise MissingInputError(f"weights file missing: {ref}")
        if decl.data_ref.endswith(".bcrc"):
            from .bcrc import load_bcrc

            g.weights[name] = load_bcrc(ref)
        else:
            arr = np.frombuffer(ref.read_bytes(), dtype="<f4").astype(DTYPE)
            g.weights[name] = arr.reshape(decl.shape)
    return g, {"version": 1, "tensors": {}}


def _load_dataset(path: str) -> DatasetHandle:
    p = Path(path)
    if not p.exists():
        raise DataError(f"dataset not found: {p}")
    with np.load(p) as npz:
        if "x" not in npz or "y" not in npz:
            raise DataError("dataset .npz must contain arrays 'x' and 'y'")
        return DatasetHandle(
            x=npz["x"],
            y=npz["y"],
            x_val=npz["x_val"] if "x_val" in npz else None,
            y_val=npz["y_val"] if "y_val" in npz else None,
        )


def _weighted_nodes(g: Graph):
    return [n for n in g.nodes if n.kind in (OpKind.FC, OpKind.CONV2D)]


def _bind_weight_shapes(g: Graph):
    for node in _weighted_nodes(g):
        decl = g.tensors.get(node.weight)
        if decl is not None:
            node.weight_shape = tuple(decl.shape)


_BLOCK_CANDIDATES = [(1, 16), (2, 16), (4, 16), (8, 16), (16, 16)]


def cmd_prune(args) -> int:
    g, _ = _load_graph_any(args.model)
    data = _load_dataset(args.data)
    _bind_weight_shapes(g)

    alpha = args.alpha
    if alpha is None:
        if args.rate is None:
            raise DivisibilityError("pass --alpha or --rate")
        if args.rate < 1:
            raise DivisibilityError("--rate must be >= 1")
        alpha = 1.0 - 1.0 / args.rate

    lat = HostLatencySource(seed=args.seed)
    constraints: dict[str, SparsityConstraint] = {}
    blocks: dict[str, tuple[int, int]] = {}
    for node in _weighted_nodes(g):
        rows, cols = node.weight_shape[:2]
        if args.auto_block:
            rate = 1.0 / (1.0 - alpha) if alpha < 1 else 10.0
            block = find_block_size(node, rate, _BLOCK_CANDIDATES, 0.05, lat)
        else:
            block = _parse_block(args.block)
        if rows % block[0] or cols % block[1]:
            raise DivisibilityError(
                f"layer {node.name}: block {block[0]}x{block[1]} does not divide "
                f"{rows}x{cols} (use --auto-block or another --block)"
            )
        blocks[node.name] = block
        constraints[node.name] = SparsityConstraint(
            alpha=alpha, grid_rows=rows // block[0], grid_cols=cols // block[1]
        )
        node.block_size = block

    sched = AdmmSchedule(
        admm_epochs=args.epochs,
        retrain_epochs=args.retrain_epochs,
        sgd_step=args.lr,
    )
    if args.epochs == 0 and args.retrain_epochs == 0:
        # no training requested: still produce masks via one projection
        from .pruning import project_bcr

        masks = {}
        for node in _weighted_nodes(g):
            w = np.asarray(g.weights[node.weight], dtype=DTYPE)
            z, mask = project_bcr(w, constraints[node.name])
            g.weights[node.weight] = z
            masks[node.name] = mask
        pruned, report = g, None
    else:
        pruned, masks, report = prune_network(
            g, data, constraints, sched, lr=args.lr, seed=args.seed
        )

    out = Path(args.output)
    weight_masks = {}
    extra = {"alpha": alpha, "blocks": {}}
    for node in _weighted_nodes(pruned):
        weight_masks[node.weight] = masks[node.name]
        extra["blocks"][node.name] = list(blocks[node.name])
    save_model_dir(pruned, out, masks=weight_masks, extra=extra)

    lines = []
    for node in _weighted_nodes(pruned):
        mask = masks[node.name]
        rows, cols = node.weight_shape[:2]
        zf = mask.zero_fraction()
        rate = 1.0 / (1.0 - zf) if zf < 1 else float("inf")
        lines.append(
            f"layer={node.name} shape={rows}x{cols} "
            f"grid={constraints[node.name].grid_rows}x{constraints[node.name].grid_cols} "
            f"alpha={alpha:.4f} zero_fraction={zf:.6f} rate={rate:.2f}x"
        )
    if report is not None:
        lines.append(report.to_text().rstrip())
    (out / "prune_report.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return 0


def cmd_compile(args) -> int:
    g, manifest = load_model_dir(args.model)
    out = Path(args.output)
    threads = _threads_for(args)
    _bind_weight_shapes(g)

    weighted = _weighted_nodes(g)
    if not weighted:
        out.mkdir(parents=True, exist_ok=True)
        save_model_dir(g, out)
        warnings.warn("model has no FC/Conv2D layers; nothing to compile")
        print("warning: empty model, wrote directory unchanged")
        return 0

    # encode every FC/CONV weight to BCRC using its stored mask
    encoded = {}
    root = Path(args.model)
    for node in weighted:
        wname = node.weight
        w = g.weights.get(wname)
        if w is None:
            raise MissingInputError(f"weights for {wname} missing")
        from .bcrc import BcrcMatrix

        if isinstance(w, BcrcMatrix):
            encoded[wname] = w
            continue
        w = np.asarray(w, dtype=DTYPE)
        if w.ndim == 4:
            from .dense import filters_to_matrix

            w = filters_to_matrix(w)
        entry = manifest.get("tensors", {}).get(wname, {})
        mask_file = entry.get("mask")
        if mask_file:
            mask = np.load(root / mask_file)
        else:
            mask = w != 0  # dense layer: treat explicit zeros as pruned
        plan = plan_reorder(w, mask)
        encoded[wname] = encode_bcrc(w, mask, plan)

    space = TuneSpace(threads=(threads,))
    cache = TuneCache(out / "tune_cache.txt")
    for node in weighted:
        b = encoded[node.weight]
        if args.tune:
            cached = cache.get(b.rows, b.cols, b.nnz, space)
            if cached is None:
                cfg, _ = ga_tune(
                    node,
                    b,
                    space,
                    GaParams(seed=args.seed),
                    HostLatencySource(seed=args.seed),
                )
                cache.put(b.rows, b.cols, b.nnz, space, cfg)
            else:
                cfg = cached
            node.unroll = cfg.unroll
            node.tiling = (cfg.tile_rows, cfg.tile_cols)
        g.weights[node.weight] = encoded[node.weight]

    out.mkdir(parents=True, exist_ok=True)
    if args.tune:
        cache.save()
    save_model_dir(g, out)
    print(f"compiled {len(weighted)} kernels -> {out}")
    return 0


def _random_inputs(g: Graph, shape_flag: str | None, seed: int) -> dict:
    rng = np.random.default_rng(seed)
    inputs = {}
    for name, shape in g.inputs.items():
        if shape_flag:
            shape = tuple(int(v) for v in shape_flag.split(","))
        inputs[name] = rng.standard_normal(shape).astype(DTYPE)
    return inputs


def cmd_run(args) -> int:
    g, _ = load_model_dir(args.model)
    inputs = {}
    for item in args.input or []:
        if "=" in item:
            name, path = item.split("=", 1)
        else:
            if len(g.inputs) != 1:
                raise MissingInputError("use --input NAME=path for multi-input models")
            name, path = next(iter(g.inputs)), item
        p = Path(path)
        if not p.exists():
            raise MissingInputError(f"input file missing: {p}")
        inputs[name] = np.load(p)
    if not args.input:
        inputs = _random_inputs(g, None, args.seed)
    outputs = run_graph(g, inputs, threads=_threads_for(args))
    for name, value in outputs.items():
        arr = np.asarray(value)
        print(f"{name}: shape={arr.shape} mean={arr.mean():.6f}")
        if args.output:
            outdir = Path(args.output)
            outdir.mkdir(parents=True, exist_ok=True)
            np.save(outdir / f"{name}.npy", arr)
    return 0


def cmd_bench(args) -> int:
    g, _ = load_model_dir(args.model)
    threads = _threads_for(args)
    inputs = _random_inputs(g, args.input_shape, args.seed)
    rows = benchmod.bench_model(g, inputs, repeats=args.repeats, threads=threads)
    benchmod.write_bench_csv(rows, args.csv)
    for row in rows:
        print(
            f"{row.layer}: nnz={row.nnz} sparse={row.sparse_us:.1f}us "
            f"dense={row.dense_us:.1f}us speedup={row.speedup:.2f}x"
        )
    print(f"wrote {args.csv}")
    return 0


def _fig7b_model(layer, block):
    # steep latency drop until block height 4 (width fixed 16), then flat
    h = block[0]
    table = {1: 100.0, 2: 60.0, 4: 40.0, 8: 39.0, 16: 38.5}
    return table.get(h, 38.0) + (0.0 if block[1] == 16 else 5.0)


def cmd_blocksize(args) -> int:
    g, _ = _load_graph_any(args.model)
    _bind_weight_shapes(g)
    try:
        node = next(n for n in _weighted_nodes(g) if n.name == args.layer)
    except StopIteration:
        raise MissingInputError(f"no FC/Conv2D layer named {args.layer!r}")
    candidates = [_parse_block(c) for c in args.candidates.split(",")]
    if args.latency_model == "fig7b":
        lat = ModelLatencySource(block_model=_fig7b_model)
    else:
        lat = HostLatencySource(seed=args.seed)
    block = find_block_size(node, args.rate, candidates, args.threshold, lat)
    print(f"{block[0]}x{block[1]}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="grim", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prune", help="BCR-prune a model with ADMM")
    p.add_argument("model", help=".grim file or model directory")
    p.add_argument("--data", required=True, help=".npz with x/y (and x_val/y_val)")
    p.add_argument("--output", required=True)
    p.add_argument("--alpha", type=float, default=None, help="target zero fraction")
    p.add_argument("--rate", type=float, default=None, help="pruning rate (alpha = 1 - 1/rate)")
    p.add_argument("--block", default="4x16", help="block size HxW")
    p.add_argument("--auto-block", action="store_true", help="search block size first")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--retrain-epochs", type=int, default=10)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_prune)

    p = sub.add_parser("compile", help="encode weights to BCRC and tune configs")
    p.add_argument("model", help="pruned model directory")
    p.add_argument("--output", required=True)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--tune", action="store_true")
    group.add_argument("--default-config", action="store_true")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_compile)

    p = sub.add_parser("run", help="execute a model on inputs")
    p.add_argument("model")
    p.add_argument("--input", action="append", help="NAME=path.npy (or bare path)")
    p.add_argument("--output", default=None, help="directory for output .npy files")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("bench", help="benchmark kernels and end-to-end latency")
    p.add_argument("model")
    p.add_argument("--input-shape", default=None, help="comma-separated dims")
    p.add_argument("--repeats", type=int, default=11)
    p.add_argument("--csv", required=True)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("blocksize", help="search the block size for one layer")
    p.add_argument("model")
    p.add_argument("--layer", required=True)
    p.add_argument("--rate", type=float, default=10.0)
    p.add_argument("--candidates", default="1x16,2x16,4x16,8x16,16x16")
    p.add_argument("--threshold", type=float, default=0.05)
    p.add_argument("--latency-model", choices=["host", "fig7b"], default="host")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_blocksize)

    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except GrimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - unexpected failures
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
