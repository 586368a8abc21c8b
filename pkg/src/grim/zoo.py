"""Small demo models: an MLP for pruning experiments, a toy CNN, and the
two-layer GRU benchmark model.

The GRU demo mirrors the recurrent benchmark setup: two stacked GRU
layers with hidden size 1024 (all gate matrices 1024x1024) feeding a
512x1024 projection head and a 152x1024 output head, every weight
synthesized at the requested pruning rate. Run as a script to write a
pruned model directory ready for `grim compile`:

    python -m grim.zoo gru  out_dir --rate 10 --seed 7
    python -m grim.zoo mlp  out_dir
    python -m grim.zoo cnn  out_dir
"""

from __future__ import annotations

import numpy as np

from .dense import DTYPE
from .ir import Graph, LayerIr, OpKind, TensorDecl, save_model_dir
from .tuner import synthesize_matrix

__all__ = ["make_mlp", "make_toy_cnn", "make_gru_demo", "mlp_dataset"]


def make_mlp(dims=(16, 8, 2), seed: int = 0, block_size=(2, 2)) -> Graph:
    """FC/RELU chain ending in softmax; dense random weights."""
    rng = np.random.default_rng(seed)
    g = Graph()
    g.inputs["in0"] = (dims[0],)
    prev = "in0"
    for i in range(len(dims) - 1):
        wname = f"w{i}"
        shape = (dims[i + 1], dims[i])
        g.tensors[wname] = TensorDecl(name=wname, shape=shape, data_ref=None)
        g.weights[wname] = (rng.standard_normal(shape) * 0.4).astype(DTYPE)
        fc = f"fc{i}"
        g.add_node(
            LayerIr(
                name=fc, kind=OpKind.FC, inputs=(wname, prev), block_size=block_size
            )
        )
        prev = fc
        if i < len(dims) - 2:
            g.add_node(LayerIr(name=f"relu{i}", kind=OpKind.RELU, inputs=(prev,)))
            prev = f"relu{i}"
    g.add_node(LayerIr(name="probs", kind=OpKind.SOFTMAX, inputs=(prev,)))
    g.validate()
    return g


def mlp_dataset(
    features: int = 16, classes: int = 2, samples: int = 256, seed: int = 0, margin: float = 2.0
):
    """Linearly separable two-cluster data split 80/20 train/val."""
    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((classes, features)).astype(np.float64)
    centers *= margin / np.linalg.norm(centers, axis=1, keepdims=True)
    y = rng.integers(0, classes, size=samples)
    x = centers[y] + 0.35 * rng.standard_normal((samples, features))
    cut = int(samples * 0.8)
    from .pruning import DatasetHandle

    return DatasetHandle(
        x=x[:cut].astype(DTYPE),
        y=y[:cut],
        x_val=x[cut:].astype(DTYPE),
        y_val=y[cut:],
    )


def make_toy_cnn(seed: int = 0) -> Graph:
    """conv(3x3, 2->4 channels) -> relu -> fc -> softmax on 8x8 inputs."""
    rng = np.random.default_rng(seed)
    g = Graph()
    g.inputs["img"] = (1, 2, 8, 8)
    g.tensors["wc"] = TensorDecl(name="wc", shape=(4, 2, 3, 3), data_ref=None)
    g.weights["wc"] = (rng.standard_normal((4, 2, 3, 3)) * 0.4).astype(DTYPE)
    g.add_node(
        LayerIr(
            name="conv0",
            kind=OpKind.CONV2D,
            inputs=("wc", "img"),
            kernel=(3, 3),
            strides=(1, 1),
            padding=(1, 1),
            block_size=(2, 2),
        )
    )
    g.add_node(LayerIr(name="act0", kind=OpKind.RELU, inputs=("conv0",)))
    g.tensors["wf"] = TensorDecl(name="wf", shape=(2, 4 * 8 * 8), data_ref=None)
    g.weights["wf"] = (rng.standard_normal((2, 4 * 8 * 8)) * 0.2).astype(DTYPE)
    g.add_node(LayerIr(name="fc0", kind=OpKind.FC, inputs=("wf", "act0"), block_size=(2, 2)))
    g.add_node(LayerIr(name="probs", kind=OpKind.SOFTMAX, inputs=("fc0",)))
    g.validate()
    return g


_GRU_GATES = ("ux", "uh", "rx", "rh", "cx", "ch")


def make_gru_demo(
    hidden: int = 1024,
    rate: float = 10.0,
    block=(4, 16),
    seed: int = 7,
):
    """Two-layer GRU benchmark model with pruned synthesized weights.

    Returns (graph, masks). Weight shapes cover the recurrent benchmark
    trio: 1024x1024 gates, a 512x1024 projection, and a 152x1024 head
    (scaled proportionally when `hidden` differs).
    """
    rng = np.random.default_rng(seed)
    g = Graph()
    masks = {}
    g.inputs["x"] = (hidden,)
    g.inputs["h0"] = (hidden,)
    g.inputs["h1"] = (hidden,)

    def add_weight(name: str, rows: int, cols: int, child_seed: int):
        if rate > 1.0:
            w, mask = synthesize_matrix(rows, cols, rate, block[0], block[1], seed=child_seed)
            w = np.where(mask.to_dense(), w, 0).astype(DTYPE)
            masks[name] = mask
        else:
            w = rng.standard_normal((rows, cols)).astype(DTYPE)
        g.tensors[name] = TensorDecl(name=name, shape=(rows, cols), data_ref=None)
        g.weights[name] = w

    state = ("h0", "h1")
    prev = "x"
    for layer in range(2):
        names = []
        for gate in _GRU_GATES:
            wname = f"l{layer}_{gate}"
            add_weight(wname, hidden, hidden, seed * 100 + layer * 10 + len(names))
            names.append(wname)
        out = f"gru{layer}"
        from .ir import _expand_gru

        for node in _expand_gru(
            out,
            names + [prev, state[layer]],
            {"block_size": list(block)},
            0,
            0,
        ):
            g.add_node(node)
        prev = out

    proj_rows = hidden // 2
    head_rows = max(4, (152 * hidden) // 1024 // 4 * 4)
    add_weight("w_proj", proj_rows, hidden, seed * 100 + 90)
    add_weight("w_head", head_rows, hidden, seed * 100 + 91)
    g.add_node(LayerIr(name="proj", kind=OpKind.FC, inputs=("w_proj", prev), block_size=block))
    g.add_node(LayerIr(name="head", kind=OpKind.FC, inputs=("w_head", prev), block_size=block))
    g.validate()
    return g, masks


def _main(argv=None) -> int:
    import argparse

    ap = argparse.ArgumentParser(description="write a demo model directory")
    ap.add_argument("model", choices=["gru", "mlp", "cnn"])
    ap.add_argument("out_dir")
    ap.add_argument("--hidden", type=int, default=1024)
    ap.add_argument("--rate", type=float, default=10.0)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args(argv)
    if args.model == "gru":
        g, masks = make_gru_demo(hidden=args.hidden, rate=args.rate, seed=args.seed)
        save_model_dir(g, args.out_dir, masks=masks)
    elif args.model == "mlp":
        save_model_dir(make_mlp(seed=args.seed), args.out_dir)
    else:
        save_model_dir(make_toy_cnn(seed=args.seed), args.out_dir)
    print(f"wrote {args.model} model to {args.out_dir}")
    return 0


if __name__ == "__main__":
    raise SystemExit(_main())
