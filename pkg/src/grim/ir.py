"""Layerwise IR, the textual model DSL, and the graph executor.

A model is a list of assignment statements, one per layer or tensor
declaration (grammar frozen in docs/DSL.md):

    in0 = Input([1, 2, 8, 8]);
    w0  = Tensor([4, 18], "w0.bin");
    c0  = Conv2D(w0, in0, info{kernel: [3, 3], strides: [1, 1], padding: [1, 1]});
    r0  = Relu(c0);

Each statement becomes one node whose name is the produced tensor. The
`info{...}` block carries block/tuning metadata (block_size, layout,
unroll, tiling, strides, ...). GRU statements are sugar: the parser
expands them into FC and elementwise nodes immediately.

`run_graph` executes in topological order, dispatching FC/Conv2D to the
sparse executor when the bound weight is BCRC-encoded and to plain dense
kernels otherwise.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from . import executor
from .bcrc import BcrcMatrix, load_bcrc, save_bcrc
from .dense import (
    DTYPE,
    ConvSpec,
    as_matrix,
    as_tensor4,
    filters_to_matrix,
    gemm_to_tensor4,
    im2col,
    im2col_skipping,
)
from .errors import (
    ConsistencyError,
    DanglingTensorError,
    MissingInputError,
    ParseError,
    ShapeError,
    UnknownOpError,
)
from .executor import KernelConfig

__all__ = [
    "OpKind",
    "LayerIr",
    "TensorDecl",
    "Graph",
    "parse_dsl",
    "graph_to_dsl",
    "run_graph",
    "graphs_isomorphic",
    "save_model_dir",
    "load_model_dir",
]

DEFAULT_UNROLL = 4
DEFAULT_TILING = (8, 64)


class OpKind(str, Enum):
    CONV2D = "Conv2D"
    FC = "FC"
    GRU = "GRU"
    POOL = "Pool"
    RELU = "Relu"
    SOFTMAX = "Softmax"
    ADD = "Add"
    MUL = "Mul"
    SIGMOID = "Sigmoid"
    TANH = "Tanh"
    BLEND = "Blend"


_WEIGHTED = {OpKind.CONV2D, OpKind.FC}
_ARITY = {
    OpKind.CONV2D: 2,
    OpKind.FC: 2,
    OpKind.GRU: 8,
    OpKind.POOL: 1,
    OpKind.RELU: 1,
    OpKind.SOFTMAX: 1,
    OpKind.ADD: 2,
    OpKind.MUL: 2,
    OpKind.SIGMOID: 1,
    OpKind.TANH: 1,
    OpKind.BLEND: 3,
}


@dataclass
class LayerIr:
    """One graph node: op kind, consumed tensors, and tuning metadata."""

    name: str
    kind: OpKind
    inputs: tuple[str, ...]
    block_size: tuple[int, int] | None = None
    layout: str = "row_major"
    unroll: int = DEFAULT_UNROLL
    tiling: tuple[int, int] = DEFAULT_TILING
    strides: tuple[int, int] = (1, 1)
    padding: tuple[int, int] = (0, 0)
    kernel: tuple[int, int] | None = None
    pool: str = "max"
    device: str = "CPU"
    extras: dict = field(default_factory=dict)
    weight_shape: tuple[int, ...] | None = None  # derived, not serialized

    def __post_init__(self):
        if self.unroll < 1 or min(self.tiling) < 1:
            raise ConsistencyError(f"node {self.name}: counts must be positive")

    @property
    def weight(self) -> str | None:
        return self.inputs[0] if self.kind in _WEIGHTED else None

    def kernel_config(self, threads: int = 1, lre: bool = True) -> KernelConfig:
        return KernelConfig(
            tile_rows=self.tiling[0],
            tile_cols=self.tiling[1],
            unroll=self.unroll,
            threads=threads,
            lre_enabled=lre,
        )


@dataclass
class TensorDecl:
    name: str
    shape: tuple[int, ...]
    data_ref: str | None = None


class Graph:
    """Dataflow graph: declared inputs, weight tensors, and layer nodes."""

    def __init__(self):
        self.inputs: dict[str, tuple[int, ...]] = {}
        self.tensors: dict[str, TensorDecl] = {}
        self.nodes: list[LayerIr] = []
        self.weights: dict[str, object] = {}

    def add_node(self, node: LayerIr):
        self.nodes.append(node)

    def node(self, name: str) -> LayerIr:
        for n in self.nodes:
            if n.name == name:
                return n
        raise KeyError(name)

    def producers(self) -> dict[str, LayerIr]:
        return {n.name: n for n in self.nodes}

    def consumed(self) -> set[str]:
        used = set()
        for n in self.nodes:
            used.update(n.inputs)
        return used

    def output_names(self) -> list[str]:
        used = self.consumed()
        return [n.name for n in self.nodes if n.name not in used]

    def validate(self):
        seen: set[str] = set(self.inputs) | set(self.tensors)
        for n in self.nodes:
            if n.name in seen:
                raise ConsistencyError(f"tensor {n.name} produced twice")
            seen.add(n.name)
        produced = seen
        for n in self.nodes:
            for t in n.inputs:
                if t not in produced:
                    raise ConsistencyError(f"node {n.name} consumes unknown tensor {t}")
        self.topo_order()  # raises on cycles

    def topo_order(self) -> list[LayerIr]:
        ready = set(self.inputs) | set(self.tensors)
        pending = list(self.nodes)
        order: list[LayerIr] = []
        while pending:
            progressed = False
            remaining = []
            for n in pending:
                if all(t in ready for t in n.inputs):
                    order.append(n)
                    ready.add(n.name)
                    progressed = True
                else:
                    remaining.append(n)
            if not progressed:
                raise ConsistencyError(
                    "graph has a cycle or an unproduced dependency: "
                    + ", ".join(n.name for n in remaining)
                )
            pending = remaining
        return order

    def copy(self) -> "Graph":
        g = Graph()
        g.inputs = dict(self.inputs)
        g.tensors = {k: replace(v) for k, v in self.tensors.items()}
        g.nodes = [replace(n, extras=dict(n.extras)) for n in self.nodes]
        g.weights = dict(self.weights)
        return g


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<nl>\n)
  | (?P<string>"[^"\n]*")
  | (?P<number>-?\d+(\.\d+)?([eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<sym>[=(){}\[\],:;])
    """,
    re.VERBOSE,
)


@dataclass
class _Token:
    kind: str
    value: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    line, col, pos = 1, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        value = m.group()
        if kind == "nl":
            line += 1
            col = 1
        else:
            if kind not in ("ws", "comment"):
                tokens.append(_Token(kind, value, line, col))
            col += len(value)
        pos = m.end()
    tokens.append(_Token("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str, value: str | None = None) -> _Token:
        tok = self.next()
        if tok.kind != kind or (value is not None and tok.value != value):
            want = value or kind
            raise ParseError(f"expected {want!r}, got {tok.value!r}", tok.line, tok.col)
        return tok

    def parse_value(self):
        tok = self.next()
        if tok.kind == "number":
            return float(tok.value) if "." in tok.value or "e" in tok.value.lower() else int(tok.value)
        if tok.kind == "string":
            return tok.value[1:-1]
        if tok.kind == "ident":
            return tok.value
        if tok.kind == "sym" and tok.value == "[":
            items = []
            if not (self.peek().kind == "sym" and self.peek().value == "]"):
                while True:
                    items.append(self.parse_value())
                    tok2 = self.next()
                    if tok2.kind == "sym" and tok2.value == "]":
                        return items
                    if not (tok2.kind == "sym" and tok2.value == ","):
                        raise ParseError("expected ',' or ']'", tok2.line, tok2.col)
            self.next()
            return items
        raise ParseError(f"unexpected value token {tok.value!r}", tok.line, tok.col)

    def parse_info(self) -> dict:
        self.expect("sym", "{")
        info = {}
        if self.peek().kind == "sym" and self.peek().value == "}":
            self.next()
            return info
        while True:
            key = self.expect("ident").value
            self.expect("sym", ":")
            info[key] = self.parse_value()
            tok = self.next()
            if tok.kind == "sym" and tok.value == "}":
                return info
            if not (tok.kind == "sym" and tok.value == ","):
                raise ParseError("expected ',' or '}' in info block", tok.line, tok.col)


def _pair(value, name: str, line: int, col: int) -> tuple[int, int]:
    if (
        not isinstance(value, list)
        or len(value) != 2
        or not all(isinstance(v, int) for v in value)
    ):
        raise ParseError(f"{name} must be a [h, w] integer pair", line, col)
    return (value[0], value[1])


def _apply_info(node: LayerIr, info: dict, line: int, col: int):
    for key, value in info.items():
        if key == "block_size":
            node.block_size = _pair(value, key, line, col)
        elif key == "tiling":
            node.tiling = _pair(value, key, line, col)
        elif key == "strides":
            node.strides = _pair(value, key, line, col)
        elif key == "padding":
            node.padding = _pair(value, key, line, col)
        elif key == "kernel":
            node.kernel = _pair(value, key, line, col)
        elif key == "unroll":
            if not isinstance(value, int) or value < 1:
                raise ParseError("unroll must be a positive integer", line, col)
            node.unroll = value
        elif key == "layout":
            node.layout = str(value)
        elif key == "device":
            node.device = str(value)
        elif key == "pool":
            node.pool = str(value)
        else:
            node.extras[key] = value


def _expand_gru(out: str, args: list[str], info: dict, line: int, col: int) -> list[LayerIr]:
    ux, uh, rx, rh, cx, ch, x, h = args
    p = f"{out}__"
    mk = []

    def fc(name, w, a):
        node = LayerIr(name=name, kind=OpKind.FC, inputs=(w, a))
        _apply_info(node, info, line, col)
        mk.append(node)

    def ew(name, kind, *ins):
        mk.append(LayerIr(name=name, kind=kind, inputs=tuple(ins)))

    fc(p + "zx", ux, x)
    fc(p + "zh", uh, h)
    ew(p + "zs", OpKind.ADD, p + "zx", p + "zh")
    ew(p + "z", OpKind.SIGMOID, p + "zs")
    fc(p + "rx", rx, x)
    fc(p + "rh", rh, h)
    ew(p + "rs", OpKind.ADD, p + "rx", p + "rh")
    ew(p + "r", OpKind.SIGMOID, p + "rs")
    ew(p + "rh2", OpKind.MUL, p + "r", h)
    fc(p + "cx", cx, x)
    fc(p + "ch", ch, p + "rh2")
    ew(p + "cs", OpKind.ADD, p + "cx", p + "ch")
    ew(p + "c", OpKind.TANH, p + "cs")
    ew(out, OpKind.BLEND, p + "z", h, p + "c")
    return mk


def parse_dsl(text: str) -> Graph:
    """Parse DSL text into a Graph; raises ParseError with line/column."""
    parser = _Parser(text)
    graph = Graph()
    known_ops = {k.value: k for k in OpKind}

    while parser.peek().kind != "eof":
        name_tok = parser.expect("ident")
        parser.expect("sym", "=")
        op_tok = parser.expect("ident")
        parser.expect("sym", "(")

        args: list = []
        info: dict = {}
        if not (parser.peek().kind == "sym" and parser.peek().value == ")"):
            while True:
                tok = parser.peek()
                if tok.kind == "ident" and tok.value == "info":
                    parser.next()
                    info = parser.parse_info()
                else:
                    args.append(parser.parse_value())
                tok2 = parser.next()
                if tok2.kind == "sym" and tok2.value == ")":
                    break
                if not (tok2.kind == "sym" and tok2.value == ","):
                    raise ParseError("expected ',' or ')'", tok2.line, tok2.col)
        else:
            parser.next()
        parser.expect("sym", ";")

        name = name_tok.value
        op = op_tok.value
        line, col = op_tok.line, op_tok.col

        if name in graph.inputs or name in graph.tensors or any(
            n.name == name for n in graph.nodes
        ):
            raise ParseError(f"tensor {name} produced twice", name_tok.line, name_tok.col)

        if op == "Input":
            if len(args) != 1 or not isinstance(args[0], list):
                raise ParseError("Input takes a [shape] list", line, col)
            graph.inputs[name] = tuple(int(v) for v in args[0])
            continue
        if op == "Tensor":
            if not args or not isinstance(args[0], list):
                raise ParseError("Tensor takes ([shape], \"data_ref\"?)", line, col)
            ref = None
            if len(args) > 1:
                if not isinstance(args[1], str):
                    raise ParseError("Tensor data_ref must be a string", line, col)
                ref = args[1]
            if len(args) > 2:
                raise ParseError("Tensor takes at most two arguments", line, col)
            graph.tensors[name] = TensorDecl(
                name=name, shape=tuple(int(v) for v in args[0]), data_ref=ref
            )
            continue

        if op not in known_ops:
            raise UnknownOpError(f"unknown operation {op!r}", line, col)
        kind = known_ops[op]
        if len(args) != _ARITY[kind]:
            raise ParseError(
                f"{op} takes {_ARITY[kind]} tensor arguments, got {len(args)}",
                line,
                col,
            )
        for a in args:
            if not isinstance(a, str):
                raise ParseError(f"{op} arguments must be tensor names", line, col)

        declared = (
            set(graph.inputs) | set(graph.tensors) | {n.name for n in graph.nodes}
        )
        for a in args:
            if a not in declared:
                raise DanglingTensorError(
                    f"tensor {a!r} is not defined before use", line, col
                )

        if kind == OpKind.GRU:
            for node in _expand_gru(name, args, info, line, col):
                graph.add_node(node)
            continue

        node = LayerIr(name=name, kind=kind, inputs=tuple(args))
        try:
            _apply_info(node, info, line, col)
        except ConsistencyError as exc:
            raise ParseError(str(exc), line, col) from exc
        graph.add_node(node)

    graph.validate()
    return graph


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------


def _fmt_value(v) -> str:
    if isinstance(v, list):
        return "[" + ", ".join(_fmt_value(x) for x in v) + "]"
    if isinstance(v, tuple):
        return "[" + ", ".join(_fmt_value(x) for x in v) + "]"
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, int):
        return str(v)
    if isinstance(v, str) and re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", v):
        return v
    return '"' + str(v) + '"'


def _node_info(node: LayerIr) -> dict:
    info: dict = {}
    if node.kind in _WEIGHTED:
        if node.kind == OpKind.CONV2D:
            if node.kernel is not None:
                info["kernel"] = list(node.kernel)
            info["strides"] = list(node.strides)
            info["padding"] = list(node.padding)
        if node.block_size is not None:
            info["block_size"] = list(node.block_size)
        info["layout"] = node.layout
        info["unroll"] = node.unroll
        info["tiling"] = list(node.tiling)
        info["device"] = node.device
    elif node.kind == OpKind.POOL:
        info["pool"] = node.pool
        info["kernel"] = list(node.kernel) if node.kernel else [2, 2]
        info["strides"] = list(node.strides)
    info.update(node.extras)
    return info


def graph_to_dsl(g: Graph) -> str:
    """Print a graph back to DSL text; parse(graph_to_dsl(g)) is isomorphic."""
    lines = []
    for name, shape in g.inputs.items():
        lines.append(f"{name} = Input({_fmt_value(list(shape))});")
    for decl in g.tensors.values():
        if decl.data_ref is None:
            lines.append(f"{decl.name} = Tensor({_fmt_value(list(decl.shape))});")
        else:
            lines.append(
                f"{decl.name} = Tensor({_fmt_value(list(decl.shape))}, \"{decl.data_ref}\");"
            )
    for node in g.nodes:
        args = ", ".join(node.inputs)
        info = _node_info(node)
        if info:
            body = ", ".join(f"{k}: {_fmt_value(v)}" for k, v in info.items())
            lines.append(f"{node.name} = {node.kind.value}({args}, info{{{body}}});")
        else:
            lines.append(f"{node.name} = {node.kind.value}({args});")
    return "\n".join(lines) + ("\n" if lines else "")


def graphs_isomorphic(a: Graph, b: Graph) -> bool:
    if a.inputs != b.inputs:
        return False
    if set(a.tensors) != set(b.tensors):
        return False
    for name in a.tensors:
        da, db = a.tensors[name], b.tensors[name]
        if (da.shape, da.data_ref) != (db.shape, db.data_ref):
            return False
    na = {n.name: n for n in a.nodes}
    nb = {n.name: n for n in b.nodes}
    if set(na) != set(nb):
        return False
    fields = (
        "kind",
        "inputs",
        "block_size",
        "layout",
        "unroll",
        "tiling",
        "strides",
        "padding",
        "kernel",
        "pool",
        "device",
        "extras",
    )
    for name in na:
        for f in fields:
            if getattr(na[name], f) != getattr(nb[name], f):
                return False
    return True


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------


def _to_batch_matrix(x: np.ndarray, node: str) -> np.ndarray:
    if x.ndim == 1:
        return x
    if x.ndim == 2:
        return x
    if x.ndim == 4:
        n = x.shape[0]
        return np.ascontiguousarray(x.reshape(n, -1).T, dtype=DTYPE)
    raise ShapeError(f"node {node}: FC input must be 1-D, 2-D or NCHW")


def _exec_fc(node: LayerIr, w, x: np.ndarray, threads: int) -> np.ndarray:
    x = _to_batch_matrix(x, node.name)
    cfg = node.kernel_config(threads=threads)
    if isinstance(w, BcrcMatrix):
        if x.ndim == 1:
            if x.shape[0] != w.cols:
                raise ShapeError(f"node {node.name}: x length {x.shape[0]} != {w.cols}")
            return executor.sparse_gemv(w, x, cfg)
        return executor.sparse_gemm(w, x, cfg)
    w = as_matrix(w, f"{node.name} weights")
    if x.shape[0] != w.shape[1]:
        raise ShapeError(
            f"node {node.name}: weight cols {w.shape[1]} != input rows {x.shape[0]}"
        )
    return (w @ x).astype(DTYPE)


def _conv_spec_of(node: LayerIr, x: np.ndarray, w) -> ConvSpec:
    if node.kernel is None:
        if not isinstance(w, BcrcMatrix) and np.asarray(w).ndim == 4:
            kernel = np.asarray(w).shape[2:]
        else:
            raise ShapeError(f"node {node.name}: Conv2D needs kernel info")
    else:
        kernel = node.kernel
    return ConvSpec(
        kernel_h=kernel[0],
        kernel_w=kernel[1],
        stride_h=node.strides[0],
        stride_w=node.strides[1],
        pad_h=node.padding[0],
        pad_w=node.padding[1],
    )


def _exec_conv(node: LayerIr, w, x: np.ndarray, threads: int) -> np.ndarray:
    x = as_tensor4(x, f"{node.name} input")
    spec = _conv_spec_of(node, x, w)
    n, c, h, wd = x.shape
    oh, ow = spec.out_dims(h, wd)
    cfg = node.kernel_config(threads=threads)
    if isinstance(w, BcrcMatrix):
        if w.cols != c * spec.kernel_h * spec.kernel_w:
            raise ShapeError(f"node {node.name}: weight cols != c*kh*kw")
        dead = w.dead_columns()
        xs = im2col_skipping(x, spec, dead)
        y = executor.sparse_gemm(w, xs, cfg, dead_cols=dead)
        return gemm_to_tensor4(y, n, oh, ow)
    w_arr = np.asarray(w)
    mat = filters_to_matrix(w_arr) if w_arr.ndim == 4 else as_matrix(w_arr)
    if mat.shape[1] != c * spec.kernel_h * spec.kernel_w:
        raise ShapeError(f"node {node.name}: weight cols != c*kh*kw")
    y = (mat @ im2col(x, spec)).astype(DTYPE)
    return gemm_to_tensor4(y, n, oh, ow)


def _exec_pool(node: LayerIr, x: np.ndarray) -> np.ndarray:
    if node.pool != "max":
        raise ShapeError(f"node {node.name}: only max pooling is supported")
    x = as_tensor4(x, f"{node.name} input")
    kh, kw = node.kernel if node.kernel else (2, 2)
    sh, sw = node.strides
    n, c, h, w = x.shape
    if (h - kh) % sh or (w - kw) % sw:
        raise ShapeError(f"node {node.name}: pool window does not tile input")
    from numpy.lib.stride_tricks import sliding_window_view

    win = sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw]
    return np.ascontiguousarray(win.max(axis=(4, 5)), dtype=DTYPE)


def _softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=0, keepdims=True)
    e = np.exp(shifted.astype(np.float64))
    return (e / e.sum(axis=0, keepdims=True)).astype(DTYPE)


def run_graph(g: Graph, inputs: dict[str, np.ndarray], threads: int = 1) -> dict:
    """Execute the graph; returns {name: value} for every sink tensor."""
    g.validate()
    values: dict[str, np.ndarray] = {}
    for name in g.inputs:
        if name not in inputs:
            raise MissingInputError(f"graph input {name!r} not bound")
        values[name] = np.asarray(inputs[name], dtype=DTYPE)
    for name, decl in g.tensors.items():
        w = g.weights.get(name)
        if w is None:
            raise MissingInputError(f"weight tensor {name!r} not materialized")
        values[name] = w

    for node in g.topo_order():
        ins = [values[t] for t in node.inputs]
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
            z, a, b = ins
            out = (z * a + (1.0 - z) * b).astype(DTYPE)
        else:
            raise ShapeError(f"node {node.name}: kind {node.kind} not executable")
        values[node.name] = out

    return {name: values[name] for name in g.output_names()}


# ---------------------------------------------------------------------------
# Model directory container
# ---------------------------------------------------------------------------


def save_model_dir(g: Graph, out_dir, masks: dict | None = None, extra: dict | None = None):
    """Write graph.grim, manifest.json, and one payload file per tensor.

    Dense tensors go to raw little-endian float32 `.bin` files; encoded
    ones to `.bcrc`. Masks (BcrMask or bool arrays) are saved as `.npy`.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest: dict = {"version": 1, "graph": "graph.grim", "tensors": {}}
    if extra:
        manifest.update(extra)
    g = g.copy()
    for name in list(g.tensors):
        w = g.weights.get(name)
        entry: dict = {}
        decl = g.tensors[name]
        if isinstance(w, BcrcMatrix):
            fname = f"{name}.bcrc"
            save_bcrc(w, out / fname)
            entry.update(format="bcrc", file=fname, shape=[w.rows, w.cols])
            if len(decl.shape) == 4:
                entry["shape4"] = list(decl.shape)
            decl.data_ref = fname
        elif w is not None:
            arr = np.asarray(w, dtype=DTYPE)
            fname = f"{name}.bin"
            (out / fname).write_bytes(arr.astype("<f4").tobytes())
            entry.update(format="dense", file=fname, shape=list(arr.shape))
            decl.shape = tuple(arr.shape)
            decl.data_ref = fname
        else:
            entry.update(format="none", file=None, shape=list(decl.shape))
        if masks and name in masks:
            m = masks[name]
            dense = m.to_dense() if hasattr(m, "to_dense") else np.asarray(m, bool)
            mname = f"{name}.mask.npy"
            np.save(out / mname, dense)
            entry["mask"] = mname
            if hasattr(m, "partition"):
                entry["grid"] = [m.partition.grid_rows, m.partition.grid_cols]
        manifest["tensors"][name] = entry
    (out / "graph.grim").write_text(graph_to_dsl(g))
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def load_model_dir(model_dir) -> tuple[Graph, dict]:
    """Load a model directory; returns (graph-with-weights, manifest)."""
    root = Path(model_dir)
    manifest_path = root / "manifest.json"
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text())
    else:
        manifest = {"version": 1, "graph": "graph.grim", "tensors": {}}
    graph_file = root / manifest.get("graph", "graph.grim")
    if not graph_file.exists():
        raise MissingInputError(f"no graph file at {graph_file}")
    g = parse_dsl(graph_file.read_text())
    for name, decl in g.tensors.items():
        entry = manifest["tensors"].get(name, {})
        fname = entry.get("file") or decl.data_ref
        if fname is None:
            continue
        path = root / fname
        if not path.exists():
            raise MissingInputError(f"weights file missing: {path}")
        if fname.endswith(".bcrc"):
            g.weights[name] = load_bcrc(path)
        else:
            shape = tuple(entry.get("shape", decl.shape))
            arr = np.frombuffer(path.read_bytes(), dtype="<f4").astype(DTYPE)
            if int(np.prod(shape)) != arr.size:
                raise ConsistencyError(f"{fname}: payload does not match shape {shape}")
            g.weights[name] = arr.reshape(shape)
    return g, manifest
