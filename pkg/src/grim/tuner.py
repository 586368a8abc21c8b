"""Auto-tuning: GA search over kernel configs and block-size selection.

Latency comes from a pluggable source so tests can substitute exact
models for wall-clock measurement. The GA encodes a config as one index
per candidate list, uses one-point crossover, per-gene uniform mutation,
and elitism of one; every unique config is measured exactly once.

Block-size search walks candidates in ascending area, measuring a
synthesized layer per candidate, and keeps a candidate as the new local
optimum while its relative improvement over the current one exceeds the
threshold; the first candidate that fails stops the walk.
"""

from __future__ import annotations

import random
import statistics
import time
from dataclasses import dataclass, field

import numpy as np

from .bcrc import BcrcMatrix, encode_bcrc
from .dense import DTYPE
from .errors import (
    ConsistencyError,
    DivisibilityError,
    EmptySpaceError,
    NoCandidateError,
)
from .executor import KernelConfig, sparse_gemv
from .pruning import BcrMask, BlockPartition
from .reorder import plan_reorder

__all__ = [
    "TuneSpace",
    "GaParams",
    "GaHistory",
    "LatencySource",
    "HostLatencySource",
    "ModelLatencySource",
    "ga_tune",
    "synthesize_matrix",
    "synthesize_layer",
    "find_block_size",
    "TuneCache",
]


@dataclass(frozen=True)
class TuneSpace:
    """Finite candidate lists for each tunable knob."""

    tile_rows: tuple[int, ...] = (4, 8, 16)
    tile_cols: tuple[int, ...] = (16, 64, 256)
    unroll: tuple[int, ...] = (1, 2, 4, 8)
    threads: tuple[int, ...] = (1,)

    @property
    def size(self) -> int:
        return (
            len(self.tile_rows)
            * len(self.tile_cols)
            * len(self.unroll)
            * len(self.threads)
        )

    def config_at(self, genes: tuple[int, int, int, int]) -> KernelConfig:
        return KernelConfig(
            tile_rows=self.tile_rows[genes[0]],
            tile_cols=self.tile_cols[genes[1]],
            unroll=self.unroll[genes[2]],
            threads=self.threads[genes[3]],
        )

    def gene_sizes(self) -> tuple[int, int, int, int]:
        return (
            len(self.tile_rows),
            len(self.tile_cols),
            len(self.unroll),
            len(self.threads),
        )

    def all_configs(self):
        for i in range(len(self.tile_rows)):
            for j in range(len(self.tile_cols)):
                for k in range(len(self.unroll)):
                    for l in range(len(self.threads)):
                        yield self.config_at((i, j, k, l))


@dataclass(frozen=True)
class GaParams:
    population: int = 16
    generations: int = 20
    crossover_rate: float = 0.7
    mutation_rate: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.population < 2:
            raise ConsistencyError("population must be >= 2")
        for r in (self.crossover_rate, self.mutation_rate):
            if not (0.0 <= r <= 1.0):
                raise ConsistencyError("rates must be in [0, 1]")


@dataclass
class GaHistory:
    """Best latency per generation plus the total unique evaluations."""

    best_latency: list[float] = field(default_factory=list)
    best_config: list[KernelConfig] = field(default_factory=list)
    evaluations: int = 0


class LatencySource:
    """Returns latency in microseconds for a config or block size."""

    repeats: int = 11

    def measure_config(self, layer, weights: BcrcMatrix, cfg: KernelConfig) -> float:
        raise NotImplementedError

    def measure_block(self, layer, pruning_rate: float, block: tuple[int, int]) -> float:
        raise NotImplementedError


class ModelLatencySource(LatencySource):
    """Deterministic modeled latency for tests and offline exploration."""

    def __init__(self, config_model=None, block_model=None):
        self.config_model = config_model
        self.block_model = block_model

    def measure_config(self, layer, weights, cfg):
        if self.config_model is None:
            raise ConsistencyError("no config model bound")
        return float(self.config_model(layer, cfg))

    def measure_block(self, layer, pruning_rate, block):
        if self.block_model is None:
            raise ConsistencyError("no block model bound")
        return float(self.block_model(layer, block))


class HostLatencySource(LatencySource):
    """Wall-clock measurement on this machine: median of `repeats` runs
    after `warmup` discarded ones, monotonic timer."""

    def __init__(self, repeats: int = 11, warmup: int = 3, seed: int = 0):
        self.repeats = repeats
        self.warmup = warmup
        self.seed = seed

    def _time(self, fn) -> float:
        for _ in range(self.warmup):
            fn()
        samples = []
        for _ in range(self.repeats):
            t0 = time.perf_counter_ns()
            fn()
            samples.append((time.perf_counter_ns() - t0) / 1000.0)
        return float(statistics.median(samples))

    def measure_config(self, layer, weights, cfg):
        rng = np.random.default_rng(self.seed)
        x = rng.standard_normal(weights.cols).astype(DTYPE)
        return self._time(lambda: sparse_gemv(weights, x, cfg))

    def measure_block(self, layer, pruning_rate, block):
        rows, cols = _layer_weight_dims(layer)
        w, mask = synthesize_matrix(
            rows, cols, pruning_rate, block[0], block[1], seed=self.seed
        )
        enc = encode_bcrc(w, mask, plan_reorder(w, mask))
        rng = np.random.default_rng(self.seed)
        x = rng.standard_normal(cols).astype(DTYPE)
        cfg = KernelConfig()
        return self._time(lambda: sparse_gemv(enc, x, cfg))


def _layer_weight_dims(layer) -> tuple[int, int]:
    shape = getattr(layer, "weight_shape", None)
    if shape is None or len(shape) < 2:
        raise ConsistencyError("layer has no 2-D weight_shape bound")
    if len(shape) == 4:  # conv filter bank flattens to its GEMM matrix
        return shape[0], shape[1] * shape[2] * shape[3]
    return shape[0], shape[1]


def ga_tune(
    layer,
    weights: BcrcMatrix,
    space: TuneSpace,
    params: GaParams,
    lat: LatencySource,
) -> tuple[KernelConfig, GaHistory]:
    """Genetic-algorithm search for the lowest-latency kernel config."""
    sizes = space.gene_sizes()
    if min(sizes) < 1:
        raise EmptySpaceError("tuning space has an empty candidate list")
    rng = random.Random(params.seed)
    cache: dict[tuple[int, int, int, int], float] = {}

    def fitness(genes) -> float:
        if genes not in cache:
            cache[genes] = lat.measure_config(layer, weights, space.config_at(genes))
        return cache[genes]

    def random_genes():
        return tuple(rng.randrange(s) for s in sizes)

    pop = [random_genes() for _ in range(params.population)]
    history = GaHistory()
    best = min(pop, key=fitness)

    for _ in range(params.generations):
        scored = sorted(pop, key=fitness)
        if fitness(scored[0]) < fitness(best):
            best = scored[0]
        history.best_latency.append(fitness(best))
        history.best_config.append(space.config_at(best))

        parents = scored[: max(2, len(scored) // 2)]
        nxt = [best]  # elitism of one
        while len(nxt) < params.population:
            a = rng.choice(parents)
            b = rng.choice(parents)
            if rng.random() < params.crossover_rate:
                point = rng.randrange(1, 4)
                child = a[:point] + b[point:]
            else:
                child = a
            child = tuple(
                rng.randrange(sizes[i]) if rng.random() < params.mutation_rate else v
                for i, v in enumerate(child)
            )
            nxt.append(child)
        pop = nxt

    final = min(pop, key=fitness)
    if fitness(final) < fitness(best):
        best = final
    history.evaluations = len(cache)
    return space.config_at(best), history


def synthesize_matrix(
    rows: int,
    cols: int,
    pruning_rate: float,
    block_h: int,
    block_w: int,
    seed: int = 0,
) -> tuple[np.ndarray, BcrMask]:
    """Random weights plus a random feasible BCR mask at the given rate.

    Kept local rows are drawn once per block-row stripe (mirroring how
    energy-correlated rows survive together in trained networks), kept
    columns independently per block; random column stripes are then
    dropped until the surviving count is at most total/rate, so the zero
    fraction meets 1 - 1/rate within one stripe's worth of elements.
    Deterministic per seed.
    """
    if pruning_rate < 1.0:
        raise ConsistencyError("pruning_rate must be >= 1")
    if block_h < 1 or block_w < 1 or rows % block_h or cols % block_w:
        raise DivisibilityError(
            f"block {block_h}x{block_w} does not divide a {rows}x{cols} matrix"
        )
    part = BlockPartition(rows, cols, rows // block_h, cols // block_w)
    rng = np.random.default_rng(seed)
    w = rng.standard_normal((rows, cols)).astype(DTYPE)
    n, m = part.grid_rows, part.grid_cols
    if pruning_rate == 1.0:
        return w, BcrMask.full(part)

    keep = 1.0 / pruning_rate
    rk = int(round(block_h * np.sqrt(keep)))
    rk = max(1, min(block_h, rk))
    if block_h >= 2:
        rk = max(rk, 2)  # keep multi-row runs available for load reuse
    ck = int(np.ceil(keep * block_h * block_w / rk))
    ck = max(1, min(block_w, ck))

    # one kept-row set per block-row stripe, shared across its blocks
    row_order = np.argsort(rng.random((n, block_h)), axis=1)
    stripe_rows = [np.sort(row_order[i, :rk]) for i in range(n)]
    kept_rows = [[stripe_rows[i]] * m for i in range(n)]

    # drop whole column stripes (rk elements each) down to the target count
    target = int(np.floor(rows * cols * keep))
    drops = max(0, -(-(n * m * ck * rk - target) // rk))
    pool = rng.permutation(np.repeat(np.arange(n * m), ck))[:drops]
    removed = np.bincount(pool, minlength=n * m)
    col_order = np.argsort(rng.random((n * m, block_w)), axis=1)
    kept_cols = [
        [
            np.sort(col_order[i * m + j, : ck - removed[i * m + j]])
            for j in range(m)
        ]
        for i in range(n)
    ]
    return w, BcrMask(part, kept_rows, kept_cols)


def synthesize_layer(
    layer, pruning_rate: float, block: tuple[int, int], seed: int = 0
) -> tuple[np.ndarray, BcrMask]:
    """Synthesize weights shaped like `layer`'s weight matrix (see
    synthesize_matrix)."""
    rows, cols = _layer_weight_dims(layer)
    return synthesize_matrix(rows, cols, pruning_rate, block[0], block[1], seed=seed)


def find_block_size(
    layer,
    pruning_rate: float,
    candidates: list[tuple[int, int]],
    threshold: float,
    lat: LatencySource,
) -> tuple[int, int]:
    """Smallest block size whose latency improvement chain stops at the
    threshold: walk candidates ascending by area, adopt a candidate while
    it improves on the current local optimum by more than `threshold`
    (relative), and return the local optimum at the first failure."""
    if threshold <= 0:
        raise ConsistencyError("threshold must be positive")
    rows, cols = _layer_weight_dims(layer)
    usable = [
        (h, w) for h, w in candidates if h >= 1 and w >= 1 and rows % h == 0 and cols % w == 0
    ]
    if not usable:
        raise NoCandidateError(
            f"no candidate block divides a {rows}x{cols} weight matrix"
        )
    usable.sort(key=lambda hw: (hw[0] * hw[1], hw))
    best = usable[0]
    best_lat = lat.measure_block(layer, pruning_rate, best)
    for cand in usable[1:]:
        cand_lat = lat.measure_block(layer, pruning_rate, cand)
        improvement = (best_lat - cand_lat) / best_lat if best_lat > 0 else 0.0
        if improvement > threshold:
            best, best_lat = cand, cand_lat
        else:
            break
    return best


class TuneCache:
    """Text cache of tuned configs keyed by layer shape, nnz, and space."""

    def __init__(self, path):
        self.path = path
        self.entries: dict[tuple, str] = {}
        try:
            with open(path) as fh:
                for line in fh:
                    parts = line.split()
                    if len(parts) == 5:
                        rows, cols, nnz, space_key, short = parts
                        self.entries[(int(rows), int(cols), int(nnz), space_key)] = short
        except FileNotFoundError:
            pass

    @staticmethod
    def space_key(space: TuneSpace) -> str:
        import hashlib

        raw = repr((space.tile_rows, space.tile_cols, space.unroll, space.threads))
        return hashlib.blake2b(raw.encode(), digest_size=6).hexdigest()

    def get(self, rows: int, cols: int, nnz: int, space: TuneSpace) -> KernelConfig | None:
        short = self.entries.get((rows, cols, nnz, self.space_key(space)))
        return KernelConfig.from_short(short) if short else None

    def put(self, rows: int, cols: int, nnz: int, space: TuneSpace, cfg: KernelConfig):
        self.entries[(rows, cols, nnz, self.space_key(space))] = cfg.short()

    def save(self):
        lines = [
            f"{rows} {cols} {nnz} {key} {short}\n"
            for (rows, cols, nnz, key), short in sorted(self.entries.items())
        ]
        with open(self.path, "w") as fh:
            fh.writelines(lines)
