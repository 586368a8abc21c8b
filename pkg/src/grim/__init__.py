"""grim: block-based column-row sparse DNN inference toolkit.

Pipeline: prune weights into block column-row (BCR) sparsity with ADMM,
reorder rows by sparsity pattern, store them in the compact BCRC format,
and execute FC/CONV kernels with a tuned sparse executor. A small model
DSL plus a CLI wire the pieces together.
"""

from .bcrc import (
    BcrcMatrix,
    CsrMatrix,
    decode_bcrc,
    decode_csr,
    encode_bcrc,
    encode_csr,
    extra_storage_bytes,
    load_bcrc,
    save_bcrc,
)
from .dense import (
    ConvSpec,
    GruWeights,
    conv2d_direct,
    dense_gemm,
    dense_matvec,
    gru_cell,
    im2col,
    im2col_skipping,
)
from .executor import (
    DEFAULT_CONFIG,
    KernelConfig,
    LoadStats,
    backend_name,
    count_loads,
    sparse_gemm,
    sparse_gemv,
)
from .ir import Graph, LayerIr, OpKind, graph_to_dsl, parse_dsl, run_graph
from .pruning import (
    AdmmSchedule,
    BcrMask,
    BlockPartition,
    PruneState,
    SparsityConstraint,
    admm_u_step,
    admm_w_step,
    admm_z_step,
    project_bcr,
    prune_network,
    sparsity_accounting,
)
from .reorder import ReorderPlan, apply_reorder, plan_reorder, unreorder_output
from .tuner import (
    GaParams,
    HostLatencySource,
    LatencySource,
    ModelLatencySource,
    TuneSpace,
    find_block_size,
    ga_tune,
    synthesize_layer,
    synthesize_matrix,
)

__version__ = "0.1.0"
