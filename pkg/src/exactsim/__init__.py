"""Single-source SimRank with sampled diagonal correction."""
from .core import QueryOptions, SingleSourceResult, backward_accumulate, iterations_for, single_source
from .diag import (
    AllocationStrategy,
    DiagEstimate,
    DiagMethod,
    ProfileCache,
    allocate_samples,
    estimate_all,
    estimate_basic,
    estimate_optimized,
    local_Z_tables,
    total_sample_count,
)
from .errors import BudgetExceededError, ExactSimError, GraphFormatError, RefusalError
from .graph import Graph, apply_P, apply_P_transpose, load_binary, load_edge_list, load_graph, save_binary
from .ppr import HopTable, SparseVector, compute_hop_table
from .walks import RandomSource

__version__ = "0.1.0"
