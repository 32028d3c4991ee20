"""Structural identifiability analysis for linear dynamic networks.

Decide from the graph of a network model set whether selected modules are
generically identifiable, allocate excitation signals when they are not,
verify every structural verdict against numeric rank oracles, and
reconstruct identifiable modules indirectly from measured signals.
"""

from .graph import (
    DiGraph,
    DisconnectingSet,
    PathFamily,
    brute_force_cut,
    is_disconnecting_set,
    max_vdp,
    min_disconnecting_set,
    normalize_paths,
    partition_SDP,
)
from .ident import (
    IdentVerdict,
    build_F,
    check_algebraic_conditions,
    check_assumption5,
    check_disconnecting_conditions,
    check_path_conditions,
    generic_rank_T,
    parallel_path_loop_equivalence,
    structural_rank,
)
from .indirect import (
    ExcitationSpec,
    IndirectSetup,
    NoRonlySetupError,
    TimeSeries,
    estimate_frequency_response,
    reconstruct_modules,
    select_indirect_setup,
    simulate,
)
from .model import (
    AssumptionFlags,
    EdgeEntry,
    Known,
    NetworkModelSet,
    Parametrized,
    Query,
    SignalKind,
    SignalRef,
    compute_Wj,
    compute_Xj,
    derive_graph,
    parse_model,
    serialize_model,
    to_dot,
    validate_assumptions,
)
from .oracle import (
    NumericModel,
    RationalTF,
    factorization_K,
    instantiate_random,
    numeric_rank,
    transfer_matrix_T,
    verify_generic_rank,
)
from .synth import AllocationPlan, allocate, allocate_direct, allocation_bound, largest_admissible_sources

__version__ = "0.1.0"
