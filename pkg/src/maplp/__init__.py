"""MAP inference on discrete factor graphs via LP-relaxation duals.

The package provides the model (:class:`FactorGraph`), six relaxation
builders, marginal polytope diagrams with polytope-preserving constraint
reduction, an exact equivalence oracle, a dual coordinate-descent solver in
two equivalent modes, and stealth cluster pursuit for tightening relaxations
that leave a dual/primal gap.
"""

from .diagram import (
    DiagramError,
    EdgeEquivalenceClasses,
    PolytopeDiagram,
    diagram_from_relaxation,
    dump,
    equivalent_edge_classes,
    redundant_nodes,
    reduce_edges,
    relaxation_from_diagram,
    remove_node,
)
from .engine import (
    BeliefState,
    CoverageError,
    DualTrace,
    MemoryReport,
    MessageState,
    RunResult,
    SolverParams,
    TraceRecord,
    decode,
    dual_decrease,
    dual_objective,
    init_beliefs,
    init_messages,
    memory_report,
    run,
    sweep_scalar_updates,
    update_cluster_beliefs,
    update_cluster_messages,
)
from .factor_graph import (
    Assignment,
    Cluster,
    EnumerationCapError,
    FactorGraph,
    InvalidAssignmentError,
    PotentialTable,
    XorShift64Star,
    as_cluster,
    energy,
    random_grid,
    restrict,
    table_cells,
    table_shape,
    validate,
)
from .io import (
    ParseError,
    emit_trace,
    load_model,
    load_trace,
    merge_traces,
    parse_uai,
    save_model,
)
from .oracle import (
    AffineConstraintSystem,
    MapSolution,
    affine_system_equal,
    affine_system_implies,
    brute_force_map,
    constraint_system,
)
from .pursuit import (
    PursuitResult,
    StealthCandidate,
    pursuit_score,
    run_with_pursuit,
    stealth_candidates,
)
from .relaxations import (
    RelaxationError,
    RelaxationSpec,
    all_subsets_spec,
    covers,
    cycle_spec,
    dd_spec,
    gmplp_spec,
    intersection_closure,
    max_intersection_spec,
    pi_system_spec,
    powerset_spec,
)

__version__ = "0.1.0"

__all__ = [
    "AffineConstraintSystem",
    "Assignment",
    "BeliefState",
    "Cluster",
    "CoverageError",
    "DiagramError",
    "DualTrace",
    "EdgeEquivalenceClasses",
    "EnumerationCapError",
    "FactorGraph",
    "InvalidAssignmentError",
    "MapSolution",
    "MemoryReport",
    "MessageState",
    "ParseError",
    "PolytopeDiagram",
    "PotentialTable",
    "PursuitResult",
    "RelaxationError",
    "RelaxationSpec",
    "RunResult",
    "SolverParams",
    "StealthCandidate",
    "TraceRecord",
    "XorShift64Star",
    "affine_system_equal",
    "affine_system_implies",
    "all_subsets_spec",
    "as_cluster",
    "brute_force_map",
    "constraint_system",
    "covers",
    "cycle_spec",
    "dd_spec",
    "decode",
    "diagram_from_relaxation",
    "dual_decrease",
    "dual_objective",
    "dump",
    "emit_trace",
    "energy",
    "equivalent_edge_classes",
    "gmplp_spec",
    "init_beliefs",
    "init_messages",
    "intersection_closure",
    "load_model",
    "load_trace",
    "max_intersection_spec",
    "memory_report",
    "merge_traces",
    "parse_uai",
    "pi_system_spec",
    "powerset_spec",
    "pursuit_score",
    "random_grid",
    "redundant_nodes",
    "reduce_edges",
    "relaxation_from_diagram",
    "remove_node",
    "restrict",
    "run",
    "run_with_pursuit",
    "save_model",
    "stealth_candidates",
    "sweep_scalar_updates",
    "table_cells",
    "table_shape",
    "update_cluster_beliefs",
    "update_cluster_messages",
    "validate",
]
