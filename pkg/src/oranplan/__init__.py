"""Minimum-cost DU capacity planning for 3-layer O-RAN under demand uncertainty."""

from .benders import (
    BendersCut,
    BendersOptions,
    BendersResult,
    build_master,
    build_subproblem,
    feasibility_cut,
    optimality_cut,
    run_benders,
    trace_to_csv,
)
from .dominance import DominanceRelation, filter_cuts, precompute_dominance
from .extensive import (
    InfeasibleInstanceError,
    SolverLimitError,
    VariableCatalog,
    build_extensive,
    solve_extensive,
    solve_fix_du,
)
from .model import (
    Assignment,
    PlanSolution,
    ProblemInstance,
    ProblemParams,
    Scenario,
    Topology,
    cu_load_contribution,
    du_load_contribution,
    evaluate_assignment,
    service_latency,
    total_cost,
    validate_instance,
)
from .studio import (
    GeneratorConfig,
    ServiceClass,
    generate_instance,
    generate_topology,
    read_instance,
    restrict_users,
    sample_scenarios,
    write_instance,
)

__version__ = "0.1.0"
