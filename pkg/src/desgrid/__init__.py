"""Supervisory control of discrete-event models coupled to a DC grid simulator.

The package builds finite automata for grid components, synthesizes per-node
supervisors whose conjunction vetoes unsafe shedding actions, and couples
them to a quasi-static cascading-failure engine with LP-based load shedding.
"""
from .automata import (
    Automaton,
    AutomatonFormatError,
    ComponentKind,
    EventTable,
    build_component,
    compose_all,
    language_upto,
    parallel_compose,
    project,
    project_automaton,
    read_automaton,
)
from .cascade import CascadeError, CascadeTrace, ScenarioConfig, TraceEvent, run_cascade
from .experiments import (
    AggregateResults,
    ExperimentError,
    MonteCarloConfig,
    compute_ccd,
    export_results,
    merge_results,
    run_monte_carlo,
    sample_scenarios,
)
from .grid import (
    FlowSolution,
    GridCase,
    GridModelError,
    PTDFMatrix,
    balance_case,
    bundled_case_names,
    compute_ptdf,
    dc_power_flow,
    find_islands,
    load_case,
    parse_case,
    rebalance_island,
    repair_ratings,
)
from .modular import (
    ConjunctionController,
    LazyNodeSupervisor,
    ModularError,
    ModularSupervisor,
    build_node_supervisors,
    build_specification,
    build_subsystem,
    check_conditional_decomposability,
    check_forced_consistency,
    closed_loop_language,
    demo_two_node_case,
    save_controller_bundle,
    synthesize_modular,
    verify_safety,
)
from .shedding import (
    ShedError,
    ShedLP,
    ShedSolution,
    apply_control,
    central_emergency_control,
    formulate_local_lp,
    neighborhood_branches,
    select_critical_line,
    solve_lp,
)
from .supervisory import (
    ControlPattern,
    SpecificationAutomaton,
    SupervisorRealization,
    build_specification_from_states,
    check_f_controllable,
    control_policy,
    is_admissible,
    modified_attributes,
    supremal_controllable,
    supremal_f_controllable,
)

__version__ = "0.1.0"

__all__ = [
    "Automaton",
    "ComponentKind",
    "AutomatonFormatError",
    "EventTable",
    "build_component",
    "compose_all",
    "language_upto",
    "parallel_compose",
    "project",
    "project_automaton",
    "read_automaton",
    "CascadeError",
    "CascadeTrace",
    "ScenarioConfig",
    "TraceEvent",
    "run_cascade",
    "AggregateResults",
    "ExperimentError",
    "MonteCarloConfig",
    "compute_ccd",
    "export_results",
    "merge_results",
    "run_monte_carlo",
    "sample_scenarios",
    "FlowSolution",
    "GridCase",
    "GridModelError",
    "PTDFMatrix",
    "balance_case",
    "bundled_case_names",
    "compute_ptdf",
    "dc_power_flow",
    "find_islands",
    "load_case",
    "parse_case",
    "rebalance_island",
    "repair_ratings",
    "ConjunctionController",
    "LazyNodeSupervisor",
    "ModularError",
    "ModularSupervisor",
    "build_node_supervisors",
    "build_specification",
    "build_subsystem",
    "check_conditional_decomposability",
    "check_forced_consistency",
    "closed_loop_language",
    "demo_two_node_case",
    "save_controller_bundle",
    "synthesize_modular",
    "verify_safety",
    "ShedError",
    "ShedLP",
    "ShedSolution",
    "apply_control",
    "central_emergency_control",
    "formulate_local_lp",
    "neighborhood_branches",
    "select_critical_line",
    "solve_lp",
    "ControlPattern",
    "SpecificationAutomaton",
    "SupervisorRealization",
    "build_specification_from_states",
    "check_f_controllable",
    "control_policy",
    "is_admissible",
    "modified_attributes",
    "supremal_controllable",
    "supremal_f_controllable",
    "__version__",
]
