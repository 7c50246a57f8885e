"""Relative decoherence with a beable.

Composite pure states are split into branches labelled by the values of
a beable on one subsystem. The package computes the conditional
subsystem states, samples ensembles of individual systems with definite
beable values, verifies the conditional-state theorem statistically and
searches for projector pairs that witness the coherence left between
branches.
"""
from .qstate import (
    TOL_ALG,
    TOL_BRANCH,
    BeableObservable,
    Branch,
    DensityOperator,
    ImpossibleConditionError,
    Ket,
    Projector,
    StateError,
    SubsystemLayout,
    basis_ket,
    branch_decompose,
    coincidence_probability,
    conditional_subsystem_state,
    decohered_mixture,
    event_probability,
    everett_relative_state,
    interference_term,
    luders_conditioning,
    partial_trace,
    tensor_product,
)
from .beable import (
    ConvergenceReport,
    Ensemble,
    IndividualSystem,
    TheoremReport,
    build_ensemble,
    frequency_report,
    sample_beable_value,
    subensemble_average,
    verify_conditional_state_theorem,
)
from .witness import WitnessResult, grid_certificate, optimize_witness
from .scenario import (
    ScenarioReport,
    ScenarioSpec,
    Split,
    convert_environment_to_subject,
    resolve_scenario,
    run_scenario,
    shift_cut,
)

__version__ = "0.1.0"
