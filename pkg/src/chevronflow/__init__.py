"""Gradient-flow simulator for smectic-C chevron cells.

A one-dimensional director field coupled to a complex order parameter is
evolved by implicit time stepping (each step minimizes movement-plus-energy),
with built-in verification of the dissipation and boundedness guarantees of
the scheme.
"""

from .diagnostics import DiagnosticsRecord, diagnose, ratio_sweep, rho_cauchy_check
from .energy import EnergyBreakdown, energy_breakdown, total_energy
from .fields import (
    BoundaryPins,
    DirectorField,
    Grid,
    OrderParameter,
    State,
    d1,
    d2,
    d3,
    free_dof_mask,
    make_grid,
)
from .flow import (
    DissipationLedger,
    FlowResult,
    StepStats,
    check_ledger_csv,
    inner_minimize,
    minimize_energy,
    rothe_step,
    run_flow,
)
from .initialdata import (
    InitialProfile,
    build_initial_state,
    initial_energy_sweep,
    loglog_slope,
)
from .params import (
    FlowConfig,
    PhysicalParams,
    ValidatedParams,
    default_preset,
    mismatch_from_thickness,
    validate,
    validate_flow_config,
)
from .variation import GradientPair, el_residual, gradient, project_tangent

__version__ = "0.1.0"

__all__ = [
    "BoundaryPins",
    "DiagnosticsRecord",
    "DirectorField",
    "DissipationLedger",
    "EnergyBreakdown",
    "FlowConfig",
    "FlowResult",
    "GradientPair",
    "Grid",
    "InitialProfile",
    "OrderParameter",
    "PhysicalParams",
    "State",
    "StepStats",
    "ValidatedParams",
    "build_initial_state",
    "check_ledger_csv",
    "d1",
    "d2",
    "d3",
    "default_preset",
    "diagnose",
    "el_residual",
    "energy_breakdown",
    "free_dof_mask",
    "gradient",
    "initial_energy_sweep",
    "inner_minimize",
    "loglog_slope",
    "make_grid",
    "minimize_energy",
    "mismatch_from_thickness",
    "project_tangent",
    "ratio_sweep",
    "rho_cauchy_check",
    "rothe_step",
    "run_flow",
    "total_energy",
    "validate",
    "validate_flow_config",
]
