"""Spectral toolkit for 1-D Schrodinger dynamics driven by moving point potentials."""

from diracdrive.spectral import (
    BasisSpec,
    SpectralState,
    evaluate,
    mode_energies,
    state_from_modes,
    subinterval_energy,
)
from diracdrive.hamiltonian import (
    DiracConfig,
    EigenDecomposition,
    RankStructuredHamiltonian,
    assemble,
    eigendecompose,
    split_limit_eigenvalues,
)
from diracdrive.schedule import ControlSchedule, ScheduleSegment, eta_ramp, validate
from diracdrive.integrator import TimeGrid, TrajectoryRecord, convergence_study, evolve, step_midpoint
from diracdrive.planner import PermutationPlan, PlannerParams, plan_permutation

__version__ = "0.1.0"

__all__ = [
    "BasisSpec",
    "SpectralState",
    "evaluate",
    "mode_energies",
    "subinterval_energy",
    "state_from_modes",
    "DiracConfig",
    "RankStructuredHamiltonian",
    "EigenDecomposition",
    "assemble",
    "eigendecompose",
    "split_limit_eigenvalues",
    "ControlSchedule",
    "ScheduleSegment",
    "eta_ramp",
    "validate",
    "TimeGrid",
    "TrajectoryRecord",
    "step_midpoint",
    "evolve",
    "convergence_study",
    "PlannerParams",
    "PermutationPlan",
    "plan_permutation",
]
