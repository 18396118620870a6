"""Light-cone bounds and protocols for interacting bosons on lattices, checked numerically."""

from .bounds import (
    BoundReport,
    compute_constants,
    low_density_certificate,
    lr_error,
    phase_observable,
    schuch_check,
    transport_check,
)
from .errors import (
    BosonlightError,
    ConfigError,
    InvalidArgument,
    NumericalFailure,
    ResourceLimitError,
    Unsupported,
)
from .evolve import EvolutionConfig, SpectralPropagator, evolve
from .fock import FockBasis, SparseOperator, basis_state, build_basis, mott_state, random_state
from .hamiltonian import HamiltonianSpec, System, assemble, bose_hubbard_spec, subset_hamiltonian
from .hhkl import HHKLConfig, gate_count, hhkl_error_scan, hhkl_sequence, simulate_hhkl
from .lattice import LatticeGraph, ball, boundary, build_lattice, estimate_gamma
from .protocol import CnotGateSpec, TransferGateSpec, acceleration_demo, cnot_gate, transfer_gate

__all__ = [
    "BoundReport", "compute_constants", "low_density_certificate", "lr_error", "phase_observable",
    "schuch_check", "transport_check",
    "BosonlightError", "ConfigError", "InvalidArgument", "NumericalFailure", "ResourceLimitError",
    "Unsupported",
    "EvolutionConfig", "SpectralPropagator", "evolve",
    "FockBasis", "SparseOperator", "basis_state", "build_basis", "mott_state", "random_state",
    "HamiltonianSpec", "System", "assemble", "bose_hubbard_spec", "subset_hamiltonian",
    "HHKLConfig", "gate_count", "hhkl_error_scan", "hhkl_sequence", "simulate_hhkl",
    "LatticeGraph", "ball", "boundary", "build_lattice", "estimate_gamma",
    "CnotGateSpec", "TransferGateSpec", "acceleration_demo", "cnot_gate", "transfer_gate",
]
