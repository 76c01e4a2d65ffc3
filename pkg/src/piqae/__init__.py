"""Fine-grained Krylov subspace (FGKS) ground-state estimation on Ising models.

A variational HVA state is expanded over Pauli-string images ``P_k|psi>``
drawn from powers of the Hamiltonian; the projected generalized eigenvalue
problem is built from measurable Pauli expectation values and solved with
overlap-matrix truncation, optionally under shot noise and gate noise with
zero-noise extrapolation.
"""

__version__ = "0.1.0"

from .pauli import PauliOperator, PauliString, commutes, multiply, op_multiply, qubitwise_commutes
from .lattice import CouplingGraph, ModelSpec, build_graph, build_hamiltonian, chain, guadalupe, quito, square
from .statevector import HvaParams, expval, fidelity, ground_state_ed, pauli_expvals, prepare_hva
from .fgks import (
    CpSet,
    ExpvalTable,
    FgksBasis,
    SubspaceMatrices,
    assemble_matrices,
    build_cp_set,
    build_pauli_sets,
    exact_expvals,
    ks_reference,
)
from .gevp import (
    GevpResult,
    OverlapSpectrum,
    TruncationSweep,
    overlap_spectrum,
    rayleigh_energy,
    solve_truncated,
    strace_select,
    threshold_select,
    zne_extrapolate,
)
from .grouping import MeasurementGroup, group_strings, tfim_group_bound
from .sampling import Counts, measure_grouped, measure_per_string, resample_table, sample_group
from .noise import NoiseSpec, noisy_expvals, noisy_prepare, reweighted_expvals
from .vqe import VqeResult, vqe_optimize
from .config import ConfigError, ExperimentConfig, config_from_dict, load_config
