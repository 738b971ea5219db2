"""Quantum and classical photon-correlation simulator for coupled SHG cavities."""

from .fock import FockSpace, build_space, annihilation, creation, number_operator, identity
from .model import (DimensionOverflowError, ModelParams, hamiltonian, jump_operators,
                    liouvillian, liouvillian_from_ops)
from .steady import (DensityMatrix, G2Result, SteadyStateError, UndefinedCorrelationError,
                     converged_g2, expectation, g2_equal_time, solve_steady_state)
from .trajectory import (TrajectoryRecord, TrajectoryBlowupError, estimate_g2,
                         estimate_observables, evolve_trajectory)
from .classical import (ClassicalPath, ClassicalState, HopfResult, NonConvergenceError,
                        SyncClass, classical_g2, classify_synchronization, find_fixed_point,
                        hopf_threshold, integrate, jacobian, limit_cycle_initial_state,
                        rhs, scale_params, scale_state)
from .spectrum import ManifoldLeakageError, ManifoldSpec, manifold_eigensystem, undriven_hamiltonian
from .oracles import (g2_cross_quantum_limit, g2_cross_vs_split, g2_single_cavity_quantum,
                      nonmonotonicity_threshold, split_strengthens_correlation)
from .experiments import (SweepResult, SweepSpec, load_result, persist, resolve_point,
                          run_detuning_scan, run_phase_diagram, run_point, run_sweep,
                          run_transition_scan)

__version__ = "0.1.0"
