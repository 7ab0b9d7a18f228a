"""Matrix-free higher-order FEM solver for phase-field fracture on the slit square."""

from .active_set_solver import (ActiveSetParams, ActiveSetSolver, SolveReport,
                                SolverFailure, converged, determine_active_set,
                                lumped_mass_diagonal)
from .krylov import GmresResult, KrylovConfig, gmres_solve
from .material_model import (EigenSystem, MaterialParams, d_energy_plus,
                             d_positive_part, d_stress_minus, d_stress_plus,
                             degradation, degradation_d1, degradation_d2,
                             eigensystem, eigenvalue_derivative,
                             eigenvector_derivative, energy_minus, energy_plus,
                             negative_part_tensor, positive_part_tensor,
                             pseudo_inverse, stress_minus, stress_plus)
from .mesh_hierarchy import (ConstraintSet, DofMap, MeshHierarchy, MeshLevel,
                             build_hierarchy)
from .multigrid import (ChebyshevConfig, GmgPreconditioner, TransferOperator,
                        build_prolongation, chebyshev_apply, estimate_lambda_max,
                        estimate_lambda_range)
from .pff_operator import (AssemblyMemoryError, BlockVector, LinearizationState,
                           SparseOracle, StaleCacheError, apply_block_phiphi,
                           apply_block_uu, apply_jacobian, apply_phi_row,
                           assemble_oracle, block_diagonal, cell_matrices,
                           extrapolate_phase, residual, restrict_state_to_level)
from .simulation_driver import (BenchRecord, LoadRecord, MemoryReport,
                                ScenarioConfig, SimulationResult,
                                apply_boundary_values, benchmark_vmult,
                                boundary_program, memory_report, reaction_load,
                                run_simulation)
from .tensor_basis import (ElementBatch, ShapeData, evaluate_on_cell,
                           gather_batch, integrate_on_cell, masked_select,
                           scatter_add_batch, shape_data)

__version__ = "0.1.0"
