"""Primal-dual active-set loop for the irreversibility-constrained system.

Per iteration: the active set comes from the complementarity test on the
mass-scaled Newton right-hand side, freshly activated phi dofs are put back
onto the obstacle, and one full Newton step is taken on the inactive dofs
through GMRES preconditioned by the geometric multigrid V-cycle.  The loop
stops once the active set repeats and the inactive residual has dropped by
the relative tolerance.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from . import pff_operator as op
from .krylov import KrylovConfig, gmres_solve
from .mesh_hierarchy import MeshHierarchy
from .multigrid import GmgPreconditioner
from .tensor_basis import shape_data

logger = logging.getLogger(__name__)


class SolverFailure(RuntimeError):
    """A time step could not be solved to tolerance."""


@dataclass
class ActiveSetParams:
    complementarity_c: float = 100.0
    tolerance: float = 1e-8          # relative, on the inactive residual
    max_iterations: int = 50

    def __post_init__(self):
        if self.complementarity_c <= 0:
            raise ValueError("complementarity constant must be positive")


@dataclass
class SolveReport:
    """Counters for one time step of the quasi-static loop."""

    as_iterations: int = 0
    gmres_iterations: list = field(default_factory=list)
    active_counts: list = field(default_factory=list)
    residual_norms: list = field(default_factory=list)
    r0_norm: float = 0.0
    final_residual: float = 0.0
    converged: bool = False

    @property
    def gmres_total(self) -> int:
        return int(sum(self.gmres_iterations))


def lumped_mass_diagonal(hierarchy: MeshHierarchy, level: int) -> np.ndarray:
    """Row sums of the phi mass matrix (one value per scalar node)."""
    dm = hierarchy.dof_map(level)
    mesh = hierarchy.level(level)
    shape = shape_data(hierarchy.degree)
    out = np.zeros(dm.n_scalar)
    _kernels.mass_rowsum_kernel(dm.conn, mesh.h, shape.values, shape.quad_weights, out)
    if np.any(out <= 0.0):
        raise RuntimeError("non-positive lumped mass entry; scaling would break")
    return out


def determine_active_set(newton_rhs: np.ndarray, U: np.ndarray, phi_old: np.ndarray,
                         m_diag: np.ndarray, c: float) -> np.ndarray:
    """Constrained phi dofs: (M^-1 b)_i + c (phi - phi_old)_i > 0, strict.

    ``newton_rhs`` is the right-hand side of the Newton system (the negative
    energy gradient) without active-set rows zeroed; displacement dofs are
    never activated.
    """
    n = m_diag.size
    indicator = newton_rhs[2 * n :] / m_diag + c * (U[2 * n :] - phi_old)
    return indicator > 0.0


def converged(active: np.ndarray, active_prev, r_norm: float, r0_norm: float,
              tolerance: float) -> bool:
    """Set equality plus relative residual drop; no previous set means False."""
    if active_prev is None:
        return False
    return bool(np.array_equal(active, active_prev) and r_norm <= tolerance * r0_norm)


class ActiveSetSolver:
    def __init__(self, gmg: GmgPreconditioner, krylov: KrylovConfig,
                 params: ActiveSetParams, m_diag: np.ndarray):
        self.gmg = gmg
        self.krylov = krylov
        self.params = params
        self.m_diag = m_diag

    def solve_step(self, state: op.LinearizationState) -> SolveReport:
        """Run the active-set loop; phi_old, phi_tilde and the Dirichlet
        values must already be installed on the state."""
        report = SolveReport()
        n = state.n_scalar
        active_prev = None
        for k in range(self.params.max_iterations):
            rhs = -op.residual(state)
            active = determine_active_set(
                rhs, state.U, state.phi_old, self.m_diag, self.params.complementarity_c
            )
            # newly activated dofs go back onto the obstacle before linearizing
            moved = active & (state.phi != state.phi_old)
            if np.any(moved):
                U = state.U.copy()
                U[2 * n :][moved] = state.phi_old[moved]
                state.set_solution(U)
                rhs = -op.residual(state)
            state.set_active(active)
            rhs[2 * n :][active] = 0.0
            r_norm = float(np.linalg.norm(rhs))
            if k == 0:
                report.r0_norm = max(r_norm, 1e-300)
            report.active_counts.append(int(active.sum()))
            report.residual_norms.append(r_norm)
            if converged(active, active_prev, r_norm, report.r0_norm, self.params.tolerance):
                report.converged = True
                break
            state.refresh_cache()
            reuse = active_prev is not None and np.array_equal(active, active_prev)
            self.gmg.setup(state, reuse_eigen=reuse)
            result = gmres_solve(
                lambda v: op.apply_jacobian(state, v), rhs, self.krylov,
                preconditioner=self.gmg.apply,
            )
            if not result.converged:
                retry_cfg = KrylovConfig(
                    relative_tolerance=self.krylov.relative_tolerance,
                    max_iterations=2 * self.krylov.max_iterations,
                    restart=self.krylov.restart,
                )
                result = gmres_solve(
                    lambda v: op.apply_jacobian(state, v), rhs, retry_cfg,
                    preconditioner=self.gmg.apply, x0=result.solution,
                )
                if not result.converged:
                    raise SolverFailure(
                        f"linear solve stagnated at active-set iteration {k}"
                    )
            state.set_solution(state.U + result.solution)
            report.gmres_iterations.append(result.iterations)
            report.as_iterations = k + 1
            logger.debug(
                "active-set it %d: |A|=%d, gmres %d, |R~|=%.3e",
                k, int(active.sum()), result.iterations, r_norm,
            )
            active_prev = active
        else:
            raise SolverFailure(
                f"active-set loop did not converge within {self.params.max_iterations} iterations"
            )
        report.final_residual = report.residual_norms[-1]
        return report
