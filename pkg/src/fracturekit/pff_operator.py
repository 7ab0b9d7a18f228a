"""Nonlinear residual and matrix-free Jacobian action for the coupled system.

The monolithic unknown vector is (u_x | u_y | phi).  The Jacobian has a
block lower-triangular structure: the phase-field extrapolation removes the
u-phi coupling, while the phi-u coupling stays.  Constrained dofs (Dirichlet
rows and active-set phi rows) are treated as identity rows and columns both
in the matrix-free application and in the assembled sparse oracle.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .material_model import MaterialParams
from .mesh_hierarchy import MeshHierarchy
from .tensor_basis import LANE_WIDTHS, ShapeData, shape_data


class StaleCacheError(RuntimeError):
    """Raised when the Jacobian is applied at an outdated linearization."""


class AssemblyMemoryError(MemoryError):
    """Raised when the sparse oracle does not fit into memory."""


class BlockVector:
    """Flat monolithic coefficient vector with (u_x | u_y | phi) views."""

    __slots__ = ("data", "n_scalar")

    def __init__(self, data: np.ndarray, n_scalar: int):
        data = np.asarray(data, dtype=float)
        if data.shape != (3 * n_scalar,):
            raise ValueError("block vector must have 3 * n_scalar entries")
        self.data = data
        self.n_scalar = n_scalar

    @classmethod
    def zeros(cls, n_scalar: int) -> "BlockVector":
        return cls(np.zeros(3 * n_scalar), n_scalar)

    @property
    def u_x(self) -> np.ndarray:
        return self.data[: self.n_scalar]

    @property
    def u_y(self) -> np.ndarray:
        return self.data[self.n_scalar : 2 * self.n_scalar]

    @property
    def phi(self) -> np.ndarray:
        return self.data[2 * self.n_scalar :]

    def copy(self) -> "BlockVector":
        return BlockVector(self.data.copy(), self.n_scalar)


class LinearizationState:
    """Frozen evaluation point (u, phi, phi_tilde, active set) on one level.

    Per-quadrature-point data (strain components, g(phi_tilde), g'(phi),
    tensile energy) is cached on demand and versioned; Jacobian applications
    at a stale cache raise.  With ``cache_tensors`` the full effective
    stress tangent per point is prebuilt, otherwise the eigensystem work is
    redone in every application.
    """

    def __init__(self, hierarchy: MeshHierarchy, level: int, params: MaterialParams,
                 split: str = "miehe", lane_width: int = 8, cache_tensors: bool = False):
        if split not in ("none", "miehe"):
            raise ValueError("split must be 'none' or 'miehe'")
        if lane_width not in LANE_WIDTHS:
            raise ValueError(f"lane_width must be one of {LANE_WIDTHS}")
        self.hierarchy = hierarchy
        self.level = level
        self.params = params
        self.split = split
        self.lane_width = lane_width
        self.cache_tensors = cache_tensors
        self.dof_map = hierarchy.dof_map(level)
        self.mesh = hierarchy.level(level)
        self.shape: ShapeData = shape_data(hierarchy.degree)

        n = self.dof_map.n_scalar
        self.U = np.zeros(3 * n)
        self.phi[:] = 1.0
        self.phi_tilde = np.ones(n)
        self.phi_old = np.ones(n)
        self.active = np.zeros(n, dtype=bool)
        self.dirichlet_nodes = np.zeros(n, dtype=bool)

        self._version = 0
        self._cache_version = -1
        self._cache = None
        self._zeros_n = np.zeros(n)

    # -- field views -------------------------------------------------------

    @property
    def n_scalar(self) -> int:
        return self.dof_map.n_scalar

    @property
    def u_x(self) -> np.ndarray:
        return self.U[: self.n_scalar]

    @property
    def u_y(self) -> np.ndarray:
        return self.U[self.n_scalar : 2 * self.n_scalar]

    @property
    def phi(self) -> np.ndarray:
        return self.U[2 * self.n_scalar :]

    @property
    def version(self) -> int:
        return self._version

    # -- mutation (bumps the version) ---------------------------------------

    def set_solution(self, U: np.ndarray):
        self.U[:] = U
        self._version += 1

    def set_phi_tilde(self, phi_tilde: np.ndarray):
        self.phi_tilde[:] = phi_tilde
        self._version += 1

    def set_phi_old(self, phi_old: np.ndarray):
        self.phi_old[:] = phi_old
        self._version += 1

    def set_active(self, active: np.ndarray):
        self.active[:] = active
        self._version += 1

    def set_dirichlet_nodes(self, nodes: np.ndarray):
        self.dirichlet_nodes[:] = False
        self.dirichlet_nodes[nodes] = True
        self._version += 1

    def constrained_mask(self) -> np.ndarray:
        """Identity-treated dofs: Dirichlet u rows plus active phi rows."""
        return np.concatenate([self.dirichlet_nodes, self.dirichlet_nodes, self.active])

    # -- cache ---------------------------------------------------------------

    def refresh_cache(self):
        n_cells = self.mesh.n_cells
        q = self.shape.q
        if self._cache is None:
            c = {
                "e11": np.empty((n_cells, q, q)),
                "e22": np.empty((n_cells, q, q)),
                "e12": np.empty((n_cells, q, q)),
                "gt": np.empty((n_cells, q, q)),
                "dg": np.empty((n_cells, q, q)),
                "esp": np.empty((n_cells, q, q)),
                "pc": np.empty((n_cells, q, q)),
            }
            if self.cache_tensors:
                c["C"] = np.empty((n_cells, q, q, 3, 3))
                c["gs"] = np.empty((n_cells, q, q, 3))
            else:
                c["C"] = np.empty((1, 1, 1, 3, 3))
                c["gs"] = np.empty((1, 1, 1, 3))
            self._cache = c
        c = self._cache
        p = self.params
        _kernels.cache_kernel(
            self.dof_map.conn, self.mesh.h, self.shape.values, self.shape.derivatives,
            self.shape.quad_weights, self.u_x, self.u_y, self.phi, self.phi_tilde,
            p.lame_lambda, p.mu, p.g_c, p.eps, p.kappa,
            self.split == "miehe", self.cache_tensors,
            c["e11"], c["e22"], c["e12"], c["gt"], c["dg"], c["esp"], c["pc"],
            c["C"], c["gs"],
        )
        self._cache_version = self._version

    def cache(self):
        if self._cache is None or self._cache_version != self._version:
            raise StaleCacheError(
                f"quadrature cache at version {self._cache_version}, state at {self._version}"
            )
        return self._cache

    def cache_bytes(self) -> int:
        if self._cache is None:
            return 0
        return sum(a.nbytes for a in self._cache.values())


@dataclass
class SparseOracle:
    """Assembled CSR Jacobian used for verification and reference smoothing."""

    matrix: sp.csr_matrix
    state_version: int
    assembly_seconds: float


def extrapolate_phase(phi_nm1, phi_nm2, t_n: float, t_nm1: float, t_nm2: float):
    """Linear extrapolation of the phase field from two previous steps."""
    if not (t_nm2 < t_nm1 < t_n):
        raise ValueError("time points must be strictly increasing")
    phi_nm1 = np.asarray(phi_nm1, dtype=float)
    phi_nm2 = np.asarray(phi_nm2, dtype=float)
    factor = (t_n - t_nm1) / (t_nm1 - t_nm2)
    return phi_nm1 + factor * (phi_nm1 - phi_nm2)


def residual(state: LinearizationState, mask_dirichlet: bool = True,
             mask_active: bool = False) -> np.ndarray:
    """Nonlinear residual (the energy gradient) assembled by the cell loop.

    With ``mask_dirichlet`` the Dirichlet displacement rows are zeroed; the
    raw rows carry the boundary reactions.  ``mask_active`` additionally
    zeroes active-set phi rows.
    """
    p = state.params
    n = state.n_scalar
    out = np.zeros(3 * n)
    _kernels.residual_kernel(
        state.dof_map.conn, state.mesh.h, state.shape.values, state.shape.derivatives,
        state.shape.quad_weights, state.u_x, state.u_y, state.phi, state.phi_tilde,
        p.lame_lambda, p.mu, p.g_c, p.eps, p.kappa,
        state.split == "miehe", state.lane_width,
        out[:n], out[n : 2 * n], out[2 * n :],
    )
    if mask_dirichlet:
        out[:n][state.dirichlet_nodes] = 0.0
        out[n : 2 * n][state.dirichlet_nodes] = 0.0
    if mask_active:
        out[2 * n :][state.active] = 0.0
    return out


def _run_jacobian(state: LinearizationState, dux, duy, dph,
                  do_uu: bool, do_pp: bool, do_coup: bool):
    c = state.cache()
    p = state.params
    n = state.n_scalar
    out = np.zeros(3 * n)
    _kernels.jacobian_kernel(
        state.dof_map.conn, state.mesh.h, state.shape.values, state.shape.derivatives,
        state.shape.quad_weights, dux, duy, dph,
        c["e11"], c["e22"], c["e12"], c["gt"], c["dg"], c["pc"], c["C"], c["gs"],
        p.lame_lambda, p.mu, p.g_c, p.eps,
        state.split == "miehe", state.cache_tensors, do_uu, do_pp, do_coup,
        state.lane_width,
        out[:n], out[n : 2 * n], out[2 * n :],
    )
    return out


def apply_jacobian(state: LinearizationState, dU: np.ndarray) -> np.ndarray:
    """Matrix-free Jacobian action with identity rows/columns on constraints."""
    dU = np.asarray(dU, dtype=float)
    n = state.n_scalar
    mask = state.constrained_mask()
    z = np.where(mask, 0.0, dU)
    out = _run_jacobian(state, z[:n], z[n : 2 * n], z[2 * n :], True, True, True)
    out[mask] = dU[mask]
    return out


def apply_block_uu(state: LinearizationState, du: np.ndarray) -> np.ndarray:
    """Action of the displacement block on a (2n,) vector."""
    n = state.n_scalar
    du = np.asarray(du, dtype=float)
    zx = np.where(state.dirichlet_nodes, 0.0, du[:n])
    zy = np.where(state.dirichlet_nodes, 0.0, du[n:])
    out = _run_jacobian(state, zx, zy, state._zeros_n, True, False, False)[: 2 * n]
    out[:n][state.dirichlet_nodes] = du[:n][state.dirichlet_nodes]
    out[n:][state.dirichlet_nodes] = du[n:][state.dirichlet_nodes]
    return out


def apply_block_phiphi(state: LinearizationState, dphi: np.ndarray) -> np.ndarray:
    """Action of the phase-field block on an (n,) vector."""
    dphi = np.asarray(dphi, dtype=float)
    z = np.where(state.active, 0.0, dphi)
    out = _run_jacobian(state, state._zeros_n, state._zeros_n, z, False, True, False)[2 * state.n_scalar :]
    out[state.active] = dphi[state.active]
    return out


def apply_phi_row(state: LinearizationState, dU: np.ndarray) -> np.ndarray:
    """phi-row of the Jacobian (coupling plus phi block) on a full vector."""
    dU = np.asarray(dU, dtype=float)
    n = state.n_scalar
    mask = state.constrained_mask()
    z = np.where(mask, 0.0, dU)
    out = _run_jacobian(state, z[:n], z[n : 2 * n], z[2 * n :], False, True, True)[2 * n :]
    out[state.active] = dU[2 * n :][state.active]
    return out


def block_diagonal(state: LinearizationState, block: str) -> np.ndarray:
    """Matrix-free diagonal of the uu or phiphi block; constrained rows get 1."""
    c = state.cache()
    p = state.params
    n = state.n_scalar
    dx = np.zeros(n)
    dy = np.zeros(n)
    dp = np.zeros(n)
    _kernels.diagonal_kernel(
        state.dof_map.conn, state.mesh.h, state.shape.values, state.shape.derivatives,
        state.shape.quad_weights,
        c["e11"], c["e22"], c["e12"], c["gt"], c["pc"],
        p.lame_lambda, p.mu, p.g_c, p.eps, state.split == "miehe",
        dx, dy, dp,
    )
    if block == "uu":
        dx[state.dirichlet_nodes] = 1.0
        dy[state.dirichlet_nodes] = 1.0
        return np.concatenate([dx, dy])
    if block == "phiphi":
        dp[state.active] = 1.0
        return dp
    raise ValueError("block must be 'uu' or 'phiphi'")


def cell_matrices(state: LinearizationState) -> np.ndarray:
    """Dense local Jacobian matrices G_k for every cell (oracle path)."""
    c = state.cache()
    p = state.params
    nloc = state.dof_map.n_local
    gk = np.zeros((state.mesh.n_cells, 3 * nloc, 3 * nloc))
    _kernels.cell_matrices_kernel(
        state.dof_map.conn, state.mesh.h, state.shape.values, state.shape.derivatives,
        state.shape.quad_weights,
        c["e11"], c["e22"], c["e12"], c["gt"], c["dg"], c["pc"],
        p.lame_lambda, p.mu, p.g_c, p.eps, state.split == "miehe",
        gk,
    )
    return gk


def assemble_oracle(state: LinearizationState) -> SparseOracle:
    """Scatter the cellwise dense matrices into CSR with identity constraints.

    Memory exhaustion raises :class:`AssemblyMemoryError`; large degree-level
    combinations legitimately exceed what a workstation holds.
    """
    t0 = time.perf_counter()
    dm = state.dof_map
    n = dm.n_scalar
    nloc = dm.n_local
    try:
        gk = cell_matrices(state)
        full = np.concatenate(
            [comp * n + dm.conn for comp in range(3)], axis=1
        )  # (n_cells, 3*nloc)
        rows = np.repeat(full, 3 * nloc, axis=1).ravel()
        cols = np.tile(full, (1, 3 * nloc)).ravel()
        vals = gk.ravel()  # (cell, row, col) with col fastest, matching rows/cols
        mask = state.constrained_mask()
        keep = ~(mask[rows] | mask[cols])
        rows, cols, vals = rows[keep], cols[keep], vals[keep]
        cdofs = np.flatnonzero(mask)
        rows = np.concatenate([rows, cdofs])
        cols = np.concatenate([cols, cdofs])
        vals = np.concatenate([vals, np.ones(cdofs.size)])
        mat = sp.coo_matrix((vals, (rows, cols)), shape=(3 * n, 3 * n)).tocsr()
    except MemoryError as exc:
        raise AssemblyMemoryError(
            f"sparse oracle at level {state.level}, degree {dm.degree} does not fit in memory"
        ) from exc
    return SparseOracle(matrix=mat, state_version=state.version,
                        assembly_seconds=time.perf_counter() - t0)


def restrict_state_to_level(state: LinearizationState, target: int) -> LinearizationState:
    """Nodal injection of the linearization point onto a coarser level."""
    if not 0 <= target <= state.level:
        raise ValueError("target level out of range")
    if target == state.level:
        return state
    inj = None
    for fine in range(state.level, target, -1):
        step = state.hierarchy.injection(fine)
        inj = step if inj is None else inj[step]
    coarse = LinearizationState(
        state.hierarchy, target, state.params, split=state.split,
        lane_width=state.lane_width, cache_tensors=state.cache_tensors,
    )
    U = np.concatenate([state.u_x[inj], state.u_y[inj], state.phi[inj]])
    coarse.set_solution(U)
    coarse.set_phi_tilde(state.phi_tilde[inj])
    coarse.set_phi_old(state.phi_old[inj])
    coarse.set_active(state.active[inj])
    coarse.dirichlet_nodes[:] = state.dirichlet_nodes[inj]
    return coarse
