"""Quasi-static loading loop for the tension/shear tests plus benchmarks.

The driver owns boundary-condition programs, the time loop around the
active-set solver, reaction-force evaluation, CSV/VTK output, and the
SpMV-vs-MFMV benchmark and memory accounting harnesses.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import io
from . import pff_operator as op
from .active_set_solver import (ActiveSetParams, ActiveSetSolver, SolverFailure,
                                lumped_mass_diagonal)
from .krylov import KrylovConfig
from .material_model import MaterialParams
from .mesh_hierarchy import MeshHierarchy, build_hierarchy
from .multigrid import ChebyshevConfig, GmgPreconditioner
from .tensor_basis import shape_data

logger = logging.getLogger(__name__)

SCENARIOS = ("tension", "shear")


@dataclass
class ScenarioConfig:
    """One simulation run: scenario, discretization, material, solver knobs."""

    scenario: str = "tension"
    level: int = 6
    degree: int = 1
    split: str = "miehe"
    params: MaterialParams = field(default_factory=MaterialParams)
    dt: float = 1.0           # s
    du: float = 1e-5          # mm per s on the driven boundary
    steps: int = 800
    lin_tol: float = 1e-6
    as_tol: float = 1e-8
    c_as: float = 100.0
    sweeps: int = 5
    coarse_sweeps: int = 32
    coarse_level: int = 2
    lane_width: int = 8
    cache_tensors: bool = True
    workers: int = 1
    max_as_iterations: int = 50
    gmres_restart: int = 100
    gmres_max_iterations: int = 1000
    out_dir: Path | None = None
    vtk_every: int = 10       # 0 disables field snapshots
    rng_seed: int = 0         # reserved; the default pipeline is deterministic

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.split not in ("none", "miehe"):
            raise ValueError(f"unknown split {self.split!r}")
        if self.steps < 1:
            raise ValueError("step count must be >= 1")
        if not 2 <= self.coarse_level <= self.level:
            raise ValueError("need 2 <= coarse_level <= level")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        h = 2.0 ** (-self.level)
        if self.params.eps < 2.0 * h:
            logger.warning(
                "length scale eps=%.3g below twice the mesh size %.3g; "
                "the crack band is under-resolved", self.params.eps, h,
            )


@dataclass
class LoadRecord:
    step: int
    time_s: float
    u_applied_mm: float
    load_x_kN: float
    load_y_kN: float
    as_iters: int
    gmres_iters_total: int
    active_dofs: int
    wall_s: float


@dataclass
class SimulationResult:
    config: ScenarioConfig
    records: list
    snapshots: list            # (step, U copy) at the vtk cadence plus final
    irreversibility_violation: float
    phi_min: float
    phi_max: float
    failed_step: int | None = None

    @property
    def loads(self) -> np.ndarray:
        return np.array([[r.u_applied_mm, r.load_x_kN, r.load_y_kN] for r in self.records])


def boundary_program(scenario: str, t: float, du: float = 1e-5) -> dict:
    """Prescribed displacement values per (boundary tag, component).

    Tension pulls the top edge upward, shear drags it sideways; the bottom
    is clamped, left/right stay free, and phi has no Dirichlet data anywhere.
    """
    if t < 0:
        raise ValueError("time must be nonnegative")
    if scenario == "tension":
        return {("top", 0): 0.0, ("top", 1): t * du,
                ("bottom", 0): 0.0, ("bottom", 1): 0.0}
    if scenario == "shear":
        return {("top", 0): t * du, ("top", 1): 0.0,
                ("bottom", 0): 0.0, ("bottom", 1): 0.0}
    raise ValueError(f"unknown scenario {scenario!r}")


def apply_boundary_values(state: op.LinearizationState, values: dict) -> None:
    """Install prescribed values into U and mark the Dirichlet nodes."""
    dm = state.dof_map
    n = dm.n_scalar
    U = state.U.copy()
    nodes_union: list = []
    for (tag, comp), val in values.items():
        nodes = dm.boundary_nodes[tag]
        U[comp * n + nodes] = val
        nodes_union.append(nodes)
    state.set_solution(U)
    state.set_dirichlet_nodes(np.unique(np.concatenate(nodes_union)))


def reaction_load(state: op.LinearizationState) -> tuple[float, float]:
    """Sum of the raw residual over the driven (top) boundary dofs.

    Signs follow the residual: pulling in tension yields a positive load_y
    while loading.
    """
    raw = op.residual(state, mask_dirichlet=False)
    n = state.n_scalar
    top = state.dof_map.boundary_nodes["top"]
    return float(raw[:n][top].sum()), float(raw[n : 2 * n][top].sum())


def _build_solver_stack(config: ScenarioConfig, hierarchy: MeshHierarchy):
    state = op.LinearizationState(
        hierarchy, config.level, config.params, split=config.split,
        lane_width=config.lane_width, cache_tensors=config.cache_tensors,
    )
    gmg = GmgPreconditioner(
        hierarchy, coarse_level=config.coarse_level,
        cheb=ChebyshevConfig(sweeps=config.sweeps, coarse_sweeps=config.coarse_sweeps),
    )
    krylov = KrylovConfig(
        relative_tolerance=config.lin_tol,
        max_iterations=config.gmres_max_iterations,
        restart=config.gmres_restart,
    )
    as_params = ActiveSetParams(
        complementarity_c=config.c_as, tolerance=config.as_tol,
        max_iterations=config.max_as_iterations,
    )
    m_diag = lumped_mass_diagonal(hierarchy, config.level)
    solver = ActiveSetSolver(gmg, krylov, as_params, m_diag)
    return state, solver


def run_simulation(config: ScenarioConfig) -> SimulationResult:
    """Quasi-static loop: per step update BCs, extrapolate, solve, record.

    A failed step flushes all prior records to disk (when out_dir is set)
    and raises :class:`SolverFailure`; the partial result is attached to the
    exception as ``result``.
    """
    hierarchy = build_hierarchy(config.level, config.degree)
    state, solver = _build_solver_stack(config, hierarchy)
    n = state.n_scalar

    out_dir = Path(config.out_dir) if config.out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    phi_nm1 = state.phi.copy()   # == 1
    phi_nm2 = state.phi.copy()
    records: list[LoadRecord] = []
    snapshots: list = []
    irrev = 0.0
    phi_min, phi_max = 1.0, 1.0
    failed_step = None

    def flush():
        if out_dir is not None:
            io.write_load_csv(records, out_dir / f"{config.scenario}_loads.csv")

    for step in range(1, config.steps + 1):
        t = step * config.dt
        apply_boundary_values(state, boundary_program(config.scenario, t, config.du))
        if step >= 3:
            phi_tilde = op.extrapolate_phase(
                phi_nm1, phi_nm2, t, t - config.dt, t - 2 * config.dt
            )
        else:
            phi_tilde = phi_nm1
        state.set_phi_tilde(phi_tilde)
        state.set_phi_old(phi_nm1)

        t0 = time.perf_counter()
        try:
            report = solver.solve_step(state)
        except SolverFailure as exc:
            failed_step = step
            flush()
            result = SimulationResult(config, records, snapshots, irrev,
                                      phi_min, phi_max, failed_step)
            exc.result = result
            raise
        wall = time.perf_counter() - t0

        load_x, load_y = reaction_load(state)
        records.append(LoadRecord(
            step=step, time_s=t, u_applied_mm=t * config.du,
            load_x_kN=load_x, load_y_kN=load_y,
            as_iters=report.as_iterations,
            gmres_iters_total=report.gmres_total,
            active_dofs=report.active_counts[-1],
            wall_s=wall,
        ))

        phi = state.phi
        irrev = max(irrev, float((phi - phi_nm1).max()))
        phi_min = min(phi_min, float(phi.min()))
        phi_max = max(phi_max, float(phi.max()))

        want_snap = config.vtk_every and (step % config.vtk_every == 0 or step == config.steps)
        if want_snap:
            snapshots.append((step, state.U.copy()))
            if out_dir is not None:
                io.write_vtk(state.dof_map, state.U,
                             out_dir / f"{config.scenario}_{step:05d}.vtk")
        logger.info(
            "step %d/%d: u=%.4g mm, load=(%.4g, %.4g) kN, as=%d, gmres=%d, |A|=%d, %.2fs",
            step, config.steps, t * config.du, load_x, load_y,
            report.as_iterations, report.gmres_total,
            report.active_counts[-1], wall,
        )

        phi_nm2 = phi_nm1
        phi_nm1 = phi.copy()

    if not snapshots or snapshots[-1][0] != config.steps:
        snapshots.append((config.steps, state.U.copy()))
    flush()
    return SimulationResult(config, records, snapshots, irrev, phi_min, phi_max)


# ---------------------------------------------------------------------------
# benchmark and memory harnesses


@dataclass
class BenchRecord:
    kind: str       # spmv | mfmv | assemble
    degree: int
    level: int
    dofs: int
    best_time_s: float
    reps: int


def _step1_state(config: ScenarioConfig, hierarchy: MeshHierarchy | None = None):
    """Linearization point of the first loading step (phi = 1, BCs at t=dt)."""
    hierarchy = hierarchy or build_hierarchy(config.level, config.degree)
    state = op.LinearizationState(
        hierarchy, config.level, config.params, split=config.split,
        lane_width=config.lane_width, cache_tensors=config.cache_tensors,
    )
    apply_boundary_values(state, boundary_program(config.scenario, config.dt, config.du))
    state.refresh_cache()
    return state


def benchmark_vmult(config: ScenarioConfig, reps: int = 100) -> list[BenchRecord]:
    """Best-of-reps timings for assembled SpMV vs matrix-free application.

    Both products are compared on a random vector before timing; mismatch
    aborts.  When assembly exhausts memory only MFMV records are emitted.
    """
    state = _step1_state(config)
    dofs = 3 * state.n_scalar
    rng = np.random.default_rng(1 + config.degree)
    delta = rng.standard_normal(dofs)
    records: list[BenchRecord] = []

    y_mf = op.apply_jacobian(state, delta)

    def best_of(fn) -> float:
        best = np.inf
        for _ in range(reps):
            t0 = time.perf_counter()
            fn()
            best = min(best, time.perf_counter() - t0)
        return best

    try:
        oracle = op.assemble_oracle(state)
    except op.AssemblyMemoryError:
        logger.warning("assembly does not fit in memory; reporting MFMV only")
        oracle = None
    if oracle is not None:
        y_sp = oracle.matrix @ delta
        rel = np.linalg.norm(y_mf - y_sp) / max(np.linalg.norm(y_sp), 1e-300)
        if rel > 1e-12:
            raise RuntimeError(f"matrix-free/assembled mismatch before timing: {rel:.3e}")
        records.append(BenchRecord("spmv", config.degree, config.level, dofs,
                                   best_of(lambda: oracle.matrix @ delta), reps))
        records.append(BenchRecord("assemble", config.degree, config.level, dofs,
                                   oracle.assembly_seconds, 1))
    records.append(BenchRecord("mfmv", config.degree, config.level, dofs,
                               best_of(lambda: op.apply_jacobian(state, delta)), reps))
    return records


def _scalar_pattern_nnz(hierarchy: MeshHierarchy, level: int) -> int:
    """Exact nonzero count of the scalar coupling pattern on one level."""
    dm = hierarchy.dof_map(level)
    conn = dm.conn
    nloc = conn.shape[1]
    rows = np.repeat(conn, nloc, axis=1).ravel()
    cols = np.tile(conn, (1, nloc)).ravel()
    pat = sp.coo_matrix(
        (np.ones(rows.size, dtype=np.int8), (rows, cols)),
        shape=(dm.n_scalar, dm.n_scalar),
    ).tocsr()
    return int(pat.nnz)


@dataclass
class MemoryReport:
    degree: int
    level: int
    dofs: int
    csr_bytes: int
    csr_bytes_per_dof: float
    mf_bytes: int
    mf_bytes_per_dof: float


def memory_report(config: ScenarioConfig) -> MemoryReport:
    """Bytes per dof: assembled CSR versus the matrix-free solver stack.

    CSR accounting uses the exact structural pattern (all nine component
    blocks share the scalar pattern; the empty u-phi block is structurally
    present, matching the symmetric-pattern assembly).  The matrix-free
    figure sums shape data, dof maps, transfer operators, and the per-level
    state vectors and quadrature caches the V-cycle keeps alive.
    """
    hierarchy = build_hierarchy(config.level, config.degree)
    dm = hierarchy.dof_map(config.level)
    dofs = dm.n_total
    scalar_nnz = _scalar_pattern_nnz(hierarchy, config.level)
    nnz = 9 * scalar_nnz
    csr_bytes = nnz * 8 + nnz * 4 + (dofs + 1) * 4

    state = _step1_state(config, hierarchy)
    gmg = GmgPreconditioner(hierarchy, coarse_level=config.coarse_level,
                            cheb=ChebyshevConfig(sweeps=config.sweeps))
    gmg.setup(state)
    shape = shape_data(config.degree)
    mf_bytes = sum(a.nbytes for a in (shape.values, shape.derivatives,
                                      shape.quad_points, shape.quad_weights,
                                      shape.support_points))
    for l, s in gmg.states.items():
        mf_bytes += s.dof_map.conn.nbytes + s.dof_map.coords.nbytes
        mf_bytes += s.U.nbytes + s.phi_tilde.nbytes + s.phi_old.nbytes
        mf_bytes += s.active.nbytes + s.dirichlet_nodes.nbytes
        mf_bytes += s.cache_bytes()
        mf_bytes += gmg.diags[l]["uu"].nbytes + gmg.diags[l]["phiphi"].nbytes
    for tr in gmg.transfers.values():
        for m in (tr.P, tr.R):
            mf_bytes += m.data.nbytes + m.indices.nbytes + m.indptr.nbytes
    return MemoryReport(
        degree=config.degree, level=config.level, dofs=dofs,
        csr_bytes=csr_bytes, csr_bytes_per_dof=csr_bytes / dofs,
        mf_bytes=mf_bytes, mf_bytes_per_dof=mf_bytes / dofs,
    )
