"""Monolithic geometric multigrid preconditioner with Chebyshev-Jacobi smoothing.

One V-cycle over the nested levels is a fixed linear operator: block
smoothing (u block, then phi block, 5 Chebyshev sweeps each on the Jacobi-
scaled block), transfer by the Q_p embedding and its transpose, and a
Chebyshev solve on the coarse level.  Since the u-phi block of the Jacobian
vanishes, the coarse system is block lower-triangular and the blockwise
forward substitution solves it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from . import pff_operator as op
from .mesh_hierarchy import MeshHierarchy
from .tensor_basis import lagrange_matrices, support_points_01

logger = logging.getLogger(__name__)


@dataclass
class ChebyshevConfig:
    """Smoothing/solve ranges and sweep counts for the Chebyshev method."""

    sweeps: int = 5
    coarse_sweeps: int = 32
    c: float = 0.24
    C: float = 1.2
    lambda_min_floor: float = 1e-3   # relative to lambda_max, solver mode
    lanczos_iterations: int = 30
    seed: int = 20240915

    def __post_init__(self):
        if not (0.0 < self.c <= 1.0 <= self.C):
            raise ValueError("need 0 < c <= 1 <= C")


def build_prolongation(hierarchy: MeshHierarchy, fine_level: int) -> sp.csr_matrix:
    """Scalar Q_p embedding from level fine_level-1 onto fine_level.

    Each fine dof row holds the coarse basis values at the fine node,
    evaluated through a fine cell on the same side of the slit, so lower and
    upper copies route to the corresponding copies.
    """
    if fine_level < 1:
        raise ValueError("fine level must be >= 1")
    dmf = hierarchy.dof_map(fine_level)
    dmc = hierarchy.dof_map(fine_level - 1)
    p = hierarchy.degree
    n1 = p + 1
    support = support_points_01(p)
    embed = []
    for child in (0, 1):
        vals, _ = lagrange_matrices(support, (child + support) / 2.0)
        embed.append(vals)               # vals[k, m] = l_m((child + x_k)/2)

    n_side_f = 2 ** fine_level
    n_side_c = n_side_f // 2
    row_cols: dict[int, np.ndarray] = {}
    row_vals: dict[int, np.ndarray] = {}
    for fcell in range(n_side_f * n_side_f):
        fx = fcell % n_side_f
        fy = fcell // n_side_f
        ccell = (fy // 2) * n_side_c + fx // 2
        ex = embed[fx % 2]
        ey = embed[fy % 2]
        fconn = dmf.conn[fcell]
        cconn = dmc.conn[ccell]
        for b in range(n1):
            for a in range(n1):
                fdof = int(fconn[b * n1 + a])
                if fdof in row_cols:
                    continue
                weights = np.outer(ey[b], ex[a]).ravel()
                keep = np.abs(weights) > 1e-14
                row_cols[fdof] = cconn[keep]
                row_vals[fdof] = weights[keep]
    indptr = np.zeros(dmf.n_scalar + 1, dtype=np.int64)
    for fdof, cols in row_cols.items():
        indptr[fdof + 1] = cols.size
    np.cumsum(indptr, out=indptr)
    indices = np.empty(indptr[-1], dtype=np.int64)
    data = np.empty(indptr[-1])
    for fdof in row_cols:
        a, b = indptr[fdof], indptr[fdof + 1]
        indices[a:b] = row_cols[fdof]
        data[a:b] = row_vals[fdof]
    return sp.csr_matrix((data, indices, indptr), shape=(dmf.n_scalar, dmc.n_scalar))


class TransferOperator:
    """Componentwise prolongation/restriction between adjacent levels."""

    def __init__(self, hierarchy: MeshHierarchy, fine_level: int):
        self.P = build_prolongation(hierarchy, fine_level)
        self.R = self.P.T.tocsr()
        self.n_fine = self.P.shape[0]
        self.n_coarse = self.P.shape[1]

    def prolongate(self, coarse: np.ndarray) -> np.ndarray:
        """Embed a monolithic (3 n_coarse,) vector into the fine space."""
        nc, nf = self.n_coarse, self.n_fine
        out = np.empty(3 * nf)
        for comp in range(3):
            out[comp * nf : (comp + 1) * nf] = self.P @ coarse[comp * nc : (comp + 1) * nc]
        return out

    def restrict(self, fine: np.ndarray) -> np.ndarray:
        """Exact algebraic transpose of :meth:`prolongate`."""
        nc, nf = self.n_coarse, self.n_fine
        out = np.empty(3 * nc)
        for comp in range(3):
            out[comp * nc : (comp + 1) * nc] = self.R @ fine[comp * nf : (comp + 1) * nf]
        return out


def estimate_lambda_range(apply_fn, diag: np.ndarray, max_iterations: int = 30,
                          seed: int = 0, rtol: float = 1e-4):
    """Lanczos Ritz estimates of the extremal eigenvalues of diag^-1 A.

    Works on the symmetrized operator D^-1/2 A D^-1/2 (same spectrum).
    Stops early when the largest Ritz value stagnates or on breakdown, in
    which case the current Ritz values are returned.
    """
    n = diag.size
    dhalf = 1.0 / np.sqrt(diag)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    v_prev = np.zeros(n)
    beta = 0.0
    alphas: list[float] = []
    betas: list[float] = []
    lam_min = lam_max = 1.0
    prev_max = None
    for _ in range(min(max_iterations, n)):
        w = dhalf * apply_fn(dhalf * v)
        w -= beta * v_prev
        alpha = float(v @ w)
        w -= alpha * v
        alphas.append(alpha)
        if betas:
            ritz = scipy.linalg.eigvalsh_tridiagonal(alphas, betas)
        else:
            ritz = np.array([alpha])
        lam_min, lam_max = float(ritz[0]), float(ritz[-1])
        beta = float(np.linalg.norm(w))
        if beta < 1e-12 * max(1.0, abs(lam_max)):
            break
        if prev_max is not None and abs(lam_max - prev_max) <= rtol * abs(lam_max):
            break
        prev_max = lam_max
        betas.append(beta)
        v_prev = v
        v = w / beta
    return lam_min, lam_max


def estimate_lambda_max(apply_fn, diag: np.ndarray, max_iterations: int = 30,
                        seed: int = 0) -> float:
    return estimate_lambda_range(apply_fn, diag, max_iterations, seed)[1]


def chebyshev_apply(apply_fn, diag: np.ndarray, rhs: np.ndarray,
                    a: float, b: float, sweeps: int) -> np.ndarray:
    """Fixed-sweep Chebyshev iteration for A z = rhs on the interval [a, b].

    Jacobi-preconditioned three-term recurrence; linear in rhs, no interior
    residual tests.
    """
    if not (0.0 < a < b):
        raise ValueError(f"invalid Chebyshev interval [{a}, {b}]")
    if sweeps < 1:
        raise ValueError("sweeps must be >= 1")
    theta = 0.5 * (b + a)
    delta = 0.5 * (b - a)
    sigma1 = theta / delta
    inv_diag = 1.0 / diag
    d = inv_diag * rhs / theta
    z = d.copy()
    if sweeps == 1:
        return z
    r = rhs - apply_fn(d)
    rho_old = 1.0 / sigma1
    for k in range(1, sweeps):
        rho = 1.0 / (2.0 * sigma1 - rho_old)
        d = (rho * rho_old) * d + (2.0 * rho / delta) * (inv_diag * r)
        z += d
        rho_old = rho
        if k < sweeps - 1:
            r -= apply_fn(d)
    return z


class GmgPreconditioner:
    """V-cycle over restricted linearization states; a fixed linear operator.

    ``setup`` must be called whenever the linearization point, the active
    set, or the boundary data changes; eigenvalue estimates are recomputed
    unless ``reuse_eigen`` says the active set is unchanged.
    """

    def __init__(self, hierarchy: MeshHierarchy, coarse_level: int = 2,
                 cheb: ChebyshevConfig | None = None):
        if coarse_level < 2:
            raise ValueError("coarse level must be >= 2")
        if coarse_level > hierarchy.max_level:
            raise ValueError("hierarchy shallower than the coarse level")
        self.hierarchy = hierarchy
        self.coarse_level = coarse_level
        self.cheb = cheb or ChebyshevConfig()
        self.transfers = {
            l: TransferOperator(hierarchy, l)
            for l in range(coarse_level + 1, hierarchy.max_level + 1)
        }
        self.states: dict[int, op.LinearizationState] = {}
        self.diags: dict[int, dict[str, np.ndarray]] = {}
        self.ranges: dict[int, dict[str, tuple]] = {}
        self.cons: dict[int, np.ndarray] = {}
        self.finest: int | None = None

    def setup(self, state: op.LinearizationState, reuse_eigen: bool = False):
        self.finest = state.level
        if state.level < self.coarse_level:
            raise ValueError("state level below the coarse level")
        if state._cache_version != state.version:
            state.refresh_cache()
        self.states[state.level] = state
        for l in range(state.level - 1, self.coarse_level - 1, -1):
            s = op.restrict_state_to_level(state, l)
            s.refresh_cache()
            self.states[l] = s
        for l in range(self.coarse_level, state.level + 1):
            s = self.states[l]
            self.cons[l] = s.constrained_mask()
            self.diags[l] = {
                "uu": op.block_diagonal(s, "uu"),
                "phiphi": op.block_diagonal(s, "phiphi"),
            }
            if not reuse_eigen or l not in self.ranges:
                self.ranges[l] = self._estimate_ranges(l)
        if logger.isEnabledFor(logging.DEBUG):
            parts = ", ".join(
                f"l{l}: uu {self.ranges[l]['uu'][1]:.3g} phi {self.ranges[l]['phiphi'][1]:.3g}"
                for l in sorted(self.ranges)
            )
            logger.debug(
                "gmg setup: levels %d..%d, sweeps %d, coarse sweeps %d, lambda_max {%s}",
                self.coarse_level, state.level, self.cheb.sweeps,
                self.cheb.coarse_sweeps, parts,
            )

    def _estimate_ranges(self, level: int):
        s = self.states[level]
        cfg = self.cheb
        out = {}
        for block, apply_fn in (
            ("uu", lambda v: op.apply_block_uu(s, v)),
            ("phiphi", lambda v: op.apply_block_phiphi(s, v)),
        ):
            lam_min, lam_max = estimate_lambda_range(
                apply_fn, self.diags[level][block],
                max_iterations=cfg.lanczos_iterations,
                seed=cfg.seed + 101 * level + (0 if block == "uu" else 1),
            )
            lam_max = max(lam_max, 1e-30)
            lam_min = max(lam_min, cfg.lambda_min_floor * lam_max)
            out[block] = (lam_min, lam_max)
        return out

    # -- linear operator ----------------------------------------------------

    def apply(self, r: np.ndarray) -> np.ndarray:
        """One V-cycle approximating G z = r from the finest level."""
        if self.finest is None:
            raise RuntimeError("setup() must run before apply()")
        return self._vcycle(self.finest, np.asarray(r, dtype=float))

    __call__ = apply

    def _smooth_interval(self, level: int, block: str):
        lam_min, lam_max = self.ranges[level][block]
        return self.cheb.c * lam_max, self.cheb.C * lam_max

    def _solve_interval(self, level: int, block: str):
        lam_min, lam_max = self.ranges[level][block]
        return lam_min, self.cheb.C * lam_max

    def _smooth(self, level: int, z: np.ndarray, r: np.ndarray):
        s = self.states[level]
        n = s.n_scalar
        res = r - op.apply_jacobian(s, z)
        a, b = self._smooth_interval(level, "uu")
        z[: 2 * n] += chebyshev_apply(
            lambda v: op.apply_block_uu(s, v), self.diags[level]["uu"],
            res[: 2 * n], a, b, self.cheb.sweeps,
        )
        res_phi = r[2 * n :] - op.apply_phi_row(s, z)
        a, b = self._smooth_interval(level, "phiphi")
        z[2 * n :] += chebyshev_apply(
            lambda v: op.apply_block_phiphi(s, v), self.diags[level]["phiphi"],
            res_phi, a, b, self.cheb.sweeps,
        )

    def _coarse_solve(self, level: int, r: np.ndarray) -> np.ndarray:
        s = self.states[level]
        n = s.n_scalar
        z = np.zeros(3 * n)
        a, b = self._solve_interval(level, "uu")
        z[: 2 * n] = chebyshev_apply(
            lambda v: op.apply_block_uu(s, v), self.diags[level]["uu"],
            r[: 2 * n], a, b, self.cheb.coarse_sweeps,
        )
        res_phi = r[2 * n :] - op.apply_phi_row(s, z)
        a, b = self._solve_interval(level, "phiphi")
        z[2 * n :] = chebyshev_apply(
            lambda v: op.apply_block_phiphi(s, v), self.diags[level]["phiphi"],
            res_phi, a, b, self.cheb.coarse_sweeps,
        )
        cons = self.cons[level]
        z[cons] = r[cons]
        return z

    def _vcycle(self, level: int, r: np.ndarray) -> np.ndarray:
        if level == self.coarse_level:
            return self._coarse_solve(level, r)
        cons = self.cons[level]
        z = np.where(cons, r, 0.0)
        self._smooth(level, z, r)
        res = r - op.apply_jacobian(self.states[level], z)
        rc = self.transfers[level].restrict(res)
        rc[self.cons[level - 1]] = 0.0
        zc = self._vcycle(level - 1, rc)
        dz = self.transfers[level].prolongate(zc)
        dz[cons] = 0.0
        z += dz
        self._smooth(level, z, r)
        return z
