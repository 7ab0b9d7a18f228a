"""Restarted GMRES with right preconditioning and modified Gram-Schmidt."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)


@dataclass
class KrylovConfig:
    relative_tolerance: float = 1e-6
    max_iterations: int = 1000
    restart: int = 100
    absolute_floor: float = 1e-30

    def __post_init__(self):
        if not 0.0 < self.relative_tolerance < 1.0:
            raise ValueError("relative tolerance must lie in (0, 1)")
        if self.restart < 2:
            raise ValueError("restart length must be >= 2")


@dataclass
class GmresResult:
    solution: np.ndarray
    iterations: int
    residual_history: list = field(default_factory=list)
    converged: bool = False
    wall_seconds: float = 0.0


def gmres_solve(apply_op, rhs: np.ndarray, config: KrylovConfig,
                preconditioner=None, x0: np.ndarray | None = None) -> GmresResult:
    """Solve A x = rhs; the reported history holds true residual norms.

    Right preconditioning keeps the least-squares residual equal to the
    unpreconditioned one; it is recomputed explicitly at every restart.
    Stagnation returns the best iterate with ``converged=False``; an Arnoldi
    breakdown with a residual above tolerance triggers a restart.
    """
    t_start = time.perf_counter()
    rhs = np.asarray(rhs, dtype=float)
    n = rhs.size
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    b_norm = float(np.linalg.norm(rhs))
    target = max(config.relative_tolerance * b_norm, config.absolute_floor)

    r = rhs - apply_op(x) if x0 is not None else rhs.copy()
    r_norm = float(np.linalg.norm(r))
    history = [r_norm]
    total = 0
    if r_norm <= target:
        return GmresResult(x, 0, history, True, time.perf_counter() - t_start)

    V = None
    while total < config.max_iterations:
        m = min(config.restart, config.max_iterations - total)
        if V is None or V.shape[0] < m + 1:
            V = np.empty((m + 1, n))
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        V[0] = r / r_norm
        g[0] = r_norm
        j_used = 0
        for j in range(m):
            z = preconditioner(V[j]) if preconditioner is not None else V[j]
            # the operator may hand back its input; detach before updating
            w = np.array(apply_op(z), dtype=float, copy=True)
            for i in range(j + 1):
                H[i, j] = float(V[i] @ w)
                w -= H[i, j] * V[i]
            h_next = float(np.linalg.norm(w))
            H[j + 1, j] = h_next
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            denom = float(np.hypot(H[j, j], H[j + 1, j]))
            if denom == 0.0:
                cs[j], sn[j] = 1.0, 0.0
            else:
                cs[j] = H[j, j] / denom
                sn[j] = H[j + 1, j] / denom
            H[j, j] = denom
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            total += 1
            j_used = j + 1
            history.append(abs(g[j + 1]))
            if abs(g[j + 1]) <= target:
                break
            if h_next <= 1e-14 * max(1.0, r_norm):
                break  # Arnoldi breakdown; leave the inner loop and restart
            V[j + 1] = w / h_next
        y = np.zeros(j_used)
        for i in range(j_used - 1, -1, -1):
            y[i] = (g[i] - H[i, i + 1 : j_used] @ y[i + 1 :]) / H[i, i]
        update = V[:j_used].T @ y
        x = x + (preconditioner(update) if preconditioner is not None else update)
        r = rhs - apply_op(x)
        r_norm = float(np.linalg.norm(r))
        history[-1] = r_norm
        if r_norm <= target:
            res = GmresResult(x, total, history, True, time.perf_counter() - t_start)
            logger.debug("gmres: %d iterations, rel residual %.3e, %.3f s",
                         total, r_norm / max(b_norm, 1e-300), res.wall_seconds)
            return res
    res = GmresResult(x, total, history, False, time.perf_counter() - t_start)
    logger.debug("gmres: stagnation after %d iterations, rel residual %.3e",
                 total, r_norm / max(b_norm, 1e-300))
    return res
