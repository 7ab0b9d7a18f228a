"""1D Lagrange shape data and tensor-product (sum-factorized) cell kernels.

All element-local work is expressed through 1D shape value/derivative
matrices at Gauss points, contracted one direction at a time.  The kernels
accept an optional trailing lane axis so a batch of cells is processed with
the same instructions (vectorization over elements); conditional branches in
lane code go through :func:`masked_select`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LANE_WIDTHS = (1, 2, 4, 8)


def gauss_legendre_01(q: int):
    """Gauss-Legendre points/weights on [0, 1]; exact through degree 2q-1."""
    pts, wts = np.polynomial.legendre.leggauss(q)
    return 0.5 * (pts + 1.0), 0.5 * wts


def support_points_01(degree: int) -> np.ndarray:
    """Equidistant Lagrange support points on [0, 1].

    Equidistant nodes keep the node sets of consecutive refinement levels
    nested (every coarse node coincides with a fine node), which the state
    restriction relies on; conditioning is unproblematic for the degrees
    1..4 this solver targets.
    """
    if degree < 1:
        raise ValueError("degree must be >= 1")
    return np.linspace(0.0, 1.0, degree + 1)


def lagrange_matrices(support: np.ndarray, points: np.ndarray):
    """Values and derivatives of the Lagrange basis on ``support`` at ``points``."""
    n = support.size
    # columns of V^-T are the monomial coefficients of the Lagrange basis
    vander = np.vander(support, n, increasing=True)
    coeff = np.linalg.inv(vander)                 # coeff[k, a]: x^k term of l_a
    powers = np.vander(points, n, increasing=True)
    dpowers = np.zeros_like(powers)
    dpowers[:, 1:] = powers[:, :-1] * np.arange(1, n)
    return powers @ coeff, dpowers @ coeff


@dataclass(frozen=True)
class ShapeData:
    """1D shape values/derivatives at quadrature points for degree p."""

    degree: int
    quad_points: np.ndarray       # (q,)
    quad_weights: np.ndarray      # (q,)
    support_points: np.ndarray    # (p+1,)
    values: np.ndarray            # N, (q, p+1)
    derivatives: np.ndarray       # D, (q, p+1)

    @property
    def q(self) -> int:
        return self.quad_points.size


def shape_data(degree: int) -> ShapeData:
    """Shape data with q = p+1 Gauss points on equidistant support points."""
    if degree < 1:
        raise ValueError("degree must be >= 1")
    q = degree + 1
    pts, wts = gauss_legendre_01(q)
    support = support_points_01(degree)
    values, derivs = lagrange_matrices(support, pts)
    return ShapeData(
        degree=degree,
        quad_points=pts,
        quad_weights=wts,
        support_points=support,
        values=values,
        derivatives=derivs,
    )


def evaluate_on_cell(coeffs: np.ndarray, shape: ShapeData, h: float = 1.0):
    """Values and physical gradients at the q^2 quadrature points of a cell.

    ``coeffs`` has shape (p+1, p+1, ...) with index order (y, x, lanes...);
    returns (values, grad_x, grad_y), each (q, q, ...).  Both contractions go
    one direction at a time, never forming the dense q^2 x (p+1)^2 matrix.
    """
    coeffs = np.asarray(coeffs)
    n1 = shape.degree + 1
    if coeffs.shape[:2] != (n1, n1):
        raise ValueError(f"expected leading shape ({n1}, {n1}), got {coeffs.shape}")
    N, D = shape.values, shape.derivatives
    tx = np.tensordot(N, coeffs, axes=(1, 1))    # (q_x, p1_y, ...)
    vals = np.tensordot(N, tx, axes=(1, 1))      # (q_y, q_x, ...)
    gx = np.tensordot(N, np.tensordot(D, coeffs, axes=(1, 1)), axes=(1, 1)) / h
    gy = np.tensordot(D, tx, axes=(1, 1)) / h
    return vals, gx, gy


def integrate_on_cell(shape: ShapeData, h: float, values=None, grad_x=None, grad_y=None):
    """Transpose of :func:`evaluate_on_cell` with quadrature weights and h^2.

    Adjointness: ``sum(evaluate(x) * y * w2 * h^2) == dot(x, integrate(y))``
    for every quadrature field y passed through the matching slot.
    """
    N, D, w = shape.values, shape.derivatives, shape.quad_weights
    q = shape.q
    out = None

    def accumulate(data, my, mx, scale):
        nonlocal out
        data = np.asarray(data)
        if data.shape[:2] != (q, q):
            raise ValueError(f"expected leading shape ({q}, {q}), got {data.shape}")
        wdata = data * (w[:, None] * w[None, :]).reshape((q, q) + (1,) * (data.ndim - 2))
        t = np.tensordot(mx, wdata, axes=(0, 1))          # (p1_x, q_y, ...)
        res = np.tensordot(my, t.swapaxes(0, 1), axes=(0, 0))  # (p1_y, p1_x, ...)
        res = res * scale
        out = res if out is None else out + res

    if values is not None:
        accumulate(values, N, N, h * h)
    if grad_x is not None:
        accumulate(grad_x, N, D, h)
    if grad_y is not None:
        accumulate(grad_y, D, N, h)
    if out is None:
        raise ValueError("nothing to integrate")
    return out


def masked_select(mask, a, b):
    """Per-lane if-then-else: lane i takes a[i] where mask[i] else b[i].

    Selection is bitwise; no arithmetic touches the unselected branch's
    result path (both branches may have been computed by the caller).
    """
    mask = np.asarray(mask)
    a = np.asarray(a)
    b = np.asarray(b)
    if mask.shape != a.shape or a.shape != b.shape:
        raise ValueError("mask and branches must share one lane shape")
    return np.where(mask, a, b)


@dataclass
class ElementBatch:
    """A lane-batched group of cells processed with shared instructions."""

    lane_width: int
    cell_indices: np.ndarray      # (W,) global cell ids (padding repeats the last)
    valid: np.ndarray             # (W,) bool, False on padded lanes
    coeffs: np.ndarray            # (n_local, W) per-lane local coefficients

    def __post_init__(self):
        if self.lane_width not in LANE_WIDTHS:
            raise ValueError(f"lane width must be one of {LANE_WIDTHS}")


def gather_batch(values: np.ndarray, conn: np.ndarray, first_cell: int, lane_width: int) -> ElementBatch:
    """Gather local coefficients for cells [first_cell, first_cell+W)."""
    n_cells = conn.shape[0]
    ids = first_cell + np.arange(lane_width)
    valid = ids < n_cells
    ids = np.minimum(ids, n_cells - 1)
    coeffs = values[conn[ids]].T.copy()           # (n_local, W)
    return ElementBatch(lane_width=lane_width, cell_indices=ids, valid=valid, coeffs=coeffs)


def scatter_add_batch(out: np.ndarray, conn: np.ndarray, batch: ElementBatch, local_values: np.ndarray):
    """Scatter-add per-lane local contributions; masked lanes leave ``out`` untouched."""
    for lane in range(batch.lane_width):
        if batch.valid[lane]:
            np.add.at(out, conn[batch.cell_indices[lane]], local_values[:, lane])


def evaluate_ops_count(degree: int) -> int:
    """Multiply count of the sum-factorized value+gradient evaluation (d=2).

    Instrumented scalar build used to check the O(p^3) per-cell complexity
    claim against the O(p^4) dense alternative (see ``dense_ops_count``).
    """
    n1 = degree + 1
    q = degree + 1
    ops = 0
    # three 1D passes (values, d/dx, d/dy), each: first contraction q*n1*n1,
    # second contraction q*q*n1
    for _ in ("vals", "gx", "gy"):
        ops += q * n1 * n1
        ops += q * q * n1
    return ops


def dense_ops_count(degree: int) -> int:
    """Multiply count of the naive dense (p+1)^2 -> q^2 kernel (d=2)."""
    n1 = degree + 1
    q = degree + 1
    return 3 * (q * q) * (n1 * n1)
