"""Elasticity with phase-field degradation and the spectral strain split.

Scalar operations work on d x d symmetric tensors (d = 2 or 3) using
closed-form eigensystems; directional derivatives of the tensile part go
through the pseudo-inverse construction.  Lane-batched 2D variants of the
hot kernels live in :mod:`fracturekit._kernels` and are re-exported here;
they process arrays of tensor components and merge branches with masked
selects so a batch of quadrature points issues identical instructions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels


@dataclass(frozen=True)
class MaterialParams:
    """Material and regularization parameters.

    Units: lame_lambda, mu in kN/mm^2; g_c in kN/mm; eps in mm.
    Defaults are the single-edge notched test configuration.
    """

    lame_lambda: float = 121.15
    mu: float = 80.77
    g_c: float = 2.7e-3
    kappa: float = 1e-10
    eps: float = 4e-3

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        if self.lame_lambda < 0:
            raise ValueError("lame_lambda must be nonnegative")
        if self.g_c <= 0:
            raise ValueError("g_c must be positive")
        if not 0 < self.kappa < 1:
            raise ValueError("kappa must lie in (0, 1)")
        if self.eps <= 0:
            raise ValueError("eps must be positive")


@dataclass(frozen=True)
class EigenSystem:
    """Eigenvalues (descending) and orthonormal eigenvector columns."""

    values: np.ndarray    # (d,)
    vectors: np.ndarray   # (d, d), column i pairs with values[i]


def degradation(phi, kappa: float):
    """Stiffness reduction g(phi) = (1 - kappa) phi^2 + kappa."""
    return (1.0 - kappa) * np.square(phi) + kappa


def degradation_d1(phi, kappa: float):
    return 2.0 * (1.0 - kappa) * np.asarray(phi, dtype=float)


def degradation_d2(kappa: float) -> float:
    return 2.0 * (1.0 - kappa)


def _eig2(A: np.ndarray) -> EigenSystem:
    a, c = A[0, 0], A[1, 1]
    b = 0.5 * (A[0, 1] + A[1, 0])
    m = 0.5 * (a + c)
    dh = 0.5 * (a - c)
    r = np.hypot(dh, b)
    if r == 0.0:
        return EigenSystem(np.array([m, m]), np.eye(2))
    # (b, r - dh) and (r + dh, b) both solve (A - l1 I) v = 0; pick the
    # better conditioned one
    v = np.array([b, r - dh]) if dh <= 0.0 else np.array([r + dh, b])
    v /= np.linalg.norm(v)
    vectors = np.column_stack([v, [-v[1], v[0]]])
    return EigenSystem(np.array([m + r, m - r]), vectors)


def _null_vector(B: np.ndarray) -> np.ndarray:
    """Largest cross product of row pairs: null direction of a rank-2 B."""
    crosses = [
        np.cross(B[0], B[1]),
        np.cross(B[0], B[2]),
        np.cross(B[1], B[2]),
    ]
    norms = [np.linalg.norm(c) for c in crosses]
    k = int(np.argmax(norms))
    if norms[k] == 0.0:
        # B has rank <= 1: any direction orthogonal to its largest row works
        rows = np.linalg.norm(B, axis=1)
        if rows.max() == 0.0:
            return np.array([1.0, 0.0, 0.0])
        r = B[int(np.argmax(rows))] / rows.max()
        e = np.eye(3)[int(np.argmin(np.abs(r)))]
        v = e - (e @ r) * r
        return v / np.linalg.norm(v)
    return crosses[k] / norms[k]


def _eig3(A: np.ndarray) -> EigenSystem:
    q = np.trace(A) / 3.0
    B = A - q * np.eye(3)
    p = np.sqrt(np.sum(B * B) / 6.0)
    scale = max(1.0, np.linalg.norm(A))
    if p <= 1e-14 * scale:
        return EigenSystem(np.full(3, q), np.eye(3))
    # trigonometric Cardano; clamp guards round-off near repeated roots
    r = np.clip(np.linalg.det(B / p) / 2.0, -1.0, 1.0)
    theta = np.arccos(r) / 3.0
    l1 = q + 2.0 * p * np.cos(theta)
    l3 = q + 2.0 * p * np.cos(theta + 2.0 * np.pi / 3.0)
    l2 = 3.0 * q - l1 - l3
    values = np.array([l1, l2, l3])

    # extract the best-isolated eigenvalue first, then deflate to a 2x2
    iso = 0 if (l1 - l2) >= (l2 - l3) else 2
    v_iso = _null_vector(A - values[iso] * np.eye(3))
    e = np.eye(3)[int(np.argmin(np.abs(v_iso)))]
    w1 = e - (e @ v_iso) * v_iso
    w1 /= np.linalg.norm(w1)
    w2 = np.cross(v_iso, w1)
    W = np.column_stack([w1, w2])
    sub = _eig2(W.T @ A @ W)
    pair = W @ sub.vectors
    if iso == 0:
        values = np.array([values[0], sub.values[0], sub.values[1]])
        vectors = np.column_stack([v_iso, pair[:, 0], pair[:, 1]])
    else:
        values = np.array([sub.values[0], sub.values[1], values[2]])
        vectors = np.column_stack([pair[:, 0], pair[:, 1], v_iso])
    return EigenSystem(values, vectors)


def eigensystem(A) -> EigenSystem:
    """Closed-form eigensystem of a symmetric 2x2 or 3x3 tensor.

    Eigenvalues come out descending; for numerically repeated eigenvalues any
    orthonormal basis of the eigenspace may be returned.
    """
    A = np.asarray(A, dtype=float)
    A = 0.5 * (A + A.T)
    if A.shape == (2, 2):
        return _eig2(A)
    if A.shape == (3, 3):
        return _eig3(A)
    raise ValueError("only d = 2, 3 supported")


def positive_part_tensor(A) -> np.ndarray:
    """Tensile part: eigenvalues clipped at zero, same eigenvectors."""
    es = eigensystem(A)
    lam_p = np.maximum(es.values, 0.0)
    return (es.vectors * lam_p) @ es.vectors.T


def negative_part_tensor(A) -> np.ndarray:
    """Compressive complement; A+ + A- = A holds exactly."""
    return np.asarray(A, dtype=float) - positive_part_tensor(A)


def energy_plus(e, params: MaterialParams, split: str = "miehe") -> float:
    """Tensile solid energy density E_s^+."""
    e = np.asarray(e, dtype=float)
    tr = np.trace(e)
    if split == "none":
        return 0.5 * params.lame_lambda * tr * tr + params.mu * np.sum(e * e)
    lam = eigensystem(e).values
    trp = max(tr, 0.0)
    return 0.5 * params.lame_lambda * trp * trp + params.mu * float(
        np.sum(np.maximum(lam, 0.0) ** 2)
    )


def energy_minus(e, params: MaterialParams, split: str = "miehe") -> float:
    """Compressive solid energy density E_s^-."""
    e = np.asarray(e, dtype=float)
    if split == "none":
        return 0.0
    tr = np.trace(e)
    lam = eigensystem(e).values
    trm = min(tr, 0.0)
    return 0.5 * params.lame_lambda * trm * trm + params.mu * float(
        np.sum(np.minimum(lam, 0.0) ** 2)
    )


def stress_plus(e, params: MaterialParams, split: str = "miehe") -> np.ndarray:
    """sigma^+ = lambda <tr e>_+ I + 2 mu e^+ (full sigma in isotropic mode)."""
    e = np.asarray(e, dtype=float)
    d = e.shape[0]
    tr = np.trace(e)
    if split == "none":
        return params.lame_lambda * tr * np.eye(d) + 2.0 * params.mu * e
    return params.lame_lambda * max(tr, 0.0) * np.eye(d) + 2.0 * params.mu * positive_part_tensor(e)


def stress_minus(e, params: MaterialParams, split: str = "miehe") -> np.ndarray:
    """Complement so that sigma^+ + sigma^- is the unsplit stress."""
    e = np.asarray(e, dtype=float)
    d = e.shape[0]
    tr = np.trace(e)
    full = params.lame_lambda * tr * np.eye(d) + 2.0 * params.mu * e
    return full - stress_plus(e, params, split)


def eigenvalue_derivative(A, dA, v) -> float:
    """Directional derivative of a simple eigenvalue: v^T dA v."""
    v = np.asarray(v, dtype=float)
    return float(v @ np.asarray(dA, dtype=float) @ v)


def _pseudo_inverse_from(es: EigenSystem, lam: float, scale: float) -> np.ndarray:
    tol = 1e-12 * max(1.0, scale)
    diff = es.values - lam
    with np.errstate(divide="ignore"):
        d_dag = np.where(np.abs(diff) <= tol, 0.0, 1.0 / np.where(diff == 0.0, 1.0, diff))
    return (es.vectors * d_dag) @ es.vectors.T


def pseudo_inverse(A, lam: float) -> np.ndarray:
    """Pseudo-inverse of (A - lam I) for an eigenvalue lam of A.

    Eigenvalues equal to lam (within 1e-12 * max(1, ||A||_F)) map to zero;
    the rest invert.
    """
    A = np.asarray(A, dtype=float)
    return _pseudo_inverse_from(eigensystem(A), lam, float(np.linalg.norm(A)))


def eigenvector_derivative(A, dA, lam: float, v) -> np.ndarray:
    """dv = -(A - lam I)^+ dA v for the eigenpair (lam, v)."""
    return -pseudo_inverse(A, lam) @ np.asarray(dA, dtype=float) @ np.asarray(v, dtype=float)


def d_positive_part(A, dA) -> np.ndarray:
    """Directional derivative of A -> A^+ at A in direction dA.

    Eigenvalues exactly at zero take the tensile branch; repeated
    eigenvalues use the zero rule of the pseudo-inverse.
    """
    A = np.asarray(A, dtype=float)
    dA = np.asarray(dA, dtype=float)
    es = eigensystem(A)
    scale = float(np.linalg.norm(A))
    out = np.zeros_like(A)
    for i, lam in enumerate(es.values):
        vi = es.vectors[:, i]
        dlam = vi @ dA @ vi
        dlam_p = dlam if lam >= 0.0 else 0.0
        lam_p = max(lam, 0.0)
        dvi = -_pseudo_inverse_from(es, lam, scale) @ dA @ vi
        out += dlam_p * np.outer(vi, vi) + lam_p * (np.outer(dvi, vi) + np.outer(vi, dvi))
    return out


def d_stress_plus(e, de, params: MaterialParams, split: str = "miehe") -> np.ndarray:
    """Derivative of sigma^+ in direction de (strict tr e < 0 kills the trace term)."""
    e = np.asarray(e, dtype=float)
    de = np.asarray(de, dtype=float)
    d = e.shape[0]
    if split == "none":
        return params.lame_lambda * np.trace(de) * np.eye(d) + 2.0 * params.mu * de
    trace_term = 0.0 if np.trace(e) < 0.0 else np.trace(de)
    return params.lame_lambda * trace_term * np.eye(d) + 2.0 * params.mu * d_positive_part(e, de)


def d_stress_minus(e, de, params: MaterialParams, split: str = "miehe") -> np.ndarray:
    """Complement: d sigma^+ + d sigma^- equals the linear-elastic action."""
    e = np.asarray(e, dtype=float)
    de = np.asarray(de, dtype=float)
    d = e.shape[0]
    full = params.lame_lambda * np.trace(de) * np.eye(d) + 2.0 * params.mu * de
    return full - d_stress_plus(e, de, params, split)


def d_energy_plus(e, de, params: MaterialParams, split: str = "miehe") -> float:
    """Chain rule through the split: sigma^+(e) : de."""
    return float(np.sum(stress_plus(e, params, split) * np.asarray(de, dtype=float)))


# ---------------------------------------------------------------------------
# lane-batched 2D kernels (arrays of tensor components, masked-select branches)

eigensystem_lanes = _kernels.eig2_lanes
positive_part_lanes = _kernels.positive_part_lanes
d_positive_part_lanes = _kernels.d_positive_part_lanes
energy_split_lanes = _kernels.energy_split_lanes


def stress_split_lanes(e11, e22, e12, params: MaterialParams):
    """Lane-batched (sigma+, sigma-) components for 2D strain lanes."""
    return _kernels.stress_split_lanes(
        np.asarray(e11, float), np.asarray(e22, float), np.asarray(e12, float),
        params.lame_lambda, params.mu,
    )


def d_stress_plus_lanes(e11, e22, e12, de11, de22, de12, params: MaterialParams):
    """Lane-batched derivative of sigma^+ for 2D strain lanes."""
    return _kernels.d_stress_plus_lanes(
        np.asarray(e11, float), np.asarray(e22, float), np.asarray(e12, float),
        np.asarray(de11, float), np.asarray(de22, float), np.asarray(de12, float),
        params.lame_lambda, params.mu,
    )
