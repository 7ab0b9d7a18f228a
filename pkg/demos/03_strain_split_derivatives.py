"""Spectral strain split and its analytic directional derivatives.

The tensile/compressive split rests on the closed-form eigensystem of the
strain tensor; its derivative needs eigenvalue and eigenvector derivatives,
the latter through a pseudo-inverse.  Everything is checked against central
finite differences here.
"""

import numpy as np

from fracturekit import (MaterialParams, d_positive_part, d_stress_plus,
                         eigensystem, eigenvalue_derivative,
                         eigenvector_derivative, energy_minus, energy_plus,
                         positive_part_tensor, pseudo_inverse, stress_minus,
                         stress_plus)

params = MaterialParams()   # single-edge notched test configuration
rng = np.random.default_rng(1)

e = np.array([[0.004, -0.002], [-0.002, -0.001]])
es = eigensystem(e)
print("strain eigenvalues:", es.values)
print("tensile part:\n", positive_part_tensor(e))
print("energy split: E+ = %.6g, E- = %.6g (sum matches %.6g)" % (
    energy_plus(e, params), energy_minus(e, params),
    0.5 * params.lame_lambda * np.trace(e) ** 2 + params.mu * np.sum(e * e)))

# stress split sums to the unsplit stress
full = params.lame_lambda * np.trace(e) * np.eye(2) + 2 * params.mu * e
gap = np.abs(stress_plus(e, params) + stress_minus(e, params) - full).max()
print(f"sigma+ + sigma- vs unsplit: max gap {gap:.2e}")

# the worked eigenvector-derivative example: dv = (0, -4)
A = np.diag([1.0, 2.0])
dA = np.array([[3.0, 4.0], [4.0, 5.0]])
print("\ndlambda for (1, (1,0)):", eigenvalue_derivative(A, dA, [1.0, 0.0]))
print("pseudo-inverse of (A - 1*I):\n", pseudo_inverse(A, 1.0))
print("dv:", eigenvector_derivative(A, dA, 1.0, [1.0, 0.0]))

# finite-difference check of the tensile-part derivative
def clip_positive(B):
    lam, V = np.linalg.eigh(B)
    return (V * np.maximum(lam, 0)) @ V.T

h = 1e-6
A = np.array([[0.9, 0.3], [0.3, -0.5]])
dA = np.array([[0.2, -0.1], [-0.1, 0.4]])
fd = (clip_positive(A + h * dA) - clip_positive(A - h * dA)) / (2 * h)
an = d_positive_part(A, dA)
print(f"\nd(A+) analytic vs finite differences: max gap {np.abs(an - fd).max():.2e}")

fd_sig = (stress_plus(A + h * dA, params) - stress_plus(A - h * dA, params)) / (2 * h)
print(f"d(sigma+) analytic vs finite differences: "
      f"max gap {np.abs(d_stress_plus(A, dA, params) - fd_sig).max():.2e}")
