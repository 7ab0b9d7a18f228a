"""Nested slit-square meshes and Q_p dof numbering.

Builds the refinement hierarchy, shows how the slit is realized by
duplicated nodes (two copies along y = 0.5, x < 0.5, shared tip), and dumps
the coarse mesh as plain text.
"""

import numpy as np

from fracturekit import build_hierarchy

hierarchy = build_hierarchy(max_level=4, degree=2)

print("level  cells  scalar dofs  total dofs")
for l in range(5):
    dm = hierarchy.dof_map(l)
    print(f"{l:>5}  {hierarchy.level(l).n_cells:>5}  {dm.n_scalar:>11}  {dm.n_total:>10}")

# the slit: one lower and one upper copy per duplicated node, per component
pairs = hierarchy.slit_pairs(3)
dm = hierarchy.dof_map(3)
print(f"\nlevel 3 carries {len(pairs)} slit dof pairs "
      f"({dm.n_dup} duplicated nodes x 3 components)")
lo, up = pairs[0]
print("first pair: dofs", lo, up, "share the coordinates",
      dm.coords[dm.scalar_of(lo)], dm.coords[dm.scalar_of(up)])

# boundary dof queries drive the Dirichlet program of the simulations
for tag in ("bottom", "top"):
    print(f"level 3 {tag}: {len(hierarchy.boundary_dofs(3, tag))} displacement dofs")

# nodes of consecutive levels are nested; injection picks coincident ones
inj = hierarchy.injection(3)
fine = hierarchy.dof_map(3)
coarse = hierarchy.dof_map(2)
assert np.allclose(coarse.coords, fine.coords[inj])
print("\ninjection maps every level-2 node onto a coincident level-3 node")

print("\ncoarse mesh dump (first lines):")
print("\n".join(hierarchy.dump_level(0).splitlines()[:6]))
