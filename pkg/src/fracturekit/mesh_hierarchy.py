"""Nested quadrilateral meshes of the slit unit square with Q_p dof numbering.

The domain is the unit square (coordinates in mm) cut by a horizontal slit
along y = 0.5, x < 0.5.  The slit is realized topologically: nodes on the
slit line are duplicated into a lower and an upper copy, while the slit tip
at (0.5, 0.5) stays shared.  Level ``l`` carries ``2^l x 2^l`` axis-aligned
square cells of side ``2^-l``; level ``l+1`` is the uniform refinement of
level ``l``, so the node sets are nested.

Scalar dofs are numbered lexicographically (x fastest) over the regular
``(p*2^l + 1)^2`` grid, with the upper slit copies appended at the end in
ascending x order.  The full monolithic numbering is component-major:
all u_x dofs, then all u_y, then all phi.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

BOUNDARY_TAGS = ("bottom", "top", "left", "right")

#: components of the monolithic system, in block order
COMPONENTS = ("u_x", "u_y", "phi")


@dataclass(frozen=True)
class MeshLevel:
    """Geometry and topology of one refinement level.

    Vertices are the bilinear (p=1) nodes including the duplicated slit
    copies; ``cells`` references them counterclockwise (SW, SE, NE, NW).
    """

    level_index: int
    cells_per_side: int
    h: float
    vertices: np.ndarray          # (n_vertices, 2) float
    cells: np.ndarray             # (n_cells, 4) int
    boundary_edges: dict          # tag -> (n_edges, 2) int vertex pairs
    slit_edges_lower: np.ndarray  # (n_slit_edges, 2) int vertex pairs
    slit_edges_upper: np.ndarray  # (n_slit_edges, 2) int vertex pairs

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    def edge_cell_counts(self):
        """Map each undirected edge (vertex-id pair) to the number of
        referencing cells.  Used by topology sanity checks."""
        counts: dict[tuple[int, int], int] = {}
        for cell in self.cells:
            for k in range(4):
                a, b = int(cell[k]), int(cell[(k + 1) % 4])
                key = (a, b) if a < b else (b, a)
                counts[key] = counts.get(key, 0) + 1
        return counts


@dataclass(frozen=True)
class DofMap:
    """Continuous Q_p scalar node numbering for one level.

    The same scalar numbering serves all three components; full dof ids are
    ``component * n_scalar + scalar_id``.
    """

    level_index: int
    degree: int
    nodes_per_side: int           # p * 2^l + 1
    n_grid: int                   # nodes_per_side**2
    n_dup: int                    # duplicated slit nodes (upper copies)
    coords: np.ndarray            # (n_scalar, 2) node coordinates
    conn: np.ndarray              # (n_cells, (p+1)^2) scalar ids, x fastest
    boundary_nodes: dict          # tag -> sorted int array of scalar ids
    slit_lower: np.ndarray        # scalar ids of lower copies, ascending x
    slit_upper: np.ndarray        # scalar ids of upper copies, ascending x

    @property
    def n_scalar(self) -> int:
        return self.n_grid + self.n_dup

    @property
    def n_total(self) -> int:
        return 3 * self.n_scalar

    @property
    def n_local(self) -> int:
        return (self.degree + 1) ** 2

    def component_of(self, dof: int) -> str:
        return COMPONENTS[dof // self.n_scalar]

    def scalar_of(self, dof) -> np.ndarray:
        return np.asarray(dof) % self.n_scalar

    def full_dof(self, component: int, scalar_id) -> np.ndarray:
        return component * self.n_scalar + np.asarray(scalar_id)

    def slit_tag(self, scalar_id: int) -> str:
        if scalar_id in set(self.slit_lower.tolist()):
            return "lower"
        if scalar_id >= self.n_grid:
            return "upper"
        return "none"


@dataclass
class ConstraintSet:
    """Dirichlet dofs with prescribed values plus active-set phi dofs."""

    dirichlet_dofs: np.ndarray    # full dof ids
    dirichlet_values: np.ndarray
    active_dofs: np.ndarray       # full dof ids, phi component only
    n_total: int

    def __post_init__(self):
        self.dirichlet_dofs = np.asarray(self.dirichlet_dofs, dtype=np.int64)
        self.dirichlet_values = np.asarray(self.dirichlet_values, dtype=float)
        self.active_dofs = np.asarray(self.active_dofs, dtype=np.int64)
        order = np.argsort(self.dirichlet_dofs, kind="stable")
        self.dirichlet_dofs = self.dirichlet_dofs[order]
        self.dirichlet_values = self.dirichlet_values[order]
        dup = np.flatnonzero(np.diff(self.dirichlet_dofs) == 0)
        if dup.size:
            vals_a = self.dirichlet_values[dup]
            vals_b = self.dirichlet_values[dup + 1]
            if not np.allclose(vals_a, vals_b, rtol=0.0, atol=0.0):
                raise ValueError("conflicting Dirichlet values for the same dof")
            keep = np.ones(self.dirichlet_dofs.size, dtype=bool)
            keep[dup] = False
            self.dirichlet_dofs = self.dirichlet_dofs[keep]
            self.dirichlet_values = self.dirichlet_values[keep]
        n_scalar = self.n_total // 3
        if self.active_dofs.size and (
            self.active_dofs.min() < 2 * n_scalar or self.active_dofs.max() >= self.n_total
        ):
            raise ValueError("active-set entries must be phi-component dofs")

    def kind_of(self, dof: int) -> str:
        if dof in set(self.dirichlet_dofs.tolist()):
            return "dirichlet"
        if dof in set(self.active_dofs.tolist()):
            return "active"
        return "free"

    def constrained_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_total, dtype=bool)
        mask[self.dirichlet_dofs] = True
        mask[self.active_dofs] = True
        return mask


def _scalar_numbering(level: int, degree: int):
    """Scalar node ids, coordinates and cell connectivity for one level."""
    n_side = 2 ** level
    n1 = degree * n_side + 1                      # nodes per direction
    n_grid = n1 * n1
    i_mid = degree * n_side // 2                  # grid index of x=0.5 / y=0.5
    has_slit = level >= 1
    n_dup = i_mid if has_slit else 0

    xs = np.arange(n1) / (n1 - 1)
    gx, gy = np.meshgrid(xs, xs, indexing="xy")   # grid id = j*n1 + i
    coords = np.column_stack([gx.ravel(), gy.ravel()])
    if n_dup:
        dup_coords = np.column_stack([xs[:n_dup], np.full(n_dup, 0.5)])
        coords = np.vstack([coords, dup_coords])

    n_loc = (degree + 1) ** 2
    conn = np.empty((n_side * n_side, n_loc), dtype=np.int64)
    half = n_side // 2
    for cy in range(n_side):
        upper = has_slit and cy >= half
        for cx in range(n_side):
            cell = cy * n_side + cx
            k = 0
            for b in range(degree + 1):
                j = cy * degree + b
                for a in range(degree + 1):
                    i = cx * degree + a
                    gid = j * n1 + i
                    if upper and j == i_mid and i < i_mid:
                        gid = n_grid + i
                    conn[cell, k] = gid
                    k += 1
    return n1, n_grid, n_dup, coords, conn


def _build_dof_map(level: int, degree: int) -> DofMap:
    n1, n_grid, n_dup, coords, conn = _scalar_numbering(level, degree)
    i_mid = (n1 - 1) // 2
    grid_i = np.arange(n_grid) % n1
    grid_j = np.arange(n_grid) // n1

    boundary = {
        "bottom": np.flatnonzero(grid_j == 0),
        "top": np.flatnonzero(grid_j == n1 - 1),
        "left": np.flatnonzero(grid_i == 0),
        "right": np.flatnonzero(grid_i == n1 - 1),
    }
    if n_dup:
        # the duplicated node at (0, 0.5) puts its upper copy on the left too
        boundary["left"] = np.sort(np.append(boundary["left"], n_grid))
        slit_lower = i_mid * n1 + np.arange(n_dup)
        slit_upper = n_grid + np.arange(n_dup)
    else:
        slit_lower = np.empty(0, dtype=np.int64)
        slit_upper = np.empty(0, dtype=np.int64)
    boundary = {tag: np.sort(ids).astype(np.int64) for tag, ids in boundary.items()}

    return DofMap(
        level_index=level,
        degree=degree,
        nodes_per_side=n1,
        n_grid=n_grid,
        n_dup=n_dup,
        coords=coords,
        conn=conn,
        boundary_nodes=boundary,
        slit_lower=slit_lower.astype(np.int64),
        slit_upper=slit_upper.astype(np.int64),
    )


def _build_mesh_level(level: int) -> MeshLevel:
    n1, n_grid, n_dup, coords, conn = _scalar_numbering(level, 1)
    n_side = 2 ** level
    # conn is x-fastest (SW, SE, NW, NE); cells want counterclockwise order
    cells = conn[:, [0, 1, 3, 2]]

    i_mid_v = (n1 - 1) // 2

    def edge_ids(tag):
        nodes = {
            "bottom": [(i, 0) for i in range(n1)],
            "top": [(i, n1 - 1) for i in range(n1)],
            "left": [(0, j) for j in range(n1)],
            "right": [(n1 - 1, j) for j in range(n1)],
        }[tag]
        edges = []
        for (i0, j0), (i1, j1) in zip(nodes[:-1], nodes[1:]):
            ids = []
            for i, j in ((i0, j0), (i1, j1)):
                gid = j * n1 + i
                # left-boundary edges above the slit see the upper node copy
                if n_dup and tag == "left" and i == 0 and j == i_mid_v and min(j0, j1) >= i_mid_v:
                    gid = n_grid
                ids.append(gid)
            edges.append(ids)
        return np.asarray(edges, dtype=np.int64)

    boundary_edges = {tag: edge_ids(tag) for tag in BOUNDARY_TAGS}

    if n_dup:
        i_mid = (n1 - 1) // 2
        lower_nodes = [i_mid * n1 + i for i in range(i_mid)] + [i_mid * n1 + i_mid]
        upper_nodes = [n_grid + i for i in range(i_mid)] + [i_mid * n1 + i_mid]
        slit_lower = np.column_stack([lower_nodes[:-1], lower_nodes[1:]]).astype(np.int64)
        slit_upper = np.column_stack([upper_nodes[:-1], upper_nodes[1:]]).astype(np.int64)
    else:
        slit_lower = np.empty((0, 2), dtype=np.int64)
        slit_upper = np.empty((0, 2), dtype=np.int64)

    return MeshLevel(
        level_index=level,
        cells_per_side=n_side,
        h=1.0 / n_side,
        vertices=coords,
        cells=cells,
        boundary_edges=boundary_edges,
        slit_edges_lower=slit_lower,
        slit_edges_upper=slit_upper,
    )


@dataclass
class MeshHierarchy:
    """Levels 0..max_level of the refined slit square with Q_p dof maps."""

    max_level: int
    degree: int
    levels: list = field(default_factory=list)
    dof_maps: list = field(default_factory=list)
    _injections: dict = field(default_factory=dict, repr=False)

    def level(self, l: int) -> MeshLevel:
        return self.levels[l]

    def dof_map(self, l: int) -> DofMap:
        return self.dof_maps[l]

    def boundary_dofs(self, level: int, tag: str) -> np.ndarray:
        """Displacement dofs (u_x and u_y) on the tagged boundary, ascending."""
        if tag not in BOUNDARY_TAGS:
            raise ValueError(f"unknown boundary tag {tag!r}")
        dm = self.dof_maps[level]
        nodes = dm.boundary_nodes[tag]
        dofs = np.concatenate([nodes, dm.n_scalar + nodes])
        return np.sort(dofs)

    def slit_pairs(self, level: int) -> np.ndarray:
        """(lower_dof, upper_dof) pairs for every duplicated node and component."""
        if level < 1:
            raise ValueError("slit duplication starts at level 1")
        dm = self.dof_maps[level]
        pairs = []
        for comp in range(3):
            off = comp * dm.n_scalar
            for lo, up in zip(dm.slit_lower, dm.slit_upper):
                pairs.append((off + lo, off + up))
        return np.array(pairs, dtype=np.int64).reshape(-1, 2)

    def injection(self, fine_level: int) -> np.ndarray:
        """Index array mapping fine scalar values onto the next coarser level.

        ``coarse_values = fine_values[injection(fine_level)]`` samples the
        fine coefficients at the coincident coarse nodes; slit copies map to
        the copy on the same side.
        """
        if fine_level in self._injections:
            return self._injections[fine_level]
        if fine_level < 1:
            raise ValueError("level 0 has no coarser level")
        fine = self.dof_maps[fine_level]
        coarse = self.dof_maps[fine_level - 1]
        nc, nf = coarse.nodes_per_side, fine.nodes_per_side
        idx_i = np.arange(nc) * 2  # coarse grid index -> fine grid index
        jj, ii = np.meshgrid(idx_i, idx_i, indexing="ij")
        inj = (jj * nf + ii).ravel()
        if coarse.n_dup:
            # upper copy i on coarse sits at fine upper copy 2i
            inj = np.append(inj, fine.n_grid + 2 * np.arange(coarse.n_dup))
        inj = inj.astype(np.int64)
        self._injections[fine_level] = inj
        return inj

    def dump_level(self, level: int) -> str:
        """Plain-text node/cell listing, one record per line (debug aid)."""
        mesh = self.levels[level]
        dm = self.dof_maps[level]
        lines = [f"level {level} cells {mesh.n_cells} scalar_dofs {dm.n_scalar}"]
        for vid, (x, y) in enumerate(mesh.vertices):
            lines.append(f"vertex {vid} {x:.12g} {y:.12g}")
        for cid, cell in enumerate(mesh.cells):
            lines.append("cell {} {}".format(cid, " ".join(str(int(v)) for v in cell)))
        return "\n".join(lines) + "\n"


def build_hierarchy(max_level: int, degree: int) -> MeshHierarchy:
    """Build levels 0..max_level; the finest level is the simulation level.

    ``max_level < 2`` is rejected: the multigrid coarse solve lives on
    level 2 and a shallower hierarchy leaves it undefined.
    """
    if max_level < 2:
        raise ValueError("max_level must be >= 2 (coarse solve is on level 2)")
    if degree < 1:
        raise ValueError("degree must be >= 1")
    hierarchy = MeshHierarchy(max_level=max_level, degree=degree)
    for l in range(max_level + 1):
        hierarchy.levels.append(_build_mesh_level(l))
        hierarchy.dof_maps.append(_build_dof_map(l, degree))
    return hierarchy
