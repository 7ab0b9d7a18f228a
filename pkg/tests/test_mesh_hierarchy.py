import numpy as np
import pytest

from fracturekit.mesh_hierarchy import ConstraintSet, build_hierarchy


def count_nodes_by_walking_cells(level, degree):
    """Independent node-count oracle: enumerate per-cell node coordinates and
    deduplicate by (position, side-of-slit) keys."""
    n_side = 2 ** level
    h = 1.0 / n_side
    seen = set()
    for cy in range(n_side):
        for cx in range(n_side):
            cell_mid_y = (cy + 0.5) * h
            for b in range(degree + 1):
                for a in range(degree + 1):
                    x = (cx * degree + a) / (degree * n_side)
                    y = (cy * degree + b) / (degree * n_side)
                    on_slit = level >= 1 and abs(y - 0.5) < 1e-14 and x < 0.5 - 1e-14
                    side = (cell_mid_y > 0.5) if on_slit else False
                    seen.add((round(x * 1e12), round(y * 1e12), side))
    return len(seen)


class TestBuildHierarchy:
    def test_coarse_level_has_16_cells(self):
        h = build_hierarchy(2, 1)
        assert h.level(2).n_cells == 16

    def test_scalar_dofs_l2_p1(self):
        # hand count: 5x5 grid plus duplicated slit nodes at x in {0, 0.25}
        h = build_hierarchy(2, 1)
        assert h.dof_map(2).n_scalar == 27
        assert h.dof_map(2).n_total == 81

    def test_scalar_dofs_l3_p2(self):
        h = build_hierarchy(3, 2)
        assert h.dof_map(3).n_scalar == 297
        assert h.dof_map(3).n_total == 891

    @pytest.mark.parametrize("level,degree", [(2, 1), (3, 2), (3, 3), (4, 1)])
    def test_counts_match_walking_oracle(self, level, degree):
        h = build_hierarchy(level, degree)
        assert h.dof_map(level).n_scalar == count_nodes_by_walking_cells(level, degree)

    @pytest.mark.parametrize("level,degree", [(2, 1), (3, 2), (4, 3)])
    def test_count_formula(self, level, degree):
        h = build_hierarchy(level, degree)
        expected = (degree * 2 ** level + 1) ** 2 + degree * 2 ** (level - 1)
        assert h.dof_map(level).n_scalar == expected

    def test_rejects_shallow_hierarchy(self):
        with pytest.raises(ValueError):
            build_hierarchy(1, 1)

    def test_rejects_degree_zero(self):
        with pytest.raises(ValueError):
            build_hierarchy(3, 0)

    def test_cell_count_per_level(self):
        h = build_hierarchy(4, 1)
        for l in range(5):
            assert h.level(l).n_cells == 4 ** l


class TestBoundaryDofs:
    def test_bottom_l2_p1(self):
        h = build_hierarchy(2, 1)
        assert len(h.boundary_dofs(2, "bottom")) == 10

    def test_top_l2_p1(self):
        h = build_hierarchy(2, 1)
        assert len(h.boundary_dofs(2, "top")) == 10

    def test_top_l3_p3(self):
        h = build_hierarchy(3, 3)
        assert len(h.boundary_dofs(3, "top")) == 2 * (3 * 8 + 1)

    def test_sorted_ascending(self):
        h = build_hierarchy(3, 2)
        for tag in ("bottom", "top", "left", "right"):
            d = h.boundary_dofs(3, tag)
            assert np.all(np.diff(d) > 0)

    def test_unknown_tag(self):
        h = build_hierarchy(2, 1)
        with pytest.raises(ValueError):
            h.boundary_dofs(2, "diagonal")

    def test_boundary_nodes_lie_on_boundary(self):
        h = build_hierarchy(3, 2)
        dm = h.dof_map(3)
        coords = {"bottom": (1, 0.0), "top": (1, 1.0), "left": (0, 0.0), "right": (0, 1.0)}
        for tag, (axis, value) in coords.items():
            nodes = dm.boundary_nodes[tag]
            assert np.allclose(dm.coords[nodes][:, axis], value)


class TestSlitPairs:
    def slit_node_oracle(self, level, degree):
        # nodes on y = 0.5 with x < 0.5, tip excluded
        xs = np.arange(degree * 2 ** level + 1) / (degree * 2 ** level)
        return int(np.sum(xs < 0.5))

    def test_pair_count_l2_p1(self):
        h = build_hierarchy(2, 1)
        pairs = h.slit_pairs(2)
        assert pairs.shape == (3 * self.slit_node_oracle(2, 1), 2)
        assert self.slit_node_oracle(2, 1) == 2

    def test_pair_count_l1_p1(self):
        h = build_hierarchy(2, 1)
        assert h.slit_pairs(1).shape[0] == 3 * 1

    def test_tip_never_paired(self):
        h = build_hierarchy(3, 2)
        dm = h.dof_map(3)
        pairs = h.slit_pairs(3)
        scalar_ids = np.unique(pairs % dm.n_scalar)
        for sid in scalar_ids:
            assert not np.allclose(dm.coords[sid], [0.5, 0.5])

    def test_copies_share_coordinates(self):
        # duplication is topological, not geometric
        h = build_hierarchy(3, 3)
        dm = h.dof_map(3)
        for lo, up in zip(dm.slit_lower, dm.slit_upper):
            assert np.allclose(dm.coords[lo], dm.coords[up])

    def test_lower_attaches_below_upper_above(self):
        h = build_hierarchy(3, 1)
        dm = h.dof_map(3)
        mesh = h.level(3)
        n_side = mesh.cells_per_side
        lower = set(dm.slit_lower.tolist())
        upper = set(dm.slit_upper.tolist())
        for cell in range(mesh.n_cells):
            cy = cell // n_side
            below = cy < n_side // 2
            for gid in dm.conn[cell]:
                if gid in lower:
                    assert below
                if gid in upper:
                    assert not below


class TestTopology:
    def test_no_orphan_dofs(self):
        for level, degree in [(2, 1), (3, 2)]:
            h = build_hierarchy(level, degree)
            for l in range(level + 1):
                dm = h.dof_map(l)
                assert len(np.unique(dm.conn)) == dm.n_scalar

    def test_mesh_nesting(self):
        h = build_hierarchy(3, 1)
        for l in range(3):
            coarse, fine = h.level(l), h.level(l + 1)
            nf = fine.cells_per_side
            for cell in range(coarse.n_cells):
                cx, cy = cell % coarse.cells_per_side, cell // coarse.cells_per_side
                cmin = coarse.vertices[coarse.cells[cell]].min(axis=0)
                cmax = coarse.vertices[coarse.cells[cell]].max(axis=0)
                children = [
                    (2 * cy + dy) * nf + (2 * cx + dx) for dy in (0, 1) for dx in (0, 1)
                ]
                fmin = np.min([fine.vertices[fine.cells[c]].min(axis=0) for c in children], axis=0)
                fmax = np.max([fine.vertices[fine.cells[c]].max(axis=0) for c in children], axis=0)
                assert np.allclose(cmin, fmin) and np.allclose(cmax, fmax)

    def test_edge_sharing(self):
        h = build_hierarchy(3, 1)
        mesh = h.level(3)
        counts = mesh.edge_cell_counts()
        boundary = set()
        for edges in mesh.boundary_edges.values():
            for a, b in edges:
                boundary.add((min(a, b), max(a, b)))
        slit = set()
        for edges in (mesh.slit_edges_lower, mesh.slit_edges_upper):
            for a, b in edges:
                slit.add((min(a, b), max(a, b)))
        for edge, cnt in counts.items():
            if edge in boundary or edge in slit:
                assert cnt == 1
            else:
                assert cnt == 2

    def test_injection_hits_coincident_nodes(self):
        h = build_hierarchy(4, 2)
        for fine in (3, 4):
            inj = h.injection(fine)
            cc = h.dof_map(fine - 1).coords
            fc = h.dof_map(fine).coords[inj]
            assert np.allclose(cc, fc)

    def test_injection_respects_slit_sides(self):
        h = build_hierarchy(3, 1)
        inj = h.injection(3)
        dmc, dmf = h.dof_map(2), h.dof_map(3)
        upper_f = set(dmf.slit_upper.tolist())
        lower_f = set(dmf.slit_lower.tolist())
        for cid in dmc.slit_upper:
            assert int(inj[cid]) in upper_f
        for cid in dmc.slit_lower:
            assert int(inj[cid]) in lower_f


class TestConstraintSet:
    def test_conflicting_values_rejected(self):
        with pytest.raises(ValueError):
            ConstraintSet(np.array([3, 3]), np.array([1.0, 2.0]), np.array([], dtype=int), 81)

    def test_duplicate_consistent_values_merged(self):
        cs = ConstraintSet(np.array([3, 3]), np.array([1.0, 1.0]), np.array([], dtype=int), 81)
        assert cs.dirichlet_dofs.tolist() == [3]

    def test_active_must_be_phi(self):
        with pytest.raises(ValueError):
            ConstraintSet(np.array([], dtype=int), np.array([]), np.array([5]), 81)
        cs = ConstraintSet(np.array([], dtype=int), np.array([]), np.array([60]), 81)
        assert cs.kind_of(60) == "active"

    def test_constrained_mask(self):
        cs = ConstraintSet(np.array([1]), np.array([0.5]), np.array([60]), 81)
        mask = cs.constrained_mask()
        assert mask[1] and mask[60] and mask.sum() == 2


def test_dump_level_one_record_per_line():
    h = build_hierarchy(2, 1)
    text = h.dump_level(2)
    lines = text.strip().split("\n")
    mesh = h.level(2)
    assert len(lines) == 1 + len(mesh.vertices) + mesh.n_cells
    assert lines[1].startswith("vertex 0 ")
