"""CSV and legacy-VTK writers for simulation output."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .mesh_hierarchy import DofMap

CSV_HEADER = "step,time_s,u_applied_mm,load_x_kN,load_y_kN,as_iters,gmres_iters_total,active_dofs,wall_s"
BENCH_CSV_HEADER = "kind,degree,level,dofs,best_time_s,reps"


def format_load_row(rec) -> str:
    return (
        f"{rec.step},{rec.time_s:.10g},{rec.u_applied_mm:.10g},"
        f"{rec.load_x_kN:.12g},{rec.load_y_kN:.12g},{rec.as_iters},"
        f"{rec.gmres_iters_total},{rec.active_dofs},{rec.wall_s:.6g}"
    )


def write_load_csv(records, path) -> None:
    """Load-displacement table; LF endings, '.' decimal separator."""
    lines = [CSV_HEADER] + [format_load_row(r) for r in records]
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")


def write_bench_csv(records, path) -> None:
    lines = [BENCH_CSV_HEADER]
    for r in records:
        lines.append(f"{r.kind},{r.degree},{r.level},{r.dofs},{r.best_time_s:.9g},{r.reps}")
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")


def vtk_text(dof_map: DofMap, U: np.ndarray) -> str:
    """Legacy ASCII unstructured grid with point data u (vector) and phi.

    Points are the scalar Q_p nodes (slit copies included); every mesh cell
    is written as p x p bilinear sub-quads over its node grid, so higher
    degrees keep all coefficients.
    """
    n = dof_map.n_scalar
    p = dof_map.degree
    coords = dof_map.coords
    conn = dof_map.conn
    ux, uy, phi = U[:n], U[n : 2 * n], U[2 * n :]

    out = [
        "# vtk DataFile Version 3.0",
        "fracturekit snapshot",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {n} double",
    ]
    out.extend(f"{x:.12g} {y:.12g} 0" for x, y in coords)
    n_sub = conn.shape[0] * p * p
    out.append(f"CELLS {n_sub} {5 * n_sub}")
    n1 = p + 1
    for cell_conn in conn:
        for b in range(p):
            for a in range(p):
                out.append(
                    "4 {} {} {} {}".format(
                        cell_conn[b * n1 + a],
                        cell_conn[b * n1 + a + 1],
                        cell_conn[(b + 1) * n1 + a + 1],
                        cell_conn[(b + 1) * n1 + a],
                    )
                )
    out.append(f"CELL_TYPES {n_sub}")
    out.extend("9" for _ in range(n_sub))
    out.append(f"POINT_DATA {n}")
    out.append("VECTORS u double")
    out.extend(f"{a:.12g} {b:.12g} 0" for a, b in zip(ux, uy))
    out.append("SCALARS phi double 1")
    out.append("LOOKUP_TABLE default")
    out.extend(f"{v:.12g}" for v in phi)
    return "\n".join(out) + "\n"


def write_vtk(dof_map: DofMap, U: np.ndarray, path) -> None:
    Path(path).write_text(vtk_text(dof_map, U), newline="\n")
