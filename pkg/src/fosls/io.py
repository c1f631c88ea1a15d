"""Convergence tables (CSV) and legacy ASCII VTK export."""
from __future__ import annotations

import csv
import io
import math
from pathlib import Path

import numpy as np

from .mesh import Mesh

CSV_COLUMNS = ["level", "triangles", "dofs", "eta", "error_norm", "eff_index",
               "marked", "t_assembly_s", "t_solve_s"]


def _num(x) -> str:
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return ""
    return f"{x:.17e}"


def convergence_rows(record, timings: bool = True):
    for L in record.levels:
        has_error = L.error is not None
        eff = L.eff_index if has_error else None
        yield [str(L.level), str(L.triangles), str(L.dofs), _num(L.eta),
               _num(L.error_norm) if has_error else "",
               _num(eff) if has_error else "",
               str(L.marked),
               f"{L.t_assembly_s:.6f}" if timings else "",
               f"{L.t_solve_s:.6f}" if timings else ""]


def convergence_csv(record, timings: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    w.writerows(convergence_rows(record, timings))
    return buf.getvalue()


def write_convergence_csv(record, path, timings: bool = True) -> Path:
    """One row per level; error columns stay empty without an exact solution.

    With ``timings=False`` the timing columns are left empty so repeated runs
    give byte-identical files.
    """
    path = Path(path)
    path.write_text(convergence_csv(record, timings), encoding="ascii")
    return path


def write_vtk(path, mesh: Mesh, point_data: dict | None = None,
              cell_data: dict | None = None, title: str = "fosls mesh") -> Path:
    """Legacy ASCII VTK unstructured grid with triangle cells (type 5)."""
    path = Path(path)
    lines = ["# vtk DataFile Version 3.0", title[:255], "ASCII", "DATASET UNSTRUCTURED_GRID"]
    n, t = mesh.n_vertices, mesh.n_triangles
    lines.append(f"POINTS {n} double")
    lines.extend(f"{x:.17g} {y:.17g} 0" for x, y in mesh.vertices)
    lines.append(f"CELLS {t} {4 * t}")
    lines.extend(f"3 {a} {b} {c}" for a, b, c in mesh.triangles)
    lines.append(f"CELL_TYPES {t}")
    lines.extend(["5"] * t)
    if point_data:
        lines.append(f"POINT_DATA {n}")
        lines.extend(_scalars(point_data, n))
    if cell_data:
        lines.append(f"CELL_DATA {t}")
        lines.extend(_scalars(cell_data, t))
    path.write_text("\n".join(lines) + "\n", encoding="ascii")
    return path


def _scalars(data, size):
    for name, values in data.items():
        values = np.asarray(values, dtype=float).reshape(-1)
        if len(values) != size:
            raise ValueError(f"field {name!r} has {len(values)} values, expected {size}")
        yield f"SCALARS {name} double 1"
        yield "LOOKUP_TABLE default"
        yield from (f"{v:.17g}" for v in values)


def write_level_vtk(path, mesh, solution, indicators, classification) -> Path:
    """Mesh with ``u`` at vertices and ``eta_K``, ``pe_class``, ``sigma_mag`` per cell."""
    return write_vtk(
        path, mesh,
        point_data={"u": solution.vertex_values()},
        cell_data={"eta_K": indicators.eta_K,
                   "pe_class": classification.convective.astype(float),
                   "sigma_mag": solution.sigma_cell_average()})
