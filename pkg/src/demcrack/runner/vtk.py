"""Legacy ASCII VTK snapshots of cell fields and the crack."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..mesh import CRACKED, Mesh

VTK_LINE = 3
VTK_TRIANGLE = 5


def _rows(fh, arr, fmt="%.17g"):
    np.savetxt(fh, np.atleast_2d(arr), fmt=fmt)


def write_vtk_snapshot(mesh: Mesh, u: np.ndarray, stress: np.ndarray, state=None,
                       path="snapshot.vtk", title: str = "demcrack snapshot") -> Path:
    """Write an unstructured-grid snapshot.

    Triangles come first, followed by one line cell per cracked facet.
    ``u`` holds the cell displacements (nC*dim or (nC, dim)), ``stress``
    the cell stresses (nC, dim, 2).  Antiplane displacements are written as
    the z component.  ``state`` (a fracture state or ``None``) only
    selects which facets are drawn; by default every cracked facet is.
    """
    nc = mesh.n_cells
    U = np.asarray(u, dtype=float).reshape(nc, -1)
    S = np.asarray(stress, dtype=float).reshape(nc, -1, 2)
    d = U.shape[1]
    if d not in (1, 2) or S.shape[1] != d:
        raise ValueError("inconsistent displacement and stress sizes")
    if state is not None and getattr(state, "crack_facets", None) is not None:
        cracks = np.asarray(state.crack_facets, dtype=np.int64)
    else:
        cracks = np.flatnonzero(mesh.status == CRACKED)
    nl = len(cracks)
    disp = np.zeros((nc + nl, 3))
    if d == 2:
        disp[:nc, :2] = U
        comps = {"sigma_xx": S[:, 0, 0], "sigma_xy": S[:, 0, 1], "sigma_yy": S[:, 1, 1]}
    else:
        disp[:nc, 2] = U[:, 0]
        comps = {"sigma_xz": S[:, 0, 0], "sigma_yz": S[:, 0, 1]}

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pts = np.zeros((mesh.n_vertices, 3))
    pts[:, :2] = mesh.vertices
    with path.open("w") as fh:
        fh.write(f"# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {mesh.n_vertices} double\n")
        _rows(fh, pts)
        fh.write(f"CELLS {nc + nl} {4 * nc + 3 * nl}\n")
        _rows(fh, np.column_stack([np.full(nc, 3), mesh.cells]), "%d")
        if nl:
            _rows(fh, np.column_stack([np.full(nl, 2), mesh.facet_vertices[cracks]]), "%d")
        fh.write(f"CELL_TYPES {nc + nl}\n")
        _rows(fh, np.r_[np.full(nc, VTK_TRIANGLE), np.full(nl, VTK_LINE)][:, None], "%d")
        fh.write(f"CELL_DATA {nc + nl}\n")
        fh.write("VECTORS displacement double\n")
        _rows(fh, disp)
        for name, vals in comps.items():
            fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            _rows(fh, np.r_[vals, np.zeros(nl)][:, None])
        fh.write("SCALARS crack int 1\nLOOKUP_TABLE default\n")
        _rows(fh, np.r_[np.zeros(nc, dtype=int), np.ones(nl, dtype=int)][:, None], "%d")
    return path


def read_vtk_cells(path) -> dict:
    """Minimal reader returning points, cells and cell types of a snapshot."""
    tokens = Path(path).read_text().split("\n")
    out: dict = {}
    i = 0
    while i < len(tokens):
        line = tokens[i].split()
        if not line:
            i += 1
            continue
        if line[0] == "POINTS":
            n = int(line[1])
            out["points"] = np.loadtxt(tokens[i + 1:i + 1 + n], ndmin=2)
            i += n + 1
        elif line[0] == "CELLS":
            n = int(line[1])
            out["cells"] = [tuple(int(x) for x in t.split()[1:]) for t in tokens[i + 1:i + 1 + n]]
            i += n + 1
        elif line[0] == "CELL_TYPES":
            n = int(line[1])
            out["types"] = np.array([int(t) for t in tokens[i + 1:i + 1 + n]])
            i += n + 1
        else:
            i += 1
    return out


def snapshot_name(k: int, prefix: str = "snapshot") -> str:
    return f"{prefix}_{k:05d}.vtk"

