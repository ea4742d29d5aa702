"""Triangle mesh with a mutable facet classification.

Geometry and topology are fixed at construction.  Only the facet status
changes during a simulation: interior facets become ``CRACKED`` when the
crack goes through them.  A cracked facet keeps both neighbour cells; the
two sides are interpreted as two one-sided boundary facets downstream.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np

INTERIOR = 0
BOUNDARY_DIRICHLET = 1
BOUNDARY_NEUMANN = 2
CRACKED = 3

STATUS_NAMES = {
    INTERIOR: "INTERIOR",
    BOUNDARY_DIRICHLET: "BOUNDARY_DIRICHLET",
    BOUNDARY_NEUMANN: "BOUNDARY_NEUMANN",
    CRACKED: "CRACKED",
}

# local facet i of a cell joins local vertices (i+1, i+2), i.e. it is opposite vertex i
_LOCAL_EDGES = np.array([[1, 2], [2, 0], [0, 1]])

TaggingRule = Union[
    Callable[[np.ndarray], Sequence[Optional[str]]],
    Mapping[str, Callable[[np.ndarray], np.ndarray]],
]


class MeshError(ValueError):
    """Invalid mesh input or illegal topology operation.

    ``entity`` names the offending object, e.g. ``("cell", 12)``.
    """

    def __init__(self, message: str, entity: Optional[tuple] = None):
        super().__init__(message)
        self.entity = entity


@dataclass(frozen=True)
class FacetPartition:
    interior: np.ndarray
    boundary_dirichlet: np.ndarray
    boundary_neumann: np.ndarray
    crack: np.ndarray

    def check(self, n_facets: int) -> None:
        allf = np.concatenate(
            [self.interior, self.boundary_dirichlet, self.boundary_neumann, self.crack]
        )
        if allf.size != n_facets or np.unique(allf).size != n_facets:
            raise MeshError("facet partition is not a disjoint cover of the facets")


class Mesh:
    """Triangle mesh, cell-centred view.

    Attributes
    ----------
    vertices : (nV, 2) float
    cells : (nC, 3) int, counter-clockwise
    facet_vertices : (nF, 2) int
    facet_cells : (nF, 2) int, ``[c_minus, c_plus]`` with ``-1`` for none
    cell_facets : (nC, 3) int, local facet ``i`` is opposite local vertex ``i``
    cell_sides : (nC, 3) int, 0 if the cell is ``c_minus`` of that facet else 1
    facet_normals : (nF, 2) unit normals from ``c_minus`` to ``c_plus``
    status : (nF,) int8 facet status codes
    boundary_tag : (nF,) object, region label or ``None``
    """

    def __init__(self, vertices, cells, facet_vertices, facet_cells, cell_facets,
                 boundary_tag):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        self.cells = np.ascontiguousarray(cells, dtype=np.int64)
        self.facet_vertices = np.ascontiguousarray(facet_vertices, dtype=np.int64)
        self.facet_cells = np.ascontiguousarray(facet_cells, dtype=np.int64)
        self.cell_facets = np.ascontiguousarray(cell_facets, dtype=np.int64)
        self.boundary_tag = np.asarray(boundary_tag, dtype=object)

        nc = self.n_cells
        sides = (self.facet_cells[self.cell_facets, 0] != np.arange(nc)[:, None])
        self.cell_sides = sides.astype(np.int64)

        p = self.vertices[self.cells]
        self.cell_barycenters = p.mean(axis=1)
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        self.cell_areas = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

        q = self.vertices[self.facet_vertices]
        self.facet_barycenters = q.mean(axis=1)
        t = q[:, 1] - q[:, 0]
        self.facet_lengths = np.hypot(t[:, 0], t[:, 1])
        n = np.column_stack([t[:, 1], -t[:, 0]]) / self.facet_lengths[:, None]
        # orient from c_minus outwards
        away = self.facet_barycenters - self.cell_barycenters[self.facet_cells[:, 0]]
        flip = np.einsum("ij,ij->i", n, away) < 0
        n[flip] *= -1.0
        self.facet_normals = n

        self.status = np.where(self.facet_cells[:, 1] >= 0, INTERIOR,
                               BOUNDARY_NEUMANN).astype(np.int8)
        self.on_outer_boundary = self.facet_cells[:, 1] < 0
        self._build_vertex_maps()

    # ------------------------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_facets(self) -> int:
        return len(self.facet_vertices)

    @property
    def facet_diameters(self) -> np.ndarray:
        return self.facet_lengths

    @property
    def h_max(self) -> float:
        """Largest cell diameter (longest edge)."""
        return float(self.facet_lengths.max())

    @property
    def bbox(self) -> tuple:
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return (lo[0], lo[1], hi[0], hi[1])

    def outward_normals(self) -> np.ndarray:
        """``n_{F,c}`` for every (cell, local facet), shape (nC, 3, 2)."""
        n = self.facet_normals[self.cell_facets]
        sign = np.where(self.cell_sides == 0, 1.0, -1.0)
        return n * sign[:, :, None]

    def _build_vertex_maps(self) -> None:
        nv = self.n_vertices
        fv = self.facet_vertices.ravel()
        order = np.argsort(fv, kind="stable")
        self.vertex_facet_ptr = np.zeros(nv + 1, dtype=np.int64)
        np.add.at(self.vertex_facet_ptr, fv + 1, 1)
        self.vertex_facet_ptr = np.cumsum(self.vertex_facet_ptr)
        self.vertex_facet_idx = (order // 2).astype(np.int64)

        cv = self.cells.ravel()
        order = np.argsort(cv, kind="stable")
        self.vertex_cell_ptr = np.zeros(nv + 1, dtype=np.int64)
        np.add.at(self.vertex_cell_ptr, cv + 1, 1)
        self.vertex_cell_ptr = np.cumsum(self.vertex_cell_ptr)
        self.vertex_cell_idx = (order // 3).astype(np.int64)

        bnd = self.facet_vertices[self.on_outer_boundary].ravel()
        self.boundary_vertex = np.zeros(nv, dtype=bool)
        self.boundary_vertex[bnd] = True

    def vertex_facets(self, v: int) -> np.ndarray:
        return self.vertex_facet_idx[self.vertex_facet_ptr[v]:self.vertex_facet_ptr[v + 1]]

    def vertex_cells(self, v: int) -> np.ndarray:
        return self.vertex_cell_idx[self.vertex_cell_ptr[v]:self.vertex_cell_ptr[v + 1]]

    def other_cell(self, facet: int, cell: int) -> int:
        a, b = self.facet_cells[facet]
        return b if a == cell else a

    def face_neighbors(self, cell: int, exclude_facet: int = -1) -> list:
        """Cells sharing an uncracked interior facet with ``cell``."""
        out = []
        for f in self.cell_facets[cell]:
            if f != exclude_facet and self.status[f] == INTERIOR:
                out.append(int(self.other_cell(f, cell)))
        return out

    def vertex_ring(self, cell: int) -> np.ndarray:
        """Cells sharing at least one vertex with ``cell`` (``cell`` included)."""
        parts = [self.vertex_cells(v) for v in self.cells[cell]]
        return np.unique(np.concatenate(parts))

    # ------------------------------------------------------------------
    def partition(self) -> FacetPartition:
        s = self.status
        return FacetPartition(
            interior=np.flatnonzero(s == INTERIOR),
            boundary_dirichlet=np.flatnonzero(s == BOUNDARY_DIRICHLET),
            boundary_neumann=np.flatnonzero(s == BOUNDARY_NEUMANN),
            crack=np.flatnonzero(s == CRACKED),
        )

    def set_dirichlet_tags(self, tags) -> None:
        """Classify outer boundary facets: tags in ``tags`` become Dirichlet."""
        tags = set(tags)
        bnd = np.flatnonzero(self.on_outer_boundary)
        for f in bnd:
            self.status[f] = (BOUNDARY_DIRICHLET if self.boundary_tag[f] in tags
                              else BOUNDARY_NEUMANN)

    def split_facet(self, facet_id: int) -> None:
        """Crack an interior facet.  Geometry is left untouched."""
        f = int(facet_id)
        if f < 0 or f >= self.n_facets:
            raise MeshError(f"facet {f} does not exist", ("facet", f))
        if self.status[f] != INTERIOR:
            raise MeshError(
                f"facet {f} is {STATUS_NAMES[int(self.status[f])]}, only interior "
                "facets can be split", ("facet", f))
        self.status[f] = CRACKED

    def normal_sum_residual(self) -> np.ndarray:
        """Per cell ``|sum_F |F| n_{F,c}| / sum_F |F|``."""
        n = self.outward_normals()
        lf = self.facet_lengths[self.cell_facets]
        s = np.einsum("cf,cfj->cj", lf, n)
        return np.hypot(s[:, 0], s[:, 1]) / lf.sum(axis=1)

    def copy(self) -> "Mesh":
        m = Mesh(self.vertices, self.cells, self.facet_vertices, self.facet_cells,
                 self.cell_facets, self.boundary_tag.copy())
        m.status = self.status.copy()
        return m


def _apply_rule(rule: Optional[TaggingRule], midpoints: np.ndarray) -> list:
    if rule is None or len(midpoints) == 0:
        return [None] * len(midpoints)
    if callable(rule):
        tags = list(rule(midpoints))
        if len(tags) != len(midpoints):
            raise MeshError("tagging rule returned the wrong number of tags")
        return tags
    tags = [None] * len(midpoints)
    for name, pred in rule.items():
        mask = np.asarray(pred(midpoints), dtype=bool)
        for i in np.flatnonzero(mask):
            if tags[i] is None:
                tags[i] = name
    return tags


def build_mesh(vertices, cells, boundary_tagging_rule: Optional[TaggingRule] = None,
               dirichlet_tags: Sequence[str] = (), reorient: bool = False) -> Mesh:
    """Build adjacency, geometry and the initial facet partition.

    ``boundary_tagging_rule`` is either a callable mapping boundary facet
    midpoints ``(m, 2)`` to labels, or a mapping ``label -> predicate`` where
    the first matching predicate wins.  Boundary facets whose label is in
    ``dirichlet_tags`` become Dirichlet, the others Neumann.
    """
    vertices = np.asarray(vertices, dtype=float)
    cells = np.asarray(cells, dtype=np.int64)
    if vertices.ndim != 2 or vertices.shape[1] != 2:
        raise MeshError("vertices must have shape (n, 2)")
    if cells.ndim != 2 or cells.shape[1] != 3 or len(cells) == 0:
        raise MeshError("need at least one triangle given as a vertex-index triple")
    if cells.min() < 0 or cells.max() >= len(vertices):
        bad = int(np.flatnonzero((cells < 0).any(1) | (cells >= len(vertices)).any(1))[0])
        raise MeshError(f"cell {bad} references a missing vertex", ("cell", bad))

    p = vertices[cells]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    area = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    lo, hi = vertices.min(0), vertices.max(0)
    bbox_area = max((hi - lo).prod(), np.finfo(float).tiny)
    degenerate = np.abs(area) <= 1e-14 * bbox_area
    if degenerate.any():
        c = int(np.flatnonzero(degenerate)[0])
        raise MeshError(f"cell {c} is degenerate (area {area[c]:.3e})", ("cell", c))
    if (area < 0).any():
        if not reorient:
            c = int(np.flatnonzero(area < 0)[0])
            raise MeshError(f"cell {c} is inverted (clockwise)", ("cell", c))
        cells = cells.copy()
        neg = area < 0
        cells[neg] = cells[neg][:, [0, 2, 1]]

    key = np.sort(cells, axis=1)
    _, first, counts = np.unique(key, axis=0, return_index=True, return_counts=True)
    if (counts > 1).any():
        dup = np.flatnonzero(counts > 1)[0]
        c0 = int(first[dup])
        raise MeshError(f"cell {c0} is duplicated", ("cell", c0))

    nc = len(cells)
    edges = cells[:, _LOCAL_EDGES].reshape(-1, 2)
    edges = np.sort(edges, axis=1)
    fverts, inverse, counts = np.unique(edges, axis=0, return_inverse=True,
                                        return_counts=True)
    inverse = inverse.ravel()
    if (counts > 2).any():
        f = int(np.flatnonzero(counts > 2)[0])
        a, b = fverts[f]
        raise MeshError(f"facet ({a}, {b}) is shared by {counts[f]} cells (non-manifold)",
                        ("facet", (int(a), int(b))))
    nf = len(fverts)
    cell_facets = inverse.reshape(nc, 3)
    facet_cells = np.full((nf, 2), -1, dtype=np.int64)
    owner = np.repeat(np.arange(nc), 3)
    order = np.argsort(inverse, kind="stable")
    sorted_f = inverse[order]
    first_slot = np.ones(len(order), dtype=bool)
    first_slot[1:] = sorted_f[1:] != sorted_f[:-1]
    facet_cells[sorted_f[first_slot], 0] = owner[order][first_slot]
    facet_cells[sorted_f[~first_slot], 1] = owner[order][~first_slot]

    tags = np.full(nf, None, dtype=object)
    bnd = np.flatnonzero(facet_cells[:, 1] < 0)
    mid = vertices[fverts[bnd]].mean(axis=1)
    for f, t in zip(bnd, _apply_rule(boundary_tagging_rule, mid)):
        tags[f] = t

    mesh = Mesh(vertices, cells, fverts, facet_cells, cell_facets, tags)
    if dirichlet_tags:
        mesh.set_dirichlet_tags(dirichlet_tags)
    return mesh


def axis_predicate(x=None, y=None, xmin=None, xmax=None, ymin=None, ymax=None,
                   tol: float = 1e-9):
    """Vectorised predicate on points for axis-aligned boundary regions.

    ``x``/``y`` select a line, the min/max bounds restrict the extent.  The
    tolerance is absolute; callers scale it by the bounding box.
    """

    def pred(pts: np.ndarray) -> np.ndarray:
        m = np.ones(len(pts), dtype=bool)
        if x is not None:
            m &= np.abs(pts[:, 0] - x) <= tol
        if y is not None:
            m &= np.abs(pts[:, 1] - y) <= tol
        if xmin is not None:
            m &= pts[:, 0] >= xmin - tol
        if xmax is not None:
            m &= pts[:, 0] <= xmax + tol
        if ymin is not None:
            m &= pts[:, 1] >= ymin - tol
        if ymax is not None:
            m &= pts[:, 1] <= ymax + tol
        return m

    return pred


def facets_on_polyline(mesh: Mesh, polyline, tol: Optional[float] = None):
    """Interior-or-boundary facets lying on ``polyline``, ordered along it.

    Returns ``(facets, vertices)``: facet ids sorted by arc length of their
    midpoint and the ordered vertex chain from the first polyline point.
    """
    poly = np.asarray(polyline, dtype=float)
    if tol is None:
        x0, y0, x1, y1 = mesh.bbox
        tol = 1e-9 * max(x1 - x0, y1 - y0)
    seg_a, seg_b = poly[:-1], poly[1:]
    seglen = np.hypot(*(seg_b - seg_a).T)
    cum = np.concatenate([[0.0], np.cumsum(seglen)])

    def project(pts):
        best_d = np.full(len(pts), np.inf)
        best_s = np.zeros(len(pts))
        for i, (a, b) in enumerate(zip(seg_a, seg_b)):
            ab = b - a
            t = np.clip(((pts - a) @ ab) / (ab @ ab), 0.0, 1.0)
            q = a + t[:, None] * ab
            d = np.hypot(*(pts - q).T)
            better = d < best_d
            best_d[better] = d[better]
            best_s[better] = cum[i] + t[better] * seglen[i]
        return best_d, best_s

    dv, sv = project(mesh.vertices)
    onv = dv <= tol
    fv = mesh.facet_vertices
    on = onv[fv[:, 0]] & onv[fv[:, 1]]
    facets = np.flatnonzero(on)
    mids = sv[fv[facets]].mean(axis=1)
    facets = facets[np.argsort(mids, kind="stable")]
    verts = []
    for f in facets:
        a, b = fv[f]
        for v in sorted((int(a), int(b)), key=lambda v: sv[v]):
            if v not in verts:
                verts.append(v)
    return facets, verts
