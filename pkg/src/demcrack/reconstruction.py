"""Facet displacement reconstruction, discrete gradients and P1 cell fields.

Every facet carries one or two *slots* holding the reconstructed facet
value seen by each neighbour cell.  An interior facet has a single
symmetric stencil shared by both slots; a cracked facet has one one-sided
stencil per side; a boundary facet uses slot 0.  Dirichlet slots take the
boundary data on constrained components.

The operator ``T`` built by :func:`slot_operator` maps the extended vector
``[cell dofs, Dirichlet data]`` to ``[cell values, slot values]``; it is
the only place stencils enter the linear algebra.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from .mesh import (
    BOUNDARY_DIRICHLET,
    CRACKED,
    INTERIOR,
    STATUS_NAMES,
    Mesh,
    MeshError,
)

log = logging.getLogger(__name__)

DIRICHLET_EVAL = "DIRICHLET_EVAL"
NEUMANN_BARYCENTRIC = "NEUMANN_BARYCENTRIC"
INTERIOR_SYMMETRIC = "INTERIOR_SYMMETRIC"

REPRODUCTION_TOL = 1e-10
COLLINEAR_TOL = 1e-12


class DegenerateStencilError(MeshError):
    pass


class StalePlanError(RuntimeError):
    pass


@dataclass
class FacetStencil:
    """Weights of one facet slot.

    For ``INTERIOR_SYMMETRIC`` the first ``n_minus`` entries form ``I_-`` and
    the rest ``I_+``; the stored weights already include the factor one
    half.  For ``DIRICHLET_EVAL`` the cells/weights reconstruct the
    components left free by the Dirichlet mask (empty if none).
    ``pool`` lists the cells whose facet statuses were read while building.
    """

    facet_id: int
    kind: str
    cells: np.ndarray
    weights: np.ndarray
    side: int = 0
    n_minus: int = 0
    fallback: bool = False
    pool: frozenset = field(default_factory=frozenset)

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.weights @ v[self.cells]


# ---------------------------------------------------------------------------
# weights
# ---------------------------------------------------------------------------

def barycentric_weights(pts: np.ndarray, x: np.ndarray, h: float) -> Optional[np.ndarray]:
    """Barycentric coordinates of ``x`` w.r.t. three points; None if collinear."""
    a, b, c = pts
    det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    if abs(det) < COLLINEAR_TOL * h * h:
        return None
    l1 = ((b[0] - x[0]) * (c[1] - x[1]) - (b[1] - x[1]) * (c[0] - x[0])) / det
    l2 = ((c[0] - x[0]) * (a[1] - x[1]) - (c[1] - x[1]) * (a[0] - x[0])) / det
    return np.array([l1, l2, 1.0 - l1 - l2])


def min_norm_weights(pts: np.ndarray, x: np.ndarray, h: float) -> Optional[np.ndarray]:
    """Smallest weights with unit sum reproducing ``x``; None if impossible."""
    A = np.vstack([np.ones(len(pts)), (pts - x).T / h])
    rhs = np.array([1.0, 0.0, 0.0])
    w = np.linalg.pinv(A) @ rhs
    if not reproduces(pts, w, x, h):
        return None
    return w


def reproduces(pts, w, x, h, tol=REPRODUCTION_TOL) -> bool:
    return (abs(w.sum() - 1.0) <= tol
            and np.hypot(*(w @ pts - x * w.sum())) <= tol * h)


# ---------------------------------------------------------------------------
# connectivity helpers
# ---------------------------------------------------------------------------

def connected_cells(mesh: Mesh, owner: int, region: Iterable[int]) -> list:
    """Cells of ``region`` reachable from ``owner`` through uncracked interior facets."""
    allowed = set(int(c) for c in region)
    allowed.add(owner)
    seen = {owner}
    order = [owner]
    queue = deque([owner])
    while queue:
        c = queue.popleft()
        for n in mesh.face_neighbors(c):
            if n in allowed and n not in seen:
                seen.add(n)
                order.append(n)
                queue.append(n)
    return order


def _ring(mesh: Mesh, cells: Iterable[int]) -> np.ndarray:
    return np.unique(np.concatenate([mesh.vertex_ring(c) for c in cells]))


def _fallback(mesh: Mesh, facet: int, owner: int, x: np.ndarray, h: float):
    """Connected vertex-ring cells around ``owner`` with min-norm weights."""
    region = mesh.vertex_ring(owner)
    for _ in range(2):
        cells = connected_cells(mesh, owner, region)
        w = min_norm_weights(mesh.cell_barycenters[cells], x, h)
        if w is not None:
            return np.array(cells, dtype=np.int64), w, frozenset(cells)
        region = _ring(mesh, region)
    raise DegenerateStencilError(
        f"facet {facet}: no non-degenerate stencil around cell {owner}", ("facet", facet))


def build_interior_stencil(mesh: Mesh, facet: int) -> FacetStencil:
    f = int(facet)
    if mesh.status[f] != INTERIOR:
        raise MeshError(f"facet {f} is not interior", ("facet", f))
    cm, cp = (int(c) for c in mesh.facet_cells[f])
    x = mesh.facet_barycenters[f]
    h = mesh.facet_lengths[f]
    cells, weights, pool, counts = [], [], {cm, cp}, []
    fallback = False
    for owner, other in ((cm, cp), (cp, cm)):
        subset = [other] + mesh.face_neighbors(owner, exclude_facet=f)
        w = None
        if len(subset) == 3:
            w = barycentric_weights(mesh.cell_barycenters[subset], x, h)
        if w is None:
            sub, w, extra = _fallback(mesh, f, owner, x, h)
            subset = list(sub)
            pool |= extra
            fallback = True
        cells.extend(subset)
        weights.append(w)
        counts.append(len(subset))
    if fallback:
        log.debug("facet %d: symmetric stencil uses the enlarged fallback", f)
    return FacetStencil(f, INTERIOR_SYMMETRIC, np.array(cells, dtype=np.int64),
                        0.5 * np.concatenate(weights), side=0, n_minus=counts[0],
                        fallback=fallback, pool=frozenset(pool))


def build_neumann_stencil(mesh: Mesh, facet: int, side: int = 0,
                          kind: str = NEUMANN_BARYCENTRIC) -> FacetStencil:
    """One-sided stencil seen from cell ``facet_cells[facet, side]``."""
    f = int(facet)
    st = mesh.status[f]
    if st == INTERIOR:
        raise MeshError(f"facet {f} is interior; one-sided stencils need a boundary or crack",
                        ("facet", f))
    owner = int(mesh.facet_cells[f, side])
    if owner < 0:
        raise MeshError(f"facet {f} has no cell on side {side}", ("facet", f))
    x = mesh.facet_barycenters[f]
    h = mesh.facet_lengths[f]
    subset = [owner] + mesh.face_neighbors(owner)
    w = None
    if len(subset) == 3:
        w = barycentric_weights(mesh.cell_barycenters[subset], x, h)
    pool = frozenset([owner])
    fallback = w is None
    if fallback:
        cells, w, pool = _fallback(mesh, f, owner, x, h)
    else:
        cells = np.array(subset, dtype=np.int64)
    return FacetStencil(f, kind, cells, w, side=side, n_minus=len(cells),
                        fallback=fallback, pool=pool)


def build_dirichlet_value(mesh: Mesh, facet: int, u_D: Callable, t: float,
                          mask=None) -> np.ndarray:
    """Boundary data ``u_D(t; x_F)``; components outside ``mask`` are zero.

    ``u_D`` is called as ``u_D(points, t, normals)`` on ``(1, 2)`` arrays.
    """
    f = int(facet)
    n = mesh.facet_normals[f:f + 1]
    val = np.atleast_1d(np.asarray(u_D(mesh.facet_barycenters[f:f + 1], t, n),
                                   dtype=float)).reshape(-1)
    if mask is not None:
        val = np.where(np.asarray(mask, dtype=bool), val, 0.0)
    return val


# ---------------------------------------------------------------------------
# plan
# ---------------------------------------------------------------------------

Key = Tuple[int, int]


class ReconstructionPlan:
    """All facet stencils of a mesh for its current facet partition.

    Parameters
    ----------
    mesh : Mesh
    dim : int
        Components per cell (1 antiplane, 2 plane strain).
    dirichlet_mask : (nF, dim) bool, optional
        Constrained components of Dirichlet facets.  Defaults to all
        components on every Dirichlet facet.
    """

    def __init__(self, mesh: Mesh, dim: int = 2, dirichlet_mask=None):
        self.mesh = mesh
        self.dim = int(dim)
        nf = mesh.n_facets
        dir_f = mesh.status == BOUNDARY_DIRICHLET
        if dirichlet_mask is None:
            dirichlet_mask = np.repeat(dir_f[:, None], self.dim, axis=1)
        self.dirichlet_mask = np.asarray(dirichlet_mask, dtype=bool).reshape(nf, self.dim)
        self.dirichlet_mask &= dir_f[:, None]
        self.stencils: Dict[Key, FacetStencil] = {}
        self._by_cell: Dict[int, set] = {}
        for f in range(nf):
            for key in self._keys_for(f):
                self._store(key, self._build(*key))
        self._status = mesh.status.copy()

    # -- bookkeeping ----------------------------------------------------
    def _keys_for(self, f: int):
        return [(f, 0), (f, 1)] if self.mesh.status[f] == CRACKED else [(f, 0)]

    def _build(self, f: int, side: int) -> FacetStencil:
        st = self.mesh.status[f]
        if st == INTERIOR:
            return build_interior_stencil(self.mesh, f)
        if st == BOUNDARY_DIRICHLET:
            if self.dirichlet_mask[f].all():
                return FacetStencil(f, DIRICHLET_EVAL, np.zeros(0, dtype=np.int64),
                                    np.zeros(0), side=0)
            return build_neumann_stencil(self.mesh, f, 0, kind=DIRICHLET_EVAL)
        return build_neumann_stencil(self.mesh, f, side)

    def _store(self, key: Key, st: FacetStencil) -> None:
        old = self.stencils.get(key)
        if old is not None:
            for c in old.pool:
                self._by_cell[c].discard(key)
        self.stencils[key] = st
        for c in st.pool:
            self._by_cell.setdefault(c, set()).add(key)

    def _drop(self, key: Key) -> None:
        old = self.stencils.pop(key, None)
        if old is not None:
            for c in old.pool:
                self._by_cell[c].discard(key)

    # -- queries -------------------------------------------------------
    @property
    def dirty(self) -> np.ndarray:
        """Facets whose status changed since the stencils were built."""
        return np.flatnonzero(self.mesh.status != self._status)

    def check_current(self) -> None:
        bad = self.dirty
        if len(bad):
            raise StalePlanError(f"reconstruction plan is stale for facets {bad[:10].tolist()}")

    def slot_stencil(self, facet: int, side: int) -> FacetStencil:
        f = int(facet)
        if self.mesh.status[f] == CRACKED:
            return self.stencils[(f, side)]
        return self.stencils[(f, 0)]

    @property
    def n_fallback(self) -> int:
        return sum(1 for s in self.stencils.values() if s.fallback)

    def slot_nodes(self) -> np.ndarray:
        """Slot node of every (cell, local facet), shape (nC, 3)."""
        m = self.mesh
        return m.n_cells + 2 * m.cell_facets + m.cell_sides

    # -- topology change -------------------------------------------------
    def rebuild_after_crack(self, facet: int) -> list:
        """Refresh stencils after ``facet`` was split.

        Returns the affected slot keys ``(F, s)``; interior keys stand for
        both slots of their facet.
        """
        f = int(facet)
        if self.mesh.status[f] != CRACKED:
            raise MeshError(f"facet {f} is not cracked", ("facet", f))
        a, b = (int(c) for c in self.mesh.facet_cells[f])
        touched = set(self._by_cell.get(a, ())) | set(self._by_cell.get(b, ()))
        touched.discard((f, 0))
        self._drop((f, 0))
        changed = [(f, 0), (f, 1)]
        for side in (0, 1):
            self._store((f, side), self._build(f, side))
        for key in sorted(touched):
            self._store(key, self._build(*key))
            changed.append(key)
        self._status = self.mesh.status.copy()
        return changed

    def rows_of(self, keys) -> np.ndarray:
        """Scalar rows of the slot space touched by ``keys``."""
        m, d = self.mesh, self.dim
        nodes = set()
        for f, s in keys:
            if m.status[f] == INTERIOR:
                nodes.update((m.n_cells + 2 * f, m.n_cells + 2 * f + 1))
            else:
                nodes.add(m.n_cells + 2 * f + s)
        nodes = np.array(sorted(nodes), dtype=np.int64)
        return (nodes[:, None] * d + np.arange(d)).ravel()


# ---------------------------------------------------------------------------
# linear maps
# ---------------------------------------------------------------------------

def _slot_triplets(plan: ReconstructionPlan, facets) -> tuple:
    m, d = plan.mesh, plan.dim
    nc = m.n_cells
    rows, cols, vals = [], [], []
    k = np.arange(d)
    for f in facets:
        f = int(f)
        st = m.status[f]
        sides = (0, 1) if st in (INTERIOR, CRACKED) else (0,)
        for s in sides:
            node = nc + 2 * f + s
            sten = plan.slot_stencil(f, s)
            if st == BOUNDARY_DIRICHLET:
                mask = plan.dirichlet_mask[f]
                for kk in range(d):
                    r = node * d + kk
                    if mask[kk]:
                        rows.append(np.array([r]))
                        cols.append(np.array([nc * d + f * d + kk]))
                        vals.append(np.ones(1))
                    else:
                        rows.append(np.full(len(sten.cells), r))
                        cols.append(sten.cells * d + kk)
                        vals.append(sten.weights)
                continue
            n = len(sten.cells)
            rows.append(np.repeat(node * d + k, n))
            cols.append((sten.cells[None, :] * d + k[:, None]).ravel())
            vals.append(np.tile(sten.weights, d))
    if not rows:
        return np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0)
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


def slot_operator(plan: ReconstructionPlan, facets=None) -> sp.csr_matrix:
    """Sparse ``T``: ``[v; g] -> [v; slot values]``.

    With ``facets`` given, only the slot rows of those facets are filled
    (cell rows are left empty); used for incremental updates.
    """
    m, d = plan.mesh, plan.dim
    nc, nf = m.n_cells, m.n_facets
    shape = ((nc + 2 * nf) * d, (nc + nf) * d)
    r, c, v = _slot_triplets(plan, range(nf) if facets is None else facets)
    if facets is None:
        eye = np.arange(nc * d)
        r = np.concatenate([eye, r])
        c = np.concatenate([eye, c])
        v = np.concatenate([np.ones(nc * d), v])
    T = sp.csr_matrix((v, (r, c)), shape=shape)
    T.sum_duplicates()
    return T


def extended_vector(plan: ReconstructionPlan, v: np.ndarray, dirichlet_data=None) -> np.ndarray:
    m, d = plan.mesh, plan.dim
    v = np.asarray(v, dtype=float).reshape(m.n_cells * d)
    g = np.zeros(m.n_facets * d) if dirichlet_data is None else \
        np.asarray(dirichlet_data, dtype=float).reshape(m.n_facets * d)
    return np.concatenate([v, g])


def reconstruct_facet_values(plan: ReconstructionPlan, v: np.ndarray, dirichlet_data=None,
                             T: Optional[sp.spmatrix] = None) -> np.ndarray:
    """Slot values, shape (nF, 2, dim).  Unused slots (side 1 of boundary facets) are 0."""
    plan.check_current()
    m, d = plan.mesh, plan.dim
    if T is None:
        T = slot_operator(plan)
    y = T @ extended_vector(plan, v, dirichlet_data)
    return y[m.n_cells * d:].reshape(m.n_facets, 2, d)


def scaled_normals(mesh: Mesh) -> np.ndarray:
    """``|F|/|c| n_{F,c}``, shape (nC, 3, 2)."""
    lf = mesh.facet_lengths[mesh.cell_facets]
    return mesh.outward_normals() * (lf / mesh.cell_areas[:, None])[:, :, None]


def cell_gradient(mesh: Mesh, slot_values: np.ndarray) -> np.ndarray:
    """Stokes gradient ``G_c = sum_F |F|/|c| v_F (x) n_{F,c}``, shape (nC, dim, 2).

    ``slot_values`` is (nF, 2, dim) as returned by
    :func:`reconstruct_facet_values`, or (nF, dim) for single-valued facets.
    """
    Y = np.asarray(slot_values, dtype=float)
    if Y.ndim == 2:
        vf = Y[mesh.cell_facets]
    else:
        vf = Y[mesh.cell_facets, mesh.cell_sides]
    return np.einsum("cfk,cfj->ckj", vf, scaled_normals(mesh))


def p1_cell_reconstruction(mesh: Mesh, cell: int, v_c, G_c, x) -> np.ndarray:
    """``v_c + G_c (x - x_c)``; ``x`` may be a single point or (m, 2)."""
    x = np.asarray(x, dtype=float)
    r = x - mesh.cell_barycenters[cell]
    return np.asarray(v_c, dtype=float) + r @ np.asarray(G_c, dtype=float).T


def stencil_summary(plan: ReconstructionPlan) -> dict:
    kinds = {}
    for s in plan.stencils.values():
        kinds[s.kind] = kinds.get(s.kind, 0) + 1
    return {"stencils": kinds, "fallback": plan.n_fallback,
            "status": {STATUS_NAMES[k]: int((plan.mesh.status == k).sum())
                       for k in STATUS_NAMES}}
