"""Stabilised stiffness assembly, load vector and SPD solve.

The bilinear form is assembled as ``P = T^T M T`` where ``T`` (see
:func:`demcrack.reconstruction.slot_operator`) maps ``[cell dofs; Dirichlet
data]`` to ``[cell values; facet slot values]`` and ``M`` is block diagonal
in geometric element matrices:

* one consistency element per cell, acting on its three slot values;
* one rank-one penalty element per interior or Dirichlet facet acting on
  the P1 cell reconstructions evaluated at the facet barycentre.

``A`` is the cell/cell block of ``P`` and the cell/data block is the
Dirichlet lifting map.  A crack only changes a few rows of ``T`` and drops
one penalty element, so the update is computed on those rows alone.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .material import MaterialModel
from .mesh import BOUNDARY_DIRICHLET, BOUNDARY_NEUMANN, CRACKED, INTERIOR, Mesh
from .reconstruction import ReconstructionPlan, scaled_normals, slot_operator

log = logging.getLogger(__name__)

DIRECT_LIMIT = 200_000


class LoadError(ValueError):
    pass


class SolverError(RuntimeError):
    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


# ---------------------------------------------------------------------------
# boundary conditions and loads
# ---------------------------------------------------------------------------

@dataclass
class DirichletBC:
    """Prescribed displacement on the facets carrying ``tag``.

    ``value(points, t, normals)`` returns ``(m, dim)`` (or ``(m,)`` in
    antiplane); ``normals`` are outward unit normals.  ``mask`` selects the
    constrained components (all by default).
    """

    tag: str
    value: Callable
    mask: Optional[Sequence[bool]] = None


@dataclass
class NeumannBC:
    """Traction ``traction(points, t, normals)``; ``None`` means traction free."""

    tag: str
    traction: Optional[Callable] = None


@dataclass
class LoadSpec:
    dirichlet: list = field(default_factory=list)
    neumann: list = field(default_factory=list)
    body_force: Optional[Callable] = None

    @property
    def dirichlet_tags(self) -> list:
        return [bc.tag for bc in self.dirichlet]

    def validate(self, mesh: Mesh) -> None:
        seen = {}
        for bc in self.dirichlet:
            if bc.tag in seen:
                raise LoadError(f"boundary tag {bc.tag!r} has more than one condition")
            seen[bc.tag] = "dirichlet"
        for bc in self.neumann:
            if bc.tag in seen:
                raise LoadError(f"boundary tag {bc.tag!r} has more than one condition")
            seen[bc.tag] = "neumann"
        present = {t for t in mesh.boundary_tag[mesh.on_outer_boundary] if t is not None}
        missing = sorted(set(seen) - present)
        if missing:
            raise LoadError(f"boundary conditions reference unknown tags {missing}")
        unresolved = sorted(present - set(seen))
        if unresolved:
            raise LoadError(f"boundary tags without a condition: {unresolved}")

    def apply_to_mesh(self, mesh: Mesh, dim: int) -> np.ndarray:
        """Set facet statuses and return the (nF, dim) Dirichlet mask."""
        self.validate(mesh)
        mesh.set_dirichlet_tags(self.dirichlet_tags)
        return dirichlet_mask(mesh, self, dim)


def _facet_groups(mesh: Mesh, tag: str) -> np.ndarray:
    return np.flatnonzero(mesh.on_outer_boundary & (mesh.boundary_tag == tag))


def dirichlet_mask(mesh: Mesh, loads: LoadSpec, dim: int) -> np.ndarray:
    mask = np.zeros((mesh.n_facets, dim), dtype=bool)
    for bc in loads.dirichlet:
        m = np.ones(dim, dtype=bool) if bc.mask is None else np.asarray(bc.mask, dtype=bool)
        if m.shape != (dim,):
            raise LoadError(f"mask of {bc.tag!r} must have {dim} entries")
        mask[_facet_groups(mesh, bc.tag)] = m
    return mask


def _eval(func, pts, t, normals, dim):
    val = np.asarray(func(pts, t, normals), dtype=float)
    if val.ndim == 0 or val.shape == (dim,) and len(pts) != dim:
        return np.broadcast_to(val, (len(pts), dim))
    return np.broadcast_to(val.reshape(len(pts), -1), (len(pts), dim))


def outward_facet_normals(mesh: Mesh, facets) -> np.ndarray:
    return mesh.facet_normals[facets]


def dirichlet_data(mesh: Mesh, loads: LoadSpec, t: float, dim: int) -> np.ndarray:
    """Boundary data per facet, shape (nF, dim); zero off Dirichlet facets."""
    g = np.zeros((mesh.n_facets, dim))
    for bc in loads.dirichlet:
        fs = _facet_groups(mesh, bc.tag)
        if len(fs) == 0:
            continue
        val = _eval(bc.value, mesh.facet_barycenters[fs], t, mesh.facet_normals[fs], dim)
        m = np.ones(dim, dtype=bool) if bc.mask is None else np.asarray(bc.mask, dtype=bool)
        g[fs] = np.where(m, val, 0.0)
    return g


# ---------------------------------------------------------------------------
# element matrices
# ---------------------------------------------------------------------------

def consistency_matrix(mesh: Mesh, plan: ReconstructionPlan, material: MaterialModel):
    d = plan.dim
    ny = (mesh.n_cells + 2 * mesh.n_facets) * d
    r, c, v = kernels.cell_consistency_triplets(plan.slot_nodes(), scaled_normals(mesh),
                                                mesh.cell_areas, material.quadratic_form(), d)
    return sp.csr_matrix((v, (r, c)), shape=(ny, ny))


def penalty_elements(mesh: Mesh, plan: ReconstructionPlan, material: MaterialModel,
                     beta: float = 2.0, facets=None):
    """Jump coefficients of the penalty term.

    Returns ``(facets, nodes, coefs, weights)`` with nodes/coefs (nP, 8) and
    weights (nP, dim).  On interior facets the jump is
    ``R_{c-}(x_F) - R_{c+}(x_F)``; on Dirichlet facets it is the slot value
    minus ``R_{c-}(x_F)``.  Components left free by a partial Dirichlet mask
    get zero weight.
    """
    d = plan.dim
    if facets is None:
        facets = np.flatnonzero((mesh.status == INTERIOR) | (mesh.status == BOUNDARY_DIRICHLET))
    facets = np.asarray(facets, dtype=np.int64)
    npen = len(facets)
    wn = scaled_normals(mesh)
    snode = plan.slot_nodes()
    cm = mesh.facet_cells[facets, 0]
    cp = mesh.facet_cells[facets, 1]
    xf = mesh.facet_barycenters[facets]
    inter = mesh.status[facets] == INTERIOR

    nodes = np.empty((npen, 8), dtype=np.int64)
    coefs = np.zeros((npen, 8))
    nodes[:, 0] = cm
    coefs[:, 0] = 1.0
    a_m = np.einsum("pfj,pj->pf", wn[cm], xf - mesh.cell_barycenters[cm])
    nodes[:, 2:5] = snode[cm]
    coefs[:, 2:5] = a_m

    # interior: minus P1 reconstruction of c+
    ip = np.flatnonzero(inter)
    c_plus = cp[ip]
    nodes[ip, 1] = c_plus
    coefs[ip, 1] = -1.0
    nodes[ip, 5:8] = snode[c_plus]
    coefs[ip, 5:8] = -np.einsum("pfj,pj->pf", wn[c_plus], xf[ip] - mesh.cell_barycenters[c_plus])

    # Dirichlet: slot value minus P1 reconstruction of c-
    ib = np.flatnonzero(~inter)
    nodes[ib, 1] = mesh.n_cells + 2 * facets[ib]
    coefs[ib, 1] = -1.0
    nodes[ib, 5:8] = cm[ib, None]
    coefs[ib, 5:8] = 0.0

    hf = mesh.facet_lengths[facets]
    w = beta * material.mu * mesh.facet_lengths[facets] / hf
    weights = np.repeat(w[:, None], d, axis=1)
    weights[ib] *= plan.dirichlet_mask[facets[ib]]
    return facets, nodes, coefs, weights


def penalty_matrix(mesh: Mesh, plan: ReconstructionPlan, material: MaterialModel,
                   beta: float = 2.0, facets=None):
    d = plan.dim
    ny = (mesh.n_cells + 2 * mesh.n_facets) * d
    _, nodes, coefs, weights = penalty_elements(mesh, plan, material, beta, facets)
    r, c, v = kernels.facet_penalty_triplets(nodes, coefs, weights, d)
    M = sp.csr_matrix((v, (r, c)), shape=(ny, ny))
    M.eliminate_zeros()
    return M


def _slot_rows(mesh: Mesh, facets, d: int) -> np.ndarray:
    nodes = []
    for f in facets:
        base = mesh.n_cells + 2 * int(f)
        if mesh.status[f] in (INTERIOR, CRACKED):
            nodes.extend((base, base + 1))
        else:
            nodes.append(base)
    nodes = np.unique(np.array(nodes, dtype=np.int64))
    return (nodes[:, None] * d + np.arange(d)).ravel()


def _row_selector(rows: np.ndarray, n: int) -> sp.csr_matrix:
    return sp.csr_matrix((np.ones(len(rows)), (np.arange(len(rows)), rows)),
                         shape=(len(rows), n))


def _partial_product(T, M, S):
    """Contribution of the rows ``S`` of the slot space to ``T^T M T``."""
    TS = T[S]
    MS = M[S]
    Y = TS.T @ (MS @ T)
    Z = TS.T @ (MS[:, S] @ TS)
    return Y + Y.T - Z


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

class StiffnessAssembly:
    """Stiffness matrix and Dirichlet lifting map for the current crack state.

    Attributes
    ----------
    T : csr_matrix
        Reconstruction operator into the slot space.
    M : csr_matrix
        Block-diagonal element matrix on the slot space.
    P : csr_matrix
        ``T^T M T`` (symmetrised) on ``[cells; data]``.
    version : int
        Incremented on every topology change (used to refresh factorizations).
    """

    def __init__(self, mesh: Mesh, plan: ReconstructionPlan, material: MaterialModel,
                 beta: float = 2.0):
        plan.check_current()
        self.mesh = mesh
        self.plan = plan
        self.material = material
        self.beta = float(beta)
        self.dim = plan.dim
        self.T = slot_operator(plan)
        self.M = (consistency_matrix(mesh, plan, material)
                  + penalty_matrix(mesh, plan, material, beta)).tocsr()
        P = self.T.T @ (self.M @ self.T)
        self.P = (0.5 * (P + P.T)).tocsr()
        self.version = 0

    @property
    def n_dofs(self) -> int:
        return self.mesh.n_cells * self.dim

    def _blocks(self):
        if getattr(self, "_cached", None) is None or self._cached[0] != self.version:
            n = self.n_dofs
            self._cached = (self.version, self.P[:n, :n].tocsr(), self.P[:n, n:].tocsr())
        return self._cached

    @property
    def A(self) -> sp.csr_matrix:
        return self._blocks()[1]

    @property
    def lifting(self) -> sp.csr_matrix:
        """Cell/data block: maps Dirichlet data to its action on the cell equations."""
        return self._blocks()[2]

    def update_after_crack(self, facet: int, changed_keys) -> None:
        """Apply the change caused by cracking ``facet``.

        ``changed_keys`` are the stencil keys returned by
        :meth:`ReconstructionPlan.rebuild_after_crack`.
        """
        mesh, d = self.mesh, self.dim
        f = int(facet)
        facets = sorted({int(k[0]) for k in changed_keys} | {f})
        rows_T = _slot_rows(mesh, facets, d)

        # penalty element of the cracked facet, evaluated with the old status
        status = mesh.status[f]
        mesh.status[f] = INTERIOR
        _, nodes, _, _ = penalty_elements(mesh, self.plan, self.material, self.beta, [f])
        MF = penalty_matrix(mesh, self.plan, self.material, self.beta, [f])
        mesh.status[f] = status
        rows_M = (np.unique(nodes[0])[:, None] * d + np.arange(d)).ravel()
        S = np.union1d(rows_T, rows_M)

        T_old, M_old = self.T, self.M
        ny = T_old.shape[0]
        keep = np.ones(ny)
        keep[rows_T] = 0.0
        T_new = (sp.diags(keep) @ T_old + slot_operator(self.plan, facets)).tocsr()
        T_new.eliminate_zeros()
        M_new = (M_old - MF).tocsr()
        M_new.eliminate_zeros()

        delta = _partial_product(T_new, M_new, S) - _partial_product(T_old, M_old, S)
        self.P = (self.P + 0.5 * (delta + delta.T)).tocsr()
        self.T, self.M = T_new, M_new
        self.version += 1

    def energy(self, u: np.ndarray, g: Optional[np.ndarray] = None) -> float:
        """``a_h(u, u)`` including the Dirichlet data ``g``."""
        x = np.concatenate([np.ravel(u), np.zeros(self.P.shape[0] - self.n_dofs)
                            if g is None else np.ravel(g)])
        return float(x @ (self.P @ x))

    def stabilization_energy(self, u: np.ndarray, g: Optional[np.ndarray] = None) -> float:
        x = np.concatenate([np.ravel(u), np.zeros(self.P.shape[0] - self.n_dofs)
                            if g is None else np.ravel(g)])
        y = self.T @ x
        Mp = penalty_matrix(self.mesh, self.plan, self.material, self.beta)
        return float(y @ (Mp @ y))


def assemble_stiffness(mesh: Mesh, plan: ReconstructionPlan, material: MaterialModel,
                       beta: float = 2.0) -> StiffnessAssembly:
    return StiffnessAssembly(mesh, plan, material, beta)


@dataclass
class LinearSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    dirichlet_contribution: np.ndarray


def assemble_load(mesh: Mesh, plan: ReconstructionPlan, loads: LoadSpec, t: float,
                  assembly: StiffnessAssembly) -> LinearSystem:
    """Right-hand side ``l_h`` minus the lifted Dirichlet data.

    Body forces use the midpoint rule on cells, tractions the midpoint rule
    on Neumann facets tested against reconstructed facet values.
    """
    d = plan.dim
    nc = mesh.n_cells
    y = np.zeros(assembly.T.shape[0])
    if loads.body_force is not None:
        f = np.asarray(loads.body_force(mesh.cell_barycenters, t), dtype=float)
        f = np.broadcast_to(f.reshape(nc, -1), (nc, d))
        y[:nc * d] = (mesh.cell_areas[:, None] * f).ravel()
    for bc in loads.neumann:
        if bc.traction is None:
            continue
        fs = _facet_groups(mesh, bc.tag)
        fs = fs[mesh.status[fs] == BOUNDARY_NEUMANN]
        if len(fs) == 0:
            continue
        gN = _eval(bc.traction, mesh.facet_barycenters[fs], t, mesh.facet_normals[fs], d)
        rows = ((nc + 2 * fs)[:, None] * d + np.arange(d)).ravel()
        y[rows] += (mesh.facet_lengths[fs, None] * gN).ravel()
    b = (assembly.T.T @ y)[:nc * d]
    g = dirichlet_data(mesh, loads, t, d).ravel()
    lift = assembly.lifting @ g
    return LinearSystem(assembly.A, b - lift, lift)


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

class Solver:
    """SPD solve with a reusable sparse factorization.

    The factor of the last matrix is kept.  When a new matrix arrives
    (different ``key``) the stale factor preconditions CG; a crack changes
    only a few rows, so a handful of iterations suffice.  The matrix is
    refactorized when CG needs more than ``max_pcg`` iterations.  Above
    ``direct_limit`` unknowns Jacobi-preconditioned CG is used instead.
    """

    def __init__(self, rtol: float = 1e-10, direct_limit: int = DIRECT_LIMIT,
                 max_pcg: int = 60, maxiter: Optional[int] = None):
        self.rtol = rtol
        self.direct_limit = direct_limit
        self.max_pcg = max_pcg
        self.maxiter = maxiter
        self.n_factor = 0
        self.n_pcg = 0
        self._lu = None
        self._key = None

    def invalidate(self) -> None:
        self._lu = None
        self._key = None

    def _factor(self, A, key) -> None:
        self._lu = spla.splu(sp.csc_matrix(A), permc_spec="MMD_AT_PLUS_A",
                             diag_pivot_thresh=0.0, options=dict(SymmetricMode=True))
        self._key = key
        self.n_factor += 1

    def _direct(self, A, b, bnorm):
        u = self._lu.solve(b)
        for _ in range(3):
            r = b - A @ u
            if np.linalg.norm(r) <= self.rtol * bnorm:
                break
            u = u + self._lu.solve(r)
        return u

    def _pcg(self, A, b):
        count = [0]

        def cb(_):
            count[0] += 1

        prec = spla.LinearOperator(A.shape, matvec=self._lu.solve)
        u, info = spla.cg(A, b, rtol=0.1 * self.rtol, atol=0.0, M=prec,
                          maxiter=self.max_pcg, callback=cb)
        self.n_pcg += count[0]
        return u if info == 0 else None

    def solve(self, A: sp.spmatrix, b: np.ndarray, key=None) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        n = A.shape[0]
        bnorm = np.linalg.norm(b)
        if bnorm == 0.0:
            return np.zeros(n)
        if n <= self.direct_limit:
            if self._lu is None or self._lu.shape != A.shape or key is None:
                self._factor(A, key)
            u = None
            if key != self._key:
                u = self._pcg(A, b)
                if u is None:
                    self._factor(A, key)
            if u is None:
                u = self._direct(A, b, bnorm)
        else:
            dinv = 1.0 / A.diagonal()
            prec = spla.LinearOperator(A.shape, matvec=lambda x: dinv * x)
            u, info = spla.cg(A, b, rtol=0.1 * self.rtol, atol=0.0, M=prec,
                              maxiter=self.maxiter or 20 * n)
        res = np.linalg.norm(b - A @ u) / bnorm
        if not np.isfinite(res) or res > self.rtol:
            raise SolverError(f"linear solve did not converge, relative residual {res:.3e}",
                              res)
        return u


def solve(system: LinearSystem, solver: Optional[Solver] = None) -> np.ndarray:
    return (solver or Solver()).solve(system.matrix, system.rhs)
