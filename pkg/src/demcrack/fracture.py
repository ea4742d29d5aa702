"""Crack propagation through mesh facets: ESTIMATE, MARK, UPDATE and the
quasi-static driver.

ESTIMATE pairs the stored normal ``n_F`` (from ``c-`` to ``c+``) with the
jump ``u_{c+} - u_{c-}``; flipping the stored orientation flips both, so
the estimate does not depend on it.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import kernels
from .analysis import crack_length, reaction_force
from .material import MaterialModel, stiffness_action, strain_from_gradient
from .mesh import CRACKED, INTERIOR, Mesh, MeshError, facets_on_polyline
from .reconstruction import ReconstructionPlan, cell_gradient, extended_vector
from .system import (
    LoadSpec,
    Solver,
    SolverError,
    StiffnessAssembly,
    assemble_load,
    dirichlet_data,
)

log = logging.getLogger(__name__)


class FractureError(RuntimeError):
    pass


@dataclass
class CrackParams:
    """MARK settings.

    ``candidate_filter(mesh, facet) -> bool`` restricts breakable facets.
    """

    N: int = 6
    rng_seed: int = 0
    candidate_filter: Optional[Callable[[Mesh, int], bool]] = None
    tie_rtol: float = 1e-12

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be at least 1")


@dataclass
class FractureState:
    crack_vertices: list
    crack_facets: list
    broken_count: np.ndarray
    energy_release: dict = field(default_factory=dict)
    last_marked: Optional[int] = None
    reached_boundary: bool = False
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))


@dataclass
class CellFields:
    """Piecewise-constant fields, arrays of shape (nC, dim, 2)."""

    gradient: np.ndarray
    strain: np.ndarray
    stress: np.ndarray


def initialize_crack(mesh: Mesh, polyline=None, seed: int = 0, tol: Optional[float] = None
                     ) -> FractureState:
    """Split every interior facet lying on ``polyline`` (mouth first)."""
    state = FractureState([], [], np.zeros(mesh.n_cells, dtype=np.int64),
                          rng=np.random.default_rng(seed))
    if polyline is None:
        return state
    facets, verts = facets_on_polyline(mesh, polyline, tol)
    for f in facets:
        if mesh.status[f] == INTERIOR:
            mesh.split_facet(f)
            state.crack_facets.append(int(f))
            state.broken_count[mesh.facet_cells[f]] += 1
    used = set(mesh.facet_vertices[state.crack_facets].ravel().tolist())
    state.crack_vertices = [int(v) for v in verts if v in used]
    if not state.crack_facets:
        raise FractureError("initial crack polyline does not match any interior facet")
    return state


def compute_cell_fields(assembly: StiffnessAssembly, u: np.ndarray, g: np.ndarray
                        ) -> CellFields:
    mesh, d = assembly.mesh, assembly.dim
    y = assembly.T @ extended_vector(assembly.plan, u, g)
    Y = y[mesh.n_cells * d:].reshape(mesh.n_facets, 2, d)
    G = cell_gradient(mesh, Y)
    eps = strain_from_gradient(assembly.material, G)
    sig = stiffness_action(assembly.material, eps)
    return CellFields(G, eps, sig)


# ---------------------------------------------------------------------------
# ESTIMATE
# ---------------------------------------------------------------------------

def facet_average(mesh: Mesh, cell_values: np.ndarray, facets) -> np.ndarray:
    c = mesh.facet_cells[facets]
    return 0.5 * (cell_values[c[..., 0]] + cell_values[c[..., 1]])


def facet_jump(mesh: Mesh, u: np.ndarray, facets) -> np.ndarray:
    """``u_{c+} - u_{c-}`` along the stored facet normal, shape (m, d)."""
    c = mesh.facet_cells[facets]
    return u[c[..., 1]] - u[c[..., 0]]


def crack_vertex_facets(mesh: Mesh, verts) -> tuple:
    """CSR layout of the facets at each vertex.

    Returns the cracked-facet counts as offsets, the offsets into the
    uncracked interior facets and those facets.
    """
    cptr, iptr, jf = [0], [0], []
    n_cracked = 0
    for v in verts:
        for f in mesh.vertex_facets(v):
            st = mesh.status[f]
            if st == CRACKED:
                n_cracked += 1
            elif st == INTERIOR:
                jf.append(f)
        cptr.append(n_cracked)
        iptr.append(len(jf))
    return np.asarray(cptr), np.asarray(iptr), np.asarray(jf, dtype=np.int64)


def estimate(mesh: Mesh, state: FractureState, stress: np.ndarray, u: np.ndarray) -> dict:
    """Approximate energy release rate at every crack vertex.

    For a vertex ``v`` touching at least one cracked facet the value is
    ``pi`` times the largest ``n_F . {S}_F . [u]_F`` over the uncracked
    interior facets ``F`` at ``v``, i.e. ``2 pi / |F|`` times the elastic
    energy stored in the facet.  The jump is ``u_+ - u_-`` along ``n_F`` so
    the value does not depend on the stored facet orientation.

    ``stress`` is (nC, dim, 2) and ``u`` the cell dofs (nC*dim or (nC, dim)).
    Vertices without a cracked or an uncracked interior facet get ``-inf``.
    """
    d = stress.shape[1]
    U = np.asarray(u, dtype=float).reshape(mesh.n_cells, d)
    verts = list(state.crack_vertices)
    cptr, iptr, jf = crack_vertex_facets(mesh, verts)
    g, _ = kernels.estimate_scan(cptr, iptr, mesh.facet_normals[jf],
                                 facet_average(mesh, stress, jf).reshape(len(jf), d, 2),
                                 facet_jump(mesh, U, jf))
    out = {v: math.pi * float(x) for v, x in zip(verts, g)}
    state.energy_release = out
    return out


# ---------------------------------------------------------------------------
# MARK
# ---------------------------------------------------------------------------

def _pick(values: np.ndarray, rtol: float, rng: np.random.Generator) -> int:
    vmax = values.max()
    ties = np.flatnonzero(values >= vmax - rtol * abs(vmax))
    if len(ties) == 1:
        return int(ties[0])
    log.info("argmax tie between %d candidates, picked at random", len(ties))
    return int(ties[rng.integers(len(ties))])


def facet_energy_density(mesh: Mesh, fields: CellFields, facets) -> np.ndarray:
    """``1/2 {Sigma}_F : {eps}_F`` with averages over the two facet cells."""
    facets = np.asarray(facets, dtype=np.int64)
    s = facet_average(mesh, fields.stress, facets)
    e = facet_average(mesh, fields.strain, facets)
    return 0.5 * np.sum(s * e, axis=(-2, -1))


def admissible_facets(mesh: Mesh, state: FractureState, params: CrackParams, z: int) -> list:
    out = []
    for f in mesh.vertex_facets(z):
        if mesh.status[f] != INTERIOR:
            continue
        if state.broken_count[mesh.facet_cells[f]].max() >= 1:
            continue
        if params.candidate_filter is not None and not params.candidate_filter(mesh, int(f)):
            continue
        out.append(int(f))
    return out


def mark(mesh: Mesh, state: FractureState, params: CrackParams, G_h: dict,
         fields: CellFields, Gc: float) -> Optional[int]:
    window = state.crack_vertices[-params.N:]
    active = [v for v in window if G_h.get(v, -math.inf) >= Gc]
    if not active:
        return None
    vals = np.array([G_h[v] for v in active])
    z = active[_pick(vals, params.tie_rtol, state.rng)]
    cands = admissible_facets(mesh, state, params, z)
    if not cands:
        return None
    dens = facet_energy_density(mesh, fields, cands)
    return cands[_pick(dens, params.tie_rtol, state.rng)]


# ---------------------------------------------------------------------------
# UPDATE
# ---------------------------------------------------------------------------

def update(mesh: Mesh, plan: Optional[ReconstructionPlan], assembly: Optional[StiffnessAssembly],
           state: FractureState, facet: int) -> list:
    """Break ``facet`` and refresh stencils and stiffness.  Returns new crack vertices."""
    f = int(facet)
    if mesh.status[f] != INTERIOR:
        raise MeshError(f"facet {f} cannot be broken (not interior)", ("facet", f))
    cells = mesh.facet_cells[f]
    if state.broken_count[cells].max() >= 1:
        raise FractureError(f"facet {f} lies in a cell that already has a broken facet")
    mesh.split_facet(f)
    known = set(state.crack_vertices)
    ends = [int(v) for v in mesh.facet_vertices[f] if int(v) not in known]
    if state.crack_vertices and len(ends) == 2:
        tip = mesh.vertices[state.crack_vertices[-1]]
        ends.sort(key=lambda v: np.hypot(*(mesh.vertices[v] - tip)))
    state.crack_vertices.extend(ends)
    state.crack_facets.append(f)
    state.broken_count[cells] += 1
    state.last_marked = f
    if any(mesh.boundary_vertex[v] for v in ends):
        state.reached_boundary = True
    if plan is not None:
        changed = plan.rebuild_after_crack(f)
        if assembly is not None:
            assembly.update_after_crack(f, changed)
    return ends


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

@dataclass
class FractureProblem:
    mesh: Mesh
    material: MaterialModel
    loads: LoadSpec
    du: float
    u_final: float
    crack: CrackParams = field(default_factory=CrackParams)
    initial_crack: Optional[np.ndarray] = None
    beta: float = 2.0
    force_tag: Optional[str] = None
    force_direction: Optional[np.ndarray] = None
    stop_on_boundary: bool = True
    max_inner: Optional[int] = None


@dataclass
class StepRecord:
    k: int
    m_count: int
    u_D: float
    crack_length: float
    force: float
    force_after: float
    broken: list
    G_max: float


@dataclass
class SimulationTrace:
    records: list = field(default_factory=list)
    crack_facets: list = field(default_factory=list)
    crack_vertices: list = field(default_factory=list)
    initial_crack_facets: list = field(default_factory=list)
    u: Optional[np.ndarray] = None
    fields: Optional[CellFields] = None
    completed: bool = False
    reached_boundary: bool = False
    error: Optional[str] = None
    wall_time: float = 0.0

    @property
    def first_break(self) -> Optional[StepRecord]:
        for r in self.records:
            if r.broken:
                return r
        return None


def run_quasi_static(problem: FractureProblem, callback=None) -> SimulationTrace:
    """Incremental loading ``u_D = k du`` with the solve/estimate/mark/update loop.

    ``callback(k, u_D, mesh, u, fields, state)`` is invoked after every load
    step.  A solver failure ends the run; the trace up to the failure is
    returned with ``error`` set.
    """
    t0 = time.perf_counter()
    mesh, mat, loads = problem.mesh, problem.material, problem.loads
    d = mat.dim
    if problem.du <= 0 or problem.u_final < problem.du:
        raise ValueError("need du > 0 and u_final >= du")
    state = initialize_crack(mesh, problem.initial_crack, problem.crack.rng_seed)
    trace = SimulationTrace(initial_crack_facets=list(state.crack_facets))
    mask = loads.apply_to_mesh(mesh, d)
    plan = ReconstructionPlan(mesh, d, mask)
    asm = StiffnessAssembly(mesh, plan, mat, problem.beta)
    solver = Solver()
    n_steps = int(math.floor(problem.u_final / problem.du + 1e-9))
    max_inner = problem.max_inner or int((mesh.status == INTERIOR).sum()) + 1

    def solve_at(uD):
        system = assemble_load(mesh, plan, loads, uD, asm)
        u = solver.solve(system.matrix, system.rhs, key=asm.version)
        g = dirichlet_data(mesh, loads, uD, d)
        return u, g, compute_cell_fields(asm, u, g)

    def force_of(fields):
        if problem.force_tag is None:
            return float("nan")
        return reaction_force(mesh, fields.stress, problem.force_tag, problem.force_direction)

    u = fields = None
    try:
        for k in range(1, n_steps + 1):
            uD = k * problem.du
            broken, gmax = [], -math.inf
            u, g, fields = solve_at(uD)
            force_before = force_of(fields)
            m = 0
            while m < max_inner:
                G = estimate(mesh, state, fields.stress, u)
                gmax = max([gmax] + list(G.values()))
                F = mark(mesh, state, problem.crack, G, fields, mat.Gc)
                if F is None:
                    break
                update(mesh, plan, asm, state, F)
                broken.append(F)
                m += 1
                u, g, fields = solve_at(uD)
                if state.reached_boundary and problem.stop_on_boundary:
                    break
            trace.records.append(StepRecord(k, m, uD, crack_length(mesh), force_before,
                                            force_of(fields), broken, gmax))
            if callback is not None:
                callback(k, uD, mesh, u, fields, state)
            if state.reached_boundary and problem.stop_on_boundary:
                trace.reached_boundary = True
                break
        trace.completed = True
    except SolverError as exc:
        log.error("solver failure: %s", exc)
        trace.error = str(exc)
    trace.crack_facets = list(state.crack_facets)
    trace.crack_vertices = list(state.crack_vertices)
    trace.u, trace.fields = u, fields
    trace.wall_time = time.perf_counter() - t0
    trace.state = state
    trace.plan, trace.assembly = plan, asm
    return trace
