"""Declarative scenario description and the builtin experiments.

A :class:`Scenario` only holds plain data (numbers, strings, tuples) so it
round-trips through the INI configuration format.  Boundary regions are
short predicate strings, for example ``"x=0 ymin=0.5"``, ``"y=1"``,
``"circle 20 100 5"`` or ``"all"``; a bound written ``"2h"`` is twice the
scenario mesh size.  Dirichlet values are constant vectors multiplied by
the load ``u_D``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..fracture import CrackParams, FractureProblem
from ..material import ANTIPLANE, PLANE_STRAIN, MaterialModel, antiplane, from_young_poisson
from ..mesh import (
    Mesh,
    axis_predicate,
    build_mesh,
    cut_along_polyline,
    dcircle,
    ddiff,
    discretize_circle,
    discretize_segment,
    disk_points_and_cells,
    drectangle,
    generate_structured_strip,
    generate_unstructured,
    read_gmsh_ascii,
)
from ..system import DirichletBC, LoadSpec, NeumannBC

QUASI_STATIC = "quasi-static"
CONVERGENCE = "convergence"
KINDS = (QUASI_STATIC, CONVERGENCE)
MESH_KINDS = ("structured", "unstructured", "disk", "file")


class ScenarioError(ValueError):
    """Invalid scenario; ``field`` is the dotted path of the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass
class MeshSpec:
    """Mesh source.

    ``structured`` grids ``[0, L] x [0, H]`` with spacing ``h``.
    ``unstructured`` meshes the rectangle minus ``holes`` with maximal cell
    diameter about ``h`` (target edge ``h / size_factor``).  ``disk`` is the
    ring-structured disk of radius ``radius`` with ``round(radius / h)``
    rings.  ``file`` reads a Gmsh ASCII mesh from ``path``.
    """

    kind: str = "structured"
    h: float = 0.1
    L: float = 1.0
    H: float = 1.0
    pattern: str = "crossed"
    holes: tuple = ()
    radius: float = 1.0
    path: str = ""
    seed: int = 0
    size_factor: float = 1.5


@dataclass
class MaterialSpec:
    mode: str = PLANE_STRAIN
    E: Optional[float] = None
    nu: Optional[float] = None
    mu: Optional[float] = None
    Gc: Optional[float] = None


@dataclass
class BoundarySpec:
    """Condition on the boundary facets whose midpoint matches ``region``.

    The first matching boundary (in declaration order) claims a facet.
    """

    tag: str
    region: str
    kind: str = "neumann"
    value: tuple = ()
    mask: Optional[tuple] = None


@dataclass
class ConvergenceSpec:
    """Static mode III study on a slit disk with the near-tip field imposed."""

    levels: tuple = (9, 18, 35, 69, 138)
    tau: float = 1.0
    a: float = 1.0


@dataclass
class Scenario:
    name: str
    kind: str = QUASI_STATIC
    description: str = ""
    units: str = ""
    mesh: MeshSpec = field(default_factory=MeshSpec)
    material: MaterialSpec = field(default_factory=MaterialSpec)
    boundaries: list = field(default_factory=list)
    initial_crack: tuple = ()
    du: float = 0.01
    u_final: float = 1.0
    N: int = 6
    seed: int = 0
    path_filter: str = ""
    beta: float = 2.0
    force_tag: str = ""
    force_direction: tuple = ()
    speed_reference: Optional[float] = None
    output_dir: str = ""
    snapshot_every: int = 0
    convergence: ConvergenceSpec = field(default_factory=ConvergenceSpec)

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)

    def with_overrides(self, h=None, du=None, seed=None, u_final=None) -> "Scenario":
        """Copy with the usual command-line overrides applied."""
        out = dataclasses.replace(self, mesh=dataclasses.replace(self.mesh),
                                  material=dataclasses.replace(self.material),
                                  convergence=dataclasses.replace(self.convergence))
        if h is not None:
            out.mesh.h = float(h)
        if du is not None:
            out.du = float(du)
        if seed is not None:
            out.seed = int(seed)
        if u_final is not None:
            out.u_final = float(u_final)
        return out

    @property
    def dim(self) -> int:
        return 1 if self.material.mode == ANTIPLANE else 2


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

def _positive(value, name):
    if value is None:
        raise ScenarioError(name, "missing")
    if not (float(value) > 0 and math.isfinite(float(value))):
        raise ScenarioError(name, f"must be positive and finite, got {value}")


def validate(sc: Scenario) -> None:
    """Check a scenario without building its mesh."""
    if not sc.name:
        raise ScenarioError("scenario.name", "missing")
    if sc.kind not in KINDS:
        raise ScenarioError("scenario.kind", f"must be one of {KINDS}, got {sc.kind!r}")
    m = sc.mesh
    if m.kind not in MESH_KINDS:
        raise ScenarioError("mesh.kind", f"must be one of {MESH_KINDS}, got {m.kind!r}")
    if m.kind != "file":
        _positive(m.h, "mesh.h")
    if m.kind in ("structured", "unstructured"):
        _positive(m.L, "mesh.L")
        _positive(m.H, "mesh.H")
    if m.kind == "disk":
        _positive(m.radius, "mesh.radius")
    if m.kind == "file" and not m.path:
        raise ScenarioError("mesh.path", "missing")
    for i, hole in enumerate(m.holes):
        if len(hole) != 3 or not hole[2] > 0:
            raise ScenarioError(f"mesh.holes[{i}]", "expected centre x, centre y and radius > 0")

    mat = sc.material
    if mat.mode not in (PLANE_STRAIN, ANTIPLANE):
        raise ScenarioError("material.mode", f"unknown mode {mat.mode!r}")
    if mat.mode == PLANE_STRAIN:
        _positive(mat.E, "material.E")
        if mat.nu is None:
            raise ScenarioError("material.nu", "missing")
        if not -1.0 < mat.nu < 0.5:
            raise ScenarioError("material.nu", f"must lie in (-1, 0.5), got {mat.nu}")
    else:
        _positive(mat.mu, "material.mu")

    if sc.kind == CONVERGENCE:
        if mat.mode != ANTIPLANE:
            raise ScenarioError("material.mode", "the convergence study is antiplane only")
        if m.kind != "disk":
            raise ScenarioError("mesh.kind", "the convergence study needs a disk mesh")
        if not sc.convergence.levels or min(sc.convergence.levels) < 1:
            raise ScenarioError("convergence.levels", "need positive ring counts")
        _positive(sc.convergence.tau, "convergence.tau")
        _positive(sc.convergence.a, "convergence.a")
        return

    _positive(mat.Gc, "material.Gc")
    _positive(sc.du, "loading.du")
    _positive(sc.u_final, "loading.u_final")
    if sc.u_final < sc.du:
        raise ScenarioError("loading.u_final", "must be at least loading.du")
    if sc.N < 1:
        raise ScenarioError("crack.N", "must be at least 1")
    if sc.snapshot_every < 0:
        raise ScenarioError("output.snapshot_every", "must be non-negative")
    if not sc.boundaries:
        raise ScenarioError("boundary", "no boundary conditions given")
    seen = set()
    for b in sc.boundaries:
        path = f"boundary.{b.tag}"
        if b.tag in seen:
            raise ScenarioError(path, "declared twice")
        seen.add(b.tag)
        if b.kind not in ("dirichlet", "neumann"):
            raise ScenarioError(path + ".kind", f"must be dirichlet or neumann, got {b.kind!r}")
        try:
            parse_region(b.region, 1.0, 1.0)
        except ValueError as exc:
            raise ScenarioError(path + ".region", str(exc)) from None
        if b.kind == "dirichlet" and len(b.value) != sc.dim:
            raise ScenarioError(path + ".value", f"needs {sc.dim} component(s)")
        if b.mask is not None and len(b.mask) != sc.dim:
            raise ScenarioError(path + ".mask", f"needs {sc.dim} component(s)")
        if b.kind == "neumann" and len(b.value) not in (0, sc.dim):
            raise ScenarioError(path + ".value", f"traction needs {sc.dim} component(s)")
    if not any(b.kind == "dirichlet" for b in sc.boundaries):
        raise ScenarioError("boundary", "at least one Dirichlet boundary is required")
    if sc.force_tag and sc.force_tag not in seen:
        raise ScenarioError("loading.force_tag", f"unknown boundary {sc.force_tag!r}")
    if sc.force_direction and len(sc.force_direction) != sc.dim:
        raise ScenarioError("loading.force_direction", f"needs {sc.dim} component(s)")
    if sc.initial_crack and (len(sc.initial_crack) < 2
                             or any(len(p) != 2 for p in sc.initial_crack)):
        raise ScenarioError("crack.initial", "need at least two (x, y) points")
    if sc.path_filter:
        try:
            parse_line_filter(sc.path_filter, 1.0)
        except ValueError as exc:
            raise ScenarioError("crack.filter", str(exc)) from None
    if sc.speed_reference is not None:
        _positive(sc.speed_reference, "analysis.speed_reference")


# ---------------------------------------------------------------------------
# regions, values and filters
# ---------------------------------------------------------------------------

def _number(tok: str, h: float) -> float:
    tok = tok.strip()
    if tok.endswith("h"):
        return float(tok[:-1] or 1.0) * h
    return float(tok)


def parse_region(text: str, h: float, scale: float):
    """Predicate on facet midpoints for a region string."""
    words = text.split()
    if not words:
        raise ValueError("empty region")
    tol = 1e-9 * scale
    if words[0] == "all":
        if len(words) > 1:
            raise ValueError("'all' takes no arguments")
        return lambda p: np.ones(len(p), dtype=bool)
    if words[0] == "circle":
        if len(words) != 4:
            raise ValueError("expected 'circle cx cy r'")
        cx, cy, r = (_number(w, h) for w in words[1:])
        # chord midpoints sit inside the circle by at most h^2 / (8 r)
        return lambda p: np.hypot(p[:, 0] - cx, p[:, 1] - cy) <= r + 0.5 * h
    kw = {}
    for w in words:
        key, sep, val = w.partition("=")
        if not sep or key not in ("x", "y", "xmin", "xmax", "ymin", "ymax"):
            raise ValueError(f"cannot parse region term {w!r}")
        kw[key] = _number(val, h)
    return axis_predicate(tol=tol, **kw)


class LineFilter:
    """Breakable facets restricted to the line ``axis = value``."""

    def __init__(self, axis: int, value: float, tol: float):
        self.axis, self.value, self.tol = axis, value, tol

    def __call__(self, mesh: Mesh, facet: int) -> bool:
        coords = mesh.vertices[mesh.facet_vertices[facet], self.axis]
        return bool(np.all(np.abs(coords - self.value) <= self.tol))


def parse_line_filter(text: str, scale: float) -> LineFilter:
    key, sep, val = text.strip().partition("=")
    if not sep or key.strip() not in ("x", "y"):
        raise ValueError(f"expected 'x=<value>' or 'y=<value>', got {text!r}")
    return LineFilter(0 if key.strip() == "x" else 1, float(val), 1e-9 * scale)


class ScaledValue:
    """``u_D`` times a constant vector, evaluated on facet points."""

    def __init__(self, factors):
        self.factors = np.asarray(factors, dtype=float)

    def __call__(self, x, t, n):
        return np.tile(t * self.factors, (len(x), 1))


# ---------------------------------------------------------------------------
# building
# ---------------------------------------------------------------------------

def _scale(sc: Scenario) -> float:
    m = sc.mesh
    return 2 * m.radius if m.kind == "disk" else max(m.L, m.H)


def tagging_rule(sc: Scenario) -> dict:
    scale = _scale(sc)
    return {b.tag: parse_region(b.region, sc.mesh.h, scale) for b in sc.boundaries}


def build_scenario_mesh(sc: Scenario, level: Optional[int] = None) -> Mesh:
    """Mesh of the scenario; ``level`` is the ring count for disk meshes."""
    m = sc.mesh
    rule = tagging_rule(sc)
    if m.kind == "structured":
        return generate_structured_strip(m.L, m.H, m.h, m.pattern, tagging=rule)
    if m.kind == "unstructured":
        h0 = m.h / m.size_factor
        sdf = drectangle(0.0, 0.0, m.L, m.H)
        if m.holes:
            sdf = ddiff(sdf, *(dcircle(*hole) for hole in m.holes))
        corners = np.array([[0, 0], [m.L, 0], [m.L, m.H], [0, m.H]], dtype=float)
        fixed = [corners] + [discretize_circle(*hole, h0) for hole in m.holes]
        chains = []
        if sc.initial_crack:
            poly = np.asarray(sc.initial_crack, dtype=float)
            chains = [np.concatenate([discretize_segment(a, b, h0, include_end=(i == len(poly) - 2))
                                      for i, (a, b) in enumerate(zip(poly[:-1], poly[1:]))])]
        return generate_unstructured(sdf, (0.0, 0.0, m.L, m.H), h0,
                                     fixed_points=np.concatenate(fixed), fixed_chains=chains,
                                     seed=m.seed, tagging=rule)
    if m.kind == "disk":
        n = level if level is not None else max(1, int(round(m.radius / m.h)))
        p, c = disk_points_and_cells(m.radius, n)
        p, c = cut_along_polyline(p, c, [(-m.radius, 0.0), (0.0, 0.0)])
        return build_mesh(p, c, rule)
    return read_gmsh_ascii(m.path)


def build_material(sc: Scenario) -> MaterialModel:
    mat = sc.material
    Gc = mat.Gc if mat.Gc is not None else math.inf
    if mat.mode == ANTIPLANE:
        return antiplane(mat.mu, Gc)
    return from_young_poisson(mat.E, mat.nu, Gc)


def build_loads(sc: Scenario) -> LoadSpec:
    loads = LoadSpec()
    for b in sc.boundaries:
        if b.kind == "dirichlet":
            loads.dirichlet.append(DirichletBC(b.tag, ScaledValue(b.value), b.mask))
        else:
            traction = ScaledValue(b.value) if b.value and any(b.value) else None
            loads.neumann.append(NeumannBC(b.tag, traction))
    return loads


def build_problem(sc: Scenario, mesh: Optional[Mesh] = None) -> FractureProblem:
    validate(sc)
    mesh = build_scenario_mesh(sc) if mesh is None else mesh
    filt = parse_line_filter(sc.path_filter, _scale(sc)) if sc.path_filter else None
    crack = CrackParams(N=sc.N, rng_seed=sc.seed, candidate_filter=filt)
    init = np.asarray(sc.initial_crack, dtype=float) if sc.initial_crack else None
    return FractureProblem(mesh, build_material(sc), build_loads(sc), sc.du, sc.u_final, crack,
                           initial_crack=init, beta=sc.beta,
                           force_tag=sc.force_tag or None,
                           force_direction=np.asarray(sc.force_direction, dtype=float)
                           if sc.force_direction else None)


# ---------------------------------------------------------------------------
# builtins
# ---------------------------------------------------------------------------

def _antiplane_convergence() -> Scenario:
    return Scenario(
        name="antiplane-convergence", kind=CONVERGENCE,
        description="Mode III near-tip field imposed on the whole boundary of a slit disk "
                    "around the tip (slit along theta = pi); static, no propagation.",
        units="dimensionless",
        mesh=MeshSpec(kind="disk", radius=0.015, h=0.015 / 9),
        material=MaterialSpec(mode=ANTIPLANE, mu=1.0),
        boundaries=[BoundarySpec("ball", "all", "dirichlet", (1.0,))],
        convergence=ConvergenceSpec(levels=(9, 18, 35, 69, 138), tau=3.0, a=1.0),
        beta=2.0)


def _crack_speed() -> Scenario:
    return Scenario(
        name="crack-speed",
        description="Pre-cracked strip in antiplane shear, crack forced along y = H/2; "
                    "L = 5 m, H = 1 m, l0 = 1 m, mu = 0.2 Pa, Gc = 0.01 kN/mm.",
        units="m, Pa, kN/mm (verbatim)",
        mesh=MeshSpec(kind="structured", L=5.0, H=1.0, h=0.1, pattern="crossed"),
        material=MaterialSpec(mode=ANTIPLANE, mu=0.2, Gc=0.01),
        boundaries=[
            BoundarySpec("left_top", "x=0 ymin=0.5", "dirichlet", (1.0,)),
            BoundarySpec("left_bottom", "x=0 ymax=0.5", "dirichlet", (-1.0,)),
            BoundarySpec("right", "x=5", "dirichlet", (0.0,)),
            BoundarySpec("top", "y=1", "neumann"),
            BoundarySpec("bottom", "y=0", "neumann"),
        ],
        initial_crack=((0.0, 0.5), (1.0, 0.5)),
        du=0.01, u_final=1.0, path_filter="y=0.5",
        force_tag="right", speed_reference=math.sqrt(0.2 * 1.0 / 0.01))


def _opening_mode() -> Scenario:
    return Scenario(
        name="opening-mode",
        description="Plate opened by normal displacements of the top and bottom edges; "
                    "L = 32 mm, H = 16 mm, l0 = 4 mm, E = 3.09 GPa, nu = 0.35, "
                    "Gc = 300 kN/mm as stated (an unusually large toughness for these "
                    "units, kept verbatim). The lowest left-edge facet is pinned in x to "
                    "remove the rigid translation.",
        units="mm, kN/mm^2, kN/mm (verbatim)",
        mesh=MeshSpec(kind="structured", L=32.0, H=16.0, h=0.4, pattern="crossed"),
        material=MaterialSpec(mode=PLANE_STRAIN, E=3.09, nu=0.35, Gc=300.0),
        boundaries=[
            BoundarySpec("pin", "x=0 ymax=1h", "dirichlet", (0.0, 0.0), (True, False)),
            BoundarySpec("top", "y=16", "dirichlet", (0.0, 1.0), (False, True)),
            BoundarySpec("bottom", "y=0", "dirichlet", (0.0, -1.0), (False, True)),
            BoundarySpec("left", "x=0", "neumann"),
            BoundarySpec("right", "x=32", "neumann"),
        ],
        initial_crack=((0.0, 8.0), (4.0, 8.0)),
        du=0.4, u_final=60.0, force_tag="top", force_direction=(0.0, 1.0))


def _notched_shear() -> Scenario:
    return Scenario(
        name="notched-shear",
        description="Unit square with an edge crack, top edge sheared, bottom clamped; "
                    "H = 1 mm, l0 = 0.5 mm, E = 210 GPa, nu = 0.3, Gc = 2.7e-3 kN/mm, "
                    "du = 1e-6 mm, final load 0.2 mm.",
        units="mm, kN/mm^2, kN/mm",
        mesh=MeshSpec(kind="unstructured", L=1.0, H=1.0, h=2.8e-2),
        material=MaterialSpec(mode=PLANE_STRAIN, E=210.0, nu=0.3, Gc=2.7e-3),
        boundaries=[
            BoundarySpec("top", "y=1", "dirichlet", (1.0, 0.0)),
            BoundarySpec("bottom", "y=0", "dirichlet", (0.0, 0.0)),
            BoundarySpec("left", "x=0", "neumann"),
            BoundarySpec("right", "x=1", "neumann"),
        ],
        initial_crack=((0.0, 0.5), (0.5, 0.5)),
        du=1e-6, u_final=0.2, force_tag="top", force_direction=(1.0, 0.0))


def _notched_plate_hole() -> Scenario:
    L, H, a, b, d, e = 65.0, 120.0, 20.0, 55.0, 69.0, 36.5
    return Scenario(
        name="notched-plate-hole",
        description="Notched plate with three holes; L = 65 mm, H = 120 mm, l0 = 10 mm, "
                    "a = 20 mm, b = 55 mm, d = 69 mm, e = 36.5 mm, hole diameters 10/10/20 mm, "
                    "E = 6 GPa, nu = 0.22, Gc = 2.28e-3 kN/mm, du = 1e-2 mm. Upper hole "
                    "displaced by (0, u_D), lower hole clamped, large hole free.",
        units="mm, kN/mm^2, kN/mm",
        mesh=MeshSpec(kind="unstructured", L=L, H=H, h=2.8,
                      holes=((a, H - a, 5.0), (a, a, 5.0), (e, H - d, 10.0))),
        material=MaterialSpec(mode=PLANE_STRAIN, E=6.0, nu=0.22, Gc=2.28e-3),
        boundaries=[
            BoundarySpec("upper_hole", f"circle {a:g} {H - a:g} 5", "dirichlet", (0.0, 1.0)),
            BoundarySpec("lower_hole", f"circle {a:g} {a:g} 5", "dirichlet", (0.0, 0.0)),
            BoundarySpec("main_hole", f"circle {e:g} {H - d:g} 10", "neumann"),
            BoundarySpec("outer", "all", "neumann"),
        ],
        initial_crack=((0.0, H - b), (10.0, H - b)),
        du=1e-2, u_final=1.5, force_tag="upper_hole", force_direction=(0.0, 1.0))


_BUILTINS = {
    "antiplane-convergence": _antiplane_convergence,
    "crack-speed": _crack_speed,
    "opening-mode": _opening_mode,
    "notched-shear": _notched_shear,
    "notched-plate-hole": _notched_plate_hole,
}


def builtin_scenarios() -> list:
    """Fresh copies of the five builtin scenarios."""
    return [make() for make in _BUILTINS.values()]


def builtin(name: str) -> Scenario:
    try:
        return _BUILTINS[name]()
    except KeyError:
        raise ScenarioError("scenario.name", f"unknown builtin {name!r}; "
                            f"expected one of {sorted(_BUILTINS)}") from None


def builtin_names() -> list:
    return list(_BUILTINS)
