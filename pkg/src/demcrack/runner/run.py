"""Run scenarios and write their artifacts."""

from __future__ import annotations

import json
import logging
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
import scipy

from .. import __version__
from .._accel import requested_backend
from ..analysis import (
    AnalysisError,
    antiplane_reference,
    crack_speed_fit,
    fill_rates,
    l2_errors,
    write_csv,
    write_error_reports,
)
from ..fracture import SimulationTrace, compute_cell_fields, run_quasi_static
from ..reconstruction import ReconstructionPlan
from ..system import DirichletBC, LoadSpec, Solver, StiffnessAssembly, assemble_load, dirichlet_data
from .config import config_hash, dump_config, load_config
from .scenario import (
    CONVERGENCE,
    Scenario,
    build_material,
    build_problem,
    build_scenario_mesh,
    builtin,
    builtin_names,
    validate,
)
from .vtk import snapshot_name, write_vtk_snapshot

log = logging.getLogger(__name__)


@dataclass
class RunResult:
    scenario: Scenario
    out_dir: Path
    outputs: list = field(default_factory=list)
    trace: Optional[SimulationTrace] = None
    reports: list = field(default_factory=list)
    manifest: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.manifest.get("status") == "ok"


def resolve_scenario(source: Union[str, Path, Scenario]) -> Scenario:
    """A scenario from a builtin name, a configuration path or a value."""
    if isinstance(source, Scenario):
        validate(source)
        return source
    if str(source) in builtin_names():
        return builtin(str(source))
    return load_config(source)


def versions() -> dict:
    out = {"demcrack": __version__, "python": platform.python_version(),
           "numpy": np.__version__, "scipy": scipy.__version__}
    try:
        import numba
        out["numba"] = numba.__version__
    except ImportError:  # pragma: no cover
        out["numba"] = None
    return out


def _write_manifest(res: RunResult, status: str, error: Optional[str], t0: float,
                    extra: dict) -> None:
    sc = res.scenario
    manifest = {
        "scenario": sc.name,
        "kind": sc.kind,
        "config_sha256": config_hash(sc),
        "seed": sc.seed,
        "backend": requested_backend(),
        "versions": versions(),
        "status": status,
        "error": error,
        "outputs": sorted(Path(p).name for p in res.outputs),
        "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "wall_time_s": round(time.perf_counter() - t0, 3),
    }
    manifest.update(extra)
    path = res.out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    res.manifest = manifest


# ---------------------------------------------------------------------------
# antiplane convergence study
# ---------------------------------------------------------------------------

class SlitReference:
    """Near-tip mode III displacement as boundary data on a slit disk.

    On the slit (``y = 0``, ``x < 0``) the angle is ``+pi`` on the upper lip
    (outward normal pointing down) and ``-pi`` on the lower lip.
    """

    def __init__(self, tau: float, a: float, mu: float):
        self.tau, self.a, self.mu = tau, a, mu

    def polar(self, x, n=None):
        r = np.hypot(x[:, 0], x[:, 1])
        th = np.arctan2(x[:, 1], x[:, 0])
        if n is not None:
            on = (np.abs(x[:, 1]) <= 1e-12 * np.maximum(r, 1e-300)) & (x[:, 0] < 0)
            th = np.where(on, np.where(n[:, 1] < 0, np.pi, -np.pi), th)
        return np.maximum(r, 1e-300), th

    def __call__(self, x, t, n):
        r, th = self.polar(x, n)
        return t * antiplane_reference(r, th, self.tau, self.a, self.mu)[0]

    def displacement(self, x):
        return antiplane_reference(*self.polar(x), self.tau, self.a, self.mu)[0]

    def gradient(self, x):
        return antiplane_reference(*self.polar(x), self.tau, self.a, self.mu)[1] / self.mu


def convergence_levels(sc: Scenario, n_levels: Optional[int] = None) -> list:
    """Ring counts, rescaled so that the first level matches ``mesh.h``."""
    base = list(sc.convergence.levels)
    n0 = max(1, int(round(sc.mesh.radius / sc.mesh.h)))
    levels = [max(1, int(round(n * n0 / base[0]))) for n in base]
    return levels[:n_levels] if n_levels else levels


def convergence_study(sc: Scenario, n_levels: Optional[int] = None) -> list:
    """Error reports (with rates) for the slit-disk levels."""
    mat = build_material(sc)
    ref = SlitReference(sc.convergence.tau, sc.convergence.a, mat.mu)
    tag = sc.boundaries[0].tag if sc.boundaries else "ball"
    loads = LoadSpec(dirichlet=[DirichletBC(tag, ref)])
    reports = []
    for n in convergence_levels(sc, n_levels):
        mesh = build_scenario_mesh(sc, level=n)
        mask = loads.apply_to_mesh(mesh, 1)
        plan = ReconstructionPlan(mesh, 1, mask)
        asm = StiffnessAssembly(mesh, plan, mat, sc.beta)
        system = assemble_load(mesh, plan, loads, 1.0, asm)
        u = Solver().solve(system.matrix, system.rhs)
        fields = compute_cell_fields(asm, u, dirichlet_data(mesh, loads, 1.0, 1))
        rep = l2_errors(mesh, u, fields.gradient, ref.displacement, ref.gradient)
        log.info("level n=%d: %d dofs, L2 %.3e, energy %.3e", n, rep.n_dofs, rep.l2_error,
                 rep.energy_error)
        reports.append(rep)
    return fill_rates(reports)


def run_convergence(source, n_levels: Optional[int] = None, h=None, out=None) -> RunResult:
    t0 = time.perf_counter()
    sc = resolve_scenario(source).with_overrides(h=h)
    if sc.kind != CONVERGENCE:
        raise ValueError(f"scenario {sc.name!r} is not a convergence study")
    res = RunResult(sc, Path(out or sc.output_dir or f"out/{sc.name}"))
    res.out_dir.mkdir(parents=True, exist_ok=True)
    (res.out_dir / "config.ini").write_text(dump_config(sc))
    res.outputs.append(res.out_dir / "config.ini")
    try:
        res.reports = convergence_study(sc, n_levels)
    except Exception as exc:
        _write_manifest(res, "failed", f"{type(exc).__name__}: {exc}", t0, {})
        raise
    path = res.out_dir / "convergence.csv"
    write_error_reports(path, res.reports)
    res.outputs.append(path)
    _write_manifest(res, "ok", None, t0, {"levels": convergence_levels(sc, n_levels)})
    return res


# ---------------------------------------------------------------------------
# quasi-static runs
# ---------------------------------------------------------------------------

def write_trace(trace: SimulationTrace, mesh, out_dir: Path, sc: Scenario) -> list:
    """CSV artifacts of a quasi-static trace; returns the written paths."""
    out = []
    steps = out_dir / "steps.csv"
    write_csv(steps, ["k", "m_count", "u_D", "crack_length", "reaction_force"],
              [(r.k, r.m_count, r.u_D, r.crack_length, r.force_after) for r in trace.records])
    out.append(steps)
    curve = out_dir / "load_displacement.csv"
    write_csv(curve, ["u_D", "force", "force_before_breaking", "broken"],
              [(r.u_D, r.force_after, r.force, len(r.broken)) for r in trace.records])
    out.append(curve)
    path = out_dir / "crack_path.csv"
    verts = trace.crack_vertices
    write_csv(path, ["order", "vertex", "x", "y"],
              [(i, v, *mesh.vertices[v]) for i, v in enumerate(verts)])
    out.append(path)
    facets = out_dir / "crack_facets.csv"
    initial = set(trace.initial_crack_facets)
    write_csv(facets, ["order", "facet", "x0", "y0", "x1", "y1", "initial"],
              [(i, f, *mesh.vertices[mesh.facet_vertices[f]].ravel(), int(f in initial))
               for i, f in enumerate(trace.crack_facets)])
    out.append(facets)
    if sc.speed_reference is not None and trace.records:
        l0 = float(mesh.facet_lengths[trace.initial_crack_facets].sum())
        try:
            speed = crack_speed_fit([r.u_D for r in trace.records],
                                    [r.crack_length for r in trace.records], l0)
        except AnalysisError:
            speed = float("nan")
        err = speed / sc.speed_reference - 1.0
        path = out_dir / "crack_speed.csv"
        write_csv(path, ["h", "du", "speed", "reference", "relative_error"],
                  [(sc.mesh.h, sc.du, speed, sc.speed_reference, err)])
        out.append(path)
    return out


def run_scenario(source, h=None, du=None, seed=None, out=None, u_final=None) -> RunResult:
    """Execute a scenario and write its artifacts to ``out``.

    Solver failures end the run early; the partial trace is still written
    and the manifest records ``status = "failed"``.
    """
    t0 = time.perf_counter()
    sc = resolve_scenario(source).with_overrides(h=h, du=du, seed=seed, u_final=u_final)
    if sc.kind == CONVERGENCE:
        return run_convergence(sc, out=out)
    validate(sc)
    res = RunResult(sc, Path(out or sc.output_dir or f"out/{sc.name}"))
    res.out_dir.mkdir(parents=True, exist_ok=True)
    (res.out_dir / "config.ini").write_text(dump_config(sc))
    res.outputs.append(res.out_dir / "config.ini")
    problem = build_problem(sc)
    mesh = problem.mesh
    d = problem.material.dim

    def snapshot(k, uD, mesh, u, fields, state):
        if sc.snapshot_every and k % sc.snapshot_every == 0 and fields is not None:
            res.outputs.append(write_vtk_snapshot(mesh, u, fields.stress, state,
                                                  res.out_dir / snapshot_name(k),
                                                  f"{sc.name} u_D={uD:.6g}"))

    try:
        trace = run_quasi_static(problem, snapshot)
    except Exception as exc:
        _write_manifest(res, "failed", f"{type(exc).__name__}: {exc}", t0, {})
        raise
    res.trace = trace
    res.outputs.extend(write_trace(trace, mesh, res.out_dir, sc))
    if trace.fields is not None:
        res.outputs.append(write_vtk_snapshot(mesh, trace.u, trace.fields.stress, trace,
                                              res.out_dir / "final.vtk", f"{sc.name} final"))
    extra = {
        "n_cells": mesh.n_cells, "n_dofs": mesh.n_cells * d,
        "load_steps": len(trace.records), "crack_facets": len(trace.crack_facets),
        "reached_boundary": trace.reached_boundary,
    }
    fb = trace.first_break
    if fb is not None:
        extra["crack_start"] = {"u_D": fb.u_D, "force": fb.force}
    status = "ok" if trace.error is None else "failed"
    _write_manifest(res, status, trace.error, t0, extra)
    return res
