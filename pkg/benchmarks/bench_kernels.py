#!/usr/bin/env python3
"""Compare the numba and numpy kernels on realistic input sizes.

Inputs come from a structured plane-strain mesh so that index patterns
and array shapes match a real assembly.  Each kernel is checked for
agreement before timing.

    python benchmarks/bench_kernels.py [--cells N] [--repeat R]
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from demcrack import kernels
from demcrack.fracture import crack_vertex_facets, facet_average, facet_jump, initialize_crack
from demcrack.material import from_young_poisson
from demcrack.mesh import generate_structured_strip, rectangle_tags
from demcrack.reconstruction import ReconstructionPlan, scaled_normals
from demcrack.system import DirichletBC, LoadSpec, NeumannBC, penalty_elements


def best_of(func, args, repeat):
    func(*args)  # warm-up (and JIT compilation)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        func(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def setup(n_cells: int):
    n = max(2, int(round(math.sqrt(n_cells / 4))))
    h = 1.0 / n
    mesh = generate_structured_strip(1.0, 1.0, h, "crossed", tagging=rectangle_tags(0, 0, 1, 1))
    initialize_crack(mesh, np.array([[0.0, 0.5], [0.5, 0.5]]))
    zero = lambda x, t, nrm: 0.0 * x
    loads = LoadSpec(dirichlet=[DirichletBC("bottom", zero), DirichletBC("top", zero)],
                     neumann=[NeumannBC("left"), NeumannBC("right")])
    mat = from_young_poisson(1.0, 0.3, 1.0)
    plan = ReconstructionPlan(mesh, 2, loads.apply_to_mesh(mesh, 2))
    rng = np.random.default_rng(0)
    cons = (plan.slot_nodes(), scaled_normals(mesh), mesh.cell_areas, mat.quadratic_form(), 2)
    _, nodes, coefs, weights = penalty_elements(mesh, plan, mat, 2.0)
    pen = (nodes, coefs, weights, 2)
    verts = list(range(mesh.n_vertices))
    cptr, iptr, jf = crack_vertex_facets(mesh, verts)
    cptr = np.arange(len(verts) + 1)  # every vertex counts as a crack vertex
    stress = rng.normal(size=(mesh.n_cells, 2, 2))
    u = rng.normal(size=(mesh.n_cells, 2))
    est = (cptr, iptr, mesh.facet_normals[jf], facet_average(mesh, stress, jf),
           facet_jump(mesh, u, jf))
    return mesh, {"cell_consistency": cons, "facet_penalty": pen, "estimate_scan": est}


KERNELS = {
    "cell_consistency": (kernels.cell_consistency_numpy, kernels.cell_consistency_numba),
    "facet_penalty": (kernels.facet_penalty_numpy, kernels.facet_penalty_numba),
    "estimate_scan": (kernels.estimate_scan_numpy, kernels.estimate_scan_numba),
}


def prepare(name, args):
    """Apply the same dtype normalisation as the dispatching wrappers."""
    if name == "cell_consistency":
        nodes, wn, areas, q, d = args
        return (np.ascontiguousarray(nodes, dtype=np.int64), np.ascontiguousarray(wn),
                np.ascontiguousarray(areas), np.ascontiguousarray(q), d)
    if name == "facet_penalty":
        nodes, coefs, weights, d = args
        return (np.ascontiguousarray(nodes, dtype=np.int64), np.ascontiguousarray(coefs),
                np.ascontiguousarray(weights), d)
    cptr, iptr, normals, stress, jumps = args
    return (cptr.astype(np.int64), iptr.astype(np.int64), np.ascontiguousarray(normals),
            np.ascontiguousarray(stress), np.ascontiguousarray(jumps))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--cells", type=int, nargs="+", default=[4_000, 40_000, 160_000])
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)
    print(f"{'kernel':<18} {'cells':>8} {'numpy [ms]':>11} {'numba [ms]':>11} {'speed-up':>9}")
    for nc in args.cells:
        mesh, inputs = setup(nc)
        for name, (f_np, f_nb) in KERNELS.items():
            a = prepare(name, inputs[name])
            r_np, r_nb = f_np(*a), f_nb(*a)
            for x, y in zip(r_np, r_nb):
                if not np.allclose(x, y, rtol=1e-12, atol=1e-12):
                    raise SystemExit(f"{name}: backends disagree")
            t_np = best_of(f_np, a, args.repeat)
            t_nb = best_of(f_nb, a, args.repeat)
            print(f"{name:<18} {mesh.n_cells:8d} {1e3 * t_np:11.2f} {1e3 * t_nb:11.2f} "
                  f"{t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()
