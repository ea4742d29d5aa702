"""Independent reference implementations and small meshes for the tests.

The oracles enumerate facets with plain Python loops and never call the
vectorised code paths they are compared against.
"""

from __future__ import annotations

import math

import numpy as np

from demcrack.mesh import CRACKED, INTERIOR, build_mesh, rectangle_tags


def two_triangle_square(tagging=None, dirichlet_tags=()):
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    cells = np.array([[0, 1, 2], [0, 2, 3]])
    return build_mesh(verts, cells, tagging, dirichlet_tags)


def single_triangle():
    return build_mesh(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([[0, 1, 2]]))


def pinwheel(radius=1.0, n=8, tagging=None):
    """``n`` triangles around the origin."""
    th = 2 * np.pi * np.arange(n) / n
    verts = np.vstack([[0.0, 0.0], np.column_stack([radius * np.cos(th), radius * np.sin(th)])])
    cells = np.array([[0, 1 + i, 1 + (i + 1) % n] for i in range(n)])
    return build_mesh(verts, cells, tagging)


def jittered_square(n, seed=0, jitter=0.2, L=1.0):
    """Right-pattern grid of ``[0, L]^2`` with jittered interior vertices."""
    rng = np.random.default_rng(seed)
    xs = np.linspace(0.0, L, n + 1)
    X, Y = np.meshgrid(xs, xs, indexing="xy")
    p = np.column_stack([X.ravel(), Y.ravel()])
    inner = (p[:, 0] > 0) & (p[:, 0] < L) & (p[:, 1] > 0) & (p[:, 1] < L)
    p[inner] += rng.uniform(-jitter, jitter, size=(inner.sum(), 2)) * L / n
    vid = lambda i, j: j * (n + 1) + i
    cells = []
    for j in range(n):
        for i in range(n):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            cells += [[a, b, c], [a, c, d]]
    return build_mesh(p, np.array(cells), rectangle_tags(0, 0, L, L))


def brute_estimate(mesh, crack_vertices, stress, u):
    """``pi max n_F' . {S}_F' . (u_+ - u_-)_F'`` over uncracked interior facets at v.

    Only vertices that touch a cracked facet are considered; others, and
    vertices without an uncracked interior facet, get ``-inf``.
    """
    nc = mesh.n_cells
    S = np.asarray(stress, dtype=float).reshape(nc, -1, 2)
    U = np.asarray(u, dtype=float).reshape(nc, -1)
    out = {}
    for v in crack_vertices:
        touches_crack = False
        best = -math.inf
        for f in range(mesh.n_facets):
            a, b = mesh.facet_vertices[f]
            if v != a and v != b:
                continue
            if mesh.status[f] == CRACKED:
                touches_crack = True
        for f in range(mesh.n_facets):
            a, b = mesh.facet_vertices[f]
            if (v != a and v != b) or mesh.status[f] != INTERIOR:
                continue
            cm, cp = mesh.facet_cells[f]
            n = mesh.facet_normals[f]
            sig = 0.5 * (S[cm] + S[cp])
            jump = U[cp] - U[cm]
            val = 0.0
            for k in range(S.shape[1]):
                val += (sig[k, 0] * n[0] + sig[k, 1] * n[1]) * jump[k]
            best = max(best, math.pi * val)
        out[v] = best if touches_crack else -math.inf
    return out


def brute_mark(mesh, crack_vertices, broken_count, N, G, stress, strain, Gc, candidate=None):
    """MARK without ties: window, threshold, argmax vertex, argmax facet density."""
    window = crack_vertices[-N:] if N else []
    best_v, best_g = None, -math.inf
    for v in window:
        g = G[v]
        if g >= Gc and g > best_g:
            best_v, best_g = v, g
    if best_v is None:
        return None
    best_f, best_e = None, -math.inf
    for f in range(mesh.n_facets):
        a, b = mesh.facet_vertices[f]
        if best_v not in (a, b) or mesh.status[f] != INTERIOR:
            continue
        cm, cp = mesh.facet_cells[f]
        if broken_count[cm] >= 1 or broken_count[cp] >= 1:
            continue
        if candidate is not None and not candidate(mesh, f):
            continue
        s = 0.5 * (stress[cm] + stress[cp])
        e = 0.5 * (strain[cm] + strain[cp])
        dens = 0.5 * float(np.sum(s * e))
        if dens > best_e:
            best_f, best_e = f, dens
    return best_f


def loop_energy(mesh, plan, material, v, g=None, beta=2.0):
    """``a_h(v, v)`` evaluated facet by facet from the stencils."""
    d = plan.dim
    nc = mesh.n_cells
    V = np.asarray(v, dtype=float).reshape(nc, d)
    Gd = np.zeros((mesh.n_facets, d)) if g is None else np.asarray(g, float).reshape(-1, d)

    def slot(f, s):
        st = plan.slot_stencil(f, s)
        val = st.weights @ V[st.cells] if len(st.cells) else np.zeros(d)
        mask = plan.dirichlet_mask[f]
        return np.where(mask, Gd[f], val)

    normals = mesh.outward_normals()
    grads = np.zeros((nc, d, 2))
    for c in range(nc):
        for j in range(3):
            f = mesh.cell_facets[c, j]
            s = mesh.cell_sides[c, j]
            grads[c] += np.outer(slot(f, s), normals[c, j]) * mesh.facet_lengths[f] / mesh.cell_areas[c]
    energy = 0.0
    for c in range(nc):
        G = grads[c]
        if d == 2:
            eps = 0.5 * (G + G.T)
            sig = material.lam * np.trace(eps) * np.eye(2) + 2 * material.mu * eps
        else:
            eps = G
            sig = material.mu * G
        energy += mesh.cell_areas[c] * float(np.sum(sig * eps))

    def p1(c, x):
        return V[c] + grads[c] @ (x - mesh.cell_barycenters[c])

    for f in range(mesh.n_facets):
        st = mesh.status[f]
        x = mesh.facet_barycenters[f]
        w = beta * material.mu * mesh.facet_lengths[f] / mesh.facet_lengths[f]
        cm, cp = mesh.facet_cells[f]
        if st == INTERIOR:
            jump = p1(cm, x) - p1(cp, x)
            energy += w * float(jump @ jump)
        elif plan.dirichlet_mask[f].any():
            jump = (slot(f, 0) - p1(cm, x)) * plan.dirichlet_mask[f]
            energy += w * float(jump @ jump)
    return energy


def inner_facets(mesh):
    """Interior facets whose two cells have no outer-boundary facet.

    Cracking only such facets, at most one per cell, never detaches a
    fragment too small for a stencil.
    """
    bnd_cell = np.zeros(mesh.n_cells, dtype=bool)
    bnd_cell[mesh.facet_cells[mesh.on_outer_boundary, 0]] = True
    ok = (mesh.status == INTERIOR) & ~bnd_cell[mesh.facet_cells[:, 0]]
    ok &= ~bnd_cell[np.maximum(mesh.facet_cells[:, 1], 0)]
    return np.flatnonzero(ok)


def random_splits(mesh, rng, count, broken=None):
    """Admissible random facets under the one-per-cell rule (not applied)."""
    broken = np.zeros(mesh.n_cells, dtype=np.int64) if broken is None else broken.copy()
    out = []
    for f in rng.permutation(inner_facets(mesh)):
        if len(out) == count:
            break
        cells = mesh.facet_cells[f]
        if broken[cells].max() >= 1:
            continue
        broken[cells] += 1
        out.append(int(f))
    return out
