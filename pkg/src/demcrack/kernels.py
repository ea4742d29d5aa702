"""Hot loops with a numba and a numpy implementation.

Both variants return identical quantities up to round-off.  The public
functions dispatch on :func:`demcrack._accel.requested_backend`, read at
call time so tests can switch backends through the environment.

Node numbering: a "node" is either a cell (index ``c``) or a facet-side
slot (index ``n_cells + 2 F + s``).  Scalar row ``node * d + k`` carries
component ``k``.
"""

from __future__ import annotations

import numpy as np

from ._accel import njit, requested_backend


def _plane_strain_q(lam: float, mu: float) -> np.ndarray:
    # quadratic form of eps:C:eps on vec(G) = (G00, G01, G10, G11)
    q = np.zeros((4, 4))
    q[0, 0] = q[3, 3] = lam + 2 * mu
    q[0, 3] = q[3, 0] = lam
    q[1, 1] = q[2, 2] = q[1, 2] = q[2, 1] = mu
    return q


# ---------------------------------------------------------------------------
# cell consistency term  |c| eps_c : C : eps_c
# ---------------------------------------------------------------------------

def cell_consistency_numpy(nodes, wn, areas, q, d):
    """Element matrices of the consistency term as COO triplets.

    Parameters
    ----------
    nodes : (nC, 3) int
        Slot node of each local facet.
    wn : (nC, 3, 2) float
        ``|F|/|c| n_{F,c}``.
    areas : (nC,) float
    q : (d*2, d*2) float
        Quadratic form acting on the flattened gradient.
    d : int
        1 (antiplane) or 2 (plane strain).
    """
    nc = len(nodes)
    nl = 3 * d
    B = np.zeros((nc, 2 * d, nl))
    for f in range(3):
        for k in range(d):
            for j in range(2):
                B[:, 2 * k + j, d * f + k] = wn[:, f, j]
    K = np.einsum("cpa,pq,cqb->cab", B, q, B) * areas[:, None, None]
    K = 0.5 * (K + K.transpose(0, 2, 1))
    loc = nodes[:, np.arange(nl) // d] * d + np.arange(nl) % d
    rows = np.repeat(loc, nl, axis=1).ravel()
    cols = np.tile(loc, (1, nl)).ravel()
    return rows, cols, K.ravel()


@njit(cache=True)
def cell_consistency_numba(nodes, wn, areas, q, d):
    nc = nodes.shape[0]
    nl = 3 * d
    ng = 2 * d
    m = nl * nl
    rows = np.empty(nc * m, dtype=np.int64)
    cols = np.empty(nc * m, dtype=np.int64)
    vals = np.empty(nc * m)
    B = np.zeros((ng, nl))
    QB = np.zeros((ng, nl))
    K = np.zeros((nl, nl))
    loc = np.empty(nl, dtype=np.int64)
    for c in range(nc):
        B[:, :] = 0.0
        for f in range(3):
            for k in range(d):
                for j in range(2):
                    B[2 * k + j, d * f + k] = wn[c, f, j]
        for p in range(ng):
            for b in range(nl):
                s = 0.0
                for r in range(ng):
                    s += q[p, r] * B[r, b]
                QB[p, b] = s
        for a in range(nl):
            for b in range(nl):
                s = 0.0
                for p in range(ng):
                    s += B[p, a] * QB[p, b]
                K[a, b] = s * areas[c]
        for a in range(nl):
            loc[a] = nodes[c, a // d] * d + a % d
        base = c * m
        for a in range(nl):
            for b in range(nl):
                i = base + a * nl + b
                rows[i] = loc[a]
                cols[i] = loc[b]
                vals[i] = 0.5 * (K[a, b] + K[b, a])
    return rows, cols, vals


def cell_consistency_triplets(nodes, wn, areas, q, d):
    nodes = np.ascontiguousarray(nodes, dtype=np.int64)
    wn = np.ascontiguousarray(wn, dtype=float)
    areas = np.ascontiguousarray(areas, dtype=float)
    q = np.ascontiguousarray(q, dtype=float)
    if requested_backend() == "numba":
        return cell_consistency_numba(nodes, wn, areas, q, int(d))
    return cell_consistency_numpy(nodes, wn, areas, q, int(d))


# ---------------------------------------------------------------------------
# facet penalty term  w [R]_F . [R]_F
# ---------------------------------------------------------------------------

def facet_penalty_numpy(nodes, coefs, weights, d):
    """Rank-one penalty elements ``w_k (c c^T)`` per facet and component.

    ``nodes``/``coefs`` are (nP, 8): the jump at ``x_F`` is
    ``sum_i coefs[p, i] * y[nodes[p, i]]`` componentwise.  ``weights`` is
    (nP, d), zero for unpenalised components.
    """
    npen, ne = nodes.shape
    cc = coefs[:, :, None] * coefs[:, None, :]
    vals = weights[:, :, None, None] * cc[:, None, :, :]
    k = np.arange(d)
    rows = nodes[:, None, :, None] * d + k[None, :, None, None]
    cols = nodes[:, None, None, :] * d + k[None, :, None, None]
    rows = np.broadcast_to(rows, vals.shape)
    cols = np.broadcast_to(cols, vals.shape)
    return rows.ravel(), cols.ravel(), vals.ravel()


@njit(cache=True)
def facet_penalty_numba(nodes, coefs, weights, d):
    npen, ne = nodes.shape
    m = d * ne * ne
    rows = np.empty(npen * m, dtype=np.int64)
    cols = np.empty(npen * m, dtype=np.int64)
    vals = np.empty(npen * m)
    for p in range(npen):
        for k in range(d):
            w = weights[p, k]
            for i in range(ne):
                ri = nodes[p, i] * d + k
                ci = coefs[p, i]
                for j in range(ne):
                    t = p * m + (k * ne + i) * ne + j
                    rows[t] = ri
                    cols[t] = nodes[p, j] * d + k
                    vals[t] = w * (ci * coefs[p, j])
    return rows, cols, vals


def facet_penalty_triplets(nodes, coefs, weights, d):
    nodes = np.ascontiguousarray(nodes, dtype=np.int64)
    coefs = np.ascontiguousarray(coefs, dtype=float)
    weights = np.ascontiguousarray(weights, dtype=float)
    if requested_backend() == "numba":
        return facet_penalty_numba(nodes, coefs, weights, int(d))
    return facet_penalty_numpy(nodes, coefs, weights, int(d))


# ---------------------------------------------------------------------------
# ESTIMATE: per-vertex max of the facet energy density n . S . [u]
# ---------------------------------------------------------------------------

def estimate_scan_numpy(crack_ptr, inter_ptr, normals, stress, jumps):
    """Per-vertex ``max_F' n_F' . {S}_F' . [u]_F'`` (without the factor pi).

    ``crack_ptr`` counts the cracked facets at each vertex and ``inter_ptr``
    holds CSR offsets into the uncracked-facet arrays: normals (m, 2),
    averaged stress (m, d, 2) and jumps ``u_+ - u_-`` along the normal
    (m, d).  Vertices with no cracked or no uncracked facet get ``-inf``.
    Returns the maxima and the global index of the maximising facet.
    """
    nv = len(inter_ptr) - 1
    g = np.full(nv, -np.inf)
    arg = np.full(nv, -1, dtype=np.int64)
    if len(normals) == 0:
        return g, arg
    dens = np.einsum("mkj,mj,mk->m", stress, normals, jumps)
    for v in range(nv):
        b0, b1 = inter_ptr[v], inter_ptr[v + 1]
        if crack_ptr[v + 1] == crack_ptr[v] or b1 == b0:
            continue
        j = int(np.argmax(dens[b0:b1]))
        g[v] = dens[b0 + j]
        arg[v] = b0 + j
    return g, arg


@njit(cache=True)
def estimate_scan_numba(crack_ptr, inter_ptr, normals, stress, jumps):
    nv = inter_ptr.shape[0] - 1
    d = jumps.shape[1]
    g = np.full(nv, -np.inf)
    arg = np.full(nv, -1, dtype=np.int64)
    for v in range(nv):
        if crack_ptr[v + 1] == crack_ptr[v]:
            continue
        for b in range(inter_ptr[v], inter_ptr[v + 1]):
            s = 0.0
            for k in range(d):
                s += (stress[b, k, 0] * normals[b, 0]
                      + stress[b, k, 1] * normals[b, 1]) * jumps[b, k]
            if s > g[v]:
                g[v] = s
                arg[v] = b
    return g, arg


def estimate_scan(crack_ptr, inter_ptr, normals, stress, jumps):
    crack_ptr = np.ascontiguousarray(crack_ptr, dtype=np.int64)
    inter_ptr = np.ascontiguousarray(inter_ptr, dtype=np.int64)
    normals = np.ascontiguousarray(normals, dtype=float).reshape(-1, 2)
    m = len(normals)
    jumps = np.ascontiguousarray(jumps, dtype=float).reshape(m, -1)
    stress = np.ascontiguousarray(stress, dtype=float).reshape(m, jumps.shape[1], 2)
    if requested_backend() == "numba":
        return estimate_scan_numba(crack_ptr, inter_ptr, normals, stress, jumps)
    return estimate_scan_numpy(crack_ptr, inter_ptr, normals, stress, jumps)


def plane_strain_form(lam: float, mu: float) -> np.ndarray:
    return _plane_strain_q(lam, mu)


def antiplane_form(mu: float) -> np.ndarray:
    return mu * np.eye(2)
