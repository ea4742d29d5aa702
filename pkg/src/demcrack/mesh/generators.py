"""Mesh generators: structured strips, ring-structured disks and a small
DistMesh-style unstructured triangulator (Persson & Strang force balance on
top of ``scipy.spatial.Delaunay``) for domains with holes and crack lines.
"""

from __future__ import annotations

import logging
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.spatial import Delaunay

from .core import Mesh, MeshError, TaggingRule, axis_predicate, build_mesh

log = logging.getLogger(__name__)

PATTERNS = ("crossed", "right", "left", "alternate")


def _divisions(length: float, h: float, name: str) -> int:
    n = int(round(length / h))
    if n < 1 or abs(n * h - length) > 1e-9 * max(length, h):
        raise MeshError(f"h={h} does not divide {name}={length}")
    return n


def rectangle_tags(x0: float, y0: float, x1: float, y1: float) -> dict:
    tol = 1e-9 * max(x1 - x0, y1 - y0)
    return {
        "left": axis_predicate(x=x0, tol=tol),
        "right": axis_predicate(x=x1, tol=tol),
        "bottom": axis_predicate(y=y0, tol=tol),
        "top": axis_predicate(y=y1, tol=tol),
    }


def generate_structured_strip(L: float, H: float, h: float, pattern: str = "crossed",
                              origin=(0.0, 0.0),
                              tagging: Optional[TaggingRule] = None,
                              dirichlet_tags: Sequence[str] = ()) -> Mesh:
    """Structured triangulation of ``[0, L] x [0, H]`` (shifted by ``origin``).

    ``crossed`` splits each h-square into four triangles through its centre,
    ``right``/``left`` use one diagonal, ``alternate`` flips the diagonal in a
    checkerboard.  Every grid line is a chain of facets.
    """
    if L <= 0 or H <= 0 or h <= 0:
        raise MeshError("L, H and h must be positive")
    if pattern not in PATTERNS:
        raise MeshError(f"unknown pattern {pattern!r}; expected one of {PATTERNS}")
    nx = _divisions(L, h, "L")
    ny = _divisions(H, h, "H")
    ox, oy = origin
    xs = ox + np.linspace(0.0, L, nx + 1)
    ys = oy + np.linspace(0.0, H, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    verts = [np.column_stack([X.ravel(), Y.ravel()])]

    def vid(i, j):
        return j * (nx + 1) + i

    I, J = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    I, J = I.ravel(), J.ravel()
    a, b = vid(I, J), vid(I + 1, J)
    c, d = vid(I + 1, J + 1), vid(I, J + 1)
    if pattern == "crossed":
        centre = (nx + 1) * (ny + 1) + np.arange(nx * ny)
        verts.append(np.column_stack([ox + (I + 0.5) * L / nx, oy + (J + 0.5) * H / ny]))
        cells = np.concatenate([
            np.column_stack([a, b, centre]),
            np.column_stack([b, c, centre]),
            np.column_stack([c, d, centre]),
            np.column_stack([d, a, centre]),
        ])
    else:
        if pattern == "right":
            flip = np.zeros(len(I), dtype=bool)
        elif pattern == "left":
            flip = np.ones(len(I), dtype=bool)
        else:
            flip = (I + J) % 2 == 1
        t1 = np.where(flip[:, None], np.column_stack([a, b, d]), np.column_stack([a, b, c]))
        t2 = np.where(flip[:, None], np.column_stack([b, c, d]), np.column_stack([a, c, d]))
        cells = np.concatenate([t1, t2])
    vertices = np.concatenate(verts)
    rule = tagging if tagging is not None else rectangle_tags(ox, oy, ox + L, oy + H)
    return build_mesh(vertices, cells, rule, dirichlet_tags)


def disk_points_and_cells(R: float, n: int, center=(0.0, 0.0)):
    """Ring-structured disk: ring ``i`` carries ``6 i`` points, 6 n^2 triangles.

    The six spokes at multiples of 60 degrees are chains of edges, so the
    ray ``theta = pi`` can host a slit.
    """
    if n < 1:
        raise MeshError("disk needs at least one ring")
    pts = [np.zeros((1, 2))]
    start = [0]
    for i in range(1, n + 1):
        k = np.arange(6 * i)
        th = 2 * np.pi * k / (6 * i)
        r = R * i / n
        pts.append(np.column_stack([r * np.cos(th), r * np.sin(th)]))
        start.append(start[-1] + (1 if i == 1 else 6 * (i - 1)))
    pts = np.concatenate(pts) + np.asarray(center, dtype=float)

    def P(i, k):
        if i == 0:
            return 0
        return start[i] + (k % (6 * i))

    cells = []
    for i in range(n):
        for s in range(6):
            inner = [P(i, s * i + j) for j in range(i + 1)]
            outer = [P(i + 1, s * (i + 1) + j) for j in range(i + 2)]
            for j in range(i + 1):
                cells.append((inner[j], outer[j], outer[j + 1]))
            for j in range(i):
                cells.append((inner[j], outer[j + 1], inner[j + 1]))
    return pts, np.array(cells, dtype=np.int64)


def cut_along_polyline(vertices: np.ndarray, cells: np.ndarray, polyline,
                       keep_endpoint: bool = True, tol: float = 1e-12):
    """Duplicate vertices on a straight slit so that it becomes a boundary.

    Vertices lying on the segment ``polyline[0] -> polyline[-1]`` (except the
    last point when ``keep_endpoint``, i.e. the slit tip) are duplicated and
    the copies assigned to the cells on the right-hand side of the slit
    direction.
    """
    a, b = (np.asarray(p, dtype=float) for p in (polyline[0], polyline[-1]))
    ab = b - a
    L2 = ab @ ab
    t = ((vertices - a) @ ab) / L2
    q = a + t[:, None] * ab
    dist = np.hypot(*(vertices - q).T)
    scale = np.sqrt(L2)
    on = (dist <= tol * scale + 1e-14) & (t >= -1e-12) & (t <= 1 + 1e-12)
    if keep_endpoint:
        on &= np.hypot(*(vertices - b).T) > tol * scale + 1e-14
    cells = cells.copy()
    vertices = vertices.copy()
    cent = vertices[cells].mean(axis=1)
    side = ab[0] * (cent[:, 1] - a[1]) - ab[1] * (cent[:, 0] - a[0])
    right = side < 0
    new = {}
    for v in np.flatnonzero(on):
        new[v] = len(vertices) + len(new)
    if not new:
        return vertices, cells
    vertices = np.concatenate([vertices, vertices[list(new)]])
    for c in np.flatnonzero(right):
        for j in range(3):
            v = cells[c, j]
            if v in new:
                cells[c, j] = new[v]
    return vertices, cells


# ---------------------------------------------------------------------------
# signed distance helpers
# ---------------------------------------------------------------------------

def drectangle(x0, y0, x1, y1) -> Callable[[np.ndarray], np.ndarray]:
    def d(p):
        dx = np.maximum(x0 - p[:, 0], p[:, 0] - x1)
        dy = np.maximum(y0 - p[:, 1], p[:, 1] - y1)
        out = np.hypot(np.maximum(dx, 0), np.maximum(dy, 0))
        inside = np.minimum(np.maximum(dx, dy), 0)
        return out + inside
    return d


def dcircle(cx, cy, r) -> Callable[[np.ndarray], np.ndarray]:
    return lambda p: np.hypot(p[:, 0] - cx, p[:, 1] - cy) - r


def ddiff(d1, *others) -> Callable[[np.ndarray], np.ndarray]:
    def d(p):
        out = d1(p)
        for o in others:
            out = np.maximum(out, -o(p))
        return out
    return d


def discretize_segment(a, b, h: float, include_end: bool = True) -> np.ndarray:
    a, b = np.asarray(a, float), np.asarray(b, float)
    n = max(1, int(np.ceil(np.hypot(*(b - a)) / h - 1e-9)))
    t = np.linspace(0.0, 1.0, n + 1)
    if not include_end:
        t = t[:-1]
    return a + t[:, None] * (b - a)


def discretize_circle(cx, cy, r, h: float) -> np.ndarray:
    n = max(8, int(np.ceil(2 * np.pi * r / h)))
    th = 2 * np.pi * np.arange(n) / n
    return np.column_stack([cx + r * np.cos(th), cy + r * np.sin(th)])


def _edges_of(tri: np.ndarray) -> set:
    e = np.sort(tri[:, [[0, 1], [1, 2], [2, 0]]].reshape(-1, 2), axis=1)
    return set(map(tuple, e))


def generate_unstructured(sdf: Callable[[np.ndarray], np.ndarray], bbox, h0: float,
                          fixed_points: Optional[np.ndarray] = None,
                          fixed_chains: Sequence[np.ndarray] = (),
                          seed: int = 0, max_iter: int = 300,
                          tagging: Optional[TaggingRule] = None,
                          dirichlet_tags: Sequence[str] = ()) -> Mesh:
    """Uniform unstructured triangulation of ``{sdf < 0}`` with edge length ~``h0``.

    ``fixed_points`` never move.  Each array in ``fixed_chains`` is a
    sequence of fixed points whose consecutive pairs must end up as mesh
    edges (crack lines, polygon corners joined by boundary points).  Missing
    chain edges are recovered by deleting free points inside the segment's
    diametral circle.
    """
    rng = np.random.default_rng(seed)
    x0, y0, x1, y1 = bbox
    geps = 1e-3 * h0
    deps = np.sqrt(np.finfo(float).eps) * h0

    # equilateral lattice
    xs = np.arange(x0, x1 + h0, h0)
    ys = np.arange(y0, y1 + h0 * np.sqrt(3) / 2, h0 * np.sqrt(3) / 2)
    X, Y = np.meshgrid(xs, ys)
    X[1::2] += h0 / 2
    p = np.column_stack([X.ravel(), Y.ravel()])
    p += rng.uniform(-0.05, 0.05, size=p.shape) * h0
    p = p[sdf(p) < -geps]

    chains = [np.asarray(c, float) for c in fixed_chains]
    fixed = [np.asarray(fixed_points, float).reshape(-1, 2)] if fixed_points is not None else []
    fixed.extend(chains)
    pfix = np.unique(np.round(np.concatenate(fixed), 14), axis=0) if fixed else np.zeros((0, 2))
    nfix = len(pfix)
    if nfix:
        dfix = np.min(np.hypot(p[:, None, 0] - pfix[None, :, 0],
                               p[:, None, 1] - pfix[None, :, 1]), axis=1) if len(p) * nfix < 5e7 \
            else _min_dist_chunked(p, pfix)
        p = p[dfix > 0.6 * h0]
    p = np.concatenate([pfix, p])

    pold = np.full_like(p, np.inf)
    tri = None
    dt, Fscale, ttol, dptol = 0.2, 1.2, 0.1, 1e-3
    for it in range(max_iter):
        if np.max(np.hypot(*(p - pold).T)) / h0 > ttol:
            pold = p.copy()
            tri = Delaunay(p).simplices
            cent = p[tri].mean(axis=1)
            tri = tri[sdf(cent) < -geps]
            bars = np.unique(np.sort(tri[:, [[0, 1], [1, 2], [0, 2]]].reshape(-1, 2), axis=1),
                             axis=0)
        barvec = p[bars[:, 0]] - p[bars[:, 1]]
        L = np.hypot(*barvec.T)
        L0 = Fscale * np.sqrt(np.sum(L ** 2) / len(L))
        F = np.maximum(L0 - L, 0.0)
        Fvec = (F / L)[:, None] * barvec
        Ftot = np.zeros_like(p)
        np.add.at(Ftot, bars[:, 0], Fvec)
        np.add.at(Ftot, bars[:, 1], -Fvec)
        Ftot[:nfix] = 0.0
        p = p + dt * Ftot
        d = sdf(p)
        ix = d > 0
        if ix.any():
            q = p[ix]
            dgx = (sdf(q + [deps, 0]) - d[ix]) / deps
            dgy = (sdf(q + [0, deps]) - d[ix]) / deps
            g2 = dgx ** 2 + dgy ** 2 + 1e-300
            p[ix] = q - np.column_stack([d[ix] * dgx / g2, d[ix] * dgy / g2])
            p[:nfix] = pfix
        inner = d[nfix:] < -geps
        if inner.any():
            move = np.max(np.hypot(*(dt * Ftot[nfix:][inner]).T)) / h0
            if move < dptol:
                break
    log.debug("distmesh stopped after %d iterations", it + 1)

    # snap near-boundary points exactly onto the zero level set
    for _ in range(3):
        d = sdf(p)
        ix = np.flatnonzero(np.abs(d) < geps)
        ix = ix[ix >= nfix]
        if not len(ix):
            break
        q = p[ix]
        dgx = (sdf(q + [deps, 0]) - sdf(q - [deps, 0])) / (2 * deps)
        dgy = (sdf(q + [0, deps]) - sdf(q - [0, deps])) / (2 * deps)
        g2 = dgx ** 2 + dgy ** 2 + 1e-300
        p[ix] = q - np.column_stack([d[ix] * dgx / g2, d[ix] * dgy / g2])

    # recover chain edges
    key = {tuple(np.round(q, 14)): i for i, q in enumerate(p[:nfix])}
    for _ in range(10):
        tri = Delaunay(p).simplices
        cent = p[tri].mean(axis=1)
        tri = tri[sdf(cent) < -geps]
        edges = _edges_of(tri)
        drop = set()
        for ch in chains:
            ids = [key[tuple(np.round(q, 14))] for q in ch]
            for a, b in zip(ids[:-1], ids[1:]):
                if (min(a, b), max(a, b)) in edges:
                    continue
                m = 0.5 * (p[a] + p[b])
                r = 0.5 * np.hypot(*(p[a] - p[b]))
                inside = np.flatnonzero(np.hypot(*(p[nfix:] - m).T) < r * 1.05) + nfix
                drop.update(inside.tolist())
        if not drop:
            break
        keep = np.ones(len(p), dtype=bool)
        keep[list(drop)] = False
        p = p[keep]
    else:
        raise MeshError("could not recover constrained chain edges")

    used = np.unique(tri)
    remap = -np.ones(len(p), dtype=np.int64)
    remap[used] = np.arange(len(used))
    return build_mesh(p[used], remap[tri], tagging, dirichlet_tags, reorient=True)


def _min_dist_chunked(p, q, chunk=2000):
    out = np.empty(len(p))
    for s in range(0, len(p), chunk):
        blk = p[s:s + chunk]
        out[s:s + chunk] = np.min(np.hypot(blk[:, None, 0] - q[None, :, 0],
                                           blk[:, None, 1] - q[None, :, 1]), axis=1)
    return out
