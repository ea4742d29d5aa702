"""Error norms, convergence rates, reaction forces and crack metrics."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .mesh import CRACKED, Mesh

# degree-2 rule on triangles: barycentric (2/3, 1/6, 1/6) and permutations
_QUAD_BARY = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])
_QUAD_W = np.full(3, 1 / 3)


class AnalysisError(ValueError):
    pass


@dataclass
class ErrorReport:
    n_dofs: int
    l2_error: float
    energy_error: float
    l2_rate: float = float("nan")
    energy_rate: float = float("nan")


@dataclass
class LoadDisplacementCurve:
    samples: list = field(default_factory=list)
    crack_start: Optional[tuple] = None

    def append(self, u_D: float, force: float, cracked: bool = False) -> None:
        if self.samples and u_D <= self.samples[-1][0]:
            raise AnalysisError("load-displacement samples must have increasing u_D")
        self.samples.append((float(u_D), float(force)))
        if cracked and self.crack_start is None:
            self.crack_start = (float(u_D), float(force))


def quadrature_points(mesh: Mesh) -> tuple:
    """Points (nC, 3, 2) and weights (nC, 3) of the degree-2 rule."""
    p = mesh.vertices[mesh.cells]
    pts = np.einsum("qi,cij->cqj", _QUAD_BARY, p)
    return pts, mesh.cell_areas[:, None] * _QUAD_W[None, :]


def l2_errors(mesh: Mesh, u_h: np.ndarray, gradient: np.ndarray, u_ref: Callable,
              grad_ref: Callable) -> ErrorReport:
    """``||u - R(u_h)||`` and ``||grad u - G(u_h)||`` in L2.

    ``R`` is the cellwise P1 reconstruction ``v_c + G_c (x - x_c)``.
    ``u_ref(points)`` returns (m, dim) or (m,), ``grad_ref(points)`` returns
    (m, dim, 2) or (m, 2).
    """
    nc = mesh.n_cells
    G = np.asarray(gradient, dtype=float).reshape(nc, -1, 2)
    d = G.shape[1]
    U = np.asarray(u_h, dtype=float).reshape(nc, d)
    pts, w = quadrature_points(mesh)
    flat = pts.reshape(-1, 2)
    ue = np.asarray(u_ref(flat), dtype=float).reshape(nc, 3, d)
    ge = np.asarray(grad_ref(flat), dtype=float).reshape(nc, 3, d, 2)
    r = pts - mesh.cell_barycenters[:, None, :]
    uh = U[:, None, :] + np.einsum("ckj,cqj->cqk", G, r)
    e_u = np.sum(w * np.sum((ue - uh) ** 2, axis=-1))
    e_g = np.sum(w * np.sum((ge - G[:, None]) ** 2, axis=(-2, -1)))
    return ErrorReport(nc * d, math.sqrt(e_u), math.sqrt(e_g))


def convergence_order(e1: float, e2: float, n1: float, n2: float, dim: int = 2) -> float:
    """``dim * ln(e1/e2) / ln(n2/n1)`` with ``n`` the numbers of dofs."""
    if min(e1, e2, n1, n2) <= 0:
        raise AnalysisError("errors and dof counts must be positive")
    if n1 == n2:
        raise AnalysisError("dof counts must differ")
    return dim * math.log(e1 / e2) / math.log(n2 / n1)


def fill_rates(reports: Sequence[ErrorReport], dim: int = 2) -> list:
    out = list(reports)
    for a, b in zip(out[:-1], out[1:]):
        b.l2_rate = convergence_order(a.l2_error, b.l2_error, a.n_dofs, b.n_dofs, dim)
        b.energy_rate = convergence_order(a.energy_error, b.energy_error, a.n_dofs,
                                          b.n_dofs, dim)
    return out


def reaction_force(mesh: Mesh, stress: np.ndarray, tag: str, direction=None) -> float:
    """``sum |F| (Sigma_{c-} n_F) . direction`` over outer facets carrying ``tag``."""
    facets = np.flatnonzero(mesh.on_outer_boundary & (mesh.boundary_tag == tag))
    if len(facets) == 0:
        raise AnalysisError(f"no boundary facet carries tag {tag!r}")
    S = np.asarray(stress, dtype=float)
    S = S.reshape(mesh.n_cells, -1, 2)
    t = np.einsum("fkj,fj->fk", S[mesh.facet_cells[facets, 0]], mesh.facet_normals[facets])
    if direction is None:
        if t.shape[1] != 1:
            raise AnalysisError("a direction is needed for vector problems")
        direction = np.ones(1)
    direction = np.atleast_1d(np.asarray(direction, dtype=float))
    return float(mesh.facet_lengths[facets] @ (t @ direction))


def crack_length(mesh: Mesh, facets=None) -> float:
    """Total length of the cracked facets (all of them by default)."""
    if facets is None:
        facets = np.flatnonzero(mesh.status == CRACKED)
    return float(mesh.facet_lengths[np.asarray(facets, dtype=np.int64)].sum())


def crack_speed_fit(u_D, length, l0: float) -> float:
    """Least-squares slope of crack length against load in the propagation regime."""
    u_D = np.asarray(u_D, dtype=float)
    length = np.asarray(length, dtype=float)
    sel = length > l0 * (1 + 1e-12) + 1e-300
    if sel.sum() < 2:
        raise AnalysisError("need at least two samples with a propagating crack")
    slope, _ = np.polyfit(u_D[sel], length[sel], 1)
    return float(slope)


def antiplane_reference(r, theta, tau: float, a: float, mu: float):
    """Near-tip mode III field: displacement and Cartesian stress vector.

    ``u = 2 tau/mu sqrt(a r / 2) sin(theta/2)`` and ``sigma = mu grad u``.
    """
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if np.any(r <= 0):
        raise AnalysisError("the reference field is singular at r = 0")
    u = 2 * tau / mu * np.sqrt(a * r / 2) * np.sin(theta / 2)
    amp = tau * np.sqrt(a / (2 * r))
    s_r, s_t = amp * np.sin(theta / 2), amp * np.cos(theta / 2)
    c, s = np.cos(theta), np.sin(theta)
    sig = np.stack([s_r * c - s_t * s, s_r * s + s_t * c], axis=-1)
    return u, sig


def write_csv(path, header: Sequence[str], rows) -> None:
    def fmt(x):
        if isinstance(x, (float, np.floating)):
            return f"{float(x):.17g}"
        if isinstance(x, (list, tuple, np.ndarray)):
            return " ".join(fmt(v) for v in x)
        return str(x)

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])


def write_error_reports(path, reports: Sequence[ErrorReport]) -> None:
    write_csv(path, ["n_dofs", "l2_error", "l2_rate", "energy_error", "energy_rate"],
              [(r.n_dofs, r.l2_error, r.l2_rate, r.energy_error, r.energy_rate)
               for r in reports])


def write_load_curve(path, curve: LoadDisplacementCurve) -> None:
    write_csv(path, ["u_D", "force"], curve.samples)
