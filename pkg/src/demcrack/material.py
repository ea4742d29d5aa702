"""Isotropic linear elasticity in plane strain or antiplane shear."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels

PLANE_STRAIN = "plane_strain"
ANTIPLANE = "antiplane"
MODES = (PLANE_STRAIN, ANTIPLANE)


class MaterialError(ValueError):
    pass


@dataclass(frozen=True)
class MaterialModel:
    """Elastic constants plus the critical energy release rate.

    In antiplane mode the unknown is the scalar out-of-plane displacement
    and only ``mu`` enters; ``E`` and ``nu`` are then informational.
    """

    E: float
    nu: float
    Gc: float
    lam: float
    mu: float
    mode: str = PLANE_STRAIN

    @property
    def dim(self) -> int:
        """Number of displacement components per cell."""
        return 2 if self.mode == PLANE_STRAIN else 1

    def quadratic_form(self) -> np.ndarray:
        if self.mode == PLANE_STRAIN:
            return kernels.plane_strain_form(self.lam, self.mu)
        return kernels.antiplane_form(self.mu)


def _check_gc(Gc):
    if not (Gc > 0):
        raise MaterialError(f"G_c must be positive, got {Gc}")


def from_young_poisson(E: float, nu: float, Gc: float, mode: str = PLANE_STRAIN) -> MaterialModel:
    if mode not in MODES:
        raise MaterialError(f"unknown mode {mode!r}")
    if not (E > 0):
        raise MaterialError(f"E must be positive, got {E}")
    if not (-1.0 < nu < 0.5):
        raise MaterialError(f"Poisson ratio must lie in (-1, 0.5), got {nu}")
    _check_gc(Gc)
    mu = E / (2.0 * (1.0 + nu))
    lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    return MaterialModel(E=float(E), nu=float(nu), Gc=float(Gc), lam=lam, mu=mu, mode=mode)


def antiplane(mu: float, Gc: float = math.inf) -> MaterialModel:
    """Antiplane material from the shear modulus alone (``nu`` taken as 0)."""
    if not (mu > 0):
        raise MaterialError(f"mu must be positive, got {mu}")
    _check_gc(Gc)
    return MaterialModel(E=2.0 * mu, nu=0.0, Gc=float(Gc), lam=0.0, mu=float(mu), mode=ANTIPLANE)


def stiffness_action(material: MaterialModel, eps: np.ndarray) -> np.ndarray:
    """``C : eps`` for a single tensor or a stack.

    Plane strain expects ``(..., 2, 2)`` symmetric strains.  Antiplane
    expects ``(..., 2)`` shear vectors (or ``(..., 1, 2)`` row gradients) and
    returns ``mu`` times them.
    """
    eps = np.asarray(eps, dtype=float)
    if material.mode == ANTIPLANE:
        return material.mu * eps
    tr = eps[..., 0, 0] + eps[..., 1, 1]
    out = 2.0 * material.mu * eps
    out[..., 0, 0] += material.lam * tr
    out[..., 1, 1] += material.lam * tr
    return out


def strain_from_gradient(material: MaterialModel, G: np.ndarray) -> np.ndarray:
    """Symmetric part of ``G`` in plane strain; the gradient itself in antiplane."""
    G = np.asarray(G, dtype=float)
    if material.mode == ANTIPLANE:
        return G.copy()
    return 0.5 * (G + np.swapaxes(G, -1, -2))


def energy_density(material: MaterialModel, eps: np.ndarray) -> np.ndarray:
    """``eps : C : eps`` (no factor one half)."""
    eps = np.asarray(eps, dtype=float)
    sig = stiffness_action(material, eps)
    if material.mode == ANTIPLANE:
        out = np.sum(sig * eps, axis=-1)
        # row-gradient layout (..., 1, 2)
        return out[..., 0] if eps.ndim >= 3 else out
    return np.sum(sig * eps, axis=(-2, -1))
