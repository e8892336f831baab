"""The strictly convex domain: a disk of radius R.

Everything the boundary analysis needs is closed form here: signed
distance to the wall, nearest-point projection zeta(x) = R x/|x|, the
mirror point xt = 2 zeta(x) - x, the curvature constant c2 = R
(reciprocal of the largest principal curvature), and the radial cutoff
eta used to truncate the reflected kernels.

Sign convention for the second fundamental form: in the boundary graph
chart the disk has principal curvature -1/R, so B(tau, tau) = -1/R for a
unit tangent tau and d/dnu |grad u|^2 = -(2/R) |grad u|^2 for tangential
gradients of Neumann fields.  Convexity makes the form nonpositive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["DiskGeometry", "CutoffEta"]


@dataclass(frozen=True)
class DiskGeometry:
    R: float

    def __post_init__(self):
        if self.R <= 0:
            raise ValueError("disk radius must be positive")

    @property
    def c2(self) -> float:
        """Tube-width constant: 1 / max principal curvature = R."""
        return self.R

    def nearest_and_reflect(self, x):
        """(d, zeta, xtilde) for points x, shape (..., 2).

        d = R - |x| is the signed distance to the wall (negative outside),
        zeta the nearest boundary point, xtilde = 2 zeta - x the mirror
        point (|xtilde| = R + d).  The map is an involution on the
        punctured ball |x| < 2R, so mirror points of interior points can
        be reflected back; the exact center has no nearest-point direction
        and raises, as do points at or beyond the mirror image of the
        center.
        """
        x = np.asarray(x, dtype=np.float64)
        rad = np.sqrt(np.sum(x * x, axis=-1))
        if np.any(rad == 0.0):
            raise ValueError("reflection undefined at focal point (disk center)")
        if np.any(rad >= 2.0 * self.R):
            raise ValueError("reflection undefined beyond the mirror tube |x| < 2R")
        d = self.R - rad
        zeta = x * (self.R / rad)[..., None]
        return d, zeta, 2.0 * zeta - x

    def normal(self, x):
        """Outer unit normal direction nu(zeta(x)) = x/|x|."""
        x = np.asarray(x, dtype=np.float64)
        rad = np.sqrt(np.sum(x * x, axis=-1))
        return x / rad[..., None]

    def in_tube(self, x, width: float) -> np.ndarray:
        """Mask for x in the interior tubular neighborhood N_width."""
        x = np.asarray(x, dtype=np.float64)
        rad = np.sqrt(np.sum(x * x, axis=-1))
        return (self.R - rad) < width

    def second_fundamental_form_tangent(self) -> float:
        """B(tau, tau) for unit tangent tau; -1/R on the disk (convex: <= 0)."""
        return -1.0 / self.R

    def cutoff(self) -> "CutoffEta":
        return CutoffEta(self.c2)


@dataclass(frozen=True)
class CutoffEta:
    """Radial cutoff: 1 on B_{c2/4}, 0 outside B_{c2/2}, quintic-smoothstep
    transition in between (C^2, radially nonincreasing)."""

    c2: float

    def value(self, z):
        """eta(z) for displacement vectors z, shape (..., 2) or radii (...,)."""
        r = self._radius(z)
        q = 0.25 * self.c2
        s = np.clip((r - q) / q, 0.0, 1.0)
        return 1.0 - s ** 3 * (10.0 - 15.0 * s + 6.0 * s * s)

    def radial_derivative(self, z):
        r = self._radius(z)
        q = 0.25 * self.c2
        s = np.clip((r - q) / q, 0.0, 1.0)
        return -30.0 * s * s * (1.0 - s) ** 2 / q

    @staticmethod
    def _radius(z):
        z = np.asarray(z, dtype=np.float64)
        if z.ndim and z.shape[-1] == 2:
            return np.sqrt(np.sum(z * z, axis=-1))
        return z

    def __call__(self, z):
        return self.value(z)
