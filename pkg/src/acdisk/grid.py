"""Cell-centered polar grid on the disk and its discrete calculus.

The grid covers the disk of radius R with Nr x Ntheta cells centered at
r_i = (i + 1/2) dr, theta_j = (j + 1/2) dtheta, so no node sits at the
pole and the outer boundary r = R is a cell face.  That layout makes the
two delicate boundary objects exact to scheme order:

* Neumann wall at r = R: a mirror ghost cell (u_ghost = u_last) makes the
  outer diffusive flux vanish identically.
* pole at r = 0: the inner face of ring 0 has zero area, so the flux form
  of the Laplacian needs no special stencil there.

All reductions go through :func:`pairwise_sum`, a fixed-order pairwise
tree, so integrals are bit-reproducible run to run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PolarGrid", "ScalarField", "pairwise_sum", "gradient", "laplacian",
    "integrate", "integrate_boundary", "boundary_values", "interpolate",
    "read_snapshot", "write_snapshot", "OutOfDomainError",
]


class OutOfDomainError(ValueError):
    """Raised when a point outside the closed disk is interpolated."""


def pairwise_sum(values) -> float:
    """Sum an array in a fixed-order pairwise tree.

    Deterministic (bit-identical across runs and thread counts) and with
    the usual O(log n) pairwise error growth.  Used for every quadrature
    reduction in the package.
    """
    a = np.ascontiguousarray(values, dtype=np.float64).ravel()
    n = a.size
    if n == 0:
        return 0.0
    while n > 1:
        m = n // 2
        b = a[0:2 * m:2] + a[1:2 * m:2]
        if n % 2:
            b = np.concatenate([b, a[-1:]])
        a = b
        n = a.size
    return float(a[0])


@dataclass(frozen=True)
class PolarGrid:
    """Cell-centered polar grid on the disk of radius R.

    ntheta must be even: the radial stencil at ring 0 pairs each cell with
    the one across the pole.
    """

    nr: int
    ntheta: int
    R: float

    def __post_init__(self):
        if self.nr < 8 or self.ntheta < 8:
            raise ValueError("grid must have nr >= 8 and ntheta >= 8")
        if self.ntheta % 2:
            raise ValueError("ntheta must be even (across-pole pairing)")
        if self.R <= 0:
            raise ValueError("R must be positive")

    @property
    def dr(self) -> float:
        return self.R / self.nr

    @property
    def dtheta(self) -> float:
        return 2.0 * np.pi / self.ntheta

    @property
    def r(self) -> np.ndarray:
        """Cell-center radii, shape (nr,)."""
        return (np.arange(self.nr) + 0.5) * self.dr

    @property
    def theta(self) -> np.ndarray:
        """Cell-center angles, shape (ntheta,)."""
        return (np.arange(self.ntheta) + 0.5) * self.dtheta

    @property
    def cell_area(self) -> np.ndarray:
        """Cell areas r_i * dr * dtheta, shape (nr, 1) for broadcasting."""
        return (self.r * self.dr * self.dtheta)[:, None]

    def cell_centers_xy(self):
        """Cartesian cell centers as two (nr, ntheta) arrays."""
        r = self.r[:, None]
        th = self.theta[None, :]
        return r * np.cos(th), r * np.sin(th)

    def zeros(self, t: float = 0.0) -> "ScalarField":
        return ScalarField(self, np.zeros((self.nr, self.ntheta)), t)

    def field_from_function(self, f, t: float = 0.0) -> "ScalarField":
        """Sample f(x, y) at cell centers."""
        x, y = self.cell_centers_xy()
        return ScalarField(self, np.asarray(f(x, y), dtype=np.float64), t)


@dataclass(frozen=True)
class ScalarField:
    """Immutable cell-centered scalar field; values shape (nr, ntheta)."""

    grid: PolarGrid
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        if v.shape != (self.grid.nr, self.grid.ntheta):
            raise ValueError(f"field shape {v.shape} does not match grid "
                             f"({self.grid.nr}, {self.grid.ntheta})")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def with_values(self, values, t=None) -> "ScalarField":
        return ScalarField(self.grid, values, self.t if t is None else t)


def _check_same_grid(*fields: ScalarField):
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid is not g and f.grid != g:
            raise ValueError("fields combined across different grids")


def _radial_derivative(field: ScalarField) -> np.ndarray:
    """Centered d/dr with across-pole ghost at ring 0, mirror ghost at r=R."""
    g, u = field.grid, field.values
    dr = g.dr
    du = np.empty_like(u)
    du[1:-1] = (u[2:] - u[:-2]) / (2.0 * dr)
    opposite = np.roll(u[0], g.ntheta // 2)
    du[0] = (u[1] - opposite) / (2.0 * dr)
    # mirror ghost u[nr] = u[nr-1]
    du[-1] = (u[-1] - u[-2]) / (2.0 * dr)
    return du


def gradient(field: ScalarField):
    """Cartesian gradient components (gx, gy) as ScalarFields.

    Second-order centered differences in r and theta; periodic in theta;
    Neumann mirror ghost at r = R; across-pole ghost at ring 0.
    """
    g, u = field.grid, field.values
    du_r = _radial_derivative(field)
    du_t = (np.roll(u, -1, axis=1) - np.roll(u, 1, axis=1)) / (2.0 * g.dtheta)
    gth = du_t / g.r[:, None]
    th = g.theta[None, :]
    cos_t, sin_t = np.cos(th), np.sin(th)
    gx = du_r * cos_t - gth * sin_t
    gy = du_r * sin_t + gth * cos_t
    return field.with_values(gx), field.with_values(gy)


def laplacian(field: ScalarField) -> ScalarField:
    """Conservative-flux Laplacian (1/r) d_r(r d_r u) + (1/r^2) d_tt u.

    Radial fluxes vanish at both the pole face (zero area) and the outer
    face (Neumann), so the discrete divergence theorem
    integrate(laplacian(u)) == 0 holds to roundoff for every u.
    """
    g, u = field.grid, field.values
    dr, dth = g.dr, g.dtheta
    r = g.r[:, None]
    # radial face fluxes r_face * du/dr; faces i = 0..nr, ends are zero
    flux = np.zeros((g.nr + 1, g.ntheta))
    face_r = (np.arange(1, g.nr) * dr)[:, None]
    flux[1:-1] = face_r * (u[1:] - u[:-1]) / dr
    lap_r = (flux[1:] - flux[:-1]) / (r * dr)
    lap_t = (np.roll(u, -1, axis=1) - 2.0 * u + np.roll(u, 1, axis=1)) / (r * dth) ** 2
    return field.with_values(lap_r + lap_t)


def integrate(field: ScalarField) -> float:
    """Disk integral: sum of v_ij * r_i * dr * dtheta, pairwise-reduced."""
    return pairwise_sum(field.values * field.grid.cell_area)


def boundary_values(field: ScalarField) -> np.ndarray:
    """Field extrapolated to r = R, shape (ntheta,).

    Quadratic in r with zero slope at the wall (consistent with the
    Neumann mirror), fitted to the two outermost rings:
    f(R) = (9 f_{-1/2} - f_{-3/2}) / 8.
    """
    u = field.values
    return (9.0 * u[-1] - u[-2]) / 8.0


def integrate_boundary(field_or_samples, grid: PolarGrid | None = None) -> float:
    """Boundary integral over r = R.

    Accepts a ScalarField (extrapolated to the wall first) or an array of
    ntheta boundary samples plus the grid.  Uniform-grid trapezoid rule on
    the periodic circle: sum * R * dtheta.
    """
    if isinstance(field_or_samples, ScalarField):
        g = field_or_samples.grid
        vals = boundary_values(field_or_samples)
    else:
        if grid is None:
            raise ValueError("grid required with raw boundary samples")
        g = grid
        vals = np.asarray(field_or_samples, dtype=np.float64)
        if vals.shape != (g.ntheta,):
            raise ValueError("boundary samples must have shape (ntheta,)")
    return pairwise_sum(vals) * g.R * g.dtheta


def interpolate(field: ScalarField, points) -> np.ndarray:
    """Bilinear interpolation in (r, theta) at Cartesian points.

    points: array (..., 2).  Periodic wrap in theta; between ring 0 and the
    pole the radial stencil uses the across-pole cell; values clamp to the
    last ring for |x| in (R - dr/2, R].  |x| > R raises OutOfDomainError.
    """
    g, u = field.grid, field.values
    pts = np.asarray(points, dtype=np.float64)
    scalar_input = pts.ndim == 1
    pts = np.atleast_2d(pts)
    x, y = pts[..., 0], pts[..., 1]
    rad = np.hypot(x, y)
    if np.any(rad > g.R * (1.0 + 1e-12)):
        raise OutOfDomainError("interpolation point outside the disk")
    th = np.mod(np.arctan2(y, x), 2.0 * np.pi)

    s = rad / g.dr - 0.5
    i_lo = np.floor(s).astype(int)
    fr = s - i_lo
    # clamp to last ring beyond the outermost cell center
    outer = i_lo >= g.nr - 1
    i_lo = np.clip(i_lo, -1, g.nr - 2)
    fr = np.where(outer, 1.0, fr)

    q = th / g.dtheta - 0.5
    j_lo = np.floor(q).astype(int)
    ft = q - j_lo
    j_lo = np.mod(j_lo, g.ntheta)
    j_hi = (j_lo + 1) % g.ntheta

    inner = i_lo < 0  # between pole and ring 0: lower ring is ring 0 across the pole
    i_lo_safe = np.where(inner, 0, i_lo)
    j_lo_in = np.where(inner, (j_lo + g.ntheta // 2) % g.ntheta, j_lo)
    j_hi_in = np.where(inner, (j_hi + g.ntheta // 2) % g.ntheta, j_hi)
    i_hi = np.where(inner, 0, i_lo_safe + 1)

    v00 = u[i_lo_safe, j_lo_in]
    v01 = u[i_lo_safe, j_hi_in]
    v10 = u[i_hi, j_lo]
    v11 = u[i_hi, j_hi]
    vals = ((1 - fr) * ((1 - ft) * v00 + ft * v01)
            + fr * ((1 - ft) * v10 + ft * v11))
    return float(vals[0]) if scalar_input else vals.reshape(np.shape(points)[:-1])


# ---------------------------------------------------------------------------
# AC-SNAP v1 snapshot format

_SNAP_MAGIC = "ac-snap 1"


def write_snapshot(path, field: ScalarField, eps: float):
    """Write a field in the AC-SNAP v1 text format (17 significant digits)."""
    g = field.grid
    with open(path, "w") as fh:
        fh.write(f"{_SNAP_MAGIC}\n")
        fh.write("n 2\n")
        fh.write(f"nr {g.nr}\n")
        fh.write(f"ntheta {g.ntheta}\n")
        fh.write(f"R {g.R:.17g}\n")
        fh.write(f"eps {eps:.17g}\n")
        fh.write(f"t {field.t:.17g}\n")
        flat = field.values.ravel()
        for k in range(0, flat.size, 8):
            fh.write(" ".join(f"{v:.17g}" for v in flat[k:k + 8]) + "\n")


def read_snapshot(path):
    """Read an AC-SNAP v1 file; returns (ScalarField, eps)."""
    with open(path) as fh:
        first = fh.readline().strip()
        if first != _SNAP_MAGIC:
            raise ValueError(f"not an AC-SNAP v1 file: header {first!r}")
        header = {}
        for _ in range(6):
            key, val = fh.readline().split()
            header[key] = val
        if header.get("n") != "2":
            raise ValueError("only n=2 snapshots supported")
        nr, ntheta = int(header["nr"]), int(header["ntheta"])
        grid = PolarGrid(nr, ntheta, float(header["R"]))
        data = np.array(fh.read().split(), dtype=np.float64)
    if data.size != nr * ntheta:
        raise ValueError(f"snapshot has {data.size} values, expected {nr * ntheta}")
    field = ScalarField(grid, data.reshape(nr, ntheta), float(header["t"]))
    return field, float(header["eps"])
