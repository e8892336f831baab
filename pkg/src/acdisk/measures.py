"""Diffuse energy and discrepancy densities and their integral diagnostics.

    e  = eps/2 |grad u|^2 + W(u)/eps      (energy density)
    xi = eps/2 |grad u|^2 - W(u)/eps      (discrepancy density)

e is the density of the diffuse surface measure; xi measures the failure
of equipartition between the gradient and potential halves and is the
quantity that must stay bounded above uniformly in eps and vanish in the
sharp-interface limit.  Also here: the boundary trace of the energy, ball
density ratios  mass(B_r(y)) / r^(n-1),  and the semidecreasing check
for  integral(phi d mu) - C1 ||phi||_C2 t.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import ScalarField, boundary_values, gradient, integrate, \
    integrate_boundary, pairwise_sum
from .potential import PotentialSpec

__all__ = [
    "MeasureFields", "DensityReport", "measure_fields", "discrepancy_stats",
    "boundary_energy", "density_ratios", "semidecreasing_check",
    "default_transient_cutoff",
]


@dataclass(frozen=True)
class MeasureFields:
    e: ScalarField
    xi: ScalarField
    t: float
    eps: float

    @property
    def total_energy(self) -> float:
        return integrate(self.e)


@dataclass(frozen=True)
class DensityReport:
    """Max of mass(B_r(y) cap disk) / r over the sampled (y, r) pairs."""
    d0_measured: float
    samples: list   # (y, r, ratio) triples


def default_transient_cutoff(eps: float) -> float:
    """Parabolic burn-in 4 eps^2 before discrepancy statistics apply."""
    return 4.0 * eps * eps


def measure_fields(state, potential: PotentialSpec) -> MeasureFields:
    gx, gy = gradient(state.u)
    grad2 = gx.values ** 2 + gy.values ** 2
    w = potential.w(state.u.values)
    e = 0.5 * state.eps * grad2 + w / state.eps
    xi = 0.5 * state.eps * grad2 - w / state.eps
    return MeasureFields(e=state.u.with_values(e), xi=state.u.with_values(xi),
                         t=state.t, eps=state.eps)


def discrepancy_stats(mf: MeasureFields):
    """(sup over cells of xi, integral of |xi|)."""
    return float(np.max(mf.xi.values)), integrate(mf.xi.with_values(np.abs(mf.xi.values)))


def boundary_energy(mf: MeasureFields) -> float:
    """Boundary integral of the wall-extrapolated energy density."""
    return integrate_boundary(boundary_values(mf.e), mf.e.grid)


def density_ratios(mf: MeasureFields, samples) -> DensityReport:
    """Ball masses by cell-center membership; ratio = mass / r (n = 2).

    samples: iterable of (y, r) with r <= c2/4; the O(dr/r) membership
    quantization is covered by the slack in the acceptance threshold.
    """
    grid = mf.e.grid
    x, ygrid = grid.cell_centers_xy()
    weighted = mf.e.values * grid.cell_area
    out = []
    worst = 0.0
    for y, r in samples:
        if r > 0.25 * grid.R * (1 + 1e-12):
            raise ValueError("density samples need r <= c2/4")
        dist2 = (x - y[0]) ** 2 + (ygrid - y[1]) ** 2
        mass = pairwise_sum(np.where(dist2 < r * r, weighted, 0.0))
        ratio = mass / r
        worst = max(worst, ratio)
        out.append((np.asarray(y, dtype=np.float64), float(r), float(ratio)))
    return DensityReport(d0_measured=worst, samples=out)


def semidecreasing_check(rows, phi_column: str, c1: float, phi_c2_norm: float):
    """Largest positive increment of  integral(phi dmu) - C1 ||phi||_C2 t
    across consecutive diagnostic samples (0 when monotone decreasing).

    rows: diagnostics rows carrying t and the named column with the
    phi-weighted energy integral.
    """
    vals = np.array([row[phi_column] - c1 * phi_c2_norm * row["t"]
                     for row in rows])
    if vals.size < 2:
        return 0.0
    return float(max(0.0, np.max(np.diff(vals))))
