"""Backward heat kernels, their reflected/truncated variants, and the
boundary monotonicity ledger.

For a center (y, s) and t < s, with tau = s - t,

    rho(x, t)   = (4 pi tau)^(-(n-1)/2) exp(-|x - y|^2 / (4 tau))

is the (n-1)-dimensional backward kernel.  Its closed-form derivatives
satisfy, for every unit vector a,

    (a . grad rho)^2 / rho + (I - a x a) . hess rho + dt rho = 0.

The reflected kernel rhot(x, t) = rho(xt, t) with xt = 2 zeta(x) - x is
evaluated with the restricted projection derivative grad zeta = I - nu x nu
(exact on the wall; the convention the boundary identity is built on), so

    grad |xt - y|^2 = 2 (I - 2 nu x nu)(xt - y),
    hess_ij |xt - y|^2 = 2 d_ij - 4 sum_k d_j(nu_i nu_k)(xt_k - y_k),

and the reflected identity picks up the curvature right-hand side

    sum_ijk (d_ij - a_i a_j) d_j(nu_i nu_k) (xt_k - y_k) / (s - t) * rhot.

Truncations: rho1 = eta(x - y) rho and rho2 = eta(xt - y) rhot, with
rho2 = 0 outside the half tube N_{c2/2}.  The monotonicity tracker follows

    G(t) = exp(C3 (s-t)^(1/4)) * integral (rho1 + rho2) d(energy measure)

whose forward difference must stay below the budget

    exp(C3 (s-t)^(1/4)) * (C4 + integral (rho1+rho2)/(2(s-t)) d(discrepancy)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import CutoffEta, DiskGeometry
from .grid import PolarGrid, pairwise_sum

__all__ = [
    "KernelPoint", "MonotonicityReport", "kernel_eval",
    "identity_residual_standard", "identity_residual_reflected",
    "rho12_on_grid", "monotonicity_track", "kernel_mass_checks",
    "gaussian_window", "window_integral",
]


@dataclass(frozen=True)
class KernelPoint:
    """A backward-kernel instance centered at (y, s) in ambient dimension n.

    reflected=True evaluates at the mirror point (needs geometry);
    truncated=True multiplies by the cutoff eta (value evaluation only:
    derivatives of the truncated kernels are never needed, so requesting
    them raises).
    """

    y: np.ndarray
    s: float
    n: int = 2
    geometry: DiskGeometry | None = None
    reflected: bool = False
    truncated: bool = False

    def __post_init__(self):
        object.__setattr__(self, "y", np.asarray(self.y, dtype=np.float64))
        if self.n not in (2, 3):
            raise ValueError("ambient dimension must be 2 or 3")
        if self.y.shape != (self.n,):
            raise ValueError("center y must have shape (n,)")
        if self.reflected and (self.geometry is None or self.n != 2):
            raise ValueError("reflected kernels need a disk geometry (n=2)")
        if self.truncated and self.geometry is None:
            raise ValueError("truncated kernels need a geometry for the cutoff scale")

    def tau(self, t: float) -> float:
        tau = self.s - t
        if tau <= 0.0:
            raise ValueError("kernel defined for t < s only")
        return tau


def _standard_parts(y, n, x, tau):
    """Value, gradient, Hessian, time derivative of the plain kernel."""
    x = np.asarray(x, dtype=np.float64)
    d = x - y
    q = float(d @ d)
    rho = (4.0 * np.pi * tau) ** (-(n - 1) / 2.0) * np.exp(-q / (4.0 * tau))
    grad = -d / (2.0 * tau) * rho
    hess = (np.outer(d, d) / (4.0 * tau * tau) - np.eye(n) / (2.0 * tau)) * rho
    dt = ((n - 1) / (2.0 * tau) - q / (4.0 * tau * tau)) * rho
    return rho, grad, hess, dt


def _reflected_parts(geom: DiskGeometry, y, x, tau):
    """Reflected-kernel derivatives in the restricted-projection convention.

    The Hessian here is the defined formula object (not symmetric off the
    wall); it only ever enters contracted against symmetric projections.
    """
    x = np.asarray(x, dtype=np.float64)
    _, _, xt = geom.nearest_and_reflect(x)
    nu = geom.normal(x)
    w = xt - y
    q = float(w @ w)
    rho = (4.0 * np.pi * tau) ** (-0.5) * np.exp(-q / (4.0 * tau))
    mirror = np.eye(2) - 2.0 * np.outer(nu, nu)
    grad_psi = 2.0 * mirror @ w
    grad = -grad_psi / (4.0 * tau) * rho
    # K_ij = sum_k d_j(nu_i nu_k) w_k, with d_j nu_i = (d_ij - nu_i nu_j)/|x|
    rad = float(np.hypot(x[0], x[1]))
    perp = np.eye(2) - np.outer(nu, nu)
    k_mat = ((perp * float(nu @ w)) + np.outer(nu, perp @ w)) / rad
    hess = (np.outer(grad_psi, grad_psi) / (16.0 * tau * tau)
            - np.eye(2) / (2.0 * tau) + k_mat / tau) * rho
    dt = (1.0 / (2.0 * tau) - q / (4.0 * tau * tau)) * rho
    return rho, grad, hess, dt, k_mat


def kernel_eval(kp: KernelPoint, x, t: float, order: str = "value"):
    """Evaluate the kernel instance at (x, t).

    order in {"value", "grad", "hess", "dt"}.  Reflected kernels use the
    restricted-form derivative formulas above; truncated kernels support
    order="value" only.
    """
    tau = kp.tau(t)
    if kp.truncated and order != "value":
        raise ValueError("truncated kernels expose values only")
    if kp.reflected:
        x_arr = np.asarray(x, dtype=np.float64)
        rho, grad, hess, dt, _ = _reflected_parts(kp.geometry, kp.y, x_arr, tau)
        if kp.truncated:
            _, _, xt = kp.geometry.nearest_and_reflect(x_arr)
            rho = rho * kp.geometry.cutoff().value(xt - kp.y)
    else:
        rho, grad, hess, dt = _standard_parts(kp.y, kp.n, x, tau)
        if kp.truncated:
            rho = rho * CutoffEta(kp.geometry.c2).value(
                np.asarray(x, dtype=np.float64) - kp.y)
    if order == "value":
        return rho
    if order == "grad":
        return grad
    if order == "hess":
        return hess
    if order == "dt":
        return dt
    raise ValueError(f"unknown evaluation order {order!r}")


def identity_residual_standard(kp: KernelPoint, x, t: float, a) -> float:
    """(a.grad rho)^2/rho + (I - a x a).hess rho + dt rho; vanishes exactly."""
    tau = kp.tau(t)
    a = np.asarray(a, dtype=np.float64)
    rho, grad, hess, dt = _standard_parts(kp.y, kp.n, x, tau)
    proj = np.eye(kp.n) - np.outer(a, a)
    return float((a @ grad) ** 2 / rho + np.sum(proj * hess) + dt)


def identity_residual_reflected(kp: KernelPoint, x, t: float, a):
    """Both sides of the reflected identity; returns (lhs, rhs).

    lhs uses the closed-form kernel derivatives, rhs the curvature
    contraction sum_ijk (d_ij - a_i a_j) d_j(nu_i nu_k) (xt_k - y_k)
    / (s - t) * rhot, computed independently.
    """
    tau = kp.tau(t)
    a = np.asarray(a, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if kp.geometry is None:
        raise ValueError("reflected identity needs a disk geometry")
    rho, grad, hess, dt, k_mat = _reflected_parts(kp.geometry, kp.y, x, tau)
    proj = np.eye(2) - np.outer(a, a)
    lhs = float((a @ grad) ** 2 / rho + np.sum(proj * hess) + dt)
    rhs = float(np.sum(proj * k_mat) / tau * rho)
    return lhs, rhs


# ---------------------------------------------------------------------------
# Vectorized kernel values on a grid (for measure integrals)

def rho12_on_grid(grid: PolarGrid, geom: DiskGeometry, y, s: float, t: float):
    """(rho1 + rho2) and bare (rho1, rho2) at all cell centers.

    rho1 = eta(x - y) rho; rho2 = eta(xt - y) rhot for x in the half tube
    N_{c2/2}, zero further in; when y itself lies outside N_{c2/2} the
    reflected term is dropped entirely (interior form of the ledger).
    """
    y = np.asarray(y, dtype=np.float64)
    tau = s - t
    if tau <= 0.0:
        raise ValueError("kernel defined for t < s only")
    eta = geom.cutoff()
    x, ygrid = grid.cell_centers_xy()
    pref = (4.0 * np.pi * tau) ** (-0.5)
    q1 = (x - y[0]) ** 2 + (ygrid - y[1]) ** 2
    rho1 = pref * np.exp(-q1 / (4.0 * tau)) * eta.value(np.sqrt(q1))

    rho2 = np.zeros_like(rho1)
    if geom.R - float(np.hypot(y[0], y[1])) < geom.c2 / 2.0:
        rad = np.sqrt(x * x + ygrid * ygrid)
        mask = (geom.R - rad) < geom.c2 / 2.0
        scale = 2.0 * geom.R / rad[mask] - 1.0
        xt_x, xt_y = scale * x[mask], scale * ygrid[mask]
        q2 = (xt_x - y[0]) ** 2 + (xt_y - y[1]) ** 2
        rho2[mask] = pref * np.exp(-q2 / (4.0 * tau)) * eta.value(np.sqrt(q2))
    return rho1 + rho2, rho1, rho2


@dataclass
class MonotonicityReport:
    """Ledger for one probe (y, s): G(t), the discrepancy budget, and the
    defect  D(t) = dG/dt - exp(C3 (s-t)^(1/4)) * budget(t)  at interior
    sample times.  The boundary inequality holds when D <= C4-scale."""

    y: np.ndarray
    s: float
    c3: float
    c4: float
    times: np.ndarray
    g: np.ndarray              # exp(C3 tau^(1/4)) * integral (rho1+rho2) d mu
    budget: np.ndarray         # integral (rho1+rho2)/(2 tau) d xi
    defect_times: np.ndarray
    defect: np.ndarray
    excluded: int = 0

    @property
    def max_defect(self) -> float:
        return float(np.max(self.defect)) if self.defect.size else float("-inf")


def probe_terms(mf, geom: DiskGeometry, y, s: float):
    """(G_raw, budget) for one measure snapshot: the truncated-kernel mass
    against the energy density and the (rho1+rho2)/(2 tau) pairing with the
    discrepancy density."""
    grid = mf.e.grid
    tau = s - mf.t
    rho12, _, _ = rho12_on_grid(grid, geom, y, s, mf.t)
    w = grid.cell_area
    g_raw = pairwise_sum(rho12 * mf.e.values * w)
    budget = pairwise_sum(rho12 * mf.xi.values * w) / (2.0 * tau)
    return g_raw, budget


def monotonicity_track(snapshots, geom: DiskGeometry, y, s: float,
                       c3: float = 1.0, c4: float = 0.0, dt: float = 0.0,
                       precomputed=None) -> MonotonicityReport:
    """Track the boundary monotonicity ledger over a run.

    snapshots: sequence of MeasureFields (or None with precomputed =
    (times, g_raw, budget) arrays from a streaming run).  Samples closer
    than 4*dt to the kernel time s are excluded: the forward difference
    cannot resolve the kernel blow-up there.  dG/dt uses centered
    differences on the uniform sample grid, so the defect series lives on
    the interior samples.
    """
    y = np.asarray(y, dtype=np.float64)
    if precomputed is not None:
        times, g_raw, budget = (np.asarray(a, dtype=np.float64) for a in precomputed)
    else:
        times = np.array([mf.t for mf in snapshots])
        g_raw = np.empty(times.size)
        budget = np.empty(times.size)
        for k, mf in enumerate(snapshots):
            g_raw[k], budget[k] = probe_terms(mf, geom, y, s)
    if np.any(s - times <= 0.0):
        raise ValueError("probe time s must exceed every sample time")

    keep = (s - times) >= 4.0 * dt
    excluded = int(np.sum(~keep))
    times_k, g_raw_k, budget_k = times[keep], g_raw[keep], budget[keep]
    tau = s - times_k
    envelope = np.exp(c3 * tau ** 0.25)
    g = envelope * g_raw_k

    if times_k.size >= 3:
        dg = (g[2:] - g[:-2]) / (times_k[2:] - times_k[:-2])
        defect = dg - envelope[1:-1] * budget_k[1:-1]
        defect_times = times_k[1:-1]
    else:
        defect = np.empty(0)
        defect_times = np.empty(0)
    return MonotonicityReport(y=y, s=s, c3=c3, c4=c4, times=times_k, g=g,
                              budget=budget_k, defect_times=defect_times,
                              defect=defect, excluded=excluded)


# ---------------------------------------------------------------------------
# Appendix mass bounds for the time-sliced Gaussian window
#
#   window_r(x) = (sqrt(2 pi) r)^(-(n-1)) exp(-|x|^2 / (2 r^2)),
#
# which coincides with the backward kernel at tau = r^2 / 2.

def gaussian_window(center, r, x, ygrid, n: int = 2):
    q = (x - center[0]) ** 2 + (ygrid - center[1]) ** 2
    return (np.sqrt(2.0 * np.pi) * r) ** (-(n - 1)) * np.exp(-q / (2.0 * r * r))


def window_integral(mf, center, r) -> float:
    """integral of window_r(. - center) against the energy measure."""
    grid = mf.e.grid
    x, ygrid = grid.cell_centers_xy()
    return pairwise_sum(gaussian_window(center, r, x, ygrid) * mf.e.values
                        * grid.cell_area)


def _window_tail_integral(mf, center, r, R_ball) -> float:
    grid = mf.e.grid
    x, ygrid = grid.cell_centers_xy()
    w = gaussian_window(center, r, x, ygrid) * mf.e.values * grid.cell_area
    dist2 = (x - center[0]) ** 2 + (ygrid - center[1]) ** 2
    return pairwise_sum(np.where(dist2 >= R_ball * R_ball, w, 0.0))


def kernel_mass_checks(mf, density_bound: float, samples, rng=None,
                       gamma1: float = 0.1, gamma2: float = 0.1):
    """Check the Radon-measure mass bounds for the Gaussian window.

    With D the measured ball-density constant:
      (1)  integral window_r d mu <= D                         (asserted)
      (2)  tail outside B_R       <= 2^(n-1) exp(-3R^2/8r^2) D (asserted)
      (3)  center shift |x - x0| <= gamma1 r: report the smallest delta
           making  int window(x0) <= (1+delta) int window(x) + delta D
      (4)  scale change R/r <= 1 + gamma2: same report for the radii pair.

    samples: list of (center, r) pairs; the tail radius for (2) and the
    shifted/scaled probes for (3)/(4) derive from each sample via rng.
    Returns a dict with pass flags for (1)-(2) and worst deltas for (3)-(4).
    """
    rng = np.random.default_rng(0) if rng is None else rng
    worst1 = worst2 = -np.inf
    delta3 = delta4 = 0.0
    for center, r in samples:
        m = window_integral(mf, center, r)
        worst1 = max(worst1, m - density_bound)

        ratio = rng.uniform(1.0, 3.0)
        R_ball = ratio * r
        tail = _window_tail_integral(mf, center, r, R_ball)
        bound2 = 2.0 * np.exp(-3.0 * R_ball ** 2 / (8.0 * r * r)) * density_bound
        worst2 = max(worst2, tail - bound2)

        phi = rng.uniform(0.0, 2.0 * np.pi)
        shift = gamma1 * r * rng.uniform(0.0, 1.0)
        x0 = np.asarray(center) + shift * np.array([np.cos(phi), np.sin(phi)])
        m0 = window_integral(mf, x0, r)
        delta3 = max(delta3, (m0 - m) / (m + density_bound))

        r_big = r * (1.0 + gamma2 * rng.uniform(0.0, 1.0))
        m_big = window_integral(mf, center, r_big)
        delta4 = max(delta4, (m_big - m) / (m + density_bound))
    return {
        "bound1_ok": worst1 <= 1e-12 * max(1.0, density_bound),
        "bound1_slack": -worst1,
        "bound2_ok": worst2 <= 1e-12 * max(1.0, density_bound),
        "bound2_slack": -worst2,
        "delta3_worst": delta3,
        "delta4_worst": delta4,
        "gamma1": gamma1,
        "gamma2": gamma2,
        "n_samples": len(samples),
    }
