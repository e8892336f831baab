"""Time integration of  u_t = lap u - W'(u)/eps^2  with Neumann walls.

Default scheme ("imex-adi"): dimension-split implicit diffusion between
two explicit reaction half-kicks,

    u <- half reaction | split diffusion over dt | half reaction,

where the diffusion substep is TR-BDF2 (trapezoidal stage over gamma dt,
gamma = 2 - sqrt(2), then BDF2 closure: one-step, second order, L-stable)
with each implicit operator factored per direction into a tridiagonal
radial solve and a cyclic tridiagonal angular solve, in a fixed radial-
then-angular order (see _Stepper._diffuse for why the order must not
alternate).  L-stability matters here: the angular operator carries
1/r^2 and is brutally stiff at the pole ring, and the BDF2 stage damps
exactly the grid modes a trapezoidal rule would leave ringing.
First-order backward-Euler splitting was measurably too lossy at the
operating point dt = 0.2 eps^2 (interface speed deficit of several
percent); TR-BDF2 restores the shrinking-circle law to a fraction of a
percent at the same step size.

The radial solves share one banded Cholesky factor per coefficient (the
operator is symmetric under the r_i cell weight); the angular solves use
a batched Thomas sweep with the Sherman-Morrison corner correction, with
elimination coefficients and correction column cached per (grid, dt).

Stability needs only dt <= 0.2 eps^2 (the explicit reaction; max W'' = 2
on [-1,1] for the quartic well): the half-kick map u - (dt/2e^2) W'(u) is
monotone on [-1, 1] there, the implicit stages are bounded, and max|u|
stays within roundoff of 1 without any clamping.  The "explicit" scheme
is plain forward Euler and additionally needs dt <= 0.2 min(dr,
r_min dtheta)^2.

The dissipation ledger integrates eps * ((u_next - u)/dt)^2 every step,
the discrete time derivative of the scheme itself, which is what makes the
discrete energy identity  E(T) + sum dt * D = E(0)  checkable.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded

from .grid import PolarGrid, ScalarField, gradient, integrate, laplacian, pairwise_sum
from .potential import PotentialSpec, StandingWave

__all__ = [
    "SolverConfig", "State", "init_well_prepared", "step", "run",
    "energy_density", "total_energy", "sup_eps_gradient",
    "energy_identity_defect", "standing_wave_drift_1d",
]

REACTION_DT_FACTOR = 0.2


@dataclass(frozen=True)
class SolverConfig:
    eps: float
    dt: float
    t_end: float
    scheme: str = "imex-adi"
    save_every: int = 1

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.scheme not in ("imex-adi", "explicit"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.dt > REACTION_DT_FACTOR * self.eps ** 2 * (1 + 1e-12):
            raise ValueError(
                f"dt={self.dt:g} violates the reaction bound 0.2*eps^2="
                f"{REACTION_DT_FACTOR * self.eps ** 2:g}")
        if self.save_every < 1:
            raise ValueError("save_every must be >= 1")

    def validate_resolution(self, grid: PolarGrid):
        """Warn (not fail) when the grid under-resolves the interface."""
        if grid.dr > self.eps / 4 or grid.R * grid.dtheta > self.eps / 4:
            warnings.warn(
                f"grid ({grid.nr}x{grid.ntheta}) under-resolves eps={self.eps:g}: "
                f"dr={grid.dr:g}, R*dtheta={grid.R * grid.dtheta:g} vs eps/4="
                f"{self.eps / 4:g}", stacklevel=2)


@dataclass(frozen=True)
class State:
    u: ScalarField
    t: float
    eps: float
    step: int = 0


def signed_distance(grid: PolarGrid, interface: str, param: float) -> np.ndarray:
    """Signed distance to the initial interface, positive on the inside.

    concentric: circle of radius r0, inside = {r < r0};
    diameter / chord: line x2 = b, inside = the half plane below it.
    """
    x, y = grid.cell_centers_xy()
    if interface == "concentric":
        return param - np.sqrt(x * x + y * y)
    if interface in ("diameter", "chord"):
        return param - y
    raise ValueError(f"unknown interface {interface!r}")


def init_well_prepared(grid: PolarGrid, eps: float, interface: str,
                       param: float, potential: PotentialSpec) -> State:
    """u0 = Phi(d(x)/eps) from the signed distance to the chosen interface."""
    if interface == "concentric":
        if not (0.0 < param < grid.R):
            raise ValueError("concentric radius must satisfy 0 < r0 < R")
        if param <= 2.0 * eps:
            raise ValueError("degenerate interface: r0 <= 2*eps")
    elif interface in ("diameter", "chord"):
        if abs(param) >= grid.R:
            raise ValueError("chord offset must satisfy |b| < R")
    else:
        raise ValueError(f"unknown interface {interface!r}")
    wave = StandingWave(potential)
    d = signed_distance(grid, interface, param)
    return State(u=ScalarField(grid, wave.value(d / eps), 0.0), t=0.0, eps=eps)


# ---------------------------------------------------------------------------
# cached implicit solvers

def apply_l_radial(grid: PolarGrid, u: np.ndarray) -> np.ndarray:
    """(1/r) d_r (r d_r u) in flux form; zero flux at pole face and wall."""
    flux = np.zeros((grid.nr + 1, grid.ntheta))
    face_r = (np.arange(1, grid.nr) * grid.dr)[:, None]
    flux[1:-1] = face_r * (u[1:] - u[:-1]) / grid.dr
    return (flux[1:] - flux[:-1]) / (grid.r[:, None] * grid.dr)


def apply_l_angular(grid: PolarGrid, u: np.ndarray) -> np.ndarray:
    """(1/r^2) d_tt u, periodic."""
    return (np.roll(u, -1, axis=1) - 2.0 * u + np.roll(u, 1, axis=1)) \
        / (grid.r[:, None] * grid.dtheta) ** 2


class _BatchedCyclicSolve:
    """Solve (I - coeff L_theta) v = rhs on every ring at once.

    Per ring i the matrix is the cyclic tridiagonal with off-diagonal
    -c_i = -coeff/(r_i dtheta)^2.  Thomas elimination coefficients and the
    Sherman-Morrison correction column are precomputed (they depend only
    on the grid and coeff), so each application is one forward/backward
    sweep over theta, vectorized across rings.
    """

    def __init__(self, grid: PolarGrid, dt: float):
        m = grid.ntheta
        c = dt / (grid.r * grid.dtheta) ** 2          # (nr,)
        diag = 1.0 + 2.0 * c
        # Sherman-Morrison splitting: corner entries -c folded into u v^T
        gamma = -diag
        b = np.tile(diag[:, None], (1, m))
        b[:, 0] -= gamma
        b[:, -1] -= c * c / gamma
        self._off = -c                                 # scalar per ring
        # forward elimination: w_j = off / btilde_{j-1}, btilde_j = b_j - off*w_j
        btilde = np.empty_like(b)
        w = np.zeros_like(b)
        btilde[:, 0] = b[:, 0]
        for j in range(1, m):
            w[:, j] = self._off / btilde[:, j - 1]
            btilde[:, j] = b[:, j] - self._off * w[:, j]
        self._w = w
        self._btilde = btilde
        self._gamma = gamma
        self._c = c
        self._m = m
        # correction column z: solve T z = u_sm, u_sm = (gamma, 0, ..., -c)
        u_sm = np.zeros_like(b)
        u_sm[:, 0] = gamma
        u_sm[:, -1] = -c
        self._z = self._thomas(u_sm)
        self._vz = self._z[:, 0] + (-c / gamma) * self._z[:, -1]

    def _thomas(self, rhs):
        m = self._m
        y = np.empty_like(rhs)
        y[:, 0] = rhs[:, 0]
        w = self._w
        for j in range(1, m):
            y[:, j] = rhs[:, j] - w[:, j] * y[:, j - 1]
        x = np.empty_like(rhs)
        x[:, -1] = y[:, -1] / self._btilde[:, -1]
        off = self._off
        bt = self._btilde
        for j in range(m - 2, -1, -1):
            x[:, j] = (y[:, j] - off * x[:, j + 1]) / bt[:, j]
        return x

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        x = self._thomas(rhs)
        vx = x[:, 0] + (-self._c / self._gamma) * x[:, -1]
        factor = (vx / (1.0 + self._vz))[:, None]
        return x - factor * self._z


class _RadialSolve:
    """Solve (I - coeff L_r) v = rhs for all rays at once.

    Weighted by the cell radius the operator is a symmetric positive
    definite tridiagonal matrix (fluxes r_{i+1/2}/dr^2 between rings, zero
    flux at both the pole face and the wall), so one banded Cholesky
    factorization serves every step.
    """

    def __init__(self, grid: PolarGrid, dt: float):
        nr, dr = grid.nr, grid.dr
        r = grid.r
        face = np.arange(1, nr) * dr                  # interior face radii
        off = -dt * face / dr ** 2                    # symmetric off-diagonal
        diag = r.copy()
        diag[:-1] -= off
        diag[1:] -= off
        ab = np.zeros((2, nr))
        ab[0, 1:] = off
        ab[1] = diag
        self._chol = cholesky_banded(ab, lower=False)
        self._r = r

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return cho_solve_banded((self._chol, False), self._r[:, None] * rhs)


TRBDF2_GAMMA = 2.0 - np.sqrt(2.0)


class _Stepper:
    def __init__(self, grid: PolarGrid, config: SolverConfig):
        self.grid = grid
        self.config = config
        if config.scheme == "imex-adi":
            dt = config.dt
            g = TRBDF2_GAMMA
            beta = (1.0 - g) / (2.0 - g)
            self._tr_coeff = 0.5 * g * dt
            self._radial_tr = _RadialSolve(grid, self._tr_coeff)
            self._angular_tr = _BatchedCyclicSolve(grid, self._tr_coeff)
            self._radial_bdf = _RadialSolve(grid, beta * dt)
            self._angular_bdf = _BatchedCyclicSolve(grid, beta * dt)
            self._c1 = 1.0 / (g * (2.0 - g))
            self._c2 = (1.0 - g) ** 2 / (g * (2.0 - g))

    def _diffuse(self, u: np.ndarray) -> np.ndarray:
        """TR-BDF2 over one dt, each stage factored per direction.

        Each trapezoidal factor pairs the explicit application with its own
        implicit solve, so the stiff pole modes of the angular operator
        never meet a radial solve unbalanced (that ordering is what keeps
        the factored trapezoidal stage bounded).

        The direction order is fixed (radial then angular in both stages).
        Alternating the order each step looks like it should cancel the
        splitting bias, but the two orderings have slightly different
        stationary states, so alternation parks stationary solutions on a
        period-2 cycle whose spurious step-to-step motion pollutes the
        dissipation ledger; a fixed order converges to a genuine fixed
        point and leaves only a smooth O(dt^2)-consistent bias.
        """
        c = self._tr_coeff
        v = self._radial_tr.solve(u + c * apply_l_radial(self.grid, u))
        v = self._angular_tr.solve(v + c * apply_l_angular(self.grid, v))
        w = self._c1 * v - self._c2 * u
        w = self._radial_bdf.solve(w)
        return self._angular_bdf.solve(w)

    def advance(self, state: State, potential: PotentialSpec) -> State:
        cfg = self.config
        dt, eps = cfg.dt, state.eps
        u = state.u.values
        if not np.all(np.isfinite(u)):
            raise FloatingPointError(
                f"solution lost finiteness at step {state.step}")
        if cfg.scheme == "explicit":
            dt_diff = REACTION_DT_FACTOR * min(
                self.grid.dr, self.grid.r[0] * self.grid.dtheta) ** 2
            if dt > dt_diff * (1 + 1e-12):
                raise ValueError(
                    f"explicit scheme needs dt <= {dt_diff:g} on this grid")
            lap = laplacian(state.u).values
            new = u + dt * (lap - potential.w1(u) / eps ** 2)
        else:
            half = 0.5 * dt / eps ** 2
            v = u - half * potential.w1(u)
            v = self._diffuse(v)
            new = v - half * potential.w1(v)
        if not np.all(np.isfinite(new)):
            raise FloatingPointError(
                f"solution lost finiteness at step {state.step}")
        t = state.t + dt
        return State(u=ScalarField(self.grid, new, t), t=t, eps=eps,
                     step=state.step + 1)


def step(state: State, config: SolverConfig, potential: PotentialSpec) -> State:
    """One time step (standalone convenience; run() caches the solvers)."""
    return _Stepper(state.u.grid, config).advance(state, potential)


def energy_density(state: State, potential: PotentialSpec) -> ScalarField:
    gx, gy = gradient(state.u)
    grad2 = gx.values ** 2 + gy.values ** 2
    e = 0.5 * state.eps * grad2 + potential.w(state.u.values) / state.eps
    return state.u.with_values(e)


def total_energy(state: State, potential: PotentialSpec) -> float:
    return integrate(energy_density(state, potential))


def sup_eps_gradient(state: State) -> float:
    """max over cells of eps |grad u| (the eps-uniform gradient bound)."""
    gx, gy = gradient(state.u)
    return state.eps * float(np.sqrt(np.max(gx.values ** 2 + gy.values ** 2)))


def run(state: State, config: SolverConfig, potential: PotentialSpec,
        diagnostics_hooks=(), grid: PolarGrid | None = None):
    """Advance to t_end, sampling diagnostics every save_every steps.

    Each hook is called as hook(state, aux) -> dict and the dicts are
    merged into one row per sample; aux carries the cumulative dissipation
    integral int_0^t int eps (du/dt)^2, the running max of |u|, and
    du_dt, the scheme's (u_k - u_{k-1})/dt at the sampled step (None on
    the initial row).  Returns (final state, list of rows).
    """
    grid = state.u.grid if grid is None else grid
    config.validate_resolution(grid)
    stepper = _Stepper(grid, config)
    n_steps = int(round(config.t_end / config.dt))
    if abs(n_steps * config.dt - config.t_end) > 1e-9 * max(config.t_end, config.dt):
        n_steps = int(np.ceil(config.t_end / config.dt - 1e-12))

    rows = []
    cum_dissipation = 0.0
    max_abs_u = float(np.max(np.abs(state.u.values)))

    def sample(st, du_dt):
        aux = {"dissipation": cum_dissipation, "max_abs_u": max_abs_u,
               "du_dt": du_dt}
        row = {"t": st.t}
        for hook in diagnostics_hooks:
            row.update(hook(st, aux))
        rows.append(row)

    sample(state, None)
    for k in range(n_steps):
        new = stepper.advance(state, potential)
        delta = new.u.values - state.u.values
        cum_dissipation += state.eps * pairwise_sum(delta * delta * grid.cell_area) / config.dt
        max_abs_u = max(max_abs_u, float(np.max(np.abs(new.u.values))))
        du_dt = delta / config.dt
        state = new
        if (k + 1) % config.save_every == 0 or k + 1 == n_steps:
            sample(state, du_dt)
    return state, rows


def energy_identity_defect(rows) -> float:
    """|E(T) + total dissipation - E(0)| / E(0) from run diagnostics rows.

    Rows must carry E_total and the cumulative dissipation column.
    """
    if not rows:
        raise ValueError("empty diagnostics table")
    e0 = rows[0]["E_total"]
    eT = rows[-1]["E_total"]
    diss = rows[-1]["dissipation"]
    if e0 == 0.0:
        return abs(eT + diss)
    return abs(eT + diss - e0) / e0


# ---------------------------------------------------------------------------
# 1-D self-test mode (interval with Neumann ends; verification only --
# the production geometry is the disk, this exists to pin the scheme)

def standing_wave_drift_1d(eps: float = 0.05, n: int = 200, t_end: float = 0.01,
                           x0: float = 0.5, length: float = 1.0,
                           potential: PotentialSpec | None = None) -> dict:
    """Evolve u0 = Phi((x0 - x)/eps) on [0, length] and report the zero
    crossing drift, in cells, plus the energy trail."""
    potential = PotentialSpec.quartic() if potential is None else potential
    wave = StandingWave(potential)
    dx = length / n
    x = (np.arange(n) + 0.5) * dx
    u = wave.value((x0 - x) / eps)
    dt = REACTION_DT_FACTOR * eps ** 2
    steps = int(np.ceil(t_end / dt))
    dt = t_end / steps

    # same TR-BDF2-between-reaction-kicks pattern as the disk stepper,
    # with Neumann mirror closures at both interval ends
    def make_chol(coeff):
        off = np.full(n - 1, -coeff / dx ** 2)
        diag = np.full(n, 1.0)
        diag[:-1] -= off
        diag[1:] -= off
        ab = np.zeros((2, n))
        ab[0, 1:] = off
        ab[1] = diag
        return cholesky_banded(ab, lower=False)

    def apply_l(v):
        flux = np.zeros(n + 1)
        flux[1:-1] = (v[1:] - v[:-1]) / dx
        return (flux[1:] - flux[:-1]) / dx

    g = TRBDF2_GAMMA
    beta = (1.0 - g) / (2.0 - g)
    chol_tr = make_chol(0.5 * g * dt)
    chol_bdf = make_chol(beta * dt)
    c1 = 1.0 / (g * (2.0 - g))
    c2 = (1.0 - g) ** 2 / (g * (2.0 - g))

    def crossing(v):
        sign = np.signbit(v)
        idx = np.nonzero(sign[1:] != sign[:-1])[0]
        if idx.size == 0:
            return None
        i = idx[0]
        frac = v[i] / (v[i] - v[i + 1])
        return x[i] + frac * dx

    start = crossing(u)
    half = 0.5 * dt / eps ** 2
    for _ in range(steps):
        v = u - half * potential.w1(u)
        vs = cho_solve_banded((chol_tr, False), v + 0.5 * g * dt * apply_l(v))
        v = cho_solve_banded((chol_bdf, False), c1 * vs - c2 * v)
        u = v - half * potential.w1(v)
    end = crossing(u)
    drift = abs(end - start) if (start is not None and end is not None) else np.inf
    e = pairwise_sum(0.5 * eps * np.gradient(u, dx) ** 2 + potential.w(u) / eps) * dx
    return {"drift": drift, "drift_cells": drift / dx, "dx": dx,
            "crossing_start": start, "crossing_end": end,
            "max_abs_u": float(np.max(np.abs(u))), "energy": e}
