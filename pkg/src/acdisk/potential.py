"""Double-well potential W, the 1-D standing-wave profile, and the surface
tension sigma = integral of sqrt(2 W) between the wells.

The built-in well is the quartic W(u) = (1 - u^2)^2 / 4, whose profile is
Phi(s) = tanh(s / sqrt(2)) in closed form.  Other C^3 equal-well
potentials enter through the callables on PotentialSpec; their structural
constants (gamma, alpha, kappa) are then validated by sampling, and Phi is
obtained by integrating Phi' = sqrt(2 W(Phi)) with a fixed-step RK4.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad

__all__ = [
    "PotentialSpec", "StandingWave", "eval_potential", "surface_tension",
    "standing_wave_residual",
]

SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class PotentialSpec:
    """A bistable potential with equal wells at +-1.

    gamma: the single zero of W' in (-1, 1); alpha, kappa: convexity
    constants with W'' >= kappa for alpha <= |u| <= 1.  These are
    validation constants only; the dynamics uses W and its derivatives.
    """

    name: str
    w: Callable
    w1: Callable
    w2: Callable
    gamma: float
    alpha: float
    kappa: float

    @staticmethod
    def quartic() -> "PotentialSpec":
        return PotentialSpec(
            name="quartic",
            w=lambda u: 0.25 * (1.0 - u * u) ** 2,
            w1=lambda u: u * u * u - u,
            w2=lambda u: 3.0 * u * u - 1.0,
            gamma=0.0,
            alpha=np.sqrt(2.0 / 3.0),
            kappa=1.0,
        )

    def validate(self, samples: int = 601):
        """Sampled structural checks on u in [-1.5, 1.5]; raises ValueError."""
        if not (-1.0 < self.gamma < 1.0):
            raise ValueError("gamma must lie in (-1, 1)")
        if not (0.0 < self.alpha < 1.0):
            raise ValueError("alpha must lie in (0, 1)")
        if self.kappa <= 0.0:
            raise ValueError("kappa must be positive")
        u = np.linspace(-1.5, 1.5, samples)
        w = np.asarray(self.w(u))
        if abs(self.w(1.0)) > 1e-14 or abs(self.w(-1.0)) > 1e-14:
            raise ValueError("wells at +-1 must have W = 0")
        if np.any(w < -1e-14):
            raise ValueError("W must be nonnegative")
        interior = u[(u > self.gamma + 1e-6) & (u < 1.0 - 1e-6)]
        if np.any(np.asarray(self.w1(interior)) >= 0.0):
            raise ValueError("W' must be negative on (gamma, 1)")
        interior = u[(u > -1.0 + 1e-6) & (u < self.gamma - 1e-6)]
        if np.any(np.asarray(self.w1(interior)) <= 0.0):
            raise ValueError("W' must be positive on (-1, gamma)")
        conv = u[(np.abs(u) >= self.alpha) & (np.abs(u) <= 1.0)]
        if np.any(np.asarray(self.w2(conv)) < self.kappa - 1e-12):
            raise ValueError("W'' must be >= kappa for alpha <= |u| <= 1")


def eval_potential(spec: PotentialSpec, u):
    """Return (W(u), W'(u), W''(u))."""
    return spec.w(u), spec.w1(u), spec.w2(u)


def surface_tension(spec: PotentialSpec, tol: float = 1e-10) -> float:
    """Integral of sqrt(2 W(u)) over u in [-1, 1] by adaptive quadrature.

    For the quartic well this equals 2*sqrt(2)/3.
    """
    val, err = quad(lambda u: np.sqrt(max(2.0 * spec.w(u), 0.0)),
                    -1.0, 1.0, epsabs=tol, limit=200)
    if err > 100.0 * tol:
        raise ArithmeticError(f"surface-tension quadrature did not converge "
                              f"(error estimate {err:.2e})")
    return val


class StandingWave:
    """The heteroclinic profile Phi with Phi'' = W'(Phi), Phi(0) = 0,
    Phi(+-inf) = +-1, and equivalently Phi' = sqrt(2 W(Phi)).

    Quartic well: Phi(s) = tanh(s / sqrt(2)) closed form.  Other wells:
    fixed-step RK4 on Phi' = sqrt(2 W(Phi)) from Phi(0) = 0, tabulated on
    |s| <= s_max and clamped to the saturated tails outside.
    """

    def __init__(self, spec: PotentialSpec, s_max: float = 16.0, step: float = 1e-3):
        self.spec = spec
        self._closed_form = spec.name == "quartic"
        if not self._closed_form:
            self._table_s, self._table_phi = self._integrate(spec, s_max, step)

    @staticmethod
    def _integrate(spec, s_max, step):
        n = int(round(s_max / step))
        phi = np.empty(2 * n + 1)
        phi[n] = 0.0

        def rhs(p):
            return np.sqrt(max(2.0 * spec.w(np.clip(p, -1.0, 1.0)), 0.0))

        for direction, sl in ((1, range(n + 1, 2 * n + 1)),
                              (-1, range(n - 1, -1, -1))):
            p = 0.0
            h = direction * step
            for k in sl:
                k1 = rhs(p)
                k2 = rhs(p + 0.5 * h * k1)
                k3 = rhs(p + 0.5 * h * k2)
                k4 = rhs(p + h * k3)
                p = p + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
                p = float(np.clip(p, -1.0, 1.0))
                phi[k] = p
        s = np.linspace(-s_max, s_max, 2 * n + 1)
        return s, phi

    def value(self, s):
        if self._closed_form:
            return np.tanh(np.asarray(s, dtype=np.float64) / SQRT2)
        return np.interp(s, self._table_s, self._table_phi,
                         left=-1.0, right=1.0)

    def derivative(self, s):
        """Phi'(s) = sqrt(2 W(Phi(s))); exact equipartition by construction."""
        phi = self.value(s)
        if self._closed_form:
            return (1.0 - phi * phi) / SQRT2
        return np.sqrt(np.maximum(2.0 * self.spec.w(phi), 0.0))

    def second_derivative(self, s):
        """Closed-form Phi'' for the quartic (chain rule on Phi'), else
        the ODE right-hand side W'(Phi)."""
        phi = self.value(s)
        if self._closed_form:
            return -SQRT2 * phi * self.derivative(s)
        return self.spec.w1(phi)

    def __call__(self, s):
        return self.value(s)


def standing_wave_residual(spec: PotentialSpec, s_samples) -> float:
    """max |Phi''(s) - W'(Phi(s))| over the samples.

    For the quartic the two sides come from different closed forms
    (-sqrt(2) Phi Phi' vs Phi^3 - Phi), so this really checks the tanh
    identity rather than evaluating one expression twice.
    """
    wave = StandingWave(spec)
    s = np.asarray(s_samples, dtype=np.float64)
    return float(np.max(np.abs(wave.second_derivative(s) - spec.w1(wave.value(s)))))
