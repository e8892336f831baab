import numpy as np
import pytest

from acdisk.potential import (PotentialSpec, StandingWave, eval_potential,
                              standing_wave_residual, surface_tension)

SIGMA_QUARTIC = 2.0 * np.sqrt(2.0) / 3.0


def adaptive_simpson(f, a, b, tol):
    """Independent quadrature oracle (recursive Simpson)."""
    def simpson(a, b, fa, fm, fb):
        return (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def recurse(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = simpson(a, m, fa, flm, fm)
        right = simpson(m, b, fm, frm, fb)
        if depth > 40 or abs(left + right - whole) <= 15.0 * tol:
            return left + right + (left + right - whole) / 15.0
        return (recurse(a, m, fa, flm, fm, left, tol / 2, depth + 1)
                + recurse(m, b, fm, frm, fb, right, tol / 2, depth + 1))

    fa, fb, fm = f(a), f(b), f(0.5 * (a + b))
    return recurse(a, b, fa, fm, fb, simpson(a, b, fa, fm, fb), tol, 0)


def scaled_quartic(factor):
    """Equal-well potential W_factor = factor * quartic; same gamma/alpha,
    kappa scales with the factor."""
    base = PotentialSpec.quartic()
    return PotentialSpec(
        name=f"quartic_x{factor:g}",
        w=lambda u: factor * base.w(u),
        w1=lambda u: factor * base.w1(u),
        w2=lambda u: factor * base.w2(u),
        gamma=0.0,
        alpha=np.sqrt(2.0 / 3.0),
        kappa=factor,
    )


def test_eval_quartic_wells(quartic):
    w, w1, w2 = eval_potential(quartic, 1.0)
    assert w == 0.0 and w1 == 0.0
    w, w1, w2 = eval_potential(quartic, 0.0)
    assert w == 0.25 and w1 == 0.0 and w2 == -1.0


def test_eval_quartic_convexity_point(quartic):
    # W''(alpha) = kappa for the quartic structural constants
    _, _, w2 = eval_potential(quartic, quartic.alpha)
    assert abs(w2 - quartic.kappa) <= 1e-14


def test_surface_tension_vs_simpson_oracle(quartic):
    oracle = adaptive_simpson(lambda u: (1.0 - u * u) / np.sqrt(2.0),
                              -1.0, 1.0, 1e-12)
    val = surface_tension(quartic)
    assert abs(val - oracle) <= 1e-10
    assert abs(val - SIGMA_QUARTIC) <= 1e-8


def test_surface_tension_scaling():
    assert abs(surface_tension(scaled_quartic(4.0)) - 2.0 * SIGMA_QUARTIC) <= 1e-8


def test_surface_tension_symmetry(quartic):
    half = adaptive_simpson(lambda u: np.sqrt(2.0 * quartic.w(u)), 0.0, 1.0, 1e-12)
    assert abs(surface_tension(quartic) - 2.0 * half) <= 1e-9


def test_surface_tension_tolerance_invariance(quartic):
    # reparameterizing the quadrature (tolerance level) changes nothing
    assert abs(surface_tension(quartic, tol=1e-10)
               - surface_tension(quartic, tol=1e-12)) <= 1e-9


def test_standing_wave_residual_quartic(quartic):
    s = np.linspace(-8.0, 8.0, 1601)
    assert standing_wave_residual(quartic, s) <= 1e-12


def test_standing_wave_asymptotics(quartic):
    wave = StandingWave(quartic)
    assert wave.value(0.0) == 0.0
    # tanh asymptotics: 1 - Phi(s) ~ 2 exp(-sqrt(2) s)
    assert abs(wave.value(8.0) - 1.0) <= 2.0 * np.exp(-np.sqrt(2.0) * 8.0) * 1.01
    assert abs(wave.value(-8.0) + 1.0) <= 2.0 * np.exp(-np.sqrt(2.0) * 8.0) * 1.01
    assert abs(wave.value(10.5) - 1.0) <= 1e-6
    assert abs(wave.derivative(0.0) - 1.0 / np.sqrt(2.0)) <= 1e-15
    s = np.linspace(-6, 6, 401)
    assert np.all(wave.derivative(s) > 0.0)


def test_standing_wave_equipartition(quartic):
    # eps (Phi'(s/eps)/eps)^2 / 2 == W(Phi(s/eps)) / eps pointwise
    wave = StandingWave(quartic)
    eps = 0.05
    s = np.linspace(-0.4, 0.4, 801)
    lhs = eps * (wave.derivative(s / eps) / eps) ** 2 / 2.0
    rhs = quartic.w(wave.value(s / eps)) / eps
    assert np.max(np.abs(lhs - rhs)) <= 1e-10


def test_standing_wave_numeric_fallback():
    # scaled well exercises the RK4 path; Phi' = sqrt(2 W(Phi)) still holds
    spec = scaled_quartic(4.0)
    wave = StandingWave(spec)
    s = np.linspace(-3.0, 3.0, 301)
    lhs = wave.derivative(s)
    rhs = np.sqrt(2.0 * spec.w(wave.value(s)))
    assert np.max(np.abs(lhs - rhs)) <= 1e-10
    assert abs(wave.value(6.0) - 1.0) <= 1e-5


def test_validate_accepts_quartic(quartic):
    quartic.validate()


def test_validate_rejects_tilted_well():
    base = PotentialSpec.quartic()
    tilted = PotentialSpec(
        name="tilted", w=lambda u: base.w(u) + 0.05 * (u + 1.0),
        w1=lambda u: base.w1(u) + 0.05, w2=base.w2,
        gamma=0.0, alpha=base.alpha, kappa=1.0)
    with pytest.raises(ValueError):
        tilted.validate()


def test_validate_rejects_bad_constants():
    base = PotentialSpec.quartic()
    with pytest.raises(ValueError):
        PotentialSpec("bad", base.w, base.w1, base.w2,
                      gamma=2.0, alpha=base.alpha, kappa=1.0).validate()
    with pytest.raises(ValueError):
        PotentialSpec("bad", base.w, base.w1, base.w2,
                      gamma=0.0, alpha=base.alpha, kappa=3.0).validate()
