import warnings

import numpy as np
import pytest

from acdisk.grid import PolarGrid, ScalarField, integrate
from acdisk.measures import measure_fields
from acdisk.potential import PotentialSpec, StandingWave, surface_tension
from acdisk.solver import (SolverConfig, State, energy_identity_defect,
                           init_well_prepared, run, standing_wave_drift_1d,
                           step, sup_eps_gradient, total_energy)
from acdisk.varifold import interface_and_angle

warnings.filterwarnings("ignore", message="grid .* under-resolves")


def quiet_run(*args, **kwargs):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return run(*args, **kwargs)


def energy_hook(potential):
    def hook(st, aux):
        return {"E_total": total_energy(st, potential),
                "dissipation": aux["dissipation"],
                "max_abs_u": aux["max_abs_u"]}
    return hook


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(eps=0.1, dt=0.2 * 0.01 * 1.5, t_end=1.0)  # dt too big
    with pytest.raises(ValueError):
        SolverConfig(eps=0.1, dt=1e-4, t_end=1.0, scheme="magic")
    with pytest.raises(ValueError):
        SolverConfig(eps=-0.1, dt=1e-4, t_end=1.0)


def test_resolution_warning():
    cfg = SolverConfig(eps=0.01, dt=1e-5, t_end=0.1)
    with pytest.warns(UserWarning):
        cfg.validate_resolution(PolarGrid(16, 16, 1.0))


def test_init_concentric_profile(quartic):
    grid = PolarGrid(64, 64, 1.0)
    eps = 0.05
    state = init_well_prepared(grid, eps, "concentric", 0.5, quartic)
    wave = StandingWave(quartic)
    # along a ray, u = Phi((r0 - r)/eps)
    expected = wave.value((0.5 - grid.r) / eps)
    assert np.max(np.abs(state.u.values[:, 0] - expected)) <= 1e-14
    assert state.u.values[0, 0] > 0.999
    assert state.u.values[-1, 0] < -0.999


def test_init_diameter_profile(quartic):
    grid = PolarGrid(64, 64, 1.0)
    state = init_well_prepared(grid, 0.05, "diameter", 0.0, quartic)
    x, y = grid.cell_centers_xy()
    wave = StandingWave(quartic)
    assert np.max(np.abs(state.u.values - wave.value(-y / 0.05))) <= 1e-14


def test_init_energy_matches_interface_length(quartic):
    grid = PolarGrid(200, 64, 1.0)
    eps = 0.03
    state = init_well_prepared(grid, eps, "concentric", 0.5, quartic)
    sigma = surface_tension(quartic)
    e0 = total_energy(state, quartic)
    assert abs(e0 - sigma * 2 * np.pi * 0.5) <= 0.05 * e0


def test_init_rejects_degenerate(quartic):
    grid = PolarGrid(32, 32, 1.0)
    with pytest.raises(ValueError):
        init_well_prepared(grid, 0.3, "concentric", 0.5, quartic)  # r0 <= 2 eps
    with pytest.raises(ValueError):
        init_well_prepared(grid, 0.05, "concentric", 1.5, quartic)
    with pytest.raises(ValueError):
        init_well_prepared(grid, 0.05, "chord", 1.5, quartic)
    with pytest.raises(ValueError):
        init_well_prepared(grid, 0.05, "squiggle", 0.5, quartic)


@pytest.mark.parametrize("scheme", ["imex-adi", "explicit"])
def test_equilibria_preserved(scheme, quartic):
    grid = PolarGrid(24, 24, 1.0)
    eps = 0.3
    dt = 5e-6 if scheme == "explicit" else 0.2 * eps ** 2
    cfg = SolverConfig(eps=eps, dt=dt, t_end=1.0, scheme=scheme)
    for value in (1.0, 0.0, -1.0):
        state = State(u=ScalarField(grid, np.full((24, 24), value)), t=0.0, eps=eps)
        new = step(state, cfg, quartic)
        tol = 0.0 if scheme == "explicit" else 1e-12
        assert np.max(np.abs(new.u.values - value)) <= tol


def test_explicit_cfl_guard(quartic):
    grid = PolarGrid(24, 24, 1.0)
    eps = 0.3
    cfg = SolverConfig(eps=eps, dt=0.2 * eps ** 2, t_end=1.0, scheme="explicit")
    state = State(u=ScalarField(grid, np.zeros((24, 24))), t=0.0, eps=eps)
    with pytest.raises(ValueError):
        step(state, cfg, quartic)


def test_schemes_agree_to_first_order(quartic):
    grid = PolarGrid(24, 16, 1.0)
    eps = 0.35
    state = init_well_prepared(grid, eps, "concentric", 0.75, quartic)
    diffs = []
    for dt in (8e-6, 4e-6):
        t_end = 40 * 8e-6
        cfg_e = SolverConfig(eps=eps, dt=dt, t_end=t_end, scheme="explicit")
        cfg_i = SolverConfig(eps=eps, dt=dt, t_end=t_end, scheme="imex-adi")
        fe, _ = quiet_run(state, cfg_e, quartic, [])
        fi, _ = quiet_run(state, cfg_i, quartic, [])
        diffs.append(np.max(np.abs(fe.u.values - fi.u.values)))
    assert diffs[1] <= 0.75 * diffs[0]


def test_run_zero_horizon(quartic):
    grid = PolarGrid(32, 32, 1.0)
    eps = 0.1
    state = init_well_prepared(grid, eps, "concentric", 0.5, quartic)
    cfg = SolverConfig(eps=eps, dt=0.2 * eps ** 2, t_end=0.0)
    final, rows = quiet_run(state, cfg, quartic, [energy_hook(quartic)])
    assert len(rows) == 1
    assert final.t == 0.0


def test_run_deterministic(quartic):
    grid = PolarGrid(48, 32, 1.0)
    eps = 0.08
    cfg = SolverConfig(eps=eps, dt=0.2 * eps ** 2, t_end=0.01, save_every=4)
    hook = energy_hook(quartic)
    out = []
    for _ in range(2):
        state = init_well_prepared(grid, eps, "concentric", 0.5, quartic)
        final, rows = quiet_run(state, cfg, quartic, [hook])
        out.append((final.u.values.copy(), rows))
    assert np.array_equal(out[0][0], out[1][0])
    assert out[0][1] == out[1][1]


def test_max_principle_and_energy_monotone(quartic):
    grid = PolarGrid(96, 48, 1.0)
    eps = 0.05
    state = init_well_prepared(grid, eps, "concentric", 0.5, quartic)
    cfg = SolverConfig(eps=eps, dt=0.2 * eps ** 2, t_end=0.02, save_every=5)
    final, rows = quiet_run(state, cfg, quartic, [energy_hook(quartic)])
    assert max(r["max_abs_u"] for r in rows) <= 1.0 + 1e-9
    energies = [r["E_total"] for r in rows]
    assert all(b <= a + 1e-10 for a, b in zip(energies, energies[1:]))


def test_shrinking_circle_against_sharp_interface(quartic):
    grid = PolarGrid(150, 64, 1.0)
    eps = 0.04
    state = init_well_prepared(grid, eps, "concentric", 0.6, quartic)
    cfg = SolverConfig(eps=eps, dt=0.2 * eps ** 2 * 0.999, t_end=0.1, save_every=1000)
    final, _ = quiet_run(state, cfg, quartic, [])
    rep = interface_and_angle(final)
    oracle = np.sqrt(0.36 - 0.2)
    assert abs(rep.radius_estimate - oracle) <= 0.02 * oracle


def test_energy_ledger_defect_and_dt_order(quartic):
    grid = PolarGrid(96, 32, 1.0)
    eps = 0.05
    defects = []
    for divider in (1, 2):
        state = init_well_prepared(grid, eps, "concentric", 0.5, quartic)
        dt = 0.2 * eps ** 2 / divider
        cfg = SolverConfig(eps=eps, dt=dt, t_end=0.02, save_every=10 * divider)
        _, rows = quiet_run(state, cfg, quartic, [energy_hook(quartic)])
        defects.append(energy_identity_defect(rows))
    assert defects[0] <= 0.02
    # defect shrinks with dt at observed order >= 0.9
    assert defects[1] <= defects[0] * 2 ** (-0.9)


def test_energy_ledger_stationary_state(quartic):
    grid = PolarGrid(32, 32, 1.0)
    eps = 0.1
    state = State(u=ScalarField(grid, np.ones((32, 32))), t=0.0, eps=eps)
    cfg = SolverConfig(eps=eps, dt=0.2 * eps ** 2, t_end=0.01, save_every=5)
    _, rows = quiet_run(state, cfg, quartic, [energy_hook(quartic)])
    assert energy_identity_defect(rows) <= 1e-12


def test_energy_ledger_empty_table():
    with pytest.raises(ValueError):
        energy_identity_defect([])


def test_sup_eps_gradient(quartic):
    grid = PolarGrid(128, 64, 1.0)
    eps = 0.04
    state = init_well_prepared(grid, eps, "concentric", 0.5, quartic)
    val = sup_eps_gradient(state)
    assert abs(val - 1.0 / np.sqrt(2.0)) <= 0.05
    flat = State(u=ScalarField(grid, np.full((128, 64), 0.5)), t=0.0, eps=eps)
    assert sup_eps_gradient(flat) == 0.0


def test_total_energy_matches_measure_fields(quartic):
    grid = PolarGrid(64, 48, 1.0)
    eps = 0.05
    state = init_well_prepared(grid, eps, "concentric", 0.5, quartic)
    assert abs(total_energy(state, quartic)
               - measure_fields(state, quartic).total_energy) <= 1e-10


def test_standing_wave_drift_1d():
    rep = standing_wave_drift_1d(eps=0.05, n=200, t_end=0.01)
    assert rep["drift"] <= rep["dx"]
    assert rep["max_abs_u"] <= 1.0 + 1e-9


def test_abort_on_nonfinite(quartic):
    grid = PolarGrid(24, 24, 1.0)
    eps = 0.3
    bad = np.full((24, 24), 1.0)
    bad[0, 0] = np.inf
    state = State(u=ScalarField(grid, bad), t=0.0, eps=eps)
    cfg = SolverConfig(eps=eps, dt=0.2 * eps ** 2, t_end=0.01)
    with pytest.raises(FloatingPointError):
        quiet_run(state, cfg, quartic, [])
