"""Experiment orchestration: flat-text configs, scenario setup, the
per-sample diagnostics pipeline, delimited outputs, pass/fail report, and
the eps-sweep comparisons.

Outputs of a run directory:
    diagnostics.csv   fixed schema, one row per sampled time
    report.txt        every enabled check once: measured value, threshold,
                      PASS/FAIL (plus INFO lines for report-only values)
    interface_NNNN.csv  level-set polyline per sample (x, y, segment)
    snapshot_*.snap   AC-SNAP v1 fields at configured times

The CSV schema is fixed:
    t, E_total, E_boundary, dissipation, sup_xi, int_abs_xi, radius_est,
    angle_min, angle_max, sup_eps_grad, G_<k>, brakke_lhs_<k>, brakke_rhs_<k>
with one G column per monotonicity probe and one brakke pair per test
function; cells are empty (never NaN) where a diagnostic is off or gated.
`dissipation` is cumulative from t=0.  sup_xi / int_abs_xi are gated by
the transient cutoff 4 eps^2, sup_eps_grad by eps^2.

Exit codes: 0 all enabled checks pass, 1 check failure, 2 config error,
3 numerical abort.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels, measures, solver, varifold
from .geometry import DiskGeometry
from .grid import PolarGrid, write_snapshot
from .potential import PotentialSpec, surface_tension

__all__ = [
    "ConfigError", "ExperimentConfig", "parse_config_text", "load_config",
    "run_experiment", "run_sweep", "kernel_selftest", "library_selftest",
    "CSV_BASE_COLUMNS", "scalar_test_function", "vector_test_field",
]

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# test-object registries

class ScalarTestFunction:
    """phi(x, t) >= 0 with zero wall-normal derivative, used by the
    semidecreasing and Brakke ledgers."""

    def __init__(self, name, value, grad, c2_norm, dt=None):
        self.name = name
        self.value = value
        self.grad = grad
        self.dt = dt
        self.c2_norm = c2_norm

    def check_neumann(self, geom: DiskGeometry, tol=1e-8):
        th = np.linspace(0.0, 2.0 * np.pi, 257)[:-1]
        wall = geom.R * np.stack([np.cos(th), np.sin(th)], axis=-1)
        g = self.grad(wall, 0.0)
        normal = (g[:, 0] * np.cos(th) + g[:, 1] * np.sin(th))
        worst = float(np.max(np.abs(normal)))
        if worst > tol:
            raise ConfigError(
                f"test function {self.name!r} violates the wall Neumann "
                f"condition: max |grad phi . nu| = {worst:.2e}")
        return worst


def scalar_test_function(name: str, R: float) -> ScalarTestFunction:
    if name == "const":
        return ScalarTestFunction(
            "const",
            value=lambda pts, t: np.ones(pts.shape[:-1]),
            grad=lambda pts, t: np.zeros(pts.shape[:-1] + (2,)),
            c2_norm=1.0)
    if name == "radial-cos":
        # phi = 2 + cos(pi r^2 / R^2); radial slope vanishes at the wall
        def value(pts, t):
            rho = pts[..., 0] ** 2 + pts[..., 1] ** 2
            return 2.0 + np.cos(np.pi * rho / R ** 2)

        def grad(pts, t):
            rho = pts[..., 0] ** 2 + pts[..., 1] ** 2
            fac = -np.sin(np.pi * rho / R ** 2) * 2.0 * np.pi / R ** 2
            return np.stack([fac * pts[..., 0], fac * pts[..., 1]], axis=-1)

        r = np.linspace(0.0, R, 4001)
        arg = np.pi * r ** 2 / R ** 2
        phi = 2.0 + np.cos(arg)
        dphi = -2.0 * np.pi * r / R ** 2 * np.sin(arg)
        d2phi = -2.0 * np.pi / R ** 2 * np.sin(arg) \
            - (2.0 * np.pi * r / R ** 2) ** 2 * np.cos(arg)
        slope_over_r = -2.0 * np.pi / R ** 2 * np.sin(arg)
        norm = float(np.max(np.abs(phi)) + np.max(np.abs(dphi))
                     + max(np.max(np.abs(d2phi)), np.max(np.abs(slope_over_r))))
        return ScalarTestFunction("radial-cos", value, grad, norm)
    raise ConfigError(f"unknown test function {name!r} "
                      f"(available: const, radial-cos)")


class VectorTestField:
    def __init__(self, name, value, jacobian, tangential, normal_trace=None):
        self.name = name
        self.value = value
        self.jacobian = jacobian
        self.tangential = tangential  # g . nu == 0 on the wall, exactly
        # analytic g . nu on the wall as a function of theta; tangential
        # fields carry the zero function so quadrature sees exact zeros
        self.normal_trace = normal_trace


def vector_test_field(name: str, R: float) -> VectorTestField:
    if name == "const":
        vec = np.array([0.3, -0.2])
        return VectorTestField(
            "const",
            value=lambda pts: np.broadcast_to(vec, pts.shape).copy(),
            jacobian=lambda pts: np.zeros(pts.shape[:-1] + (2, 2)),
            tangential=False,
            normal_trace=lambda th: vec[0] * np.cos(th) + vec[1] * np.sin(th))
    if name == "rotational":
        # g = (-y, x)(1 + x/2): tangent to every circle about the origin
        def value(pts):
            x, y = pts[..., 0], pts[..., 1]
            return np.stack([-y * (1 + 0.5 * x), x * (1 + 0.5 * x)], axis=-1)

        def jacobian(pts):
            x, y = pts[..., 0], pts[..., 1]
            j = np.empty(pts.shape[:-1] + (2, 2))
            j[..., 0, 0] = -0.5 * y
            j[..., 0, 1] = -(1 + 0.5 * x)
            j[..., 1, 0] = 1 + x
            j[..., 1, 1] = 0.0
            return j
        return VectorTestField("rotational", value, jacobian, tangential=True,
                               normal_trace=lambda th: np.zeros_like(th))
    if name == "radial-bump":
        # g = q(|x|^2) x with q vanishing quadratically at 0 and at the wall
        def q_and_deriv(rho):
            q = 16.0 * (rho * (R ** 2 - rho)) ** 2 / R ** 8
            qp = 32.0 * rho * (R ** 2 - rho) * (R ** 2 - 2.0 * rho) / R ** 8
            return q, qp

        def value(pts):
            rho = pts[..., 0] ** 2 + pts[..., 1] ** 2
            q, _ = q_and_deriv(rho)
            return np.stack([q * pts[..., 0], q * pts[..., 1]], axis=-1)

        def jacobian(pts):
            x, y = pts[..., 0], pts[..., 1]
            q, qp = q_and_deriv(x * x + y * y)
            j = np.empty(pts.shape[:-1] + (2, 2))
            j[..., 0, 0] = q + 2.0 * qp * x * x
            j[..., 0, 1] = 2.0 * qp * x * y
            j[..., 1, 0] = 2.0 * qp * x * y
            j[..., 1, 1] = q + 2.0 * qp * y * y
            return j
        return VectorTestField("radial-bump", value, jacobian, tangential=True,
                               normal_trace=lambda th: np.zeros_like(th))
    raise ConfigError(f"unknown vector field {name!r} "
                      f"(available: const, rotational, radial-bump)")


# ---------------------------------------------------------------------------
# configuration

SCENARIOS = ("concentric", "diameter", "chord", "selftest-1d")

_KNOWN_KEYS = {
    "scenario", "geometry.R", "grid.nr", "grid.ntheta", "init.r0", "init.b",
    "solver.eps", "solver.dt", "solver.t_end", "solver.scheme",
    "solver.save_every", "seed", "measures", "interface",
    "monotonicity.c3", "brakke.phis", "semidecreasing.phi",
    "varifold.fields", "density.samples", "appendix.samples",
    "snapshot.times", "sweep.t_ref",
    "checks.max_principle", "checks.energy_monotone",
    "checks.energy_monotone_after", "checks.energy_ledger",
    "checks.angle", "checks.position_drift", "checks.first_variation",
    "checks.density_sigma_mult", "checks.sup_xi_ratio",
    "checks.int_abs_xi_trend", "checks.c4_uniform",
    "checks.sup_eps_grad_ratio",
}


@dataclass
class ExperimentConfig:
    scenario: str = "concentric"
    R: float = 1.0
    nr: int = 300
    ntheta: int = 256
    r0: float = 0.6
    b: float = 0.0
    eps: float = 0.03
    dt: float | None = None          # None = auto 0.2 eps^2
    t_end: float = 0.1
    scheme: str = "imex-adi"
    save_every: int = 1
    seed: int = 7
    measures_on: bool = True
    interface_on: bool = True
    c3: float = 1.0
    probes: list = field(default_factory=list)       # (y array, s)
    brakke_phis: list = field(default_factory=list)  # names
    semidecreasing_phi: str | None = None
    varifold_fields: list = field(default_factory=list)
    density_samples: int = 0
    appendix_samples: int = 0
    snapshot_times: list = field(default_factory=list)
    sweep_t_ref: float = 0.05
    check_max_principle: bool = True
    check_energy_monotone: bool = True
    energy_monotone_after: float = 0.0
    energy_ledger_tol: float | None = 0.02
    angle_check: tuple | None = None                 # (target, tol, after_t)
    check_position_drift: bool = False
    first_variation_tol: float | None = None
    density_sigma_mult: float = 6.0
    sup_xi_ratio_tol: float | None = 1.5
    int_abs_xi_trend: bool = True
    c4_uniform: bool = True
    sup_eps_grad_ratio_tol: float | None = 1.2

    def resolved_dt(self) -> float:
        return 0.2 * self.eps ** 2 if self.dt is None else self.dt


def parse_config_text(text: str) -> dict:
    """Flat `key = value` lines, '#' comments; returns raw string map."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, val = (part.strip() for part in stripped.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        base = key.split(".")
        known = key in _KNOWN_KEYS or (
            len(base) == 3 and base[0] == "probe" and base[1].isdigit()
            and base[2] in ("y", "s"))
        if not known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = (val, lineno)
    return raw


def _get(raw, key, conv, default):
    if key not in raw:
        return default
    val, lineno = raw.pop(key)
    try:
        return conv(val)
    except (ValueError, ConfigError) as exc:
        raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from exc


def _as_bool(val: str) -> bool:
    if val.lower() in ("on", "true", "1", "yes"):
        return True
    if val.lower() in ("off", "false", "0", "no"):
        return False
    raise ValueError(f"expected on/off, got {val!r}")


def _as_floats(val: str) -> list:
    return [float(part) for part in val.split(",") if part.strip()]


def _as_names(val: str) -> list:
    return [part.strip() for part in val.split(",") if part.strip()]


def config_from_raw(raw: dict) -> ExperimentConfig:
    raw = dict(raw)
    cfg = ExperimentConfig()
    cfg.scenario = _get(raw, "scenario", str, cfg.scenario)
    if cfg.scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {cfg.scenario!r} "
                          f"(expected one of {', '.join(SCENARIOS)})")
    cfg.R = _get(raw, "geometry.R", float, cfg.R)
    cfg.nr = _get(raw, "grid.nr", int, cfg.nr)
    cfg.ntheta = _get(raw, "grid.ntheta", int, cfg.ntheta)
    cfg.r0 = _get(raw, "init.r0", float, cfg.r0)
    cfg.b = _get(raw, "init.b", float, cfg.b)
    cfg.eps = _get(raw, "solver.eps", float, cfg.eps)
    dt_raw = _get(raw, "solver.dt", str, "auto")
    cfg.dt = None if dt_raw == "auto" else float(dt_raw)
    cfg.t_end = _get(raw, "solver.t_end", float, cfg.t_end)
    cfg.scheme = _get(raw, "solver.scheme", str, cfg.scheme)
    cfg.save_every = _get(raw, "solver.save_every", int, cfg.save_every)
    cfg.seed = _get(raw, "seed", int, cfg.seed)
    cfg.measures_on = _get(raw, "measures", _as_bool, cfg.measures_on)
    cfg.interface_on = _get(raw, "interface", _as_bool, cfg.interface_on)
    cfg.c3 = _get(raw, "monotonicity.c3", float, cfg.c3)
    cfg.brakke_phis = _get(raw, "brakke.phis", _as_names, cfg.brakke_phis)
    semi = _get(raw, "semidecreasing.phi", str, None)
    cfg.semidecreasing_phi = None if semi in (None, "off") else semi
    cfg.varifold_fields = _get(raw, "varifold.fields", _as_names, cfg.varifold_fields)
    cfg.density_samples = _get(raw, "density.samples", int, cfg.density_samples)
    cfg.appendix_samples = _get(raw, "appendix.samples", int, cfg.appendix_samples)
    cfg.snapshot_times = _get(raw, "snapshot.times", _as_floats, cfg.snapshot_times)
    cfg.sweep_t_ref = _get(raw, "sweep.t_ref", float, cfg.sweep_t_ref)
    cfg.check_max_principle = _get(raw, "checks.max_principle", _as_bool,
                                   cfg.check_max_principle)
    cfg.check_energy_monotone = _get(raw, "checks.energy_monotone", _as_bool,
                                     cfg.check_energy_monotone)
    cfg.energy_monotone_after = _get(raw, "checks.energy_monotone_after", float,
                                     cfg.energy_monotone_after)
    ledger = _get(raw, "checks.energy_ledger", str, None)
    if ledger is not None:
        cfg.energy_ledger_tol = None if ledger == "off" else float(ledger)
    angle = _get(raw, "checks.angle", _as_floats, None)
    if angle is not None:
        if len(angle) == 2:
            angle = angle + [0.0]
        if len(angle) != 3:
            raise ConfigError("checks.angle expects 'target, tol[, after_t]'")
        cfg.angle_check = tuple(angle)
    cfg.check_position_drift = _get(raw, "checks.position_drift", _as_bool,
                                    cfg.check_position_drift)
    fv = _get(raw, "checks.first_variation", str, None)
    if fv is not None:
        cfg.first_variation_tol = None if fv == "off" else float(fv)
    cfg.density_sigma_mult = _get(raw, "checks.density_sigma_mult", float,
                                  cfg.density_sigma_mult)
    ratio = _get(raw, "checks.sup_xi_ratio", str, None)
    if ratio is not None:
        cfg.sup_xi_ratio_tol = None if ratio == "off" else float(ratio)
    cfg.int_abs_xi_trend = _get(raw, "checks.int_abs_xi_trend", _as_bool,
                                cfg.int_abs_xi_trend)
    cfg.c4_uniform = _get(raw, "checks.c4_uniform", _as_bool, cfg.c4_uniform)
    seg = _get(raw, "checks.sup_eps_grad_ratio", str, None)
    if seg is not None:
        cfg.sup_eps_grad_ratio_tol = None if seg == "off" else float(seg)

    # probes: probe.<k>.y / probe.<k>.s, contiguous from 1
    probe_keys = sorted(k for k in raw if k.startswith("probe."))
    indices = sorted({int(k.split(".")[1]) for k in probe_keys})
    for idx in indices:
        ykey, skey = f"probe.{idx}.y", f"probe.{idx}.s"
        if ykey not in raw or skey not in raw:
            raise ConfigError(f"probe {idx} needs both {ykey} and {skey}")
        yval, _ = raw.pop(ykey)
        sval, _ = raw.pop(skey)
        y = _as_floats(yval)
        if len(y) != 2:
            raise ConfigError(f"{ykey} expects 'x, y'")
        cfg.probes.append((np.array(y), float(sval)))
    if raw:
        leftover = ", ".join(sorted(raw))
        raise ConfigError(f"unused config keys: {leftover}")
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return config_from_raw(parse_config_text(fh.read()))


# ---------------------------------------------------------------------------
# diagnostics CSV

CSV_BASE_COLUMNS = ["t", "E_total", "E_boundary", "dissipation", "sup_xi",
                    "int_abs_xi", "radius_est", "angle_min", "angle_max",
                    "sup_eps_grad"]


def csv_columns(config: ExperimentConfig) -> list:
    cols = list(CSV_BASE_COLUMNS)
    cols += [f"G_{k}" for k in range(1, len(config.probes) + 1)]
    for k in range(1, len(config.brakke_phis) + 1):
        cols += [f"brakke_lhs_{k}", f"brakke_rhs_{k}"]
    return cols


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float) and not np.isfinite(value):
        raise ValueError("refusing to write a non-finite diagnostics cell")
    return f"{value:.17g}"


def write_diagnostics_csv(path, columns, rows):
    with open(path, "w") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_format_cell(row.get(col)) for col in columns) + "\n")


# ---------------------------------------------------------------------------
# checks and report

@dataclass
class Check:
    name: str
    value: float
    threshold: str
    passed: bool


def write_report(path, checks, info_lines):
    with open(path, "w") as fh:
        for c in checks:
            fh.write(f"{c.name}: value={c.value:.6g} threshold={c.threshold} "
                     f"{'PASS' if c.passed else 'FAIL'}\n")
        for line in info_lines:
            fh.write(f"INFO {line}\n")


# ---------------------------------------------------------------------------
# the run

@dataclass
class RunResult:
    exit_code: int
    rows: list
    checks: list
    info: list
    out_dir: str
    probe_data: list          # per probe: dict(times, g_raw, budget)
    monotonicity: list        # MonotonicityReport per probe
    config: ExperimentConfig
    final_state: object = None


def _build_state(config: ExperimentConfig, grid: PolarGrid,
                 potential: PotentialSpec) -> solver.State:
    if config.scenario == "concentric":
        return solver.init_well_prepared(grid, config.eps, "concentric",
                                         config.r0, potential)
    if config.scenario == "diameter":
        return solver.init_well_prepared(grid, config.eps, "diameter",
                                         0.0, potential)
    if config.scenario == "chord":
        return solver.init_well_prepared(grid, config.eps, "chord",
                                         config.b, potential)
    raise ConfigError(f"scenario {config.scenario!r} is not a field run")


def _density_sample_set(config, grid, rng, count):
    r_lo = min(4.0 * config.eps, 0.125 * config.R)
    r_lo = max(r_lo, 3.0 * grid.dr)
    r_hi = 0.25 * config.R
    samples = []
    for _ in range(count):
        rad = config.R * np.sqrt(rng.uniform(0.0, 1.0))
        ang = rng.uniform(0.0, 2.0 * np.pi)
        y = rad * np.array([np.cos(ang), np.sin(ang)])
        samples.append((y, rng.uniform(r_lo, r_hi)))
    return samples


def run_experiment(config: ExperimentConfig, out_dir) -> RunResult:
    os.makedirs(out_dir, exist_ok=True)
    if config.scenario == "selftest-1d":
        return _run_selftest_1d(config, out_dir)

    potential = PotentialSpec.quartic()
    potential.validate()
    grid = PolarGrid(config.nr, config.ntheta, config.R)
    geom = DiskGeometry(config.R)
    dt = config.resolved_dt()
    scfg = solver.SolverConfig(eps=config.eps, dt=dt, t_end=config.t_end,
                               scheme=config.scheme, save_every=config.save_every)
    state = _build_state(config, grid, potential)
    sigma = surface_tension(potential)

    phis = [scalar_test_function(name, config.R) for name in config.brakke_phis]
    semidec = (scalar_test_function(config.semidecreasing_phi, config.R)
               if config.semidecreasing_phi else None)
    for fn in phis + ([semidec] if semidec else []):
        fn.check_neumann(geom)

    t_cut = measures.default_transient_cutoff(config.eps)
    probe_data = [{"times": [], "g_raw": [], "budget": []} for _ in config.probes]
    snapshot_queue = sorted(config.snapshot_times)
    interface_counter = [0]

    def hook(st, aux):
        row = {}
        mf = measures.measure_fields(st, potential)
        row["E_total"] = mf.total_energy
        row["dissipation"] = aux["dissipation"]
        row["_max_abs_u"] = aux["max_abs_u"]
        if config.measures_on:
            row["E_boundary"] = measures.boundary_energy(mf)
            if st.t >= t_cut:
                sup_xi, int_abs = measures.discrepancy_stats(mf)
                row["sup_xi"] = sup_xi
                row["int_abs_xi"] = int_abs
        if st.t >= config.eps ** 2:
            row["sup_eps_grad"] = solver.sup_eps_gradient(st)
        if config.interface_on:
            try:
                rep = varifold.interface_and_angle(st)
            except ValueError:
                rep = None
            if rep is not None:
                row["radius_est"] = rep.radius_estimate
                if rep.contact_angles_deg:
                    row["angle_min"] = min(rep.contact_angles_deg)
                    row["angle_max"] = max(rep.contact_angles_deg)
                verts = (np.concatenate(rep.polylines)
                         if rep.polylines else np.zeros((0, 2)))
                if verts.size:
                    row["_mean_y"] = float(np.mean(verts[:, 1]))
                idx = interface_counter[0]
                with open(os.path.join(out_dir, f"interface_{idx:04d}.csv"),
                          "w") as fh:
                    fh.write("x,y,segment\n")
                    for seg_id, poly in enumerate(rep.polylines):
                        for vx, vy in poly:
                            fh.write(f"{vx:.17g},{vy:.17g},{seg_id}\n")
            interface_counter[0] += 1
        for k, (y, s) in enumerate(config.probes):
            g_raw, budget = kernels.probe_terms(mf, geom, y, s)
            tau = s - st.t
            row[f"G_{k + 1}"] = float(np.exp(config.c3 * tau ** 0.25) * g_raw)
            probe_data[k]["times"].append(st.t)
            probe_data[k]["g_raw"].append(g_raw)
            probe_data[k]["budget"].append(budget)
        for k, phi in enumerate(phis):
            br = varifold.brakke_rate(st, potential, phi.value, phi.grad,
                                      phi.dt, du_dt=aux["du_dt"])
            row[f"brakke_lhs_{k + 1}"] = br["mass_phi"]
            if aux["du_dt"] is not None:
                row[f"brakke_rhs_{k + 1}"] = br["varifold_rate"]
                row[f"_brakke_ident_{k + 1}"] = br["identity_rate"]
        if semidec is not None:
            pts = np.stack(grid.cell_centers_xy(), axis=-1)
            row["_semidec_mass"] = float(np.sum(
                np.asarray(semidec.value(pts, st.t)) * mf.e.values
                * grid.cell_area))
        while snapshot_queue and st.t >= snapshot_queue[0] - dt / 2:
            t_snap = snapshot_queue.pop(0)
            write_snapshot(os.path.join(out_dir, f"snapshot_t{t_snap:g}.snap"),
                           st.u, st.eps)
        return row

    try:
        final, rows = solver.run(state, scfg, potential, [hook], grid=grid)
    except FloatingPointError as exc:
        with open(os.path.join(out_dir, "report.txt"), "w") as fh:
            fh.write(f"ABORT: {exc}\n")
        return RunResult(EXIT_NUMERIC, [], [], [str(exc)], out_dir,
                         probe_data, [], config)

    checks, info = [], []
    e0 = rows[0]["E_total"]

    if config.check_max_principle:
        worst = max(row["_max_abs_u"] for row in rows)
        checks.append(Check("max_principle", worst, "<=1+1e-9",
                            worst <= 1.0 + 1e-9))
    if config.check_energy_monotone:
        eligible = [row for row in rows if row["t"] >= config.energy_monotone_after]
        if len(eligible) >= 2:
            incr = max(b["E_total"] - a["E_total"]
                       for a, b in zip(eligible, eligible[1:]))
        else:
            incr = 0.0
        checks.append(Check("energy_monotone_max_increment", incr,
                            "<=1e-10", incr <= 1e-10))
    if config.energy_ledger_tol is not None:
        defect = solver.energy_identity_defect(rows)
        checks.append(Check("energy_ledger_defect", defect,
                            f"<={config.energy_ledger_tol}",
                            defect <= config.energy_ledger_tol))
    if semidec is not None:
        violation = measures.semidecreasing_check(rows, "_semidec_mass",
                                                  e0, semidec.c2_norm)
        tol = 1e-8 * e0
        checks.append(Check(f"semidecreasing[{semidec.name}]", violation,
                            f"<={tol:.3g}", violation <= tol))
    if config.angle_check is not None:
        target, tol_deg, after_t = config.angle_check
        worst = 0.0
        seen = False
        for row in rows:
            if row["t"] < after_t - 1e-12:
                continue
            for col in ("angle_min", "angle_max"):
                if row.get(col) is not None:
                    seen = True
                    worst = max(worst, abs(row[col] - target))
        checks.append(Check(f"contact_angle[{target:g}+-{tol_deg:g}]",
                            worst, f"<={tol_deg:g}", seen and worst <= tol_deg))
    if config.check_position_drift:
        ys = [row.get("_mean_y") for row in rows if row.get("_mean_y") is not None]
        drift = max(abs(y - ys[0]) for y in ys) if ys else float("inf")
        checks.append(Check("position_drift", drift, f"<={grid.dr:g}",
                            drift <= grid.dr))

    monotonicity_reports = []
    for k, (y, s) in enumerate(config.probes):
        pd = probe_data[k]
        rep = kernels.monotonicity_track(
            None, geom, y, s, c3=config.c3, dt=dt,
            precomputed=(pd["times"], pd["g_raw"], pd["budget"]))
        monotonicity_reports.append(rep)
        info.append(f"monotonicity probe {k + 1}: y=({y[0]:g},{y[1]:g}) s={s:g} "
                    f"max_defect={rep.max_defect:.6g} excluded={rep.excluded}")

    if config.density_samples > 0 or config.appendix_samples > 0:
        rng = np.random.default_rng(config.seed)
        mf = measures.measure_fields(final, potential)
        if config.density_samples > 0:
            samples = _density_sample_set(config, grid, rng, config.density_samples)
            report = measures.density_ratios(mf, samples)
            bound = config.density_sigma_mult * sigma
            checks.append(Check(f"density_ratio_max[{config.density_samples}]",
                                report.d0_measured, f"<={bound:.6g}",
                                report.d0_measured <= bound))
            if config.appendix_samples > 0:
                asamples = _density_sample_set(config, grid, rng,
                                               config.appendix_samples)
                rep = kernels.kernel_mass_checks(mf, report.d0_measured,
                                                 asamples, rng)
                checks.append(Check("appendix_mass_bound_1",
                                    rep["bound1_slack"], ">=0", rep["bound1_ok"]))
                checks.append(Check("appendix_mass_bound_2",
                                    rep["bound2_slack"], ">=0", rep["bound2_ok"]))
                info.append(f"appendix shift/scale continuity: "
                            f"delta3={rep['delta3_worst']:.6g} "
                            f"delta4={rep['delta4_worst']:.6g} "
                            f"(gamma1={rep['gamma1']:g}, gamma2={rep['gamma2']:g})")

    if config.first_variation_tol is not None and config.varifold_fields:
        for name in config.varifold_fields:
            fld = vector_test_field(name, config.R)
            fv = varifold.first_variation_pde_rhs(final, potential,
                                                  fld.value, fld.jacobian,
                                                  g_normal=fld.normal_trace)
            checks.append(Check(f"first_variation[{name}]",
                                fv.relative_residual,
                                f"<={config.first_variation_tol}",
                                fv.relative_residual <= config.first_variation_tol))
            if fld.tangential:
                checks.append(Check(f"boundary_term_zero[{name}]",
                                    abs(fv.term_boundary), "==0",
                                    fv.term_boundary == 0.0))

    if config.measures_on and len(rows) >= 2:
        ts = np.array([row["t"] for row in rows])
        eb = np.array([row.get("E_boundary", 0.0) for row in rows])
        info.append(f"boundary energy time integral over [0,{config.t_end:g}]: "
                    f"{float(np.trapz(eb, ts)):.6g} (recorded, not asserted)")
    info.append(f"sigma={sigma:.8f} E(0)={e0:.8f} dt={dt:.6g} "
                f"grid={config.nr}x{config.ntheta} eps={config.eps:g}")

    write_diagnostics_csv(os.path.join(out_dir, "diagnostics.csv"),
                          csv_columns(config), rows)
    write_report(os.path.join(out_dir, "report.txt"), checks, info)
    code = EXIT_OK if all(c.passed for c in checks) else EXIT_CHECK
    return RunResult(code, rows, checks, info, out_dir, probe_data,
                     monotonicity_reports, config, final_state=final)


def _run_selftest_1d(config: ExperimentConfig, out_dir) -> RunResult:
    rep = solver.standing_wave_drift_1d(eps=config.eps)
    drift_ok = rep["drift"] <= rep["dx"]
    checks = [Check("standing_wave_drift_1d", rep["drift"],
                    f"<={rep['dx']:g}", drift_ok),
              Check("max_principle", rep["max_abs_u"], "<=1+1e-9",
                    rep["max_abs_u"] <= 1 + 1e-9)]
    rows = [{"t": 0.0, "E_total": rep["energy"],
             "radius_est": rep["crossing_end"]}]
    write_diagnostics_csv(os.path.join(out_dir, "diagnostics.csv"),
                          csv_columns(config), rows)
    write_report(os.path.join(out_dir, "report.txt"), checks, [])
    code = EXIT_OK if all(c.passed for c in checks) else EXIT_CHECK
    return RunResult(code, rows, checks, [], out_dir, [], [], config)


# ---------------------------------------------------------------------------
# eps sweep

def _sweep_member_args(config: ExperimentConfig, eps: float):
    member = replace(config, probes=list(config.probes),
                     brakke_phis=list(config.brakke_phis),
                     varifold_fields=list(config.varifold_fields),
                     snapshot_times=list(config.snapshot_times))
    member.eps = eps
    member.nr = int(np.ceil(4.0 * config.R / eps))
    # keep the configured dt/eps^2 ratio, snapped so samples land on the
    # base config's sample-time grid (matched times across members), and
    # end every member on the same sample time
    dt_factor = config.resolved_dt() / config.eps ** 2
    t_sample = config.save_every * config.resolved_dt()
    steps = int(np.ceil(t_sample / (dt_factor * eps ** 2) - 1e-12))
    member.dt = t_sample / steps
    member.save_every = steps
    member.t_end = int(np.ceil(config.t_end / t_sample - 1e-9)) * t_sample
    # per-member heavy diagnostics off; the sweep reads measures + probes
    member.density_samples = 0
    member.appendix_samples = 0
    member.varifold_fields = []
    member.first_variation_tol = None
    member.snapshot_times = []
    return member


def _run_member(args):
    member, out_dir = args
    return run_experiment(member, out_dir)


def run_sweep(config: ExperimentConfig, eps_list, out_dir) -> dict:
    if len(eps_list) == 0:
        raise ConfigError("sweep needs at least one eps")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ConfigError("sweep eps list must be strictly decreasing")
    os.makedirs(out_dir, exist_ok=True)
    members = [(_sweep_member_args(config, eps),
                os.path.join(out_dir, f"eps_{eps:g}")) for eps in eps_list]
    workers = int(os.environ.get("AC_THREADS", "1") or "1")
    if workers > 1 and len(members) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(members))) as pool:
            results = list(pool.map(_run_member, members))
    else:
        results = [_run_member(m) for m in members]

    t_ref = config.sweep_t_ref
    table = []
    for eps, res in zip(eps_list, results):
        if res.exit_code == EXIT_NUMERIC:
            return {"exit_code": EXIT_NUMERIC, "results": results}
        row_ref = min(res.rows, key=lambda r: abs(r["t"] - t_ref))
        maxdef = res.monotonicity[0].max_defect if res.monotonicity else None
        table.append({
            "eps": eps,
            "nr": res.config.nr,
            "ntheta": res.config.ntheta,
            "dt": res.config.dt,
            "t_ref": row_ref["t"],
            "int_abs_xi": row_ref.get("int_abs_xi"),
            "sup_xi": row_ref.get("sup_xi"),
            "max_defect": maxdef,
            "sup_eps_grad": row_ref.get("sup_eps_grad"),
        })

    checks, info = [], []
    if config.int_abs_xi_trend and all(r["int_abs_xi"] is not None for r in table):
        vals = [r["int_abs_xi"] for r in table]
        decreasing = all(a > b for a, b in zip(vals, vals[1:]))
        margin = min((a - b for a, b in zip(vals, vals[1:])), default=0.0)
        checks.append(Check("int_abs_xi_strictly_decreasing", margin,
                            ">0", decreasing))
        info.append("int_abs_xi at t_ref: "
                    + ", ".join(f"{v:.6g}" for v in vals))
    if config.sup_xi_ratio_tol is not None and len(table) > 1:
        vals = [r["sup_xi"] for r in table if r["sup_xi"] is not None]
        if vals and min(vals) > 0:
            ratio = max(vals) / min(vals)
        else:
            ratio = float("inf")
        checks.append(Check("sup_xi_ratio", ratio,
                            f"<={config.sup_xi_ratio_tol}",
                            ratio <= config.sup_xi_ratio_tol))
        info.append("sup_xi at t_ref: "
                    + ", ".join(f"{v:.6g}" for v in vals))
    c4_fit = None
    if config.c4_uniform and table and table[0]["max_defect"] is not None:
        c4_fit = max(0.0, table[0]["max_defect"])
        worst = max((r["max_defect"] for r in table[1:]), default=float("-inf"))
        ok = all(r["max_defect"] <= c4_fit + 1e-12 for r in table[1:])
        checks.append(Check("monotonicity_defect_uniform", worst,
                            f"<=c4_fit={c4_fit:.6g}", ok))
        info.append("max_defect per eps: "
                    + ", ".join(f"{r['max_defect']:.6g}" for r in table))
    if config.sup_eps_grad_ratio_tol is not None and len(table) > 1:
        vals = [r["sup_eps_grad"] for r in table if r["sup_eps_grad"] is not None]
        ratio = max(vals) / min(vals) if vals else float("inf")
        checks.append(Check("sup_eps_grad_ratio", ratio,
                            f"<={config.sup_eps_grad_ratio_tol}",
                            ratio <= config.sup_eps_grad_ratio_tol))

    sweep_cols = ["eps", "nr", "ntheta", "dt", "t_ref", "int_abs_xi",
                  "sup_xi", "max_defect", "sup_eps_grad"]
    with open(os.path.join(out_dir, "sweep.csv"), "w") as fh:
        fh.write(",".join(sweep_cols) + "\n")
        for row in table:
            fh.write(",".join(_format_cell(row.get(c)) for c in sweep_cols) + "\n")
    write_report(os.path.join(out_dir, "report.txt"), checks, info)
    member_fail = any(res.exit_code != EXIT_OK for res in results)
    code = (EXIT_OK if all(c.passed for c in checks) and not member_fail
            else EXIT_CHECK)
    return {"exit_code": code, "results": results, "table": table,
            "checks": checks, "c4_fit": c4_fit, "out_dir": out_dir}


# ---------------------------------------------------------------------------
# standalone self-tests (no PDE run)

def kernel_selftest(n: int, samples: int, seed: int) -> dict:
    """Identity residual checks on seeded random samples; the n=2 variant
    also exercises the reflected identity on the unit disk."""
    if n not in (2, 3):
        raise ConfigError("kernel selftest needs n in {2, 3}")
    rng = np.random.default_rng(seed)
    worst_std = 0.0
    for _ in range(samples):
        y = rng.normal(size=n)
        x = y + rng.normal(size=n) * rng.uniform(0.1, 1.0)
        tau = rng.uniform(0.01, 1.0)
        a = rng.normal(size=n)
        a /= np.linalg.norm(a)
        kp = kernels.KernelPoint(y=y, s=1.0, n=n)
        t = 1.0 - tau
        res = kernels.identity_residual_standard(kp, x, t, a)
        dt_term = abs(kernels.kernel_eval(kp, x, t, "dt"))
        worst_std = max(worst_std, abs(res) / (dt_term + 1.0))
    out = {"worst_standard": worst_std, "standard_ok": worst_std <= 1e-10,
           "n": n, "samples": samples}
    if n == 2:
        geom = DiskGeometry(1.0)
        worst_ref = 0.0
        for _ in range(samples):
            rad = rng.uniform(0.55, 0.999)
            phi = rng.uniform(0.0, 2.0 * np.pi)
            x = rad * np.array([np.cos(phi), np.sin(phi)])
            rad_y = rng.uniform(0.55, 0.999)
            phi_y = rng.uniform(0.0, 2.0 * np.pi)
            y = rad_y * np.array([np.cos(phi_y), np.sin(phi_y)])
            tau = rng.uniform(0.005, 0.5)
            a = rng.normal(size=2)
            a /= np.linalg.norm(a)
            kp = kernels.KernelPoint(y=y, s=1.0, n=2, geometry=geom,
                                     reflected=True)
            lhs, rhs = kernels.identity_residual_reflected(kp, x, 1.0 - tau, a)
            rel = abs(lhs - rhs) / (abs(lhs) + abs(rhs) + 1.0)
            worst_ref = max(worst_ref, rel)
        out["worst_reflected"] = worst_ref
        out["reflected_ok"] = worst_ref <= 1e-8
    out["exit_code"] = EXIT_OK if out["standard_ok"] and out.get(
        "reflected_ok", True) else EXIT_CHECK
    return out


def library_selftest() -> dict:
    """1-D standing wave drift plus grid/potential/geometry invariants."""
    from .grid import ScalarField, integrate, laplacian
    lines = []
    ok = True

    rep = solver.standing_wave_drift_1d()
    good = rep["drift"] <= rep["dx"]
    ok &= good
    lines.append(f"standing_wave_drift_1d: {rep['drift']:.3e} <= {rep['dx']:g} "
                 f"{'PASS' if good else 'FAIL'}")

    pot = PotentialSpec.quartic()
    try:
        pot.validate()
        lines.append("potential_invariants: PASS")
    except ValueError as exc:
        ok = False
        lines.append(f"potential_invariants: FAIL ({exc})")
    sigma = surface_tension(pot)
    good = abs(sigma - 2.0 * np.sqrt(2.0) / 3.0) <= 1e-8
    ok &= good
    lines.append(f"surface_tension_quartic: {sigma:.12f} {'PASS' if good else 'FAIL'}")

    grid = PolarGrid(32, 32, 1.0)
    one = grid.field_from_function(lambda x, y: np.ones_like(x))
    good = abs(integrate(one) - np.pi) <= 1e-12 * np.pi
    ok &= good
    lines.append(f"grid_area: {'PASS' if good else 'FAIL'}")
    rng = np.random.default_rng(0)
    noise = ScalarField(grid, rng.normal(size=(32, 32)))
    div = abs(integrate(laplacian(noise)))
    good = div <= 1e-10 * float(np.max(np.abs(noise.values)))
    ok &= good
    lines.append(f"divergence_theorem: {div:.3e} {'PASS' if good else 'FAIL'}")

    geom = DiskGeometry(1.0)
    rad = rng.uniform(0.05, 1.0, size=500)
    ang = rng.uniform(0.0, 2.0 * np.pi, size=500)
    pts = np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=-1)
    _, _, xt = geom.nearest_and_reflect(pts)
    _, _, back = geom.nearest_and_reflect(xt)
    good = bool(np.max(np.abs(back - pts)) <= 1e-14)
    ok &= good
    lines.append(f"reflection_involution: {'PASS' if good else 'FAIL'}")

    return {"exit_code": EXIT_OK if ok else EXIT_CHECK, "lines": lines}
