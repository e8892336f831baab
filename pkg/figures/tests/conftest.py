import numpy as np
import pytest

HEADER = ("t,E_total,E_boundary,dissipation,sup_xi,int_abs_xi,radius_est,"
          "angle_min,angle_max,sup_eps_grad,G_1,brakke_lhs_1,brakke_rhs_1")


def format_row(values):
    return ",".join("" if v is None else f"{v:.17g}" for v in values)


@pytest.fixture()
def run_csv(tmp_path):
    """Synthetic diagnostics.csv shaped like a shrinking-circle run."""
    lines = [HEADER]
    r0, eps = 0.6, 0.03
    for k in range(21):
        t = 0.005 * k
        r = np.sqrt(max(r0 ** 2 - 2 * t, 1e-4))
        e = 0.9428 * 2 * np.pi * r
        gated = t < 4 * eps ** 2
        lines.append(format_row([
            t, e, 1e-9, 0.9428 * 2 * np.pi * (r0 - r),
            None if gated else -1e-3 - 1e-2 * t,
            None if gated else 0.04 * (1 - t),
            r, None, None,
            None if t < eps ** 2 else 0.705,
            np.exp(-t) * 0.4, e, None if k == 0 else -11.0,
        ]))
    path = tmp_path / "diagnostics.csv"
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture()
def chord_csv(tmp_path):
    """Run CSV with contact angles but no closed-interface radius."""
    lines = [HEADER]
    for k in range(11):
        t = 0.005 * k
        ang = 90.0 - 17.0 * np.exp(-t / 0.01)
        lines.append(format_row([
            t, 1.8 - 0.1 * t, 1e-4, 0.1 * t, None, None, None,
            ang, ang + 0.3, 0.7, 0.2, 1.8 - 0.1 * t, -0.5]))
    path = tmp_path / "chord.csv"
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture()
def sweep_csv(tmp_path):
    lines = ["eps,nr,ntheta,dt,t_ref,int_abs_xi,sup_xi,max_defect,sup_eps_grad"]
    for eps, ia, sx in ((0.08, 0.045, 0.0017), (0.04, 0.019, 0.024),
                        (0.02, 0.016, 0.068)):
        lines.append(f"{eps},{int(4 / eps)},256,{0.05 * eps ** 2},0.05,"
                     f"{ia},{sx},-4.0,0.696")
    path = tmp_path / "sweep.csv"
    path.write_text("\n".join(lines) + "\n")
    return path
