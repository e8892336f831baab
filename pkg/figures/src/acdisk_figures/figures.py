"""The standard diagnostic figures.

Run-directory kinds (from diagnostics.csv):

    energy_decay      total (and boundary) energy vs time
    discrepancy       sup xi and int |xi| vs time
    monotonicity      kernel-mass ledger G_<k> vs time, one line per probe
    radius_vs_theory  measured interface radius with the shrinking-circle
                      law sqrt(r(t0)^2 - 2 (t - t0)) overlaid
    contact_angle     min/max contact angle vs time

Sweep-directory kind (from sweep.csv):

    sweep_trends      int |xi| and sup xi against eps on log-log axes

Empty cells in the CSV mean "diagnostic gated or off at this sample" and
are simply skipped; a *missing column* is a schema violation and raises.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["FigureSpec", "RUN_KINDS", "SWEEP_KINDS", "make_figure",
           "read_table"]

RUN_KINDS = ("energy_decay", "discrepancy", "monotonicity",
             "radius_vs_theory", "contact_angle")
SWEEP_KINDS = ("sweep_trends",)


@dataclass(frozen=True)
class FigureSpec:
    csv_path: str
    kind: str
    out_path: str


def read_table(path):
    """CSV -> dict of column name -> float array (nan for empty cells)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty CSV") from None
        rows = [row for row in reader if row]
    if not rows:
        raise ValueError(f"{path}: CSV has a header but no data rows")
    cols = {}
    for j, name in enumerate(header):
        cols[name] = np.array([float(r[j]) if r[j] != "" else math.nan
                               for r in rows])
    return cols


def _require(cols, *names):
    for name in names:
        if name not in cols:
            raise ValueError(f"missing column {name!r}")


def _plot_series(ax, t, vals, **kwargs):
    keep = ~np.isnan(vals)
    ax.plot(t[keep], vals[keep], marker="o", markersize=3, **kwargs)
    return int(keep.sum())


def _energy_decay(cols, ax):
    _require(cols, "t", "E_total", "E_boundary")
    _plot_series(ax, cols["t"], cols["E_total"], label="total energy")
    if np.any(~np.isnan(cols["E_boundary"])):
        ax2 = ax.twinx()
        keep = ~np.isnan(cols["E_boundary"])
        ax2.plot(cols["t"][keep], cols["E_boundary"][keep], color="tab:red",
                 linestyle="--", label="boundary energy")
        ax2.set_ylabel("boundary energy", color="tab:red")
    ax.set_xlabel("t")
    ax.set_ylabel("energy")
    ax.set_title("Energy decay")
    return {"series": ["E_total", "E_boundary"]}


def _discrepancy(cols, ax):
    _require(cols, "t", "sup_xi", "int_abs_xi")
    n1 = _plot_series(ax, cols["t"], cols["sup_xi"], label="sup xi")
    n2 = _plot_series(ax, cols["t"], cols["int_abs_xi"], label="int |xi|")
    ax.set_xlabel("t")
    ax.set_ylabel("discrepancy")
    ax.set_title("Discrepancy statistics")
    if n1 + n2 == 0:
        ax.text(0.5, 0.5, "no discrepancy samples (transient gate)",
                ha="center", va="center", transform=ax.transAxes)
    ax.legend(loc="best")
    return {"series": ["sup_xi", "int_abs_xi"]}


def _monotonicity(cols, ax):
    _require(cols, "t")
    g_cols = sorted((name for name in cols if name.startswith("G_")),
                    key=lambda s: int(s.split("_")[1]))
    if not g_cols:
        raise ValueError("missing column 'G_1' (no monotonicity probes in CSV)")
    for name in g_cols:
        _plot_series(ax, cols["t"], cols[name], label=f"probe {name[2:]}")
    ax.set_xlabel("t")
    ax.set_ylabel("kernel-weighted mass G")
    ax.set_title("Boundary monotonicity ledger")
    ax.legend(loc="best")
    return {"series": g_cols}


def _radius_vs_theory(cols, ax):
    _require(cols, "t", "radius_est")
    t = cols["t"]
    r = cols["radius_est"]
    keep = ~np.isnan(r)
    if not np.any(keep):
        raise ValueError("radius_est column has no values "
                         "(scenario without a closed interface?)")
    t0, r0 = t[keep][0], r[keep][0]
    ax.plot(t[keep], r[keep], "o", markersize=3, label="measured")
    tt = np.linspace(t0, t[keep][-1], 400)
    theory = np.sqrt(np.maximum(r0 ** 2 - 2.0 * (tt - t0), 0.0))
    ax.plot(tt, theory, "-", label="sqrt(r0^2 - 2t) theory")
    ax.set_xlabel("t")
    ax.set_ylabel("interface radius")
    ax.set_title("Shrinking-circle law")
    ax.legend(loc="best")
    return {"series": ["measured", "theory"], "r0": float(r0)}


def _contact_angle(cols, ax):
    _require(cols, "t", "angle_min", "angle_max")
    n1 = _plot_series(ax, cols["t"], cols["angle_min"], label="min angle")
    n2 = _plot_series(ax, cols["t"], cols["angle_max"], label="max angle")
    ax.axhline(90.0, color="gray", linestyle=":", label="90 deg")
    ax.set_xlabel("t")
    ax.set_ylabel("contact angle [deg]")
    ax.set_title("Wall contact angle")
    if n1 + n2 == 0:
        ax.text(0.5, 0.5, "no wall contacts in this run",
                ha="center", va="center", transform=ax.transAxes)
    ax.legend(loc="best")
    return {"series": ["angle_min", "angle_max"], "n_points": n1 + n2}


def _sweep_trends(cols, ax):
    _require(cols, "eps", "int_abs_xi", "sup_xi")
    eps = cols["eps"]
    order = np.argsort(eps)
    for name, marker in (("int_abs_xi", "o"), ("sup_xi", "s")):
        vals = cols[name][order]
        keep = ~np.isnan(vals) & (vals > 0)
        ax.loglog(eps[order][keep], vals[keep], marker=marker,
                  label=name.replace("_", " "))
    ax.set_xlabel("eps")
    ax.set_ylabel("discrepancy at matched time")
    ax.set_title("Discrepancy trends across eps")
    ax.legend(loc="best")
    return {"series": ["int_abs_xi", "sup_xi"], "n_eps": int(eps.size)}


_BUILDERS = {
    "energy_decay": _energy_decay,
    "discrepancy": _discrepancy,
    "monotonicity": _monotonicity,
    "radius_vs_theory": _radius_vs_theory,
    "contact_angle": _contact_angle,
    "sweep_trends": _sweep_trends,
}


def make_figure(spec: FigureSpec) -> dict:
    """Render one figure kind from its CSV; returns plot metadata."""
    if spec.kind not in _BUILDERS:
        raise ValueError(f"unknown figure kind {spec.kind!r} "
                         f"(available: {', '.join(sorted(_BUILDERS))})")
    cols = read_table(spec.csv_path)
    fig, ax = plt.subplots(figsize=(6.0, 4.0), constrained_layout=True)
    try:
        meta = _BUILDERS[spec.kind](cols, ax)
        fig.savefig(spec.out_path, dpi=130)
    finally:
        plt.close(fig)
    meta["out_path"] = spec.out_path
    meta["kind"] = spec.kind
    return meta
