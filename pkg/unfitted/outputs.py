"""
💾 Outputs
==========
CSV tables and SVG plots for a StudyReport.

- ``<name>.csv``          the rows, without wall-clock columns (byte-stable)
- ``<name>_timings.csv``  assemble/solve seconds per row
- ``<name>_<table>.csv``  derived tables (slopes, ratios, joined)
- ``<name>.svg``          the study plot
"""

from __future__ import annotations

import logging
from pathlib import Path

import matplotlib
import numpy as np
import pandas as pd
from matplotlib.figure import Figure

from unfitted.errors import InvalidArgumentError, OutputError

# ==========================================
# 🔧 CONFIGURATION
# ==========================================
FLOAT_FORMAT = "%.17g"
FORMATS = ("csv", "svg")
TIMING_COLUMNS = ["assemble_time", "solve_time"]
KEY_COLUMNS = ["scheme", "n", "theta0", "gamma", "sigma", "gamma_div", "gamma_1", "kappa", "graddiv_scaling"]
NORM_LABELS = {
    "l2_rel": "L² error",
    "h1_rel": "H¹ error",
    "l2_meanfree_rel": "mean-free L² error",
}
REFERENCE_RATES = (1, 2)

matplotlib.rcParams["svg.hashsalt"] = "unfitted"
matplotlib.rcParams["svg.fonttype"] = "none"


def _write_csv(frame: pd.DataFrame, path: Path) -> Path:
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logging.info(f"✅ Saved {len(frame)} row(s) → {path}")
    return path


# ==========================================
# 📈 Plots
# ==========================================

def _reference_triangle(ax, h: np.ndarray, errors: np.ndarray, rate: int) -> None:
    """Small slope triangle below the data, anchored at the finest level."""
    h0, h1 = h.min(), h.min() * 2.0
    e0 = errors.min() * 0.5
    e1 = e0 * (h1 / h0) ** rate
    ax.plot([h0, h1, h1, h0], [e0, e0, e1, e0], color="0.4", linewidth=0.8, gid=f"slope-{rate}")
    ax.text(h1 * 1.05, np.sqrt(e0 * e1), str(rate), fontsize=8, color="0.3")


def _convergence_figure(rows: pd.DataFrame, title: str) -> Figure:
    fig = Figure(figsize=(6.0, 4.5))
    ax = fig.add_subplot(1, 1, 1)
    ok = rows[rows["status"] == "ok"]
    first_theta = ok["theta0"].min() if len(ok) else 0.0
    data = ok[ok["theta0"] == first_theta]
    for (scheme, scaling), group in data.groupby(["scheme", "graddiv_scaling"], sort=True):
        group = group.drop_duplicates("n").sort_values("n")
        for column, label in NORM_LABELS.items():
            values = group[column].to_numpy()
            if not np.all(values > 0):
                continue
            ax.loglog(group["h"], values, marker="o", label=f"{scheme} {label}", gid=f"norm-{scheme}-{scaling}-{column}")
    if len(data):
        positive = data[list(NORM_LABELS)].to_numpy()
        positive = positive[positive > 0]
        if len(positive):
            for rate in REFERENCE_RATES:
                _reference_triangle(ax, data["h"].to_numpy(), positive, rate)
    ax.set_xlabel("h")
    ax.set_ylabel("relative error")
    ax.set_title(title)
    ax.grid(True, which="both", linewidth=0.3)
    if ax.lines:
        ax.legend(fontsize=7)
    return fig


def _rotation_figure(rows: pd.DataFrame, title: str) -> Figure:
    fig = Figure(figsize=(6.0, 4.5))
    ax = fig.add_subplot(1, 1, 1)
    ok = rows[rows["status"] == "ok"]
    for (scheme, n), group in ok.groupby(["scheme", "n"], sort=True):
        group = group.sort_values("theta0")
        for column in ("l2_rel", "h1_rel"):
            ax.semilogy(group["theta0"], group[column], label=f"{scheme} n={n} {NORM_LABELS[column]}", gid=f"angle-{scheme}-{n}-{column}")
    ax.set_xlabel("θ₀")
    ax.set_ylabel("relative error")
    ax.set_title(title)
    ax.grid(True, which="both", linewidth=0.3)
    if ax.lines:
        ax.legend(fontsize=7)
    return fig


def _param_figure(rows: pd.DataFrame, title: str) -> Figure:
    fig = Figure(figsize=(6.0, 4.5))
    ax = fig.add_subplot(1, 1, 1)
    ok = rows[(rows["status"] == "ok") & (rows["sigma"] > 0)]
    for (n, gamma, scaling), group in ok.groupby(["n", "gamma", "graddiv_scaling"], sort=True):
        group = group.sort_values("sigma")
        ax.loglog(group["sigma"], group["h1_rel"], marker="o", label=f"n={n} γ={gamma:g} {scaling}", gid=f"param-{n}-{gamma:g}-{scaling}")
    ax.set_xlabel("σ")
    ax.set_ylabel("relative H¹ error")
    ax.set_title(title)
    ax.grid(True, which="both", linewidth=0.3)
    if ax.lines:
        ax.legend(fontsize=7)
    return fig


def _figure_for(report) -> Figure:
    title = report.study
    if report.study == "rotate-sweep":
        return _rotation_figure(report.rows, title)
    if report.study == "param-sweep":
        return _param_figure(report.rows, title)
    return _convergence_figure(report.rows, title)


# ==========================================
# 💾 Emit
# ==========================================

def emit_outputs(report, out_dir, name: str | None = None, formats=FORMATS) -> list[Path]:
    """Write the report's CSV files and plot; nothing is written for an empty report."""
    if report.empty:
        raise InvalidArgumentError(f"❌ Report '{report.study}' is empty, nothing to emit")
    unknown = [f for f in formats if f not in FORMATS]
    if unknown:
        raise InvalidArgumentError(f"❌ Unknown output format(s): {', '.join(unknown)}")

    out_dir = Path(out_dir)
    base = name or report.study
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        if "csv" in formats:
            main = report.rows.drop(columns=[c for c in TIMING_COLUMNS if c in report.rows.columns])
            written.append(_write_csv(main, out_dir / f"{base}.csv"))
            timing_columns = [c for c in TIMING_COLUMNS if c in report.rows.columns]
            if timing_columns:
                written.append(_write_csv(report.rows[KEY_COLUMNS + timing_columns], out_dir / f"{base}_timings.csv"))
            for table_name, table in sorted(report.tables.items()):
                written.append(_write_csv(table, out_dir / f"{base}_{table_name}.csv"))
        if "svg" in formats:
            path = out_dir / f"{base}.svg"
            _figure_for(report).savefig(path, format="svg", metadata={"Date": None})
            logging.info(f"✅ Saved plot → {path}")
            written.append(path)
    except OSError as e:
        raise OutputError(f"❌ Cannot write outputs to {out_dir}: {e}") from e
    return written
