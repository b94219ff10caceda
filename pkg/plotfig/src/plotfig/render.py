"""Figure families over the documented evaluation and simulation CSVs."""

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["FigureSpec", "render", "FAMILIES"]

# evaluation CSV schema (one row per power/memory/source cell)
EVAL_COLUMNS = (
    "power_dbm", "memory", "source", "snr_db", "delta_r", "delta_phi",
    "mean_phase_rad", "rel_error", "kernel_count", "mults_per_symbol",
)

# simulation CSV schema (one row per symbol)
SIM_COLUMNS = (
    "power_dbm", "seed", "index",
    "a_x_re", "a_x_im", "a_y_re", "a_y_im",
    "r_x_re", "r_x_im", "r_y_re", "r_y_im",
)

# threshold below which the evaluation pipeline calls a model precise
EPSILON_PRECISE = 0.11


@dataclass(frozen=True)
class FigureSpec:
    """One figure request: family, inputs, output, and series filters."""

    family: str
    csv_paths: tuple
    out_path: str
    xlim: tuple | None = None
    ylim: tuple | None = None
    memories: tuple | None = None
    sources: tuple | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(
                f"unknown family {self.family!r}; expected one of {sorted(FAMILIES)}"
            )
        if not self.csv_paths:
            raise ValueError("at least one input CSV is required")
        object.__setattr__(self, "csv_paths", tuple(str(p) for p in self.csv_paths))


def _read_rows(path, required):
    with open(path) as f:
        rows = [r for r in csv.reader(f) if r and not r[0].startswith("#")]
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    header, data = rows[0], rows[1:]
    missing = [c for c in required if c not in header]
    if missing:
        raise ValueError(f"{path}: missing columns {missing}")
    idx = {c: header.index(c) for c in header}
    return [{c: row[idx[c]] for c in header} for row in data]


def _load_eval(spec):
    rows = []
    for path in spec.csv_paths:
        rows.extend(_read_rows(path, EVAL_COLUMNS))
    for r in rows:
        r["power_dbm"] = float(r["power_dbm"])
        r["memory"] = int(r["memory"])
        for c in ("snr_db", "delta_r", "delta_phi", "mean_phase_rad",
                  "rel_error", "mults_per_symbol"):
            r[c] = float(r[c])
    if spec.sources is not None:
        rows = [r for r in rows if r["source"] in spec.sources]
    if spec.memories is not None:
        rows = [r for r in rows if r["memory"] in spec.memories or r["source"] == "ssfm"]
    if not rows:
        raise ValueError("no evaluation rows left after filtering")
    return rows


def _series(rows):
    """Group rows into one series per (source, memory), power-sorted."""
    groups = {}
    for r in rows:
        groups.setdefault((r["source"], r["memory"]), []).append(r)
    out = {}
    for key in sorted(groups, key=lambda k: (k[0], k[1])):
        out[key] = sorted(groups[key], key=lambda r: r["power_dbm"])
    return out


def _label(source, memory):
    return source if source == "ssfm" else f"{source} M={memory}"


def _new_axes(n_rows=1):
    fig, axes = plt.subplots(n_rows, 1, figsize=(6.4, 3.2 * n_rows), squeeze=False)
    return fig, axes[:, 0]


def _lines_vs_power(spec, column, ylabel, hline=None):
    rows = _load_eval(spec)
    fig, (ax,) = _new_axes()
    for (source, memory), series in _series(rows).items():
        ax.plot(
            [r["power_dbm"] for r in series],
            [r[column] for r in series],
            marker="o",
            label=_label(source, memory),
        )
    if hline is not None:
        ax.axhline(hline, color="0.4", linestyle="--", linewidth=1)
    ax.set_xlabel("launch power [dBm]")
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    return fig


def _fig_snr(spec):
    return _lines_vs_power(spec, "snr_db", "SNR [dB]")


def _fig_eps_power(spec):
    rows = [r for r in _load_eval(spec) if r["source"] != "ssfm"]
    if not rows:
        raise ValueError("no model rows to plot")
    fig, (ax,) = _new_axes()
    for (source, memory), series in _series(rows).items():
        ax.semilogy(
            [r["power_dbm"] for r in series],
            [max(r["rel_error"], 1e-12) for r in series],
            marker="o",
            label=_label(source, memory),
        )
    ax.axhline(EPSILON_PRECISE, color="0.4", linestyle="--", linewidth=1)
    ax.set_xlabel("launch power [dBm]")
    ax.set_ylabel("relative error")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    return fig


def _fig_dr_dphi(spec):
    rows = _load_eval(spec)
    fig, axes = _new_axes(2)
    for ax, column, ylabel in zip(
        axes, ("delta_r", "delta_phi"), ("radii difference", "phase difference")
    ):
        for (source, memory), series in _series(rows).items():
            ax.plot(
                [r["power_dbm"] for r in series],
                [r[column] for r in series],
                marker="o",
                label=_label(source, memory),
            )
        ax.axhline(0.0, color="0.6", linewidth=0.8)
        ax.set_ylabel(ylabel)
        ax.grid(True, alpha=0.3)
    axes[0].legend(fontsize=8)
    axes[1].set_xlabel("launch power [dBm]")
    return fig


def _fig_eps_complexity(spec):
    rows = [r for r in _load_eval(spec) if r["source"] != "ssfm"]
    if not rows:
        raise ValueError("no model rows to plot")
    fig, (ax,) = _new_axes()
    groups = {}
    for r in rows:
        groups.setdefault((r["source"], r["power_dbm"]), []).append(r)
    for (source, power) in sorted(groups):
        series = sorted(groups[(source, power)], key=lambda r: r["mults_per_symbol"])
        ax.loglog(
            [r["mults_per_symbol"] for r in series],
            [max(r["rel_error"], 1e-12) for r in series],
            marker="o",
            label=f"{source} P={power:g} dBm",
        )
    ax.axhline(EPSILON_PRECISE, color="0.4", linestyle="--", linewidth=1)
    ax.set_xlabel("complex multiplications per symbol")
    ax.set_ylabel("relative error")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3, which="both")
    return fig


def _fig_trajectories(spec):
    """Conditional-mean drift per model as memory grows: path in the
    (phase difference, radii difference) plane, one line per source."""
    rows = _load_eval(spec)
    fig, (ax,) = _new_axes()
    by_source = {}
    for r in rows:
        if r["source"] == "ssfm":
            ax.plot(
                r["delta_phi"], r["delta_r"], marker="*", markersize=12,
                linestyle="none", color="black", label="ssfm",
            )
        else:
            by_source.setdefault(r["source"], []).append(r)
    if not by_source:
        raise ValueError("no model rows to plot")
    for source in sorted(by_source):
        series = sorted(by_source[source], key=lambda r: r["memory"])
        ax.plot(
            [r["delta_phi"] for r in series],
            [r["delta_r"] for r in series],
            marker="o",
            label=source,
        )
        for r in series:
            ax.annotate(f"M={r['memory']}", (r["delta_phi"], r["delta_r"]), fontsize=7)
    ax.set_xlabel("phase difference")
    ax.set_ylabel("radii difference")
    handles, labels = ax.get_legend_handles_labels()
    seen = dict(zip(labels, handles))
    ax.legend(seen.values(), seen.keys(), fontsize=8)
    ax.grid(True, alpha=0.3)
    return fig


def _fig_constellation(spec):
    """Received-symbol cloud colored by transmitted point, with rings at
    the magnitudes of the empirical conditional means."""
    rows = []
    for path in spec.csv_paths:
        rows.extend(_read_rows(path, SIM_COLUMNS))
    a = np.array([float(r["a_x_re"]) + 1j * float(r["a_x_im"]) for r in rows])
    rx = np.array([float(r["r_x_re"]) + 1j * float(r["r_x_im"]) for r in rows])
    if a.size == 0:
        raise ValueError("no symbols to plot")
    points, labels = np.unique(np.round(a, 9), return_inverse=True)
    fig, (ax,) = _new_axes()
    fig.set_size_inches(5.2, 5.2)
    ax.scatter(rx.real, rx.imag, c=labels, s=2, cmap="tab20", linewidths=0)
    theta = np.linspace(0.0, 2 * np.pi, 256)
    for radius in sorted({round(abs(np.mean(rx[labels == i])), 12) for i in range(points.size)}):
        ax.plot(radius * np.cos(theta), radius * np.sin(theta), color="0.3", linewidth=0.8)
    ax.set_xlabel("in-phase")
    ax.set_ylabel("quadrature")
    ax.set_aspect("equal")
    return fig


FAMILIES = {
    "snr-vs-power": _fig_snr,
    "eps-vs-power": _fig_eps_power,
    "eps-vs-complexity": _fig_eps_complexity,
    "dr-dphi-vs-power": _fig_dr_dphi,
    "mean-trajectories": _fig_trajectories,
    "constellation": _fig_constellation,
}


def render(spec):
    """Render one figure; returns the output path."""
    fig = FAMILIES[spec.family](spec)
    ax = fig.axes[0]
    if spec.xlim is not None:
        ax.set_xlim(*spec.xlim)
    if spec.ylim is not None:
        ax.set_ylim(*spec.ylim)
    out = Path(spec.out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=120, metadata={"Software": "plotfig"})
    plt.close(fig)
    return out
