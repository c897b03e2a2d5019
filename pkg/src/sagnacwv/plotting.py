"""Figures for sweep results: time shift and recovered omega0 versus phi."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .harness import SweepRow, rows_by_mode  # noqa: E402
from .signal_model import Mode, predicted_time_shift  # noqa: E402

STYLE = {
    Mode.WVA: dict(color="tab:blue", marker="o", label="WVA"),
    Mode.ABWV: dict(color="tab:red", marker="s", label="ABWV"),
}

# fixed metadata keeps SVG output byte-stable between runs
_SVG_META = {"Date": None, "Creator": None}


def _nan(v):
    return np.nan if v is None else v


def plot_time_shift(rows: Sequence[SweepRow], tau: float, ax=None):
    """Log-log |delta_t| vs phi with per-pulse std error bars and theory lines."""
    if ax is None:
        _, ax = plt.subplots(figsize=(5.5, 4.0))
    for mode, rs in rows_by_mode(rows).items():
        rs = [r for r in rs if r.ok]
        if not rs:
            continue
        phi = np.array([r.phi_set for r in rs])
        dt = np.abs([r.delta_t for r in rs])
        err = np.array([_nan(r.delta_t_std) for r in rs])
        st = STYLE[mode]
        ax.errorbar(phi * 1e6, dt * 1e3, yerr=err * 1e3, ls="none", capsize=2,
                    color=st["color"], marker=st["marker"], mfc="none", label=st["label"])
        w0 = rs[0].omega0_true
        fine = np.geomspace(phi.min(), phi.max(), 200)
        theory = [predicted_time_shift(mode, w0, tau, p) for p in fine]
        ax.plot(fine * 1e6, np.abs(theory) * 1e3, color=st["color"], lw=1)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(r"$\phi$ ($\mu$rad)")
    ax.set_ylabel(r"$|\Delta t|$ (ms)")
    if ax.get_legend_handles_labels()[0]:
        ax.legend(frameon=False)
    return ax


def plot_omega(rows: Sequence[SweepRow], ax=None):
    if ax is None:
        _, ax = plt.subplots(figsize=(5.5, 4.0))
    w0 = None
    for mode, rs in rows_by_mode(rows).items():
        rs = [r for r in rs if r.ok]
        if not rs:
            continue
        w0 = rs[0].omega0_true
        st = STYLE[mode]
        ax.errorbar([r.phi_set * 1e6 for r in rs], [r.omega0_hat * 1e9 for r in rs],
                    yerr=[_nan(r.omega0_hat_std) * 1e9 for r in rs], ls="none", capsize=2,
                    color=st["color"], marker=st["marker"], mfc="none", label=st["label"])
    if w0 is not None:
        ax.axhline(w0 * 1e9, color="k", lw=1)
    ax.set_xscale("log")
    ax.set_xlabel(r"$\phi$ ($\mu$rad)")
    ax.set_ylabel(r"$\hat\omega_0$ (nrad/s)")
    if ax.get_legend_handles_labels()[0]:
        ax.legend(frameon=False)
    return ax


def save_figures(rows: Sequence[SweepRow], tau: float, out_dir, svg: bool = False) -> list[Path]:
    """Write time-shift and omega0 figures as PNG (and SVG when asked)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    plt.rcParams["svg.hashsalt"] = "sagnacwv"
    for name, draw in (("time_shift", lambda ax: plot_time_shift(rows, tau, ax)),
                       ("omega0", lambda ax: plot_omega(rows, ax))):
        fig, ax = plt.subplots(figsize=(5.5, 4.0))
        draw(ax)
        fig.tight_layout()
        png = out_dir / f"{name}.png"
        fig.savefig(png, dpi=150)
        written.append(png)
        if svg:
            path = out_dir / f"{name}.svg"
            fig.savefig(path, metadata=_SVG_META)
            written.append(path)
        plt.close(fig)
    return written
