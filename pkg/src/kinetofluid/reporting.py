"""Figure rendering for run reports.

Every CLI report path writes PNG figures next to the delimited output so a
run directory is self-describing.  All rendering is offline (Agg).
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def plot_iteration_history(history, path):
    """Residual decay and the X-norm across map iterations."""
    its = [h[0] for h in history]
    res = [max(h[1], 1e-300) for h in history]
    xn = [h[2] for h in history]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.4))
    ax1.semilogy(its, res, "o-")
    ax1.set_xlabel("iteration")
    ax1.set_ylabel("L2(0,T;L2) residual")
    ax1.grid(True, alpha=0.3)
    ax2.plot(its, xn, "s-")
    ax2.set_xlabel("iteration")
    ax2.set_ylabel("X norm of iterate")
    ax2.grid(True, alpha=0.3)
    _save(fig, path)


def plot_norm_history(times, series: dict, path, logy=False, ylabel="norm"):
    """Generic time-series panel for diagnostic columns."""
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    for label, vals in series.items():
        if logy:
            ax.semilogy(times, np.maximum(vals, 1e-300), label=label)
        else:
            ax.plot(times, vals, label=label)
    ax.set_xlabel("t")
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    _save(fig, path)


def plot_contraction(sweep, ratios, bounds, path):
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    ax.loglog(sweep, ratios, "o-", label="measured ratio")
    ax.loglog(sweep, bounds, "s--", label="witnessed ceiling")
    ax.axhline(0.5, color="k", lw=0.8, ls=":", label="1/2")
    ax.set_xlabel("horizon T")
    ax.set_ylabel("contraction factor")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    _save(fig, path)


def plot_stability(report, path):
    fig, ax = plt.subplots(figsize=(5.6, 3.6))
    ax.semilogy(report.times, np.maximum(report.Q_upper, 1e-300), label="coupled Q(t)")
    ax.semilogy(report.times, np.maximum(report.rhs_proof, 1e-300), label="Gronwall envelope")
    ax.semilogy(report.times, np.maximum(report.rhs_display, 1e-300), "--", label="closed-form envelope")
    ax.set_xlabel("t")
    ax.set_ylabel("stability functional")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    _save(fig, path)


def plot_phase_density(pg, path, time=None):
    fig, ax = plt.subplots(figsize=(5.4, 3.8))
    im = ax.imshow(
        pg.f.T,
        origin="lower",
        aspect="auto",
        extent=[0.0, pg.L, -pg.V_max, pg.V_max],
        cmap="viridis",
    )
    ax.set_xlabel("x")
    ax.set_ylabel("v")
    if time is not None:
        ax.set_title(f"t = {time:.3g}")
    fig.colorbar(im, ax=ax, shrink=0.85)
    _save(fig, path)


def plot_smalldata(window_ends, tracked: dict, M_cap, path):
    fig, ax = plt.subplots(figsize=(5.6, 3.6))
    for label, vals in tracked.items():
        ax.semilogy(window_ends, np.maximum(vals, 1e-300), "o-", label=label)
    ax.axhline(M_cap, color="r", lw=1.0, ls="--", label="M cap")
    ax.set_xlabel("window end")
    ax.set_ylabel("tracked norm")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    _save(fig, path)
