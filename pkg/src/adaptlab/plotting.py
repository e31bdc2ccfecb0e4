"""Figure rendering for reproduction runs.

matplotlib is imported lazily with the Agg backend so the numerical modules
never depend on it.  Every function writes a PNG and returns its path.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .integrate import Trajectory
from .regions import DomainError, Surface, surface_point
from .systems import OrmScalar


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _surface_curves(sys, phi_lo: float):
    curves = {}
    for s in (Surface.S1, Surface.S2, Surface.S3, Surface.S5):
        pts = []
        for phi in np.linspace(phi_lo, 0.0, 600, endpoint=False):
            try:
                pts.append(surface_point(sys, s, phi))
            except DomainError:
                continue
        if pts:
            curves[s] = np.array(pts)
    return curves


def phase_portrait(sys, trajectories: dict[str, Trajectory], path, title: str = "") -> Path:
    """``(phi, e)`` plane with the region boundaries and each trajectory."""
    plt = _pyplot()
    e_col, phi_col = (0, 1) if isinstance(sys, OrmScalar) else (1, 2)
    phi_lo = min([-12.0] + [float(tr.states[:, phi_col].min()) for tr in trajectories.values()])
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    styles = {Surface.S1: "k-", Surface.S2: "k--", Surface.S3: "k-.", Surface.S5: "r:"}
    for s, pts in _surface_curves(sys, phi_lo).items():
        ax.plot(pts[:, phi_col], pts[:, e_col], styles[s], lw=1.0, label=s.value)
    ang = np.linspace(0.0, 2.0 * np.pi, 400)
    ax.plot(np.sqrt(sys.gamma) * sys.xbar * np.sin(ang), sys.xbar * np.cos(ang), color="0.75", ls="--", lw=0.8, label="V level")
    for label, tr in trajectories.items():
        ax.plot(tr.states[:, phi_col], tr.states[:, e_col], lw=1.2, label=label)
        ax.plot(tr.states[0, phi_col], tr.states[0, e_col], "o", ms=3, color="k")
    ax.set_xlabel("phi")
    ax.set_ylabel("e")
    ax.set_ylim(-sys.xbar - 1.0, sys.xbar + 1.0)
    ax.set_title(title)
    ax.legend(fontsize=7, loc="upper left", ncol=2)
    ax.grid(True, lw=0.3)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def time_series(series: dict[str, tuple[np.ndarray, np.ndarray]], names: list[str], path, title: str = "") -> Path:
    """One panel per column; ``series`` maps a label to ``(times, columns)``."""
    plt = _pyplot()
    n = len(names)
    fig, axes = plt.subplots(n, 1, figsize=(6.4, 1.6 * n + 0.8), sharex=True, squeeze=False)
    for label, (t, cols) in series.items():
        for i, ax in enumerate(axes[:, 0]):
            ax.plot(t, cols[:, i], lw=1.0, label=label)
    for i, ax in enumerate(axes[:, 0]):
        ax.set_ylabel(names[i])
        ax.grid(True, lw=0.3)
    axes[0, 0].legend(fontsize=7)
    axes[-1, 0].set_xlabel("t")
    axes[0, 0].set_title(title)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def region_map(rows, path, title: str = "") -> Path:
    """Region labels from ``regions.region_grid`` drawn as a colour map."""
    plt = _pyplot()
    codes = {"M1": 1, "M2": 2, "M3": 3, "M0_boundary": 4, "Outside": 0}
    phis = np.array([r[0] for r in rows])
    es = np.array([r[1] for r in rows])
    lab = np.array([codes[r[-1]] for r in rows])
    n_phi = np.unique(phis).size
    grid = lab.reshape(n_phi, -1).T
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    ax.imshow(
        grid,
        origin="lower",
        aspect="auto",
        extent=(phis.min(), phis.max(), es.min(), es.max()),
        cmap="Pastel1",
        vmin=0,
        vmax=8,
        interpolation="nearest",
    )
    for name, code in codes.items():
        if np.any(lab == code):
            k = np.flatnonzero(lab == code)[len(np.flatnonzero(lab == code)) // 2]
            ax.text(phis[k], es[k], name, fontsize=7, ha="center")
    ax.set_xlabel("phi")
    ax.set_ylabel("e")
    ax.set_title(title)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def sticking_plot(diagnostics: dict, path) -> Path:
    """``|phi'|`` at the mid-band probes on log-log axes."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5.6, 4.0))
    for label, d in diagnostics.items():
        ax.loglog(-d.phi0_values, d.phi_dot_abs, "o-", label=label)
    ax.set_xlabel("-phi0")
    ax.set_ylabel("|phi'| at probe")
    ax.legend()
    ax.grid(True, which="both", lw=0.3)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path
