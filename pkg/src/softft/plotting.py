"""Report figures written next to the CSV/JSON outputs.

Uses the object-oriented Matplotlib API with the Agg canvas so nothing
touches pyplot's global state.
"""

from __future__ import annotations

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .magnetics import AXES

WRENCH_LABELS = ("$F_x$ [N]", "$F_y$ [N]", "$F_z$ [N]", "$M_x$ [Nm]", "$M_y$ [Nm]", "$M_z$ [Nm]")


def _new(ncols: int, nrows: int = 1, width: float = 3.2, height: float = 2.8) -> Figure:
    fig = Figure(figsize=(width * ncols, height * nrows), dpi=110)
    FigureCanvasAgg(fig)
    return fig


def plot_sweep(sweep, fit, path, stage_origin_mm=(0.0, 0.0, 0.0)) -> None:
    """Position against flux per axis with the fitted line."""
    fig = _new(3)
    axes = fig.subplots(1, 3)
    for k, (ax, axis) in enumerate(zip(axes, AXES)):
        pts = [sp for sp in sweep if sp.axis == axis]
        b = np.array([sp.flux[k] for sp in pts])
        p = np.array([sp.commanded_mm for sp in pts]) + stage_origin_mm[k]
        ax.plot(b, p, "o", ms=4, label="sweep")
        bb = np.linspace(b.min(), b.max(), 50)
        ax.plot(bb, fit.map.slopes[k] * bb + fit.map.offset[k], "-", lw=1.2,
                label=f"fit, $R^2$={fit.r_squared[k]:.4f}")
        ax.set_xlabel(f"$b_{axis}$ [$\\mu$T]")
        ax.set_ylabel(f"{axis} [mm]")
        ax.legend(fontsize=7, frameon=False)
    fig.tight_layout()
    fig.savefig(path)


def plot_validation(estimated, truth, path) -> None:
    """Estimated vs applied wrench, one panel per axis."""
    estimated = np.asarray(estimated)
    truth = np.asarray(truth)
    fig = _new(3, 2)
    axes = fig.subplots(2, 3).ravel()
    idx = np.arange(len(truth))
    for k, ax in enumerate(axes):
        ax.plot(idx, truth[:, k], "k-", lw=1.0, label="applied")
        ax.plot(idx, estimated[:, k], "o", ms=3, mfc="none", label="estimated")
        ax.set_ylabel(WRENCH_LABELS[k])
        ax.set_xlabel("pose")
    axes[0].legend(fontsize=7, frameon=False)
    fig.tight_layout()
    fig.savefig(path)


def plot_singular_values(KA, path) -> None:
    """Singular values of the force and torque row blocks of KA."""
    KA = np.asarray(KA)
    sf = np.linalg.svd(KA[:3], compute_uv=False)
    st = np.linalg.svd(KA[3:], compute_uv=False)
    fig = _new(2)
    ax_f, ax_t = fig.subplots(1, 2)
    ax_f.bar(range(1, 4), sf)
    ax_f.set_title(f"force rows, isotropy {sf[-1] / sf[0]:.2f}" if sf[0] else "force rows")
    ax_f.set_ylabel("N/$\\mu$T")
    ax_t.bar(range(1, 4), st, color="tab:orange")
    ax_t.set_title(f"torque rows, isotropy {st[-1] / st[0]:.2f}" if st[0] else "torque rows")
    ax_t.set_ylabel("Nm/$\\mu$T")
    for ax in (ax_f, ax_t):
        ax.set_xlabel("index")
        ax.set_xticks(range(1, 4))
    fig.tight_layout()
    fig.savefig(path)
