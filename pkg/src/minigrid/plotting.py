"""NPV heatmaps rendered to image files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .sweep import INFEASIBLE_CONNECTION, NPVGrid  # noqa: E402


def plot_npv_grid(grid: NPVGrid, path: str | Path, title: str | None = None) -> Path:
    """Heatmap of NPV (k USD) over cable size and distance.

    Decentralized cells are left white; cells where no connected design meets
    the voltage limits are hatched.
    """
    d, c = grid.spec.distances_km, grid.spec.cable_sizes
    npv = grid.npv / 1000.0
    shown = np.ma.masked_where(~grid.centralized() | ~np.isfinite(npv), npv)
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    vmax = float(shown.max()) if shown.count() else 1.0
    im = ax.imshow(shown, origin="lower", aspect="auto", cmap="viridis", vmin=0.0, vmax=vmax,
                   extent=(-0.5, len(c) - 0.5, -0.5, len(d) - 0.5))
    infeasible = grid.labels == INFEASIBLE_CONNECTION
    for i, j in zip(*np.nonzero(infeasible)):
        ax.add_patch(plt.Rectangle((j - 0.5, i - 0.5), 1, 1, fill=False, hatch="///",
                                   edgecolor="0.6", linewidth=0))
    ax.set_xticks(range(len(c)), [f"{v:g}" for v in c])
    ax.set_yticks(range(len(d)), [f"{v:g}" for v in d])
    ax.set_xlabel("cable size (mm$^2$)")
    ax.set_ylabel("distance between communities (km)")
    ax.set_title(title or f"centralization NPV, PV cost x{grid.spec.pv_cost_scale:g}"
                 + ("" if grid.spec.voltage_constraints_enabled else ", no voltage limits"))
    fig.colorbar(im, ax=ax, label="NPV, discounted (k USD)")
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
