"""Static figures: density heat maps and training cost curves (Agg backend)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed metadata keeps repeated runs byte-identical
_META = {"Software": None}


def heatmap(values: np.ndarray, grid, path, title: str = "", label: str = "density (veh/ft)",
            vmin=None, vmax=None, cmap: str = "jet") -> None:
    """Space on the vertical axis, time on the horizontal, as in the usual x-t diagram."""
    fig, ax = plt.subplots(figsize=(6, 3.6))
    im = ax.imshow(values, origin="lower", aspect="auto", cmap=cmap, vmin=vmin, vmax=vmax,
                   extent=(grid.t0, grid.t1, grid.x0, grid.x1))
    ax.set_xlabel("time (s)")
    ax.set_ylabel("position (ft)")
    if title:
        ax.set_title(title)
    fig.colorbar(im, ax=ax, label=label)
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata=_META)
    plt.close(fig)


def cost_curves(report, path) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.4))
    for name in ("J", "J_DL", "J_PHY"):
        vals = np.asarray(getattr(report, name))
        ax.semilogy(report.epochs, np.where(vals > 0, vals, np.nan), label=name)
    ax.set_xlabel("epoch")
    ax.set_ylabel("cost")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata=_META)
    plt.close(fig)
