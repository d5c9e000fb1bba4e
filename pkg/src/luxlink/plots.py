"""File-based figure rendering: heatmap rasters and convergence curves.

Figures are written as PNG with stripped metadata so re-running a
deterministic experiment reproduces the output tree byte for byte.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_PNG_META = {"Software": None}


def save_heatmap_png(values: np.ndarray, n_rows: int, n_cols: int,
                     path: str | Path, title: str = "",
                     extent: tuple[float, float, float, float] | None = None,
                     cbar_label: str = "") -> str:
    """Render a row-major per-point map as a colored raster.

    Row 0 (nearest the facade) is drawn at the bottom edge.
    """
    values = np.asarray(values, dtype=float).reshape(n_rows, n_cols)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 3.2))
    im = ax.imshow(values, origin="lower", aspect="auto", extent=extent,
                   cmap="viridis")
    fig.colorbar(im, ax=ax, label=cbar_label)
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata=_PNG_META)
    plt.close(fig)
    return str(path)


def save_convergence_png(curves: dict[str, list[tuple[np.ndarray, np.ndarray]]],
                         path: str | Path, title: str = "",
                         ylabel: str = "best objective") -> str:
    """Plot best-so-far curves; one line per (label, run) with a mean overlay.

    ``curves`` maps a label to a list of (step, best_objective) pairs.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    for ci, (label, runs) in enumerate(sorted(curves.items())):
        color = colors[ci % len(colors)]
        for steps, best in runs:
            ax.plot(steps, best, color=color, alpha=0.25, linewidth=0.8)
        # mean over runs on the common step range
        if runs:
            max_step = max(int(s[-1]) for s, _ in runs if len(s))
            grid = np.arange(0, max_step + 1)
            stacked = []
            for steps, best in runs:
                stacked.append(np.interp(grid, steps, best))
            ax.plot(grid, np.mean(stacked, axis=0), color=color, linewidth=1.8,
                    label=label)
    ax.set_xlabel("step")
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(True, linestyle=":", linewidth=0.7)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata=_PNG_META)
    plt.close(fig)
    return str(path)
