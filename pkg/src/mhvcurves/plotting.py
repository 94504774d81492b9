"""Static PNG renderings of density grids (Agg backend, no display needed)."""

from __future__ import annotations

import os
import tempfile

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .realscatter import DensityGrid  # noqa: E402


def _save(fig, path: str) -> None:
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(suffix=".png", dir=folder)
    os.close(fd)
    try:
        fig.savefig(tmp, format="png", dpi=120, metadata={"Software": None})
        os.replace(tmp, path)
    finally:
        plt.close(fig)
        if os.path.exists(tmp):
            os.unlink(tmp)


def render_density(grid: DensityGrid, path: str, title: str | None = None) -> None:
    """Line plot for genus 1, heatmap over the angle torus for genus 2.

    Axes are in angle 2*atan(lambda) so the whole projective line fits; ticks show lambda.
    """
    fig, ax = plt.subplots(figsize=(6, 5))
    res = grid.resolution
    phi = -np.pi + (np.arange(res) + 0.5) * 2 * np.pi / res
    ticks = np.array([-np.pi / 2, 0.0, np.pi / 2])
    labels = ["-1", "0", "1"]
    if len(grid.lambdas) == 1:
        ax.plot(phi, grid.rho, lw=1.2)
        ax.set_xlabel("lambda")
        ax.set_ylabel("rho")
        ax.set_xticks(ticks, labels)
    else:
        img = ax.imshow(
            grid.rho.T,
            origin="lower",
            extent=(-np.pi, np.pi, -np.pi, np.pi),
            cmap="magma",
            interpolation="nearest",
        )
        fig.colorbar(img, ax=ax, label="rho")
        ax.set_xlabel("lambda1")
        ax.set_ylabel("lambda2")
        ax.set_xticks(ticks, labels)
        ax.set_yticks(ticks, labels)
    ax.set_title(title or f"component {grid.component}")
    fig.tight_layout()
    _save(fig, path)
