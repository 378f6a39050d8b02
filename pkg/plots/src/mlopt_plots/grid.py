"""Reconstruction snapshot grids: rows = solvers, columns = iterations."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .pgm import read_pgm  # noqa: E402

DPI = 150


def plot_reconstruction_grid(groups: dict, out_path):
    """Render snapshot images grouped as ``{solver: {k: pgm_path}}``.

    Columns are the union of snapshot iterations (sorted); a missing
    snapshot leaves a labeled blank cell.  All images must share one
    shape; a mismatch is a hard error naming the offending file.
    """
    if not groups:
        raise ValueError("no snapshot groups to plot")
    cols = sorted({k for snaps in groups.values() for k in snaps})
    if not cols:
        raise ValueError("no snapshots found in any group")

    images = {}
    shape = None
    shape_src = None
    for solver, snaps in groups.items():
        for k, path in snaps.items():
            img = read_pgm(path)
            if shape is None:
                shape, shape_src = img.shape, path
            elif img.shape != shape:
                raise ValueError(
                    f"{path}: image shape {img.shape} does not match "
                    f"{shape} from {shape_src}")
            images[(solver, k)] = img

    rows = list(groups)
    fig, axes = plt.subplots(len(rows), len(cols),
                             figsize=(1.8 * len(cols), 1.9 * len(rows)),
                             squeeze=False)
    for i, solver in enumerate(rows):
        for j, k in enumerate(cols):
            ax = axes[i][j]
            ax.set_xticks([])
            ax.set_yticks([])
            img = images.get((solver, k))
            if img is None:
                ax.text(0.5, 0.5, f"missing\nk={k}", ha="center",
                        va="center", transform=ax.transAxes, fontsize=8)
            else:
                ax.imshow(img, cmap="gray", vmin=0, vmax=255,
                          interpolation="nearest")
            if i == 0:
                ax.set_title(f"k={k}", fontsize=9)
            if j == 0:
                ax.set_ylabel(solver, fontsize=9)
    fig.tight_layout()
    os.makedirs(os.path.dirname(os.path.abspath(out_path)), exist_ok=True)
    meta = {".pdf": {"CreationDate": None}, ".svg": {"Date": None}}.get(
        os.path.splitext(str(out_path))[1])
    kwargs = {"dpi": DPI}
    if meta is not None:
        kwargs["metadata"] = meta
    fig.savefig(out_path, **kwargs)
    plt.close(fig)
    return str(out_path)
