"""Convergence figures: relative objective vs iteration and vs wall time."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .traces import TraceFrame, relative_objective  # noqa: E402

DPI = 150

# metadata overrides that strip timestamps so repeated renders are
# byte-stable for identical inputs
_NO_DATE = {".png": None,
            ".pdf": {"CreationDate": None},
            ".svg": {"Date": None}}


def _save(fig, path):
    ext = os.path.splitext(path)[1]
    kwargs = {"dpi": DPI}
    meta = _NO_DATE.get(ext)
    if meta is not None:
        kwargs["metadata"] = meta
    fig.savefig(path, **kwargs)


def plot_convergence(traces: list[TraceFrame], out_dir,
                     basename: str = "convergence",
                     skip_wall: tuple = (), formats: tuple = ("png", "pdf")):
    """Two-panel figure: log relative objective against iteration count
    (left) and against wall seconds (right), one curve per solver.

    ``skip_wall`` labels are left off the wall-time panel (externally
    timed baselines are not comparable there).  Returns the written paths.
    """
    curves = relative_objective(traces)
    os.makedirs(out_dir, exist_ok=True)

    fig, (ax_iter, ax_wall) = plt.subplots(1, 2, figsize=(10.0, 4.0))
    for label, (ks, walls, rel) in curves.items():
        ax_iter.semilogy(ks, rel, label=label)
        if label not in skip_wall:
            ax_wall.semilogy(walls, rel, label=label)
    ax_iter.set_xlabel("iteration")
    ax_iter.set_ylabel("relative objective")
    ax_wall.set_xlabel("wall time [s]")
    for ax in (ax_iter, ax_wall):
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
    fig.tight_layout()

    paths = []
    for fmt in formats:
        path = os.path.join(out_dir, f"{basename}.{fmt}")
        _save(fig, path)
        paths.append(path)
    plt.close(fig)
    return paths
