"""Matplotlib figures for the report command, written as SVG files.

SVG output is made reproducible: no creation date and a fixed hash salt,
so identical inputs give byte-identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .setrep import VoxelSet  # noqa: E402

plt.rcParams["svg.hashsalt"] = "markovifs"
plt.rcParams["svg.fonttype"] = "none"

_AXES = "xyz"


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return str(path)


def plot_set(A: VoxelSet, path, title: str = "", pieces=None):
    """Occupancy image (2D) or the three axis projections (3D)."""
    if A.dim == 2:
        fig, ax = plt.subplots(figsize=(5, 5))
        img = A.occupancy.astype(float)
        if pieces:
            # colour cells by the first piece that holds them
            img = np.zeros(A.shape)
            for k, p in enumerate(pieces, 1):
                img[(img == 0) & p.occupancy] = k
            img = np.ma.masked_equal(img, 0)
        else:
            img = np.ma.masked_equal(img, 0)
        ax.imshow(img.T, origin="lower", extent=(A.lo[0], A.hi[0], A.lo[1], A.hi[1]),
                  cmap="tab10" if pieces else "Greys", vmin=0.5 if pieces else 0, vmax=10.5 if pieces else 1,
                  interpolation="nearest")
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        ax.set_aspect("equal")
    else:
        fig, axes = plt.subplots(1, 3, figsize=(12, 4))
        for ax, drop in zip(axes, (2, 1, 0)):
            keep = [k for k in range(3) if k != drop]
            proj = A.occupancy.any(axis=drop)
            ax.imshow(np.ma.masked_equal(proj.T.astype(float), 0), origin="lower", cmap="Greys", vmin=0, vmax=1,
                      extent=(A.lo[keep[0]], A.hi[keep[0]], A.lo[keep[1]], A.hi[keep[1]]), interpolation="nearest")
            ax.set_xlabel(_AXES[keep[0]])
            ax.set_ylabel(_AXES[keep[1]])
            ax.set_title(f"projection along {_AXES[drop]}")
            ax.set_aspect("equal")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    return _save(fig, path)


def plot_lc_profile(records, path, title: str = "", threshold=None):
    """eps* against delta on log axes, with the diagonal eps* = delta for scale."""
    fig, ax = plt.subplots(figsize=(5, 4))
    d = np.array([r.delta for r in records], dtype=float)
    e = np.array([r.eps for r in records], dtype=float)
    if len(d):
        ax.loglog(d, e, ".", ms=3, color="C0", label="pairs")
        lo, hi = d.min(), max(d.max(), e.max())
        ax.loglog([lo, hi], [lo, hi], "-", color="0.6", lw=1, label="eps* = delta")
    if threshold is not None:
        ax.axhline(threshold, color="C3", lw=1, ls="--", label=f"c = {threshold:.3g}")
    ax.set_xlabel("delta = |x - y|")
    ax.set_ylabel("eps*(x, y)")
    ax.legend(loc="best", fontsize="small")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)


def plot_curve(A: VoxelSet, curve, path):
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.imshow(np.ma.masked_equal(A.occupancy.T.astype(float), 0), origin="lower", cmap="Greys", vmin=0, vmax=1,
              extent=(A.lo[0], A.hi[0], A.lo[1], A.hi[1]), interpolation="nearest")
    p = curve.polyline
    ax.plot(p[:, 0], p[:, 1], "-", color="C3", lw=1)
    ax.plot(*curve.x, "o", color="C0", ms=4)
    ax.plot(*curve.y, "o", color="C2", ms=4)
    ax.set_aspect("equal")
    fig.tight_layout()
    return _save(fig, path)
