"""Polygonal curves separating two components of a planar voxel set.

Given points x and y in different components, let K1 be the component of
x and d the smallest centre distance from K1 to the rest of the set. The
curve is a level set of the distance to K1, at level max(d/3, h), traced
by marching squares on a refined lattice. Every point of the curve lies
at distance about level from K1 and at least d - level >= d/2 from the
other components. So the curve misses every occupied cell while staying
close to K1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from skimage import measure

from ..errors import DomainError, GeometryError, GuardError, InvariantError
from ..geometry import distance_to_segments, points_in_polygon
from ..setrep import VoxelSet, connected_components, distance_transform

REFINE = 5


@dataclass
class SeparatingCurve:
    polyline: np.ndarray      # (n, 2), closed: first point repeated at the end
    x: tuple
    y: tuple
    gap: float                # d
    level: float
    clearance: float          # min distance from the polyline to occupied cell centres
    encloses: str             # "x" or "y"
    lo: tuple
    hi: tuple
    h: float

    @property
    def disjoint_from_cells(self) -> bool:
        """True when the curve misses every closed occupied cell (clearance beats the half diagonal)."""
        return bool(self.clearance > self.h * math.sqrt(0.5))

    def to_dict(self) -> dict:
        return {
            "x": list(self.x),
            "y": list(self.y),
            "gap": self.gap,
            "level": self.level,
            "clearance": self.clearance,
            "encloses": self.encloses,
            "disjoint_from_cells": self.disjoint_from_cells,
            "vertices": len(self.polyline) - 1,
            "polyline": self.polyline.tolist(),
        }

    def svg_path(self) -> str:
        p = self.polyline[:-1]
        head = f"M {p[0, 0]:.6f} {p[0, 1]:.6f}"
        return head + "".join(f" L {a:.6f} {b:.6f}" for a, b in p[1:]) + " Z"

    def to_svg(self, A: VoxelSet = None, size: int = 512) -> str:
        """SVG 1.1 document in set coordinates (y axis up), optionally drawing A's cells."""
        lo, hi = np.array(self.lo), np.array(self.hi)
        w, h = hi - lo
        parts = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size}" '
            f'height="{size * h / w:.0f}" viewBox="{lo[0]:.6f} {-hi[1]:.6f} {w:.6f} {h:.6f}">',
            '<g transform="scale(1,-1)">',
        ]
        if A is not None:
            sx, sy = A.spacing
            cells = A.indices()
            corners = np.asarray(A.lo) + cells * A.spacing
            rects = "".join(f"M{cx:.6f} {cy:.6f}h{sx:.6f}v{sy:.6f}h{-sx:.6f}z" for cx, cy in corners)
            parts.append(f'<path d="{rects}" fill="#444" stroke="none"/>')
        stroke = 0.004 * max(w, h)
        parts.append(f'<path d="{self.svg_path()}" fill="none" stroke="#c00" stroke-width="{stroke:.6f}"/>')
        for (px, py), colour in ((self.x, "#06c"), (self.y, "#090")):
            parts.append(f'<circle cx="{px:.6f}" cy="{py:.6f}" r="{2 * stroke:.6f}" fill="{colour}"/>')
        parts += ["</g>", "</svg>", ""]
        return "\n".join(parts)


def _occupied_cell(A: VoxelSet, p, name):
    cell = A.cell_of(np.asarray(p, dtype=float)[None, :], tol_cells=0)[0]
    if not A.occupancy[tuple(cell)]:
        raise DomainError(f"{name} is not in the set", point=list(map(float, p)))
    return cell


def separating_curve(A: VoxelSet, x, y, adjacency: str = "face") -> SeparatingCurve:
    """Closed polyline disjoint from A whose even-odd parity differs at x and y."""
    if A.dim != 2:
        raise GeometryError("separating curves need a 2D set")
    if not A.is_cubic:
        raise GeometryError("separating curves need square cells")
    cx = _occupied_cell(A, x, "x")
    cy = _occupied_cell(A, y, "y")
    labels, _ = connected_components(A, adjacency)
    lx, ly = labels[tuple(cx)], labels[tuple(cy)]
    if lx == ly:
        raise DomainError("not separated: x and y are in the same component", component=int(lx))
    h = A.h
    K1 = labels == lx
    rest = A.occupancy & ~K1
    d = float(distance_transform(A.with_occupancy(K1))[rest].min())
    if d < 2 * h:
        raise GuardError("resolution too coarse: components closer than two cells", gap=d, h=h)
    level = max(d / 3.0, h)

    # refined lattice whose every REFINE-th point is a cell centre, padded past the level set
    # (only a window around K1 is needed: the level set stays within `level` of it)
    pad = int(math.ceil(level / h)) + 2
    cells = np.argwhere(K1)
    first = cells.min(axis=0) - pad
    n = cells.max(axis=0) - first + pad + 1
    fine = np.zeros(tuple((n - 1) * REFINE + 1), dtype=bool)
    fine[tuple(((cells - first) * REFINE).T)] = True
    fh = h / REFINE
    field = ndimage.distance_transform_edt(~fine, sampling=fh)
    origin = np.asarray(A.lo) + (first + 0.5) * h

    px = np.asarray(x, dtype=float)
    py = np.asarray(y, dtype=float)
    best = None
    for c in measure.find_contours(field, level):
        if len(c) < 4 or not np.allclose(c[0], c[-1]):
            continue
        poly = origin + c * fh
        inside = points_in_polygon(np.stack([px, py]), poly)
        if inside[0] == inside[1]:
            continue
        which = "x" if inside[0] else "y"
        # prefer the loop around x (the outer boundary), otherwise the hole holding y
        if best is None or (which == "x" and best[1] == "y"):
            best = (poly, which)
    if best is None:
        raise InvariantError("no level-set loop separates the points", gap=d, level=level)
    poly, which = best

    centres = A.centers()
    lo_b, hi_b = poly.min(axis=0) - level, poly.max(axis=0) + level
    near = centres[np.all((centres >= lo_b) & (centres <= hi_b), axis=1)]
    clearance = float(distance_to_segments(near, poly[:-1], poly[1:]).min()) if len(near) else float("inf")
    need = min(d / 3.0, h) / 2.0
    if clearance < need:
        raise InvariantError("separating curve too close to the set", clearance=clearance, required=need)
    return SeparatingCurve(poly, tuple(px.tolist()), tuple(py.tolist()), d, level, clearance, which,
                           A.lo, A.hi, h)
