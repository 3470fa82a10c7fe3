"""Approximating A_M and its puzzle pieces on voxel grids.

The per-symbol recursion is ``A^i = f_i( U_{j : M_ij = 1} A^j )``. Each
generation maps 2^d sub-cell samples of every occupied source cell forward
and rasterizes the images.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from .contractions import ContractionMap, MarkovIfs, compose_word
from .errors import DomainError, GuardError, InstanceError
from .setrep import VoxelSet, adjacency_structure, rasterize_points
from .symbolic import (DEFAULT_WORD_CAP, count_admissible, follower_set, is_admissible,
                       subshift_nonempty)

log = logging.getLogger(__name__)

# cells per chunk when pushing samples forward; bounds peak memory
_CHUNK_CELLS = 1 << 18
# grids larger than this per axis are seeded from a coarser run
_WARM_START_ABOVE = 64
_WARM_FACTOR = 8


def grid_for(ifs: MarkovIfs, resolution) -> VoxelSet:
    """Empty grid over the instance's bounding box."""
    box = ifs.bounding_box()
    if box is None:
        raise InstanceError("instance supplies neither a bounding box nor a box open set")
    lo, hi = box
    shape = np.broadcast_to(np.atleast_1d(resolution), (ifs.dim,))
    return VoxelSet.empty(tuple(lo), tuple(hi), tuple(int(s) for s in shape))


def subcell_offsets(dim: int, factor: int = 2) -> np.ndarray:
    """Sub-cell centre offsets in cell units, e.g. (+-1/4, ...) for factor 2."""
    ticks = (np.arange(factor) + 0.5) / factor - 0.5
    return np.stack(np.meshgrid(*[ticks] * dim, indexing="ij"), axis=-1).reshape(-1, dim)


def sample_points(A: VoxelSet, factor: int = 2, chunk: int = _CHUNK_CELLS):
    """Yield arrays of sub-cell sample points of the occupied cells, chunked."""
    flat = np.flatnonzero(A.occupancy)
    offs = subcell_offsets(A.dim, factor)
    lo = np.asarray(A.lo)
    sp = A.spacing
    for s in range(0, len(flat), chunk):
        idx = np.stack(np.unravel_index(flat[s:s + chunk], A.shape), axis=-1)
        pts = lo + (idx[:, None, :] + 0.5 + offs) * sp
        yield pts.reshape(-1, A.dim)


def push_forward(f: ContractionMap, source: VoxelSet, target: VoxelSet = None, factor: int = 2,
                 samples=None) -> VoxelSet:
    """Rasterize ``f`` applied to the sub-cell samples of ``source`` onto ``target``'s grid.

    ``samples`` may carry precomputed chunks from :func:`sample_points`.
    """
    target = source if target is None else target
    out = np.zeros(target.shape, dtype=bool)
    for pts in (sample_points(source, factor) if samples is None else samples):
        img = f(pts)
        try:
            idx = target.cell_of(img)
        except DomainError as exc:
            raise GuardError("map image left the bounding box", **exc.details) from exc
        out[tuple(idx.T)] = True
    return target.with_occupancy(out)


def check_box_invariant(ifs: MarkovIfs, geometry: VoxelSet, density: int = 9):
    """Map a lattice of box points by every f_i and require the images to stay in the box."""
    lo, hi = np.asarray(geometry.lo), np.asarray(geometry.hi)
    axes = [np.linspace(l, u, density) for l, u in zip(lo, hi)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, ifs.dim)
    tol = 1e-9 * float(np.max(hi - lo))
    for i, f in enumerate(ifs.maps, 1):
        try:
            img = f(pts)
        except DomainError as exc:
            raise InstanceError(f"bounding box is not inside the domain of map {i}", symbol=i) from exc
        bad = np.any((img < lo - tol) | (img > hi + tol), axis=1)
        if bad.any():
            k = int(np.argmax(bad))
            raise GuardError(f"map {i} sends a box point outside the box", symbol=i,
                             point=pts[k].tolist(), image=img[k].tolist())


@dataclass
class AttractorApprox:
    """Per-symbol approximants X_1..X_m of the puzzle pieces A_M^i, plus their union.

    ``error_bound`` is ``lip_max^k * diam(box) + h*sqrt(d)``.
    ``certified_bound`` additionally sums the rasterization error of every
    generation: ``lip_max^k * diam(box) + h*sqrt(d) / (1 - lip_max)``.
    """

    pieces: list
    union: VoxelSet
    k: int
    lip_max: float
    error_bound: float
    certified_bound: float
    previous: list = field(default=None, repr=False)
    history: list = field(default_factory=list, repr=False)

    def manifest(self) -> dict:
        return {
            "k": self.k,
            "lip_max": self.lip_max,
            "error_bound": self.error_bound,
            "certified_bound": self.certified_bound,
            "resolution": list(self.union.shape),
            "lo": list(self.union.lo),
            "hi": list(self.union.hi),
            "cell_size": self.union.h,
            "occupied": self.union.count,
            "piece_occupied": [p.count for p in self.pieces],
        }


def error_bound(lip_max: float, k: int, diam: float, cell_diag: float) -> float:
    return lip_max ** k * diam + cell_diag


def certified_bound(lip_max: float, k: int, diam: float, cell_diag: float) -> float:
    return lip_max ** k * diam + cell_diag / (1.0 - lip_max)


def iterations_for(ifs: MarkovIfs, eps: float, diam: float) -> int:
    """Smallest k with lip_max^k * diam <= eps."""
    if eps <= 0:
        raise DomainError("target error must be > 0", eps=eps)
    lip = ifs.lip_max
    if lip == 0 or eps >= diam:
        return 1
    return max(1, math.ceil(math.log(eps / diam) / math.log(lip)))


def _step(ifs, followers, current, geometry, factor):
    sources = {}
    nxt = []
    for i, f in enumerate(ifs.maps):
        key = followers[i]
        if key not in sources:
            occ = np.zeros(geometry.shape, dtype=bool)
            for j in key:
                occ |= current[j - 1].occupancy
            src = geometry.with_occupancy(occ)
            n = src.count
            # small sources are sampled once and shared by every map with the same followers
            samples = list(sample_points(src, factor)) if 0 < n <= _CHUNK_CELLS else None
            sources[key] = (src, n, samples)
        src, n, samples = sources[key]
        nxt.append(push_forward(f, src, geometry, factor, samples) if n else src)
    return nxt


def _warm_seed(ifs, geometry, k, factor):
    """Seed pieces from a coarser run, upsampled and grown by one coarse cell."""
    shape = np.array(geometry.shape)
    if shape.max() <= _WARM_START_ABOVE or np.any(shape % _WARM_FACTOR):
        return None
    coarse = VoxelSet.empty(geometry.lo, geometry.hi, tuple(shape // _WARM_FACTOR))
    approx = iterate_attractor(ifs, coarse, k, factor=factor, _check=False)
    seed = []
    for p in approx.pieces:
        grown = ndimage.binary_dilation(p.occupancy, structure=adjacency_structure(p.dim, "vertex"))
        fine = grown
        for ax in range(p.dim):
            fine = np.repeat(fine, _WARM_FACTOR, axis=ax)
        seed.append(geometry.with_occupancy(fine))
    return seed


def iterate_attractor(ifs: MarkovIfs, geometry: VoxelSet, k: int, factor: int = 2,
                      warm_start: bool = True, keep_history: bool = False, _check: bool = True) -> AttractorApprox:
    """Graph-directed Hutchinson iteration from the full bounding box.

    Parameters
    ----------
    ifs : MarkovIfs
    geometry : VoxelSet
        Supplies the box and resolution; its occupancy is ignored.
    k : int
        Number of generations.
    factor : int
        Sub-cell supersampling per axis.
    warm_start : bool
        On grids finer than 64 cells per axis, replace the full-box seed by
        the (grown) result of the same iteration on an 8x coarser grid.
        Any non-empty seed inside the box gives the same error bound; the
        coarse run only saves the cost of mapping the full fine box.
    keep_history : bool
        Keep every generation's union (for monotonicity diagnostics).
    """
    if k < 1:
        raise DomainError("iteration count must be >= 1", k=k)
    if _check:
        ok, _ = subshift_nonempty(ifs.matrix)
        if not ok:
            raise InstanceError("transition matrix admits no infinite sequence (empty subshift)")
        check_box_invariant(ifs, geometry)
    followers = [tuple(sorted(follower_set(ifs.matrix, s))) for s in range(1, ifs.m + 1)]
    current = _warm_seed(ifs, geometry, k, factor) if warm_start else None
    if current is None:
        full = VoxelSet.full(geometry.lo, geometry.hi, geometry.shape)
        current = [full] * ifs.m
    history = []
    previous = current
    for t in range(k):
        previous = current
        current = _step(ifs, followers, current, geometry, factor)
        if keep_history:
            history.append(_union(current, geometry))
        log.debug("generation %d: %s", t + 1, [p.count for p in current])
    union = _union(current, geometry)
    diam = float(np.linalg.norm(np.array(geometry.hi) - np.array(geometry.lo)))
    lip = ifs.lip_max
    return AttractorApprox(
        pieces=current, union=union, k=k, lip_max=lip,
        error_bound=error_bound(lip, k, diam, geometry.cell_diagonal),
        certified_bound=certified_bound(lip, k, diam, geometry.cell_diagonal),
        previous=previous, history=history)


def _union(pieces, geometry):
    occ = np.zeros(geometry.shape, dtype=bool)
    for p in pieces:
        occ |= p.occupancy
    return geometry.with_occupancy(occ)


def _box_diameter(ifs: MarkovIfs) -> float:
    box = ifs.bounding_box()
    if box is None:
        raise InstanceError("instance supplies no bounding region")
    return float(np.linalg.norm(box[1] - box[0]))


def project_word(ifs: MarkovIfs, w: Sequence[int], x0=None, diam: Optional[float] = None):
    """``f_w(x0)`` and a radius certain to contain pi_F of every admissible extension of w.

    ``diam`` is the diameter of a region containing both x0 and the
    attractor; by default the instance's bounding box.
    """
    if len(w) == 0:
        raise DomainError("word must be non-empty")
    if not is_admissible(ifs.matrix, w):
        raise DomainError("word is not admissible", word=list(w))
    f = compose_word(ifs, w)
    x0 = np.zeros(ifs.dim) if x0 is None else np.asarray(x0, dtype=float)
    D = _box_diameter(ifs) if diam is None else diam
    radius = float(np.prod([ifs.map(s).lip_bound for s in w])) * D
    return f(x0), radius


def enumerate_cloud(ifs: MarkovIfs, n: int, x0=None, cap: int = DEFAULT_WORD_CAP, diam: Optional[float] = None):
    """Points ``f_w(x0)`` for every admissible word of length n, in lexicographic word order.

    Returns ``(points, radius)`` with radius ``lip_max^n * diam``.
    """
    if n < 1:
        raise DomainError("word length must be >= 1", n=n)
    total = count_admissible(ifs.matrix, n)
    if total > cap:
        raise GuardError(f"{total} words of length {n} exceed cap {cap}; use iterate_attractor instead",
                         count=total, cap=cap)
    x0 = np.zeros(ifs.dim) if x0 is None else np.asarray(x0, dtype=float)
    followers = [sorted(follower_set(ifs.matrix, s)) for s in range(1, ifs.m + 1)]
    # clouds[j]: images of x0 under words of the current length starting with j+1
    clouds = [f(x0[None, :]) for f in ifs.maps]
    for _ in range(n - 1):
        clouds = [
            ifs.maps[i](np.concatenate([clouds[j - 1] for j in followers[i]]))
            if followers[i] else np.empty((0, ifs.dim))
            for i in range(ifs.m)
        ]
    pts = np.concatenate(clouds)
    D = _box_diameter(ifs) if diam is None else diam
    return pts, ifs.lip_max ** n * D


def piece_approx(ifs: MarkovIfs, theta: Sequence[int], base: AttractorApprox, factor: int = 2) -> VoxelSet:
    """Approximant of the puzzle piece A_M^theta.

    ``f_theta`` is applied to the follower union of ``theta[-1]`` taken from the
    generation before ``base``'s last, so a one-letter word reproduces
    ``base.pieces[theta[0] - 1]`` exactly.
    """
    theta = tuple(theta)
    if not theta or not is_admissible(ifs.matrix, theta):
        raise DomainError("theta must be a non-empty admissible word", word=list(theta))
    geometry = base.union
    src_pieces = base.previous if base.previous is not None else base.pieces
    occ = np.zeros(geometry.shape, dtype=bool)
    for j in follower_set(ifs.matrix, theta[-1]):
        occ |= src_pieces[j - 1].occupancy
    source = geometry.with_occupancy(occ)
    if source.is_empty:
        return source
    return push_forward(compose_word(ifs, theta), source, geometry, factor)


def cloud_to_voxels(points, geometry: VoxelSet) -> VoxelSet:
    return rasterize_points(points, geometry)
