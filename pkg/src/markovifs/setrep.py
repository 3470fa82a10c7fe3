"""Voxel-grid stand-ins for compact sets and the metric operations on them.

A :class:`VoxelSet` represents the union of the closed cells it marks.
Distances are measured between cell centres, which makes them exact for
the centre point sets and within one cell diagonal of the represented
closed sets.
"""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DomainError, GeometryError

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class VoxelSet:
    """Occupancy grid over an axis-aligned box.

    ``occupancy`` has one array axis per coordinate axis, in coordinate
    order, so ``occupancy[i, j]`` is the cell whose x index is ``i``.
    """

    lo: tuple
    hi: tuple
    occupancy: np.ndarray

    def __post_init__(self):
        occ = np.asarray(self.occupancy, dtype=bool)
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        if not 1 <= occ.ndim <= 3 or len(lo) != occ.ndim or len(hi) != occ.ndim:
            raise GeometryError("box and occupancy dimensions disagree", shape=list(occ.shape))
        if any(not l < h for l, h in zip(lo, hi)):
            raise GeometryError("box needs lo < hi on every axis")
        occ.setflags(write=False)
        object.__setattr__(self, "occupancy", occ)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    # -- construction -------------------------------------------------

    @classmethod
    def empty(cls, lo, hi, shape):
        shape = tuple(int(s) for s in np.atleast_1d(shape))
        return cls(lo, hi, np.zeros(shape, dtype=bool))

    @classmethod
    def full(cls, lo, hi, shape):
        shape = tuple(int(s) for s in np.atleast_1d(shape))
        return cls(lo, hi, np.ones(shape, dtype=bool))

    @classmethod
    def cube(cls, dim, resolution, lo=0.0, hi=1.0):
        return cls.empty((lo,) * dim, (hi,) * dim, (resolution,) * dim)

    def with_occupancy(self, occ) -> "VoxelSet":
        occ = np.asarray(occ, dtype=bool)
        if occ.shape != self.shape:
            raise GeometryError("occupancy shape mismatch", expected=list(self.shape), got=list(occ.shape))
        return VoxelSet(self.lo, self.hi, occ)

    # -- geometry -----------------------------------------------------

    @property
    def dim(self) -> int:
        return self.occupancy.ndim

    @property
    def shape(self) -> tuple:
        return self.occupancy.shape

    @property
    def spacing(self) -> np.ndarray:
        return (np.array(self.hi) - np.array(self.lo)) / np.array(self.shape)

    @property
    def h(self) -> float:
        """Cell edge length (the largest one if cells are not cubic)."""
        return float(self.spacing.max())

    @property
    def cell_diagonal(self) -> float:
        return float(np.linalg.norm(self.spacing))

    @property
    def is_cubic(self) -> bool:
        s = self.spacing
        return bool(np.allclose(s, s[0], rtol=1e-12, atol=0))

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.occupancy))

    @property
    def is_empty(self) -> bool:
        return not self.occupancy.any()

    def same_geometry(self, other: "VoxelSet") -> bool:
        return self.shape == other.shape and np.allclose(self.lo, other.lo) and np.allclose(self.hi, other.hi)

    def require_same_geometry(self, other: "VoxelSet"):
        if not self.same_geometry(other):
            raise GeometryError("voxel sets have different geometry",
                                a={"lo": self.lo, "hi": self.hi, "shape": list(self.shape)},
                                b={"lo": other.lo, "hi": other.hi, "shape": list(other.shape)})

    def geometry(self) -> dict:
        return {"lo": list(self.lo), "hi": list(self.hi), "shape": list(self.shape)}

    def indices(self) -> np.ndarray:
        """Occupied cell indices, lexicographic, shape ``(n, d)``."""
        return np.argwhere(self.occupancy)

    def centers(self, idx=None) -> np.ndarray:
        idx = self.indices() if idx is None else np.asarray(idx)
        return np.asarray(self.lo) + (idx + 0.5) * self.spacing

    def cell_of(self, points, tol_cells: float = 1.0) -> np.ndarray:
        """Cell index of each point. Points on a shared face go to the lower-index cell.

        Points up to ``tol_cells`` cells outside the box are clamped to the
        boundary cell; anything further raises :class:`DomainError`.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[-1] != self.dim:
            raise DomainError("point dimension mismatch", dim=self.dim)
        rel = (pts - np.asarray(self.lo)) / self.spacing
        n = np.array(self.shape)
        bad = np.any((rel < -tol_cells) | (rel > n + tol_cells), axis=1)
        if bad.any():
            p = pts[np.argmax(bad)]
            raise DomainError("point outside the bounding box", point=p.tolist(),
                              lo=list(self.lo), hi=list(self.hi))
        idx = np.ceil(rel).astype(np.int64) - 1
        return np.clip(idx, 0, n - 1)

    def union(self, other: "VoxelSet") -> "VoxelSet":
        self.require_same_geometry(other)
        return self.with_occupancy(self.occupancy | other.occupancy)

    def intersection(self, other: "VoxelSet") -> "VoxelSet":
        self.require_same_geometry(other)
        return self.with_occupancy(self.occupancy & other.occupancy)

    def issubset(self, other: "VoxelSet") -> bool:
        self.require_same_geometry(other)
        return not (self.occupancy & ~other.occupancy).any()

    def __or__(self, other):
        return self.union(other)

    def __and__(self, other):
        return self.intersection(other)

    def __eq__(self, other):
        if not isinstance(other, VoxelSet):
            return NotImplemented
        return self.same_geometry(other) and np.array_equal(self.occupancy, other.occupancy)

    def __hash__(self):
        return hash((self.lo, self.hi, self.shape, self.occupancy.tobytes()))

    def __repr__(self):
        return f"VoxelSet(shape={self.shape}, lo={self.lo}, hi={self.hi}, occupied={self.count})"

    # -- export -------------------------------------------------------

    def to_pgm(self) -> bytes:
        """Binary PGM (P5): 255 occupied, 0 empty, first row is the top (largest y)."""
        if self.dim != 2:
            raise GeometryError("PGM export needs a 2D set")
        img = np.where(self.occupancy[:, ::-1].T, 255, 0).astype(np.uint8)
        h, w = img.shape
        return b"P5\n%d %d\n255\n" % (w, h) + img.tobytes()

    def to_xyz(self) -> str:
        """Occupied cell centres, one per line, lexicographic cell order."""
        buf = io.StringIO()
        np.savetxt(buf, self.centers(), fmt="%.9g")
        return buf.getvalue()


def read_pgm(data: bytes, lo=(0.0, 0.0), hi=(1.0, 1.0)) -> VoxelSet:
    """Inverse of :meth:`VoxelSet.to_pgm`."""
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        tokens.append(data[pos:end])
        pos = end
    if tokens[0] != b"P5":
        raise DomainError("not a binary PGM")
    w, h = int(tokens[1]), int(tokens[2])
    img = np.frombuffer(data[pos + 1:pos + 1 + w * h], dtype=np.uint8).reshape(h, w)
    return VoxelSet(lo, hi, (img > 127).T[:, ::-1])


def rasterize_points(points, geometry: VoxelSet) -> VoxelSet:
    """Mark every cell that contains at least one point. ``geometry`` supplies box and shape."""
    pts = np.asarray(points, dtype=float).reshape(-1, geometry.dim)
    occ = np.zeros(geometry.shape, dtype=bool)
    if len(pts):
        idx = geometry.cell_of(pts)
        occ[tuple(idx.T)] = True
    else:
        log.warning("rasterize_points: empty point list gives an empty set")
    return geometry.with_occupancy(occ)


def _require_nonempty(A: VoxelSet, what="set"):
    if A.is_empty:
        raise GeometryError(f"{what} has no occupied cells")


def distance_transform(A: VoxelSet) -> np.ndarray:
    """Exact Euclidean distance from every cell centre to the nearest occupied centre."""
    _require_nonempty(A)
    if A.occupancy.all():
        return np.zeros(A.shape)
    return ndimage.distance_transform_edt(~A.occupancy, sampling=A.spacing)


def hausdorff_distance(A: VoxelSet, B: VoxelSet) -> float:
    A.require_same_geometry(B)
    _require_nonempty(A, "first set")
    _require_nonempty(B, "second set")
    if np.array_equal(A.occupancy, B.occupancy):
        return 0.0
    d_ab = distance_transform(B)[A.occupancy].max()
    d_ba = distance_transform(A)[B.occupancy].max()
    return float(max(d_ab, d_ba))


def directed_hausdorff(A: VoxelSet, B: VoxelSet) -> float:
    """max over A of the distance to B."""
    A.require_same_geometry(B)
    _require_nonempty(A)
    return float(distance_transform(B)[A.occupancy].max())


def dilate(A: VoxelSet, r: float) -> VoxelSet:
    """Cells whose centre is at distance < r from A (A itself when r = 0)."""
    if r < 0:
        raise DomainError("dilation radius must be >= 0", r=r)
    if r == 0 or A.is_empty:
        return A
    return A.with_occupancy(A.occupancy | (distance_transform(A) < r))


_STRUCTURES = {}


def adjacency_structure(dim: int, adjacency: str = "face") -> np.ndarray:
    if adjacency not in ("face", "vertex"):
        raise DomainError("adjacency must be 'face' or 'vertex'", adjacency=adjacency)
    key = (dim, adjacency)
    if key not in _STRUCTURES:
        _STRUCTURES[key] = ndimage.generate_binary_structure(dim, 1 if adjacency == "face" else dim)
    return _STRUCTURES[key]


def label_array(occ: np.ndarray, adjacency: str = "face"):
    """Label components; label k+1 is the component whose smallest cell comes k-th lexicographically."""
    labels, n = ndimage.label(occ, structure=adjacency_structure(occ.ndim, adjacency))
    if n > 1:
        flat = labels.ravel()
        vals, first = np.unique(flat, return_index=True)
        order = np.argsort(first[vals > 0])
        remap = np.zeros(n + 1, dtype=labels.dtype)
        remap[vals[vals > 0][order]] = np.arange(1, n + 1)
        labels = remap[labels]
    return labels, int(n)


def connected_components(A: VoxelSet, adjacency: str = "face"):
    """Return ``(labels, count)``; labels are 0 on empty cells and 1..count otherwise."""
    return label_array(A.occupancy, adjacency)


def component(A: VoxelSet, cell, adjacency: str = "face") -> VoxelSet:
    labels, _ = connected_components(A, adjacency)
    lab = labels[tuple(cell)]
    if lab == 0:
        raise DomainError("cell is not occupied", cell=list(map(int, cell)))
    return A.with_occupancy(labels == lab)
