"""Contraction maps with certified Lipschitz bounds, and the Markov IFS model.

All maps evaluate on arrays of shape ``(..., d)`` so that the attractor code
can push millions of sample points through them at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import CertificationError, DomainError, InstanceError
from .symbolic import TransitionMatrix, check_symbol

# slack for points that drift off the unit square by round-off
_DOMAIN_TOL = 1e-9


def spectral_norm(matrix) -> float:
    a = np.atleast_2d(np.asarray(matrix, dtype=float))
    if not a.any():
        return 0.0
    return float(np.linalg.norm(a, 2))


class ContractionMap:
    """Base class. Subclasses set ``dim`` and ``lip_bound`` and implement ``__call__``."""

    dim: int
    lip_bound: float

    def __call__(self, x):
        raise NotImplementedError

    def eval(self, x):
        return self(x)

    def as_affine(self) -> Optional["AffineMap"]:
        return None

    def inverse(self, y):
        raise NotImplementedError(f"{type(self).__name__} has no inverse")

    def to_json(self) -> dict:
        raise NotImplementedError

    def domain_box(self):
        """Box on which the map is defined, or None for all of R^d."""
        return None

    def fixed_point(self, x0=None, tol=1e-14, max_iter=10_000):
        x = np.zeros(self.dim) if x0 is None else np.asarray(x0, dtype=float)
        for _ in range(max_iter):
            nxt = self(x)
            if np.max(np.abs(nxt - x)) <= tol:
                return nxt
            x = nxt
        return x


@dataclass(frozen=True, eq=False)
class AffineMap(ContractionMap):
    """``x -> matrix @ x + offset``.

    ``lip_bound`` defaults to the spectral norm; a larger value may be
    supplied (composed words carry the product of their factors' bounds).
    """

    matrix: np.ndarray
    offset: np.ndarray
    lip_bound: float = None

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        b = np.atleast_1d(np.asarray(self.offset, dtype=float))
        if a.shape[0] != a.shape[1] or b.shape != (a.shape[0],):
            raise DomainError("affine map needs a d x d matrix and a length-d offset", shape=list(a.shape))
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "matrix", a)
        object.__setattr__(self, "offset", b)
        norm = spectral_norm(a)
        if self.lip_bound is None:
            object.__setattr__(self, "lip_bound", norm)
        elif self.lip_bound < norm - 1e-12:
            raise CertificationError("declared lip_bound below spectral norm", lip_bound=self.lip_bound, norm=norm)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return x @ self.matrix.T + self.offset

    def as_affine(self):
        return self

    @property
    def determinant(self) -> float:
        return float(np.linalg.det(self.matrix))

    def inverse(self, y):
        y = np.asarray(y, dtype=float)
        return np.linalg.solve(self.matrix, (y - self.offset).T).T

    def to_json(self):
        return {"type": "affine", "matrix": self.matrix.tolist(), "offset": self.offset.tolist()}


@dataclass(frozen=True, eq=False)
class BilinearQuad(ContractionMap):
    """Bilinear map of the unit square onto the quadrilateral with the given corner images.

    ``P(u, v) = (1-u)(1-v) p00 + u(1-v) p10 + u v p11 + (1-u) v p01``.
    """

    p00: np.ndarray
    p10: np.ndarray
    p11: np.ndarray
    p01: np.ndarray

    def __post_init__(self):
        for name in ("p00", "p10", "p11", "p01"):
            p = np.asarray(getattr(self, name), dtype=float)
            if p.shape != (2,):
                raise DomainError(f"corner {name} must be a 2D point")
            p.setflags(write=False)
            object.__setattr__(self, name, p)

    dim = 2

    @property
    def lip_bound(self) -> float:
        # |dP/du| is affine in v and |dP/dv| affine in u, so their maxima sit
        # on the square's edges; the Frobenius norm bounds the operator norm.
        du = max(np.linalg.norm(self.p10 - self.p00), np.linalg.norm(self.p11 - self.p01))
        dv = max(np.linalg.norm(self.p01 - self.p00), np.linalg.norm(self.p11 - self.p10))
        return float(math.hypot(du, dv))

    def domain_box(self):
        return np.zeros(2), np.ones(2)

    def _check_domain(self, x):
        if x.size and (x.min() < -_DOMAIN_TOL or x.max() > 1 + _DOMAIN_TOL):
            bad = x[np.any((x < -_DOMAIN_TOL) | (x > 1 + _DOMAIN_TOL), axis=-1)]
            raise DomainError("bilinear map evaluated outside the unit square",
                              point=np.asarray(bad).reshape(-1, 2)[0].tolist())

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        self._check_domain(x)
        u = x[..., 0:1]
        v = x[..., 1:2]
        return ((1 - u) * (1 - v) * self.p00 + u * (1 - v) * self.p10
                + u * v * self.p11 + (1 - u) * v * self.p01)

    def jacobian(self, x):
        """Jacobian at each point, shape ``(..., 2, 2)``; columns are d/du and d/dv."""
        x = np.asarray(x, dtype=float)
        u = x[..., 0:1]
        v = x[..., 1:2]
        du = (1 - v) * (self.p10 - self.p00) + v * (self.p11 - self.p01)
        dv = (1 - u) * (self.p01 - self.p00) + u * (self.p11 - self.p10)
        return np.stack([du, dv], axis=-1)

    def inverse(self, y, iters=50):
        """Newton inversion from the square's centre; points with no preimage come back off-square."""
        y = np.asarray(y, dtype=float)
        x = np.full(y.shape, 0.5)
        for _ in range(iters):
            u = x[..., 0:1]
            v = x[..., 1:2]
            r = ((1 - u) * (1 - v) * self.p00 + u * (1 - v) * self.p10
                 + u * v * self.p11 + (1 - u) * v * self.p01) - y
            J = self.jacobian(x)
            step = np.linalg.solve(J, r[..., None])[..., 0]
            x = x - step
            if np.max(np.abs(step), initial=0.0) < 1e-15:
                break
        return x

    def to_json(self):
        return {"type": "bilinear", "corners": {k: getattr(self, k).tolist() for k in ("p00", "p10", "p11", "p01")}}


@dataclass(frozen=True, eq=False)
class ProductMap(ContractionMap):
    """Plane map times a 1D affine map ``t -> a t + b`` acting on the last coordinate."""

    plane: ContractionMap
    a: float
    b: float

    def __post_init__(self):
        if self.plane.dim != 2:
            raise DomainError("product map needs a 2D plane factor")
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))

    dim = 3

    @property
    def lip_bound(self) -> float:
        return max(self.plane.lip_bound, abs(self.a))

    def domain_box(self):
        box = self.plane.domain_box()
        if box is None:
            return None
        return np.append(box[0], -np.inf), np.append(box[1], np.inf)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape)
        out[..., :2] = self.plane(x[..., :2])
        out[..., 2] = self.a * x[..., 2] + self.b
        return out

    def as_affine(self):
        p = self.plane.as_affine()
        if p is None:
            return None
        m = np.zeros((3, 3))
        m[:2, :2] = p.matrix
        m[2, 2] = self.a
        return AffineMap(m, np.append(p.offset, self.b), lip_bound=self.lip_bound)

    def inverse(self, y):
        y = np.asarray(y, dtype=float)
        out = np.empty(y.shape)
        out[..., :2] = self.plane.inverse(y[..., :2])
        out[..., 2] = (y[..., 2] - self.b) / self.a
        return out

    def to_json(self):
        return {"type": "product", "plane": self.plane.to_json(), "line": {"a": self.a, "b": self.b}}


@dataclass(frozen=True, eq=False)
class ComposedMap(ContractionMap):
    """``maps[0] o maps[1] o ... o maps[-1]`` (the last map is applied first)."""

    maps: tuple
    lip_bound: float

    @property
    def dim(self):
        return self.maps[0].dim

    def domain_box(self):
        return self.maps[-1].domain_box()

    def __call__(self, x):
        y = np.asarray(x, dtype=float)
        for f in reversed(self.maps):
            y = f(y)
        return y


@dataclass(frozen=True, eq=False)
class IdentityMap(ContractionMap):
    dim: int
    lip_bound: float = 1.0
    contracting: bool = False

    def __call__(self, x):
        return np.array(x, dtype=float)


def map_from_json(doc) -> ContractionMap:
    kind = doc.get("type") if isinstance(doc, dict) else None
    if kind == "affine":
        return AffineMap(doc["matrix"], doc["offset"])
    if kind == "bilinear":
        c = doc["corners"]
        return BilinearQuad(c["p00"], c["p10"], c["p11"], c["p01"])
    if kind == "product":
        line = doc["line"]
        return ProductMap(map_from_json(doc["plane"]), line["a"], line["b"])
    raise InstanceError(f"unknown map type {kind!r}")


def compose(maps: Sequence[ContractionMap]) -> ContractionMap:
    """Compose ``maps[0] o ... o maps[-1]``; closed form when every factor is affine."""
    if not maps:
        raise DomainError("cannot compose an empty sequence")
    lip = float(np.prod([f.lip_bound for f in maps]))
    affine = [f.as_affine() for f in maps]
    if all(a is not None for a in affine):
        mat = np.eye(maps[0].dim)
        off = np.zeros(maps[0].dim)
        for a in affine:
            off = off + mat @ a.offset
            mat = mat @ a.matrix
        return AffineMap(mat, off, lip_bound=max(lip, spectral_norm(mat)))
    if len(maps) == 1:
        return maps[0]
    return ComposedMap(tuple(maps), lip)


def _sample_box(lo, hi, density):
    axes = [np.linspace(l, h, density) for l, h in zip(lo, hi)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(lo))


def max_pair_ratio(f: ContractionMap, pts: np.ndarray, chunk: int = 2_000_000):
    """Max of |f(p)-f(q)| / |p-q| over all pairs of ``pts``, with the maximising pair."""
    img = f(pts)
    n = len(pts)
    best, witness = 0.0, None
    rows = max(1, chunk // max(n, 1))
    for start in range(0, n, rows):
        p = pts[start:start + rows, None, :]
        fp = img[start:start + rows, None, :]
        dx = np.linalg.norm(p - pts[None, :, :], axis=-1)
        dy = np.linalg.norm(fp - img[None, :, :], axis=-1)
        with np.errstate(invalid="ignore", divide="ignore"):
            r = np.where(dx > 0, dy / dx, 0.0)
        k = int(np.argmax(r))
        if r.flat[k] > best:
            i, j = divmod(k, n)
            best, witness = float(r.flat[k]), (pts[start + i].tolist(), pts[j].tolist())
    return best, witness


def certify_lipschitz(f: ContractionMap, density: int = 9) -> float:
    """Sampled Lipschitz ratio of ``f`` on its domain (unit box when unbounded).

    Raises :class:`CertificationError` with the witness pair when the sample
    beats the declared bound: by more than 1e-9 for affine maps, by more than
    5% otherwise.
    """
    if density < 2:
        raise DomainError("density must be >= 2 per axis", density=density)
    box = f.domain_box()
    if box is None:
        lo, hi = np.zeros(f.dim), np.ones(f.dim)
    else:
        lo = np.where(np.isfinite(box[0]), box[0], 0.0)
        hi = np.where(np.isfinite(box[1]), box[1], 1.0)
    ratio, witness = max_pair_ratio(f, _sample_box(lo, hi, density))
    aff = f.as_affine()
    if aff is not None:
        exact = spectral_norm(aff.matrix)
        if exact > f.lip_bound + 1e-9 or ratio > f.lip_bound + 1e-9:
            raise CertificationError("affine map exceeds its declared Lipschitz bound",
                                     lip_bound=f.lip_bound, sampled=max(ratio, exact), witness=witness)
    elif ratio > f.lip_bound * 1.05:
        raise CertificationError("sampled Lipschitz ratio exceeds declared bound",
                                 lip_bound=f.lip_bound, sampled=ratio, witness=witness)
    return ratio


@dataclass(frozen=True)
class BoxSpec:
    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != len(hi) or not lo or any(not l < h for l, h in zip(lo, hi)):
            raise InstanceError("box open set needs lo < hi on every axis", lo=list(lo), hi=list(hi))
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self):
        return len(self.lo)

    def to_json(self):
        return {"type": "box", "lo": list(self.lo), "hi": list(self.hi)}


@dataclass(frozen=True)
class PolygonSpec:
    vertices: tuple

    def __post_init__(self):
        from .geometry import polygon_is_simple
        verts = tuple(tuple(float(c) for c in v) for v in self.vertices)
        if len(verts) < 3 or any(len(v) != 2 for v in verts):
            raise InstanceError("polygon open set needs >= 3 planar vertices")
        if not polygon_is_simple(np.array(verts)):
            raise InstanceError("polygon open set is self-intersecting or degenerate")
        object.__setattr__(self, "vertices", verts)

    dim = 2

    def to_json(self):
        return {"type": "polygon", "vertices": [list(v) for v in self.vertices]}


def open_set_from_json(doc):
    if doc is None:
        return None
    if doc.get("type") == "box":
        return BoxSpec(doc["lo"], doc["hi"])
    if doc.get("type") == "polygon":
        return PolygonSpec(doc["vertices"])
    raise InstanceError(f"unknown open set type {doc.get('type')!r}")


@dataclass(frozen=True)
class MarkovIfs:
    maps: tuple
    matrix: TransitionMatrix
    open_set: Optional[object] = None
    label: str = ""
    box: Optional[tuple] = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "maps", tuple(self.maps))
        if not self.maps:
            raise InstanceError("a Markov IFS needs at least one map")
        if len(self.maps) != self.matrix.m:
            raise InstanceError("matrix/maps mismatch", maps=len(self.maps), m=self.matrix.m)
        dims = {f.dim for f in self.maps}
        if len(dims) != 1:
            raise InstanceError("maps have differing dimensions", dims=sorted(dims))
        for i, f in enumerate(self.maps, 1):
            if not f.lip_bound < 1:
                raise InstanceError(f"map {i} has lip_bound {f.lip_bound:.6g} >= 1", symbol=i)
        if self.open_set is not None and self.open_set.dim != self.dim:
            raise InstanceError("open set dimension differs from map dimension")
        if self.box is not None:
            lo, hi = (tuple(float(v) for v in b) for b in self.box)
            if len(lo) != self.dim or len(hi) != self.dim or any(not l < h for l, h in zip(lo, hi)):
                raise InstanceError("bounding box must have lo < hi on every axis")
            object.__setattr__(self, "box", (lo, hi))

    @property
    def m(self):
        return self.matrix.m

    @property
    def dim(self):
        return self.maps[0].dim

    @property
    def lip_max(self) -> float:
        return max(f.lip_bound for f in self.maps)

    def map(self, s: int) -> ContractionMap:
        check_symbol(self.matrix, s)
        return self.maps[s - 1]

    def restrict(self, symbols: Sequence[int], label=None) -> "MarkovIfs":
        """Sub-system on the given symbols, keeping their transitions."""
        return MarkovIfs(tuple(self.map(s) for s in symbols), self.matrix.restrict(symbols),
                         self.open_set, label or f"{self.label}[{','.join(map(str, symbols))}]", self.box)

    def bounding_box(self):
        if self.box is not None:
            return np.array(self.box[0]), np.array(self.box[1])
        if isinstance(self.open_set, BoxSpec):
            return np.array(self.open_set.lo), np.array(self.open_set.hi)
        if isinstance(self.open_set, PolygonSpec):
            v = np.array(self.open_set.vertices)
            return v.min(axis=0), v.max(axis=0)
        return None


def compose_word(ifs: MarkovIfs, w: Sequence[int]) -> ContractionMap:
    """``f_{w0} o ... o f_{w(n-1)}``; the empty word gives a non-contracting identity."""
    if len(w) == 0:
        return IdentityMap(ifs.dim)
    return compose([ifs.map(s) for s in w])
